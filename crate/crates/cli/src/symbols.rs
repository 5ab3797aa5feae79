//! Symbol files: one decimal integer per line, or one byte per symbol.

use std::path::Path;

use anyhow::{bail, Context, Result};

pub fn read_symbols(path: &Path, raw: bool) -> Result<Vec<usize>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if raw {
        return Ok(bytes.into_iter().map(usize::from).collect());
    }
    let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8 text", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<usize>()
                .with_context(|| format!("{}:{}: not a symbol: {l:?}", path.display(), i + 1))
        })
        .collect()
}

pub fn render_symbols(symbols: &[usize], raw: bool) -> Result<Vec<u8>> {
    if raw {
        return symbols
            .iter()
            .map(|&s| match u8::try_from(s) {
                Ok(b) => Ok(b),
                Err(_) => bail!("symbol {s} does not fit in a byte"),
            })
            .collect();
    }
    let mut out = String::with_capacity(symbols.len() * 2);
    for s in symbols {
        out.push_str(&s.to_string());
        out.push('\n');
    }
    Ok(out.into_bytes())
}
