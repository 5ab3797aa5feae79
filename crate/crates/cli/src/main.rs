use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dsic::codec::{Codec, CodecConfig, CodecMessage, SliceReader};

mod config;
mod experiments;
mod symbols;
mod table;
mod validate;

use config::ExperimentConfig;

/// Source coding with delayed side information: experiments and codec.
#[derive(Debug, Parser)]
#[command(name = "dsic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output file; stdout when absent and the config names none.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Symbol files hold one byte per symbol instead of one integer per line.
    #[arg(long)]
    raw: bool,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[arg(long)]
    config: PathBuf,
    /// Bitstream written by `encode`.
    #[arg(long, value_name = "BITSTREAM")]
    input: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    raw: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lossless rate against delay or emission noise.
    RateCurve(RunArgs),
    /// Closed-form and numerical rate-distortion curves.
    RdCurve(RunArgs),
    /// Two-decoder rate region.
    Region(RunArgs),
    /// Codec rate against the lossless rate.
    CodecBench(RunArgs),
    /// Formula-versus-oracle checks as a JSON report.
    Validate(RunArgs),
    /// Compress a source sequence given its side information.
    Encode(EncodeArgs),
    /// Reconstruct a source sequence from a bitstream and side information.
    Decode(DecodeArgs),
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::RateCurve(a) => run(a, |cfg, pool| experiments::run_rate_curve(cfg, pool).map(csv)),
        Command::RdCurve(a) => run(a, |cfg, pool| experiments::run_rd_curve(cfg, pool).map(csv)),
        Command::Region(a) => run(a, |cfg, _| experiments::run_region(cfg).map(csv)),
        Command::CodecBench(a) => run(a, |cfg, pool| experiments::run_codec_bench(cfg, pool).map(csv)),
        Command::Validate(a) => {
            let mut passed = true;
            run(a, |cfg, _| {
                let report = validate::run_validate(cfg)?;
                passed = report.passed;
                let mut out = serde_json::to_vec_pretty(&report)?;
                out.push(b'\n');
                Ok(out)
            })?;
            if !passed {
                std::process::exit(1);
            }
            Ok(())
        }
        Command::Encode(a) => encode(&a),
        Command::Decode(a) => decode(&a),
    }
}

fn csv(t: table::Table) -> Vec<u8> {
    let mut out = Vec::new();
    t.write_to(&mut out).expect("writing to memory");
    out
}

fn run(args: RunArgs, f: impl FnOnce(&ExperimentConfig, &rayon::ThreadPool) -> Result<Vec<u8>>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.override_seed(seed);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .context("starting the worker pool")?;
    let bytes = f(&cfg, &pool)?;
    let out = args.out.as_deref().or(cfg.output.as_deref());
    table::emit(&bytes, out)
}

fn codec_for(path: &Path) -> Result<Codec> {
    let cfg = ExperimentConfig::load(path)?;
    let model = cfg.require_hmm("the codec")?;
    let config = CodecConfig {
        d: cfg.codec.delay,
        x_fill: cfg.codec.x_fill,
        y_fill: cfg.codec.y_fill,
    };
    Ok(Codec::new(&model, config)?)
}

fn encode(a: &EncodeArgs) -> Result<()> {
    let codec = codec_for(&a.config)?;
    let x = symbols::read_symbols(&a.x, a.raw)?;
    let y = symbols::read_symbols(&a.y, a.raw)?;
    let msg = codec.encode_block(&x, &y)?;
    std::fs::write(&a.out, msg.to_bytes()).with_context(|| format!("writing {}", a.out.display()))
}

fn decode(a: &DecodeArgs) -> Result<()> {
    let codec = codec_for(&a.config)?;
    let bytes = std::fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let msg = CodecMessage::from_bytes(&bytes)?;
    let y = symbols::read_symbols(&a.y, a.raw)?;
    let x = codec.decode_block(&msg, &mut SliceReader::new(&y))?;
    std::fs::write(&a.out, symbols::render_symbols(&x, a.raw)?).with_context(|| format!("writing {}", a.out.display()))
}
