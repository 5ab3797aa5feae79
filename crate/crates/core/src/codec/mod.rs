//! Lossless coding with delayed side information.
//!
//! The encoder splits `x^n` by context (see [`ContextKey`]) and codes each
//! subsequence with an arithmetic coder driven by the model's exact law of the
//! next symbol given its context. The decoder rebuilds each context from
//! `y_{i-d}` and its own past output, so it always knows which substream holds
//! the next symbol.

mod arith;
mod bits;
mod context;
mod format;
mod stream;

pub use arith::{ArithmeticEncoder, FrequencyTable, FREQ_BITS, PROBABILITY_FLOOR};
pub use bits::BitWriter;
pub use context::{ContextKey, ContextPartition};
pub use format::{CodecMessage, Header, FORMAT_VERSION, MAGIC};
pub use stream::{StreamDecoder, StreamEncoder};

use sha2::{Digest, Sha256};

use arith::{ArithmeticDecoder, LOOKAHEAD};
use bits::BitReader;

use crate::error::{Error, Result};
use crate::hmm::HmmModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecConfig {
    pub d: usize,
    /// Stand-ins for `x_i` and `y_i` at indices `i <= 0`.
    pub x_fill: usize,
    pub y_fill: usize,
}

impl CodecConfig {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            x_fill: 0,
            y_fill: 0,
        }
    }
}

/// Side information as seen by the decoder.
pub trait CausalReader {
    /// Returns `y_index` (1-based).
    fn read(&mut self, index: usize) -> Result<usize>;

    /// Called once `x_step` has been decoded.
    fn observe(&mut self, _step: usize, _symbol: usize) {}
}

/// Reads from a stored sequence without any checks beyond bounds.
#[derive(Debug, Clone)]
pub struct SliceReader<'a> {
    y: &'a [usize],
}

impl<'a> SliceReader<'a> {
    pub fn new(y: &'a [usize]) -> Self {
        Self { y }
    }
}

impl CausalReader for SliceReader<'_> {
    fn read(&mut self, index: usize) -> Result<usize> {
        index
            .checked_sub(1)
            .and_then(|i| self.y.get(i).copied())
            .ok_or_else(|| Error::Validation(format!("side information index {index} out of range")))
    }
}

/// Fails any read of `y_j` made before `x_{j+d-1}` has been decoded, and
/// records the largest index read.
#[derive(Debug, Clone)]
pub struct CausalityProbe<'a> {
    y: &'a [usize],
    delay: usize,
    decoded: usize,
    pub max_index: usize,
    pub reads: usize,
}

impl<'a> CausalityProbe<'a> {
    pub fn new(y: &'a [usize], delay: usize) -> Self {
        Self {
            y,
            delay,
            decoded: 0,
            max_index: 0,
            reads: 0,
        }
    }
}

impl CausalReader for CausalityProbe<'_> {
    fn read(&mut self, index: usize) -> Result<usize> {
        let step = self.decoded + 1;
        if index + self.delay > step {
            return Err(Error::Causality {
                step,
                index,
                delay: self.delay,
            });
        }
        self.reads += 1;
        self.max_index = self.max_index.max(index);
        SliceReader::new(self.y).read(index)
    }

    fn observe(&mut self, step: usize, _symbol: usize) {
        self.decoded = step;
    }
}

/// A model prepared for coding at one delay.
#[derive(Debug, Clone)]
pub struct Codec {
    config: CodecConfig,
    x_size: usize,
    y_size: usize,
    digest: [u8; 32],
    partition: ContextPartition,
    tables: Vec<FrequencyTable>,
}

pub fn model_digest(model: &HmmModel) -> [u8; 32] {
    Sha256::digest(model.canonical_bytes()).into()
}

impl Codec {
    pub fn new(model: &HmmModel, config: CodecConfig) -> Result<Self> {
        let (x_size, y_size) = (model.x_size(), model.y_size());
        if config.x_fill >= x_size || config.y_fill >= y_size {
            return Err(Error::Validation(format!(
                "boundary fill ({}, {}) outside alphabets of sizes ({x_size}, {y_size})",
                config.x_fill, config.y_fill
            )));
        }
        let partition = ContextPartition::new(config.d, x_size, y_size)?;
        let laws = model.context_distribution(config.d)?;
        let tables = (0..partition.count())
            .map(|c| match laws.conditional(c) {
                Some(p) => FrequencyTable::from_probabilities(&p),
                None => FrequencyTable::uniform(x_size),
            })
            .collect();
        Ok(Self {
            config,
            x_size,
            y_size,
            digest: model_digest(model),
            partition,
            tables,
        })
    }

    pub fn config(&self) -> CodecConfig {
        self.config
    }

    pub fn partition(&self) -> &ContextPartition {
        &self.partition
    }

    pub fn digest(&self) -> [u8; 32] {
        self.digest
    }

    pub fn table(&self, context: usize) -> &FrequencyTable {
        &self.tables[context]
    }

    fn check_symbols(&self, name: &str, seq: &[usize], size: usize) -> Result<()> {
        if let Some((i, s)) = seq.iter().enumerate().find(|(_, s)| **s >= size) {
            return Err(Error::Validation(format!(
                "{name}[{}] = {s} is outside an alphabet of size {size}",
                i + 1
            )));
        }
        Ok(())
    }

    pub(crate) fn check_inputs(&self, x: &[usize], y: &[usize]) -> Result<()> {
        if x.len() != y.len() {
            return Err(Error::Validation(format!(
                "x has {} symbols but y has {}",
                x.len(),
                y.len()
            )));
        }
        self.check_symbols("x", x, self.x_size)?;
        self.check_symbols("y", y, self.y_size)
    }

    fn header(&self, n: usize) -> Header {
        Header {
            n: n as u64,
            d: self.config.d as u64,
            x_size: self.x_size as u64,
            y_size: self.y_size as u64,
            digest: self.digest,
            x_fill: self.config.x_fill as u64,
            y_fill: self.config.y_fill as u64,
        }
    }

    pub fn encode_block(&self, x: &[usize], y: &[usize]) -> Result<CodecMessage> {
        self.check_inputs(x, y)?;
        if x.is_empty() {
            return Err(Error::Validation("cannot encode an empty sequence".into()));
        }
        let contexts = self.partition.assign(x, y, self.config.x_fill, self.config.y_fill);
        let mut encoders: Vec<Option<ArithmeticEncoder>> = vec![None; self.partition.count()];
        if self.x_size > 1 {
            for (&c, &s) in contexts.iter().zip(x) {
                encoders[c]
                    .get_or_insert_with(ArithmeticEncoder::new)
                    .encode(&self.tables[c], s);
            }
        }
        let mut payload = BitWriter::new();
        let mut lengths = Vec::with_capacity(encoders.len());
        for enc in encoders {
            let bits = enc.map(ArithmeticEncoder::finish).unwrap_or_default();
            lengths.push(bits.len());
            payload.extend(&bits);
        }
        Ok(CodecMessage {
            header: self.header(x.len()),
            lengths,
            payload,
        })
    }

    fn check_header(&self, h: &Header, contexts: usize) -> Result<()> {
        let mine = self.header(h.n as usize);
        let fields: [(&str, u64, u64); 6] = [
            ("header.d", h.d, mine.d),
            ("header.|X|", h.x_size, mine.x_size),
            ("header.|Y|", h.y_size, mine.y_size),
            ("header.x_fill", h.x_fill, mine.x_fill),
            ("header.y_fill", h.y_fill, mine.y_fill),
            ("header.context_count", contexts as u64, self.partition.count() as u64),
        ];
        for (name, got, want) in fields {
            if got != want {
                return Err(Error::corrupt(name, format!("found {got}, codec expects {want}")));
            }
        }
        if h.digest != self.digest {
            return Err(Error::corrupt("header.digest", "model digest does not match"));
        }
        if h.n == 0 {
            return Err(Error::corrupt("header.n", "empty block"));
        }
        Ok(())
    }

    /// Decodes `x^n`, reading `y_{i-d}` through `reader` at step `i` only.
    pub fn decode_block(&self, message: &CodecMessage, reader: &mut dyn CausalReader) -> Result<Vec<usize>> {
        self.check_header(&message.header, message.lengths.len())?;
        let n = usize::try_from(message.header.n).map_err(|_| Error::corrupt("header.n", "too large"))?;
        let offsets = message.offsets();
        let bytes = message.payload.as_bytes();
        let mut decoders: Vec<Option<ArithmeticDecoder>> = vec![None; self.partition.count()];
        let mut x = Vec::with_capacity(n.min(1 << 24));
        let d = self.config.d;
        for i in 1..=n {
            let yd = if i > d { reader.read(i - d)? } else { self.config.y_fill };
            if yd >= self.y_size {
                return Err(Error::Validation(format!(
                    "side information y_{} = {yd} out of range",
                    i - d
                )));
            }
            let c = self.partition.at(i, yd, &x, self.config.x_fill);
            let symbol = if self.x_size == 1 {
                0
            } else {
                let dec = decoders[c].get_or_insert_with(|| {
                    ArithmeticDecoder::new(BitReader::new(bytes, offsets[c], message.lengths[c]))
                });
                let s = dec.decode(&self.tables[c]);
                if dec.overrun() > LOOKAHEAD {
                    return Err(Error::corrupt(format!("step {i}, context {c}"), "substream exhausted"));
                }
                s
            };
            x.push(symbol);
            reader.observe(i, symbol);
        }
        Ok(x)
    }
}

/// Payload bits per source symbol.
pub fn empirical_rate(payload_bits: u64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    payload_bits as f64 / n as f64
}
