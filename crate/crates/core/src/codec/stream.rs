//! One arithmetic stream shared by all contexts, coded symbol by symbol.

use super::arith::{ArithmeticDecoder, ArithmeticEncoder, LOOKAHEAD};
use super::bits::{BitReader, BitWriter};
use super::{CausalReader, Codec};
use crate::error::{Error, Result};

/// Takes `(x_i, y_i)` one pair at a time; the law used for `x_i` depends only
/// on `y_{i-d}` and earlier `x`.
#[derive(Debug)]
pub struct StreamEncoder<'a> {
    codec: &'a Codec,
    encoder: ArithmeticEncoder,
    x: Vec<usize>,
    y: Vec<usize>,
}

impl<'a> StreamEncoder<'a> {
    pub fn new(codec: &'a Codec) -> Self {
        Self {
            codec,
            encoder: ArithmeticEncoder::new(),
            x: Vec::new(),
            y: Vec::new(),
        }
    }

    pub fn push(&mut self, x: usize, y: usize) -> Result<()> {
        self.codec.check_inputs(&[x], &[y])?;
        self.x.push(x);
        self.y.push(y);
        let i = self.x.len();
        let cfg = self.codec.config();
        let yd = if i > cfg.d { self.y[i - cfg.d - 1] } else { cfg.y_fill };
        let c = self.codec.partition().at(i, yd, &self.x[..i - 1], cfg.x_fill);
        if self.codec.x_size > 1 {
            self.encoder.encode(self.codec.table(c), x);
        }
        Ok(())
    }

    /// Bits already determined.
    pub fn emitted(&self) -> u64 {
        self.encoder.output().len()
    }

    pub fn symbols(&self) -> usize {
        self.x.len()
    }

    pub fn finish(self) -> BitWriter {
        if self.codec.x_size == 1 || self.x.is_empty() {
            return BitWriter::new();
        }
        self.encoder.finish()
    }
}

#[derive(Debug)]
pub struct StreamDecoder<'a> {
    codec: &'a Codec,
    decoder: Option<ArithmeticDecoder<'a>>,
    x: Vec<usize>,
}

impl<'a> StreamDecoder<'a> {
    pub fn new(codec: &'a Codec, bits: &'a BitWriter) -> Self {
        Self {
            codec,
            decoder: Some(ArithmeticDecoder::new(BitReader::new(bits.as_bytes(), 0, bits.len()))),
            x: Vec::new(),
        }
    }

    /// Decodes the next symbol, reading at most `y_{i-d}` from `reader`.
    pub fn next_symbol(&mut self, reader: &mut dyn CausalReader) -> Result<usize> {
        let i = self.x.len() + 1;
        let cfg = self.codec.config();
        let yd = if i > cfg.d { reader.read(i - cfg.d)? } else { cfg.y_fill };
        if yd >= self.codec.y_size {
            return Err(Error::Validation(format!(
                "side information y_{} = {yd} out of range",
                i - cfg.d
            )));
        }
        let c = self.codec.partition().at(i, yd, &self.x, cfg.x_fill);
        let symbol = if self.codec.x_size == 1 {
            0
        } else {
            let dec = self.decoder.as_mut().expect("decoder present");
            let s = dec.decode(self.codec.table(c));
            if dec.overrun() > LOOKAHEAD {
                return Err(Error::corrupt(format!("step {i}"), "stream exhausted"));
            }
            s
        };
        self.x.push(symbol);
        reader.observe(i, symbol);
        Ok(symbol)
    }

    pub fn decode(mut self, n: usize, reader: &mut dyn CausalReader) -> Result<Vec<usize>> {
        for _ in 0..n {
            self.next_symbol(reader)?;
        }
        Ok(self.x)
    }
}
