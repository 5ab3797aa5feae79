//! Binary arithmetic coder over integer frequency tables (Witten, Neal and
//! Cleary style, 62-bit registers, carries handled with pending bits).

use super::bits::{BitReader, BitWriter};

const CODE_BITS: u32 = 62;
const TOP: u64 = (1 << CODE_BITS) - 1;
const HALF: u64 = 1 << (CODE_BITS - 1);
const QUARTER: u64 = 1 << (CODE_BITS - 2);

pub const FREQ_BITS: u32 = 32;
const TOTAL: u64 = 1 << FREQ_BITS;
/// Smallest probability any symbol is coded with.
pub const PROBABILITY_FLOOR: f64 = 1.0 / (1u64 << 30) as f64;

/// Bits a valid decoder may read past the end of its substream.
pub(crate) const LOOKAHEAD: u64 = CODE_BITS as u64;

/// Cumulative frequencies summing to `2^32`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    cum: Vec<u64>,
}

impl FrequencyTable {
    /// Quantizes `probs`: entries are floored at [`PROBABILITY_FLOOR`],
    /// renormalized, rounded, and the rounding residue goes to the largest
    /// entry (lowest index on ties).
    pub fn from_probabilities(probs: &[f64]) -> Self {
        assert!(!probs.is_empty() && probs.len() as u64 <= TOTAL / 4);
        let floored: Vec<f64> = probs.iter().map(|p| p.max(PROBABILITY_FLOOR)).collect();
        let total: f64 = floored.iter().sum();
        let min = (PROBABILITY_FLOOR * TOTAL as f64) as u64;
        let mut freqs: Vec<u64> = floored
            .iter()
            .map(|p| ((p / total * TOTAL as f64).round() as u64).max(min))
            .collect();
        let sum: u64 = freqs.iter().sum();
        let largest = (0..freqs.len()).fold(0, |best, i| if freqs[i] > freqs[best] { i } else { best });
        if sum > TOTAL {
            freqs[largest] -= sum - TOTAL;
        } else {
            freqs[largest] += TOTAL - sum;
        }
        let mut cum = Vec::with_capacity(freqs.len() + 1);
        cum.push(0);
        for f in freqs {
            cum.push(cum.last().unwrap() + f);
        }
        Self { cum }
    }

    pub fn uniform(size: usize) -> Self {
        Self::from_probabilities(&vec![1.0 / size as f64; size])
    }

    pub fn symbols(&self) -> usize {
        self.cum.len() - 1
    }

    /// Probability the coder effectively assigns to `symbol`.
    pub fn probability(&self, symbol: usize) -> f64 {
        (self.cum[symbol + 1] - self.cum[symbol]) as f64 / TOTAL as f64
    }

    fn find(&self, target: u64) -> usize {
        // last index with cum <= target
        self.cum.partition_point(|&c| c <= target) - 1
    }
}

#[derive(Debug, Clone)]
pub struct ArithmeticEncoder {
    low: u64,
    high: u64,
    pending: u64,
    out: BitWriter,
}

impl Default for ArithmeticEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl ArithmeticEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            high: TOP,
            pending: 0,
            out: BitWriter::new(),
        }
    }

    fn emit(&mut self, bit: bool) {
        self.out.push(bit);
        for _ in 0..self.pending {
            self.out.push(!bit);
        }
        self.pending = 0;
    }

    pub fn encode(&mut self, table: &FrequencyTable, symbol: usize) {
        let range = (self.high - self.low + 1) as u128;
        let lo = table.cum[symbol] as u128;
        let hi = table.cum[symbol + 1] as u128;
        self.high = self.low + ((range * hi) >> FREQ_BITS) as u64 - 1;
        self.low += ((range * lo) >> FREQ_BITS) as u64;
        loop {
            if self.high < HALF {
                self.emit(false);
            } else if self.low >= HALF {
                self.emit(true);
                self.low -= HALF;
                self.high -= HALF;
            } else if self.low >= QUARTER && self.high < HALF + QUARTER {
                self.pending += 1;
                self.low -= QUARTER;
                self.high -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
        }
    }

    /// Bits emitted so far (excluding pending ones).
    pub fn output(&self) -> &BitWriter {
        &self.out
    }

    /// Flushes two disambiguating bits plus anything pending.
    pub fn finish(mut self) -> BitWriter {
        self.pending += 1;
        let bit = self.low >= QUARTER;
        self.emit(bit);
        self.out
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ArithmeticDecoder<'a> {
    low: u64,
    high: u64,
    value: u64,
    input: BitReader<'a>,
}

impl<'a> ArithmeticDecoder<'a> {
    pub fn new(mut input: BitReader<'a>) -> Self {
        let mut value = 0;
        for _ in 0..CODE_BITS {
            value = (value << 1) | input.next_bit() as u64;
        }
        Self {
            low: 0,
            high: TOP,
            value,
            input,
        }
    }

    pub fn decode(&mut self, table: &FrequencyTable) -> usize {
        let range = (self.high - self.low + 1) as u128;
        let offset = (self.value - self.low) as u128;
        let target = (((offset + 1) << FREQ_BITS) - 1) / range;
        let symbol = table.find(target as u64);
        let lo = table.cum[symbol] as u128;
        let hi = table.cum[symbol + 1] as u128;
        self.high = self.low + ((range * hi) >> FREQ_BITS) as u64 - 1;
        self.low += ((range * lo) >> FREQ_BITS) as u64;
        loop {
            if self.high < HALF {
            } else if self.low >= HALF {
                self.low -= HALF;
                self.high -= HALF;
                self.value -= HALF;
            } else if self.low >= QUARTER && self.high < HALF + QUARTER {
                self.low -= QUARTER;
                self.high -= QUARTER;
                self.value -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
            self.value = (self.value << 1) | self.input.next_bit() as u64;
        }
        symbol
    }

    pub fn overrun(&self) -> u64 {
        self.input.overrun()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tables_sum_to_total_and_respect_floor() {
        let t = FrequencyTable::from_probabilities(&[0.0, 1.0, 0.0]);
        assert_eq!(*t.cum.last().unwrap(), TOTAL);
        assert!(t.probability(0) >= PROBABILITY_FLOOR);
        assert!(t.probability(1) > 0.999_999_99);
        let u = FrequencyTable::uniform(3);
        assert_eq!(u.symbols(), 3);
    }

    #[test]
    fn roundtrip_and_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tables = [
            FrequencyTable::from_probabilities(&[0.9, 0.1]),
            FrequencyTable::from_probabilities(&[0.2, 0.3, 0.5]),
            FrequencyTable::from_probabilities(&[1.0 - 1e-12, 1e-12]),
        ];
        let mut enc = ArithmeticEncoder::new();
        let mut symbols = Vec::new();
        let mut ideal = 0.0;
        for i in 0..20_000 {
            let t = &tables[i % 3];
            let s = match i % 3 {
                0 => (rng.gen::<f64>() < 0.1) as usize,
                1 => rng.gen_range(0..3),
                _ => (i % 1000 == 2) as usize,
            };
            ideal -= t.probability(s).log2();
            enc.encode(t, s);
            symbols.push(s);
        }
        let bits = enc.finish();
        assert!((bits.len() as f64) < ideal + 4.0, "{} vs {ideal}", bits.len());
        let mut dec = ArithmeticDecoder::new(BitReader::new(bits.as_bytes(), 0, bits.len()));
        for (i, &s) in symbols.iter().enumerate() {
            assert_eq!(dec.decode(&tables[i % 3]), s, "at {i}");
        }
        assert!(dec.overrun() <= LOOKAHEAD);
    }

    #[test]
    fn single_symbol_costs_termination_only() {
        let t = FrequencyTable::from_probabilities(&[0.5, 0.5]);
        let mut enc = ArithmeticEncoder::new();
        enc.encode(&t, 1);
        let bits = enc.finish();
        assert!(bits.len() <= 3);
        let mut dec = ArithmeticDecoder::new(BitReader::new(bits.as_bytes(), 0, bits.len()));
        assert_eq!(dec.decode(&t), 1);
    }
}
