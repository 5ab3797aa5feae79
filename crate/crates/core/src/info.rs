//! Entropy bookkeeping shared by the exact evaluators.
//!
//! All quantities are in bits with the convention `0 log 0 = 0`.

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.carry += (self.sum - t) + value;
        } else {
            self.carry += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// `-p log2 p`, zero at `p = 0`.
#[inline]
pub fn surprisal_term(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy of a (possibly unnormalized) table of probabilities.
pub fn entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .map(|&p| surprisal_term(p))
        .collect::<CompensatedSum>()
        .value()
}

/// `H(A | B)` for a table laid out as `|B|` consecutive rows of `|A|` entries.
pub fn conditional_entropy_of_rows(table: &[f64], row_len: usize) -> f64 {
    assert!(row_len > 0 && table.len().is_multiple_of(row_len));
    let joint = entropy(table);
    let marginal: Vec<f64> = table
        .chunks(row_len)
        .map(|row| row.iter().copied().collect::<CompensatedSum>().value())
        .collect();
    joint - entropy(&marginal)
}

/// Sum adjacent blocks of `factor` entries: marginalizes out the fastest-varying digit.
pub fn sum_last_digit(table: &[f64], factor: usize) -> Vec<f64> {
    table
        .chunks(factor)
        .map(|c| c.iter().copied().collect::<CompensatedSum>().value())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_of_uniform() {
        assert!((entropy(&[0.25; 4]) - 2.0).abs() < 1e-15);
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
    }

    #[test]
    fn conditional_entropy_of_independent_rows() {
        // p(b) = (0.5, 0.5), p(a|b) = (0.5, 0.5)
        let t = [0.25, 0.25, 0.25, 0.25];
        assert!((conditional_entropy_of_rows(&t, 2) - 1.0).abs() < 1e-15);
        // a = b
        let t = [0.5, 0.0, 0.0, 0.5];
        assert!(conditional_entropy_of_rows(&t, 2).abs() < 1e-15);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        for _ in 0..1_000_000 {
            acc.add(1e-16);
        }
        acc.add(-1.0);
        assert!((acc.value() - 1e-10).abs() < 1e-20);
    }
}
