//! Exact block computations by enumerating every `(x^n, y^n)`.
//!
//! Deliberately naive: the joint law is written out term by term from the
//! hidden Markov factorization and all conditional entropies come from
//! summing that table, so the results do not share code with the
//! single-letter evaluators they are used to check.

use crate::error::{Error, Result};
use crate::hmm::HmmModel;
use crate::info::{entropy, CompensatedSum};

/// Exact joint law of `(X^n, Y^n)`, indexed `x_index * |Y|^n + y_index` with
/// the first symbol most significant in each index.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLaw {
    n: usize,
    x_size: usize,
    y_size: usize,
    table: Vec<f64>,
}

fn checked_size(nx: usize, ny: usize, n: usize, cap: u128) -> Result<usize> {
    let per = (nx as u128) * (ny as u128);
    let required = per.checked_pow(n as u32).unwrap_or(u128::MAX);
    if required > cap {
        return Err(Error::Capacity { required, cap });
    }
    Ok(required as usize)
}

impl BlockLaw {
    /// Enumerates with the model's table cap.
    pub fn enumerate(model: &HmmModel, n: usize) -> Result<Self> {
        Self::with_cap(model, n, model.table_cap())
    }

    pub fn with_cap(model: &HmmModel, n: usize, cap: u128) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("block length must be at least 1".into()));
        }
        let (nx, ny) = (model.x_size(), model.y_size());
        checked_size(nx, ny, n, cap)?;
        let w = model.chain().transition();
        let pi = model.chain().stationary();
        let q = model.emission();
        // grow (x^k, y^k) one step at a time, tracking the last state
        let mut table: Vec<f64> = Vec::with_capacity(nx * ny);
        for x in 0..nx {
            for y in 0..ny {
                table.push(pi.get(y) * q.get(y, x));
            }
        }
        let mut y_count = ny;
        for _ in 1..n {
            let x_count = table.len() / y_count;
            let mut next = vec![0.0; table.len() * nx * ny];
            let next_y_count = y_count * ny;
            for xi in 0..x_count {
                for yi in 0..y_count {
                    let p = table[xi * y_count + yi];
                    if p == 0.0 {
                        continue;
                    }
                    let last = yi % ny;
                    for x in 0..nx {
                        for y in 0..ny {
                            next[(xi * nx + x) * next_y_count + yi * ny + y] = p * w.get(last, y) * q.get(y, x);
                        }
                    }
                }
            }
            table = next;
            y_count = next_y_count;
        }
        Ok(Self {
            n,
            x_size: nx,
            y_size: ny,
            table,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Law of `(X^a, Y^b)`, indexed `x_index * |Y|^b + y_index`.
    pub fn prefix_marginal(&self, a: usize, b: usize) -> Vec<f64> {
        assert!(a <= self.n && b <= self.n);
        let y_all = self.y_size.pow(self.n as u32);
        let x_div = self.x_size.pow((self.n - a) as u32);
        let y_div = self.y_size.pow((self.n - b) as u32);
        let y_keep = self.y_size.pow(b as u32);
        let mut acc = vec![CompensatedSum::new(); self.x_size.pow(a as u32) * y_keep];
        for (idx, &p) in self.table.iter().enumerate() {
            if p != 0.0 {
                let (xi, yi) = (idx / y_all, idx % y_all);
                acc[(xi / x_div) * y_keep + yi / y_div].add(p);
            }
        }
        acc.iter().map(CompensatedSum::value).collect()
    }

    /// `H(X^a, Y^b)`.
    pub fn prefix_entropy(&self, a: usize, b: usize) -> f64 {
        entropy(&self.prefix_marginal(a, b))
    }

    /// `H(X_i | X^{i-1}, Y^{i-d})`, with `Y^k` empty for `k < 1`.
    pub fn per_step_conditional_entropy(&self, d: usize, i: usize) -> Result<f64> {
        if i == 0 || i > self.n {
            return Err(Error::Validation(format!("step {i} outside [1, {}]", self.n)));
        }
        let b = i.saturating_sub(d);
        Ok(self.prefix_entropy(i, b) - self.prefix_entropy(i - 1, b))
    }

    /// `H(X^n || Y^{n-d}) = sum_i H(X_i | X^{i-1}, Y^{i-d})`.
    pub fn causally_conditioned_entropy(&self, d: usize) -> f64 {
        (1..=self.n)
            .map(|i| self.per_step_conditional_entropy(d, i).expect("step in range"))
            .collect::<CompensatedSum>()
            .value()
    }

    /// `I(Y^{n-d} -> X^n) = H(X^n) - H(X^n || Y^{n-d})`.
    pub fn directed_information(&self, d: usize) -> f64 {
        (self.prefix_entropy(self.n, 0) - self.causally_conditioned_entropy(d)).max(0.0)
    }
}

pub fn causally_conditioned_entropy(model: &HmmModel, n: usize, d: usize) -> Result<f64> {
    Ok(BlockLaw::enumerate(model, n)?.causally_conditioned_entropy(d))
}

pub fn directed_information(model: &HmmModel, n: usize, d: usize) -> Result<f64> {
    Ok(BlockLaw::enumerate(model, n)?.directed_information(d))
}

pub fn per_step_conditional_entropy(model: &HmmModel, n: usize, d: usize, i: usize) -> Result<f64> {
    BlockLaw::enumerate(model, n)?.per_step_conditional_entropy(d, i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_to_one_and_respects_cap() {
        let m = HmmModel::binary(0.1, 0.1).unwrap();
        let law = BlockLaw::enumerate(&m, 5).unwrap();
        assert_eq!(law.table().len(), 1024);
        assert!((law.table().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(matches!(
            BlockLaw::with_cap(&m, 10, 1000),
            Err(Error::Capacity {
                required: 1_048_576,
                cap: 1000
            })
        ));
        assert!(per_step_conditional_entropy(&m, 3, 1, 4).is_err());
    }
}
