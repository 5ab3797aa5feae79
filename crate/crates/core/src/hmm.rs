//! The hidden Markov source: a Markov state chain `Y` observed through a
//! memoryless emission kernel `q(x|y)`.
//!
//! Everything here is exact. Joint laws of short windows are built by a
//! forward recursion over (emitted prefix, current state), so the cost is
//! `|Y|^2 |X|^d` per window and the size of the stored table is capped.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{conditional_entropy_of_rows, sum_last_digit, CompensatedSum};
use crate::markov::{normalized_rows, sample_index, MarkovChainModel, TransitionMatrix};

/// Default cap on exact table sizes; binary models reach `d = 25`.
pub const DEFAULT_TABLE_CAP: u128 = 100_000_000;

/// `q(x|y)`, one probability row over `X` per state `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct EmissionKernel {
    x_size: usize,
    entries: Vec<f64>,
}

impl EmissionKernel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let x_size = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || x_size == 0 {
            return Err(Error::Validation(
                "emission kernel needs at least one row and symbol".into(),
            ));
        }
        let entries = normalized_rows(&rows, x_size, "emission")?;
        Ok(Self { x_size, entries })
    }

    /// `X = Y`.
    pub fn identity(size: usize) -> Self {
        let mut entries = vec![0.0; size * size];
        for i in 0..size {
            entries[i * size + i] = 1.0;
        }
        Self { x_size: size, entries }
    }

    /// `X = Y xor N` with `P(N = 1) = q`.
    pub fn binary_symmetric(q: f64) -> Result<Self> {
        Error::check_probability("q", q)?;
        Self::new(vec![vec![1.0 - q, q], vec![q, 1.0 - q]])
    }

    /// Every state emits from the same `dist`.
    pub fn independent(dist: &[f64], y_size: usize) -> Result<Self> {
        Self::new(vec![dist.to_vec(); y_size])
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_size(&self) -> usize {
        self.entries.len() / self.x_size
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.entries[y * self.x_size + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.entries[y * self.x_size..(y + 1) * self.x_size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.x_size)
    }
}

impl TryFrom<Vec<Vec<f64>>> for EmissionKernel {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<EmissionKernel> for Vec<Vec<f64>> {
    fn from(k: EmissionKernel) -> Self {
        k.rows().map(<[f64]>::to_vec).collect()
    }
}

/// Exact law of `(Y_1, X_2, ..., X_{d+1})`, or of `(Y_1, X_1)` when `d = 0`.
///
/// Laid out as consecutive rows of `|X|` entries, one row per context
/// `(y_1, x_2..x_d)` in lexicographic order; the last coordinate varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextDistribution {
    d: usize,
    x_size: usize,
    y_size: usize,
    table: Vec<f64>,
}

impl ContextDistribution {
    pub fn delay(&self) -> usize {
        self.d
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Number of contexts `|Y| |X|^(d-1)` (`|Y|` when `d <= 1`).
    pub fn context_count(&self) -> usize {
        self.table.len() / self.x_size
    }

    /// Joint probability of context `ctx` followed by symbol `x`.
    pub fn joint(&self, ctx: usize, x: usize) -> f64 {
        self.table[ctx * self.x_size + x]
    }

    pub fn context_probability(&self, ctx: usize) -> f64 {
        self.row(ctx).iter().sum()
    }

    pub fn row(&self, ctx: usize) -> &[f64] {
        &self.table[ctx * self.x_size..(ctx + 1) * self.x_size]
    }

    /// `p(x | ctx)`; `None` for a context of probability zero.
    pub fn conditional(&self, ctx: usize) -> Option<Vec<f64>> {
        let row = self.row(ctx);
        let mass: f64 = row.iter().sum();
        (mass > 0.0).then(|| row.iter().map(|p| p / mass).collect())
    }

    /// Marginal of the first coordinate `Y_1`.
    pub fn y_marginal(&self) -> Vec<f64> {
        let per_y = self.table.len() / self.y_size;
        self.table
            .chunks(per_y)
            .map(|c| c.iter().copied().collect::<CompensatedSum>().value())
            .collect()
    }
}

/// Lower and upper bounds on the entropy rate of `X`, in bits per symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyRateBounds {
    /// `H(X_n | X^{n-1}, Y_1)`
    pub lower: f64,
    /// `H(X_n | X^{n-1})`
    pub upper: f64,
}

impl EntropyRateBounds {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// A hidden Markov source.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    chain: MarkovChainModel,
    emission: EmissionKernel,
    table_cap: u128,
}

impl HmmModel {
    pub fn new(chain: MarkovChainModel, emission: EmissionKernel) -> Result<Self> {
        if emission.y_size() != chain.alphabet_size() {
            return Err(Error::Validation(format!(
                "emission has {} rows but the chain has {} states",
                emission.y_size(),
                chain.alphabet_size()
            )));
        }
        Ok(Self {
            chain,
            emission,
            table_cap: DEFAULT_TABLE_CAP,
        })
    }

    pub fn from_tables(transition: Vec<Vec<f64>>, emission: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(
            MarkovChainModel::new(TransitionMatrix::new(transition)?)?,
            EmissionKernel::new(emission)?,
        )
    }

    /// Binary symmetric chain with flip `eps`, observed through a BSC(`q`).
    pub fn binary(eps: f64, q: f64) -> Result<Self> {
        Self::new(
            MarkovChainModel::binary_symmetric(eps)?,
            EmissionKernel::binary_symmetric(q)?,
        )
    }

    pub fn with_table_cap(mut self, cap: u128) -> Self {
        self.table_cap = cap;
        self
    }

    pub fn table_cap(&self) -> u128 {
        self.table_cap
    }

    pub fn chain(&self) -> &MarkovChainModel {
        &self.chain
    }

    pub fn emission(&self) -> &EmissionKernel {
        &self.emission
    }

    pub fn x_size(&self) -> usize {
        self.emission.x_size()
    }

    pub fn y_size(&self) -> usize {
        self.chain.alphabet_size()
    }

    /// Canonical byte encoding used for model digests.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = b"HMM1".to_vec();
        out.extend_from_slice(&(self.y_size() as u32).to_le_bytes());
        out.extend_from_slice(&(self.x_size() as u32).to_le_bytes());
        for row in self.chain.transition().rows() {
            for p in row {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        for row in self.emission.rows() {
            for p in row {
                out.extend_from_slice(&p.to_le_bytes());
            }
        }
        out
    }

    pub fn sample_joint_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
        let y = self.chain.sample_path_with(n, rng);
        let x = y.iter().map(|&s| sample_index(self.emission.row(s), rng)).collect();
        (x, y)
    }

    /// Draws `(x^n, y^n)`; deterministic given `seed`.
    pub fn sample_joint(&self, n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
        self.sample_joint_with(n, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn check_cap(&self, x_digits: usize) -> Result<()> {
        let required = (self.x_size() as u128)
            .checked_pow(x_digits as u32)
            .and_then(|v| v.checked_mul(self.y_size() as u128))
            .unwrap_or(u128::MAX);
        if required > self.table_cap {
            return Err(Error::Capacity {
                required,
                cap: self.table_cap,
            });
        }
        Ok(())
    }

    /// Forward recursion from a fixed first state.
    ///
    /// `init[x_prefix * |Y| + y]` holds the mass of an emitted prefix ending in
    /// state `y`; each step moves the chain and emits one more symbol. Returns
    /// the state-summed table over prefixes.
    fn extend(&self, mut v: Vec<f64>, steps: usize) -> Vec<f64> {
        let ny = self.y_size();
        let nx = self.x_size();
        let w = self.chain.transition();
        for _ in 0..steps {
            let prefixes = v.len() / ny;
            let mut moved = vec![0.0; v.len()];
            for p in 0..prefixes {
                let src = &v[p * ny..(p + 1) * ny];
                let dst = &mut moved[p * ny..(p + 1) * ny];
                for (y, &mass) in src.iter().enumerate() {
                    if mass == 0.0 {
                        continue;
                    }
                    for (y2, slot) in dst.iter_mut().enumerate() {
                        *slot += mass * w.get(y, y2);
                    }
                }
            }
            let mut next = vec![0.0; v.len() * nx];
            for p in 0..prefixes {
                for x in 0..nx {
                    let base = (p * nx + x) * ny;
                    for y2 in 0..ny {
                        next[base + y2] = moved[p * ny + y2] * self.emission.get(y2, x);
                    }
                }
            }
            v = next;
        }
        sum_last_digit(&v, ny)
    }

    /// Exact law of `(Y_1, X_2, ..., X_{d+1})` (`(Y_1, X_1)` for `d = 0`).
    pub fn context_distribution(&self, d: usize) -> Result<ContextDistribution> {
        self.check_cap(d.max(1))?;
        let ny = self.y_size();
        let nx = self.x_size();
        let pi = self.chain.stationary();
        let mut table = Vec::with_capacity(ny * nx.pow(d.max(1) as u32));
        for y1 in 0..ny {
            if d == 0 {
                table.extend(self.emission.row(y1).iter().map(|q| pi.get(y1) * q));
            } else {
                let mut init = vec![0.0; ny];
                init[y1] = pi.get(y1);
                table.extend(self.extend(init, d));
            }
        }
        Ok(ContextDistribution {
            d,
            x_size: nx,
            y_size: ny,
            table,
        })
    }

    /// Minimal lossless rate with side information delayed by `d`:
    /// `H(X_{d+1} | X_2^d, Y_1)` bits per symbol (`H(X_1 | Y_1)` at `d = 0`).
    pub fn lossless_rate(&self, d: usize) -> Result<f64> {
        let ctx = self.context_distribution(d)?;
        Ok(conditional_entropy_of_rows(ctx.table(), self.x_size()).max(0.0))
    }

    /// Exact law of `(Y_1, X_1, ..., X_n)`.
    fn window_with_first_state(&self, n: usize) -> Result<Vec<f64>> {
        self.check_cap(n)?;
        let ny = self.y_size();
        let nx = self.x_size();
        let pi = self.chain.stationary();
        let mut table = Vec::new();
        for y1 in 0..ny {
            let mut init = vec![0.0; nx * ny];
            for x1 in 0..nx {
                init[x1 * ny + y1] = pi.get(y1) * self.emission.get(y1, x1);
            }
            table.extend(self.extend(init, n - 1));
        }
        Ok(table)
    }

    /// Brackets the entropy rate `H(X)`:
    /// `H(X_n | X^{n-1}, Y_1) <= H(X) <= H(X_n | X^{n-1})` with `n = order`.
    pub fn entropy_rate_bounds(&self, order: usize) -> Result<EntropyRateBounds> {
        if order == 0 {
            return Err(Error::Validation("entropy rate bracket needs order >= 1".into()));
        }
        let nx = self.x_size();
        let joint = self.window_with_first_state(order)?;
        let lower = conditional_entropy_of_rows(&joint, nx);
        let per_y = joint.len() / self.y_size();
        let mut x_only = vec![0.0; per_y];
        for chunk in joint.chunks(per_y) {
            for (acc, p) in x_only.iter_mut().zip(chunk) {
                *acc += p;
            }
        }
        let upper = conditional_entropy_of_rows(&x_only, nx);
        Ok(EntropyRateBounds {
            lower: lower.max(0.0),
            upper: upper.max(lower),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::entropy;

    fn hb(p: f64) -> f64 {
        entropy(&[p, 1.0 - p])
    }

    #[test]
    fn identity_emission_copies_states() {
        let m = HmmModel::new(
            MarkovChainModel::binary_symmetric(0.2).unwrap(),
            EmissionKernel::identity(2),
        )
        .unwrap();
        let (x, y) = m.sample_joint(1000, 3);
        assert_eq!(x, y);
    }

    #[test]
    fn one_state_chain_emits_iid() {
        let m = HmmModel::from_tables(vec![vec![1.0]], vec![vec![0.2, 0.3, 0.5]]).unwrap();
        let n = 200_000;
        let (x, y) = m.sample_joint(n, 5);
        assert!(y.iter().all(|&s| s == 0));
        for (sym, p) in [0.2, 0.3, 0.5].into_iter().enumerate() {
            let f = x.iter().filter(|&&v| v == sym).count() as f64 / n as f64;
            assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
        }
    }

    #[test]
    fn noisy_emission_flip_frequency() {
        let m = HmmModel::binary(0.1, 0.1).unwrap();
        let n = 1_000_000;
        let (x, y) = m.sample_joint(n, 9);
        let f = x.iter().zip(&y).filter(|(a, b)| a != b).count() as f64 / n as f64;
        assert!((f - 0.1).abs() < 3.0 * (0.09 / n as f64).sqrt(), "{f}");
    }

    #[test]
    fn d0_table_is_pi_times_q() {
        let m = HmmModel::binary(0.3, 0.1).unwrap();
        let c = m.context_distribution(0).unwrap();
        assert_eq!(c.table().len(), 4);
        assert!((c.joint(0, 0) - 0.45).abs() < 1e-15);
        assert!((c.joint(0, 1) - 0.05).abs() < 1e-15);
        assert_eq!(c.context_count(), 2);
    }

    #[test]
    fn d1_table_by_direct_summation() {
        let (eps, q) = (0.1, 0.1);
        let m = HmmModel::binary(eps, q).unwrap();
        let c = m.context_distribution(1).unwrap();
        for y1 in 0..2 {
            for x2 in 0..2 {
                let mut expect = 0.0;
                for y2 in 0..2 {
                    let w = if y1 == y2 { 1.0 - eps } else { eps };
                    let e = if x2 == y2 { 1.0 - q } else { q };
                    expect += 0.5 * w * e;
                }
                assert!((c.joint(y1, x2) - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn d1_table_matches_sampled_frequencies() {
        let m = HmmModel::binary(0.1, 0.1).unwrap();
        let c = m.context_distribution(1).unwrap();
        let n = 1_000_000;
        let (x, y) = m.sample_joint(n, 21);
        let mut counts = [0usize; 4];
        for i in 1..n {
            counts[y[i - 1] * 2 + x[i]] += 1;
        }
        for k in 0..4 {
            let f = counts[k] as f64 / (n - 1) as f64;
            let p = c.table()[k];
            // pairs overlap; 6 sigma of the i.i.d. error keeps this honest but stable
            assert!(
                (f - p).abs() < 6.0 * (p * (1.0 - p) / n as f64).sqrt(),
                "{k}: {f} vs {p}"
            );
        }
    }

    #[test]
    fn iid_states_give_product_law() {
        let m = HmmModel::new(
            MarkovChainModel::memoryless(&[0.3, 0.7]).unwrap(),
            EmissionKernel::binary_symmetric(0.2).unwrap(),
        )
        .unwrap();
        let px1 = 0.3 * 0.2 + 0.7 * 0.8;
        let c = m.context_distribution(3).unwrap();
        for y1 in 0..2 {
            for xs in 0..8usize {
                let mut expect = [0.3, 0.7][y1];
                for bit in 0..3 {
                    let x = (xs >> bit) & 1;
                    expect *= if x == 1 { px1 } else { 1.0 - px1 };
                }
                assert!((c.table()[y1 * 8 + xs] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn marginals_match_pi_and_one_step() {
        let m = HmmModel::from_tables(
            vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.8, 0.1], vec![0.3, 0.3, 0.4]],
            vec![vec![0.7, 0.3], vec![0.2, 0.8], vec![0.5, 0.5]],
        )
        .unwrap();
        for d in 0..5 {
            let c = m.context_distribution(d).unwrap();
            assert!((c.table().iter().sum::<f64>() - 1.0).abs() < 1e-10);
            for (a, b) in c.y_marginal().iter().zip(m.chain().stationary().probs()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lossless_rate_reference_values() {
        // H(X_1 | Y_1) = H_b(q) = 0.469 at q = 0.1, whatever eps is
        for eps in [0.05, 0.1, 0.3] {
            let m = HmmModel::binary(eps, 0.1).unwrap();
            assert!((m.lossless_rate(0).unwrap() - hb(0.1)).abs() < 1e-12);
            assert!((m.lossless_rate(0).unwrap() - 0.469).abs() < 5e-4);
        }
        for d in 0..6 {
            assert!((HmmModel::binary(0.1, 0.5).unwrap().lossless_rate(d).unwrap() - 1.0).abs() < 1e-9);
        }
        let feedforward = HmmModel::binary(0.1, 0.0).unwrap();
        assert!((feedforward.lossless_rate(1).unwrap() - 0.469).abs() < 5e-4);
    }

    #[test]
    fn entropy_rate_bracket_cases() {
        // X independent of Y and i.i.d.: closed at order 1
        let m = HmmModel::new(
            MarkovChainModel::binary_symmetric(0.2).unwrap(),
            EmissionKernel::independent(&[0.3, 0.7], 2).unwrap(),
        )
        .unwrap();
        let b = m.entropy_rate_bounds(1).unwrap();
        assert!((b.lower - hb(0.3)).abs() < 1e-12 && (b.upper - hb(0.3)).abs() < 1e-12);

        // i.i.d. states with a noisy emission: closed at order 2
        let m = HmmModel::new(
            MarkovChainModel::memoryless(&[0.5, 0.5]).unwrap(),
            EmissionKernel::binary_symmetric(0.1).unwrap(),
        )
        .unwrap();
        let b = m.entropy_rate_bounds(2).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-12 && (b.upper - 1.0).abs() < 1e-12);

        // Markov X: closed at order 2
        let m = HmmModel::binary(0.1, 0.0).unwrap();
        let b = m.entropy_rate_bounds(2).unwrap();
        assert!((b.lower - hb(0.1)).abs() < 1e-12 && (b.upper - hb(0.1)).abs() < 1e-12);
    }

    #[test]
    fn bracket_narrows_with_order() {
        let m = HmmModel::binary(0.1, 0.1).unwrap();
        let mut prev = m.entropy_rate_bounds(1).unwrap();
        for order in 2..=12 {
            let b = m.entropy_rate_bounds(order).unwrap();
            assert!(b.lower >= prev.lower - 1e-12);
            assert!(b.upper <= prev.upper + 1e-12);
            prev = b;
        }
        assert!(prev.width() < 1e-3, "{prev:?}");
    }

    #[test]
    fn capacity_error_names_size() {
        let m = HmmModel::binary(0.1, 0.1).unwrap().with_table_cap(1000);
        match m.context_distribution(10) {
            Err(Error::Capacity { required, cap }) => {
                assert_eq!(required, 2048);
                assert_eq!(cap, 1000);
            }
            other => panic!("{other:?}"),
        }
        assert!(m.context_distribution(8).is_ok());
    }
}
