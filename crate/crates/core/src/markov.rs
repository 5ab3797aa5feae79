//! Finite-alphabet stationary ergodic Markov chains.
//!
//! A [`MarkovChainModel`] owns a validated one-step law `w1(a|b)` together
//! with its stationary distribution `pi`. Models are immutable once built;
//! ergodicity (irreducible and aperiodic) is checked at construction so every
//! downstream formula can assume a stationary ergodic state process.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Input rows within this distance of summing to one are renormalized.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

const POWER_ITERATION_TOL: f64 = 1e-13;
const POWER_ITERATION_CAP: usize = 1_000_000;

/// Validates and renormalizes a table of probability rows of equal length.
pub(crate) fn normalized_rows(rows: &[Vec<f64>], width: usize, what: &str) -> Result<Vec<f64>> {
    let mut flat = Vec::with_capacity(rows.len() * width);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Validation(format!(
                "{what} row {r} has {} entries, expected {width}",
                row.len()
            )));
        }
        if let Some(&bad) = row.iter().find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0) {
            return Err(Error::Validation(format!(
                "{what} row {r} has entry {bad} outside [0, 1]"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::Validation(format!("{what} row {r} sums to {sum}, not 1")));
        }
        flat.extend(row.iter().map(|p| p / sum));
    }
    Ok(flat)
}

/// Row-stochastic matrix; `get(from, to)` is `w(to | from)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TransitionMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if size == 0 {
            return Err(Error::Validation("transition matrix needs at least one state".into()));
        }
        let entries = normalized_rows(&rows, size, "transition")?;
        Ok(Self { size, entries })
    }

    /// Two-state chain that flips with probability `eps`.
    pub fn binary_symmetric(eps: f64) -> Result<Self> {
        Error::check_probability("eps", eps)?;
        Self::new(vec![vec![1.0 - eps, eps], vec![eps, 1.0 - eps]])
    }

    pub fn identity(size: usize) -> Self {
        let mut entries = vec![0.0; size * size];
        for i in 0..size {
            entries[i * size + i] = 1.0;
        }
        Self { size, entries }
    }

    fn with_equal_rows(row: &[f64]) -> Self {
        Self {
            size: row.len(),
            entries: row.repeat(row.len()),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[from * self.size + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.entries[from * self.size..(from + 1) * self.size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.size)
    }

    /// The matrix product `self · other` (first a step of `self`, then of `other`).
    pub fn then(&self, other: &TransitionMatrix) -> TransitionMatrix {
        assert_eq!(self.size, other.size);
        let n = self.size;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    entries[i * n + j] += a * other.get(k, j);
                }
            }
        }
        TransitionMatrix { size: n, entries }
    }

    /// Matrix power by repeated squaring; `power(0)` is the identity.
    pub fn power(&self, k: u32) -> TransitionMatrix {
        let mut result = TransitionMatrix::identity(self.size);
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = result.then(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.then(&base);
            }
        }
        result
    }

    fn successors(&self, from: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(from)
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(j, _)| j)
    }
}

impl TryFrom<Vec<Vec<f64>>> for TransitionMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<TransitionMatrix> for Vec<Vec<f64>> {
    fn from(m: TransitionMatrix) -> Self {
        m.rows().map(<[f64]>::to_vec).collect()
    }
}

/// Stationary law `pi` of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    probs: Vec<f64>,
}

impl StationaryDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn get(&self, state: usize) -> f64 {
        self.probs[state]
    }

    /// `max_a |(pi W)(a) - pi(a)|`.
    pub fn residual(&self, w: &TransitionMatrix) -> f64 {
        step_distribution(&self.probs, w)
            .iter()
            .zip(&self.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn step_distribution(p: &[f64], w: &TransitionMatrix) -> Vec<f64> {
    let n = w.size();
    let mut out = vec![0.0; n];
    for (from, &pf) in p.iter().enumerate() {
        for (to, o) in out.iter_mut().enumerate() {
            *o += pf * w.get(from, to);
        }
    }
    out
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Irreducibility by reachability on the support graph, aperiodicity by the
/// gcd of `level(u) + 1 - level(v)` over all support edges of a BFS tree.
pub fn check_ergodic(w: &TransitionMatrix) -> Result<()> {
    let n = w.size();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in w.successors(u) {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    if let Some(s) = level.iter().position(|&l| l == usize::MAX) {
        return Err(Error::NotErgodic(format!("state {s} is unreachable from state 0")));
    }
    // reverse reachability
    let mut seen = vec![false; n];
    seen[0] = true;
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        for u in 0..n {
            if !seen[u] && w.get(u, v) > 0.0 {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    if let Some(s) = seen.iter().position(|&r| !r) {
        return Err(Error::NotErgodic(format!("state 0 is unreachable from state {s}")));
    }
    let mut period = 0;
    for u in 0..n {
        for v in w.successors(u) {
            period = gcd(period, (level[u] + 1).abs_diff(level[v]));
        }
    }
    if period != 1 {
        return Err(Error::NotErgodic(format!("chain has period {period}")));
    }
    Ok(())
}

/// Solves `pi = pi W`, `sum(pi) = 1` for an ergodic chain.
pub fn stationary_distribution(w: &TransitionMatrix) -> Result<StationaryDistribution> {
    check_ergodic(w)?;
    let n = w.size();
    let mut probs = solve_linear(w).unwrap_or_else(|| power_iteration(w));
    // polish: a few exact steps pull the residual to rounding level
    for _ in 0..4 {
        let next = step_distribution(&probs, w);
        let s: f64 = next.iter().sum();
        probs = next.into_iter().map(|p| p / s).collect();
    }
    debug_assert_eq!(probs.len(), n);
    Ok(StationaryDistribution { probs })
}

fn solve_linear(w: &TransitionMatrix) -> Option<Vec<f64>> {
    let n = w.size();
    // (W^T - I) pi = 0 with the last equation replaced by sum(pi) = 1
    let mut a = DMatrix::from_fn(n, n, |i, j| w.get(j, i) - if i == j { 1.0 } else { 0.0 });
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b)?;
    if x.iter().any(|v| !v.is_finite() || *v < -1e-12) {
        return None;
    }
    let clamped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = clamped.iter().sum();
    let probs: Vec<f64> = clamped.into_iter().map(|p| p / s).collect();
    let candidate = StationaryDistribution { probs };
    (candidate.residual(w) <= 1e-10).then_some(candidate.probs)
}

fn power_iteration(w: &TransitionMatrix) -> Vec<f64> {
    let n = w.size();
    let mut p = vec![1.0 / n as f64; n];
    for _ in 0..POWER_ITERATION_CAP {
        let next = step_distribution(&p, w);
        let delta = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        if delta < POWER_ITERATION_TOL {
            break;
        }
    }
    p
}

/// `eps^(k)`: the flip probability of `k` steps of a binary symmetric chain.
///
/// Iterates `eps^(k) = eps^(k-1) * eps` (binary convolution), which equals the
/// off-diagonal entry of the `k`-th matrix power; `eps^(0) = 0`.
pub fn binary_k_step_flip(eps: f64, k: u32) -> Result<f64> {
    if !(0.0..=0.5).contains(&eps) {
        return Err(Error::Domain {
            name: "eps",
            value: eps,
            domain: "[0, 1/2]",
        });
    }
    let mut e = 0.0;
    for _ in 0..k {
        e = e * (1.0 - eps) + (1.0 - e) * eps;
    }
    Ok(e)
}

/// A stationary ergodic Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChainModel {
    w1: TransitionMatrix,
    pi: StationaryDistribution,
}

impl MarkovChainModel {
    pub fn new(w1: TransitionMatrix) -> Result<Self> {
        let pi = stationary_distribution(&w1)?;
        Ok(Self { w1, pi })
    }

    pub fn binary_symmetric(eps: f64) -> Result<Self> {
        Self::new(TransitionMatrix::binary_symmetric(eps)?)
    }

    /// A chain whose every row is `dist`: the i.i.d. process.
    pub fn memoryless(dist: &[f64]) -> Result<Self> {
        Self::new(TransitionMatrix::new(vec![dist.to_vec(); dist.len()])?)
    }

    pub fn transition(&self) -> &TransitionMatrix {
        &self.w1
    }

    pub fn stationary(&self) -> &StationaryDistribution {
        &self.pi
    }

    pub fn alphabet_size(&self) -> usize {
        self.w1.size()
    }

    /// `w_k`; for `k = 0` every row equals `pi` (the `w_0(a|b) = pi(a)` convention).
    pub fn k_step_transition(&self, k: u32) -> TransitionMatrix {
        if k == 0 {
            TransitionMatrix::with_equal_rows(self.pi.probs())
        } else {
            self.w1.power(k)
        }
    }

    /// Law of `Y_i` given `Y_{i-d}`: the `d`-th matrix power, identity at `d = 0`
    /// (the delayed and current state coincide).
    pub fn delay_kernel(&self, d: u32) -> TransitionMatrix {
        self.w1.power(d)
    }

    /// `y_1 ~ pi`, `y_i | y_{i-1} ~ w1`, driven by the caller's generator.
    pub fn sample_path_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        let mut path = Vec::with_capacity(n);
        if n == 0 {
            return path;
        }
        let mut state = sample_index(self.pi.probs(), rng);
        path.push(state);
        for _ in 1..n {
            state = sample_index(self.w1.row(state), rng);
            path.push(state);
        }
        path
    }

    pub fn sample_path(&self, n: usize, seed: u64) -> Vec<usize> {
        self.sample_path_with(n, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Inverse-CDF draw from a probability vector.
pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the total: take the last state with mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_state() -> TransitionMatrix {
        TransitionMatrix::new(vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.8, 0.1], vec![0.3, 0.3, 0.4]]).unwrap()
    }

    #[test]
    fn binary_symmetric_is_uniform() {
        let m = MarkovChainModel::binary_symmetric(0.1).unwrap();
        assert!((m.stationary().get(0) - 0.5).abs() < 1e-15);
        assert!((m.stationary().get(1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_rows_give_uniform_pi() {
        let m = MarkovChainModel::memoryless(&[0.25; 4]).unwrap();
        for &p in m.stationary().probs() {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn three_state_pi_matches_long_run_frequencies() {
        let m = MarkovChainModel::new(three_state()).unwrap();
        let pi = m.stationary();
        assert!(pi.residual(m.transition()) <= 1e-12);
        assert!((pi.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let n = 1_000_000;
        let path = m.sample_path(n, 7);
        // batch means give a standard error that accounts for correlation
        let batches = 100;
        let len = n / batches;
        for a in 0..3 {
            let means: Vec<f64> = path
                .chunks(len)
                .map(|c| c.iter().filter(|&&s| s == a).count() as f64 / len as f64)
                .collect();
            let mean = means.iter().sum::<f64>() / batches as f64;
            let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
            let se = (var / batches as f64).sqrt();
            assert!(
                (mean - pi.get(a)).abs() < 4.0 * se,
                "state {a}: {mean} vs {} (se {se})",
                pi.get(a)
            );
        }
    }

    #[test]
    fn three_state_pi_solves_fixed_point() {
        // independent route: power iteration from a point mass
        let w = three_state();
        let mut p = vec![1.0, 0.0, 0.0];
        for _ in 0..10_000 {
            p = step_distribution(&p, &w);
        }
        let pi = stationary_distribution(&w).unwrap();
        for a in 0..3 {
            assert!((p[a] - pi.get(a)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_reducible_and_periodic_chains() {
        let reducible = TransitionMatrix::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        assert!(matches!(stationary_distribution(&reducible), Err(Error::NotErgodic(_))));
        let periodic = TransitionMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(MarkovChainModel::new(periodic), Err(Error::NotErgodic(_))));
        let three_cycle =
            TransitionMatrix::new(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
        assert!(check_ergodic(&three_cycle).is_err());
    }

    #[test]
    fn validation_renormalizes_or_rejects() {
        let m = TransitionMatrix::new(vec![vec![0.5 + 4e-10, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!((m.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(TransitionMatrix::new(vec![vec![0.6, 0.5], vec![0.5, 0.5]]).is_err());
        assert!(TransitionMatrix::new(vec![vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
        assert!(TransitionMatrix::new(vec![vec![1.0], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn k_step_conventions() {
        let m = MarkovChainModel::binary_symmetric(0.1).unwrap();
        assert_eq!(m.k_step_transition(1), *m.transition());
        let w2 = m.k_step_transition(2);
        assert!((w2.get(0, 1) - 0.18).abs() < 1e-15);
        let w0 = m.k_step_transition(0);
        for row in w0.rows() {
            assert_eq!(row, m.stationary().probs());
        }
        assert_eq!(m.delay_kernel(0), TransitionMatrix::identity(2));
    }

    #[test]
    fn binary_flip_values() {
        assert_eq!(binary_k_step_flip(0.1, 0).unwrap(), 0.0);
        assert_eq!(binary_k_step_flip(0.1, 1).unwrap(), 0.1);
        assert!((binary_k_step_flip(0.1, 2).unwrap() - 0.18).abs() < 1e-15);
        // closed form (1 - (1 - 2 eps)^k) / 2
        assert!((binary_k_step_flip(0.1, 3).unwrap() - 0.244).abs() < 1e-15);
        assert!((binary_k_step_flip(0.1, 50).unwrap() - 0.5 * (1.0 - 0.8f64.powi(50))).abs() < 1e-15);
        assert!((binary_k_step_flip(0.1, 100).unwrap() - 0.5).abs() < 1e-9);
        assert!(binary_k_step_flip(0.6, 1).is_err());
        assert!(binary_k_step_flip(-0.1, 1).is_err());
    }

    #[test]
    fn one_state_chain_is_constant() {
        let m = MarkovChainModel::new(TransitionMatrix::new(vec![vec![1.0]]).unwrap()).unwrap();
        assert_eq!(m.sample_path(5, 1), vec![0; 5]);
    }

    #[test]
    fn flip_frequency_matches_eps() {
        let m = MarkovChainModel::binary_symmetric(0.1).unwrap();
        let n = 1_000_000;
        let path = m.sample_path(n, 11);
        let flips = path.windows(2).filter(|w| w[0] != w[1]).count();
        let freq = flips as f64 / (n - 1) as f64;
        let se = (0.1 * 0.9 / (n - 1) as f64).sqrt();
        assert!((freq - 0.1).abs() < 3.0 * se, "{freq}");
        assert_eq!(path, m.sample_path(n, 11));
    }
}
