//! Blahut-Arimoto over independent blocks that share one slope.
//!
//! Each block is a small rate-distortion problem `(p(s), d(s, z))` and the
//! block rates and distortions add with the block weights. Everything in this
//! file works in nats.

use super::SolverOptions;
use crate::error::{Error, Result};
use crate::info::CompensatedSum;

#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub weight: f64,
    pub source: Vec<f64>,
    /// `d(s, z)` at `s * nz + z`.
    pub dist: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct BlockProblem {
    pub nz: usize,
    pub blocks: Vec<Block>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Slope {
    Zero,
    Finite(f64),
    Infinite,
}

impl Slope {
    /// Maps `t` in `[0, 1]` to the slope `t / (1 - t)`.
    pub fn from_unit(t: f64) -> Self {
        if t <= 0.0 {
            Slope::Zero
        } else if t >= 1.0 {
            Slope::Infinite
        } else {
            Slope::Finite(t / (1.0 - t))
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SlopeSolution {
    pub channels: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub distortion: f64,
    /// Intercept of the supporting line: `R(D') >= dual - beta * D'`.
    /// Only meaningful for finite slopes.
    pub dual: f64,
    pub slope: Slope,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct TargetSolution {
    pub channels: Vec<Vec<f64>>,
    pub rate: f64,
    pub distortion: f64,
    pub lower_bound: f64,
    pub iterations: usize,
}

const TIE: f64 = 1e-12;

fn block_min_dist(block: &Block, nz: usize) -> Vec<f64> {
    block
        .dist
        .chunks(nz)
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .collect()
}

/// Reproduction letter minimizing the expected distortion, lowest index on ties.
fn best_constant(block: &Block, nz: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for z in 0..nz {
        let e: f64 = block
            .source
            .iter()
            .enumerate()
            .map(|(s, p)| p * block.dist[s * nz + z])
            .collect::<CompensatedSum>()
            .value();
        if e < best.1 - TIE {
            best = (z, e);
        }
    }
    best
}

impl BlockProblem {
    pub fn min_distortion(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let m = block_min_dist(b, self.nz);
                b.weight * b.source.iter().zip(&m).map(|(p, d)| p * d).sum::<f64>()
            })
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn distortion(&self, channels: &[Vec<f64>]) -> f64 {
        let mut acc = CompensatedSum::new();
        for (b, q) in self.blocks.iter().zip(channels) {
            for (s, p) in b.source.iter().enumerate() {
                for z in 0..self.nz {
                    acc.add(b.weight * p * q[s * self.nz + z] * b.dist[s * self.nz + z]);
                }
            }
        }
        acc.value()
    }

    /// Weighted mutual information of the given channels, in nats.
    pub fn rate(&self, channels: &[Vec<f64>]) -> f64 {
        self.blocks
            .iter()
            .zip(channels)
            .map(|(b, q)| b.weight * block_mi(b, q, self.nz))
            .collect::<CompensatedSum>()
            .value()
    }

    fn zero_slope(&self) -> SlopeSolution {
        let mut channels = Vec::with_capacity(self.blocks.len());
        let mut outputs = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (z, _) = best_constant(b, self.nz);
            let mut q = vec![0.0; b.source.len() * self.nz];
            for s in 0..b.source.len() {
                q[s * self.nz + z] = 1.0;
            }
            let mut r = vec![0.0; self.nz];
            r[z] = 1.0;
            channels.push(q);
            outputs.push(r);
        }
        let distortion = self.distortion(&channels);
        SlopeSolution {
            channels,
            outputs,
            distortion,
            dual: 0.0,
            slope: Slope::Zero,
            iterations: 0,
        }
    }

    pub fn solve_slope(&self, slope: Slope, init: Option<&[Vec<f64>]>, opts: &SolverOptions) -> SlopeSolution {
        if slope == Slope::Zero {
            return self.zero_slope();
        }
        let nz = self.nz;
        let mut channels = Vec::with_capacity(self.blocks.len());
        let mut outputs = Vec::with_capacity(self.blocks.len());
        let mut dual = CompensatedSum::new();
        let mut iterations = 0;
        for (bi, b) in self.blocks.iter().enumerate() {
            let dmin = block_min_dist(b, nz);
            let kernel: Vec<f64> = b
                .dist
                .iter()
                .enumerate()
                .map(|(i, &d)| {
                    let excess = d - dmin[i / nz];
                    match slope {
                        Slope::Finite(beta) => (-beta * excess).exp(),
                        _ => (excess <= TIE) as u8 as f64,
                    }
                })
                .collect();
            let mut r = match init {
                Some(init) if init[bi].iter().any(|v| *v > 0.0) => {
                    // keep every letter alive so the iteration can revive it
                    let floor = 1e-9 / nz as f64;
                    let mut r: Vec<f64> = init[bi].iter().map(|v| v.max(floor)).collect();
                    let t: f64 = r.iter().sum();
                    r.iter_mut().for_each(|v| *v /= t);
                    r
                }
                _ => vec![1.0 / nz as f64; nz],
            };
            let (q, r_out, v, its) = iterate_block(b, &kernel, &dmin, slope, &mut r, nz, opts);
            iterations = iterations.max(its);
            dual.add(b.weight * v);
            channels.push(q);
            outputs.push(r_out);
        }
        let distortion = self.distortion(&channels);
        SlopeSolution {
            channels,
            outputs,
            distortion,
            dual: dual.value(),
            slope,
            iterations,
        }
    }

    /// Minimum weighted rate (nats) subject to distortion at most `target`.
    /// The returned channels meet the target exactly unless the rate-zero
    /// channel already lies below it.
    pub fn solve_target(&self, target: f64, opts: &SolverOptions) -> Result<TargetSolution> {
        let d_min = self.min_distortion();
        if target < d_min - opts.distortion_tolerance {
            return Err(Error::Infeasible { target, minimum: d_min });
        }
        let zero = self.zero_slope();
        if zero.distortion <= target {
            return Ok(TargetSolution {
                rate: self.rate(&zero.channels),
                distortion: zero.distortion,
                channels: zero.channels,
                lower_bound: 0.0,
                iterations: 0,
            });
        }
        let top = self.solve_slope(Slope::Infinite, None, opts);
        if top.distortion >= target - opts.distortion_tolerance {
            let rate = self.rate(&top.channels);
            return Ok(TargetSolution {
                rate,
                distortion: top.distortion,
                lower_bound: top.dual.max(0.0),
                channels: top.channels,
                iterations: top.iterations,
            });
        }
        let (mut t_lo, mut lo) = (0.0, zero);
        let (mut t_hi, mut hi) = (1.0, top);
        let mut iterations = hi.iterations;
        let mut warm = hi.outputs.clone();
        for _ in 0..opts.max_bisection {
            if lo.distortion - hi.distortion <= opts.distortion_tolerance || t_hi - t_lo < 1e-15 {
                break;
            }
            let t = 0.5 * (t_lo + t_hi);
            let mid = self.solve_slope(Slope::from_unit(t), Some(&warm), opts);
            iterations += mid.iterations;
            warm = mid.outputs.clone();
            if mid.distortion > target {
                t_lo = t;
                lo = mid;
            } else {
                t_hi = t;
                hi = mid;
            }
        }
        let theta = if lo.distortion > hi.distortion {
            ((target - hi.distortion) / (lo.distortion - hi.distortion)).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let channels: Vec<Vec<f64>> = lo
            .channels
            .iter()
            .zip(&hi.channels)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| theta * x + (1.0 - theta) * y).collect())
            .collect();
        let rate = self.rate(&channels);
        let distortion = self.distortion(&channels);
        let mut lower_bound: f64 = 0.0;
        for s in [&lo, &hi] {
            if let Slope::Finite(beta) = s.slope {
                lower_bound = lower_bound.max(s.dual - beta * target);
            }
        }
        Ok(TargetSolution {
            channels,
            rate,
            distortion,
            lower_bound,
            iterations,
        })
    }
}

/// Runs Blahut-Arimoto on one block until the duality gap closes. Returns the
/// channel, its output law, the dual intercept and the iteration count.
fn iterate_block(
    b: &Block,
    kernel: &[f64],
    dmin: &[f64],
    slope: Slope,
    r: &mut Vec<f64>,
    nz: usize,
    opts: &SolverOptions,
) -> (Vec<f64>, Vec<f64>, f64, usize) {
    let ns = b.source.len();
    let beta = match slope {
        Slope::Finite(beta) => beta,
        _ => 0.0,
    };
    let shift: f64 = b.source.iter().zip(dmin).map(|(p, d)| p * d).sum::<f64>() * beta;
    let mut q = vec![0.0; ns * nz];
    let mut c = vec![0.0; nz];
    let mut its = 0;
    let mut dual = f64::NEG_INFINITY;
    loop {
        its += 1;
        c.iter_mut().for_each(|v| *v = 0.0);
        let mut log_partition = 0.0;
        for s in 0..ns {
            let row = &kernel[s * nz..(s + 1) * nz];
            let mut zs: f64 = r.iter().zip(row).map(|(a, k)| a * k).sum();
            if zs <= 0.0 || !zs.is_finite() {
                // every admissible letter has vanished; restart from uniform
                r.iter_mut().for_each(|v| *v = 1.0 / nz as f64);
                zs = row.iter().sum::<f64>() / nz as f64;
            }
            let p = b.source[s];
            for z in 0..nz {
                q[s * nz + z] = r[z] * row[z] / zs;
                c[z] += p * row[z] / zs;
            }
            if p > 0.0 {
                log_partition -= p * zs.ln();
            }
        }
        let c_max = c.iter().copied().fold(0.0, f64::max);
        dual = dual.max(shift + log_partition - c_max.ln());
        let mut r_new = vec![0.0; nz];
        for s in 0..ns {
            for z in 0..nz {
                r_new[z] += b.source[s] * q[s * nz + z];
            }
        }
        let mut primal = 0.0;
        for s in 0..ns {
            let p = b.source[s];
            if p == 0.0 {
                continue;
            }
            for z in 0..nz {
                let v = q[s * nz + z];
                if v > 0.0 {
                    primal += p * v * ((v / r_new[z]).ln() + beta * b.dist[s * nz + z]);
                }
            }
        }
        let gap = primal - dual;
        *r = r_new;
        if gap <= opts.gap_tolerance || its >= opts.max_iterations {
            return (q, r.clone(), dual, its);
        }
    }
}

/// `I(S; Z)` in nats for one block.
pub(crate) fn block_mi(b: &Block, q: &[f64], nz: usize) -> f64 {
    let mut r = vec![0.0; nz];
    for (s, p) in b.source.iter().enumerate() {
        for z in 0..nz {
            r[z] += p * q[s * nz + z];
        }
    }
    let mut acc = CompensatedSum::new();
    for (s, p) in b.source.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        for z in 0..nz {
            let v = q[s * nz + z];
            if v > 0.0 {
                acc.add(p * v * (v / r[z]).ln());
            }
        }
    }
    acc.value().max(0.0)
}
