//! Alternating minimization for the nested test channel
//! `p(z1 | x, y, y_d) p(u | x, y, y_d, z1) p(z2 | x, y, y_d, z1, u)`
//! with objective
//! `I(XY; Z1 | Y_d) + I(X; U | Y Y_d Z1) + w I(X; Z2 | Y Y_d Z1 U)`.
//! Internally in nats.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::blahut::Slope;
use super::law::{DistortionMetric, FiniteJointLaw};
use super::SolverOptions;
use crate::info::CompensatedSum;

const TIE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub(crate) struct Outputs {
    r1: Vec<f64>,
    ru: Vec<f64>,
    r2: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct LayeredSolution {
    /// `p(z1, u, z2 | s)` at `s * (n1 nu n2) + (z1 nu + u) n2 + z2`.
    pub table: Vec<f64>,
    pub d1: f64,
    pub d2: f64,
    pub lagrangian: f64,
    pub outputs: Outputs,
    pub iterations: usize,
}

pub(crate) struct Layered<'a> {
    pub law: &'a FiniteJointLaw,
    pub m1: &'a DistortionMetric,
    pub m2: &'a DistortionMetric,
    pub n1: usize,
    pub nu: usize,
    pub n2: usize,
    pub weight: f64,
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn normalize_rows(acc: &[f64], prev: &[f64], width: usize) -> Vec<f64> {
    let mut out = prev.to_vec();
    for (row, (a, o)) in acc.chunks(width).zip(out.chunks_mut(width)).enumerate() {
        let _ = row;
        let t: f64 = a.iter().sum();
        if t > 0.0 {
            for (dst, v) in o.iter_mut().zip(a) {
                *dst = v / t;
            }
        }
    }
    out
}

fn floored(v: &[f64], width: usize) -> Vec<f64> {
    let floor = 1e-9 / width as f64;
    let mut out: Vec<f64> = v.iter().map(|x| x.max(floor)).collect();
    for row in out.chunks_mut(width) {
        let t: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= t);
    }
    out
}

impl<'a> Layered<'a> {
    fn ny(&self) -> usize {
        self.law.y_size()
    }

    fn nx(&self) -> usize {
        self.law.x_size()
    }

    fn block(&self) -> usize {
        self.n1 * self.nu * self.n2
    }

    fn sizes(&self) -> (usize, usize, usize) {
        let c1 = self.law.yd_size();
        let cu = c1 * self.ny() * self.n1;
        (c1 * self.n1, cu * self.nu, cu * self.nu * self.n2)
    }

    pub fn uniform(&self) -> Outputs {
        let (a, b, c) = self.sizes();
        Outputs {
            r1: vec![1.0 / self.n1 as f64; a],
            ru: vec![1.0 / self.nu as f64; b],
            r2: vec![1.0 / self.n2 as f64; c],
        }
    }

    fn u_unused(&self) -> Outputs {
        let mut o = self.uniform();
        for row in o.ru.chunks_mut(self.nu) {
            row.iter_mut().enumerate().for_each(|(u, v)| *v = (u == 0) as u8 as f64);
        }
        o
    }

    fn random(&self, rng: &mut ChaCha8Rng) -> Outputs {
        let mut o = self.uniform();
        for (v, w) in [(&mut o.r1, self.n1), (&mut o.ru, self.nu), (&mut o.r2, self.n2)] {
            for row in v.chunks_mut(w) {
                row.iter_mut().for_each(|x| *x = rng.gen::<f64>() + 1e-3);
                let t: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= t);
            }
        }
        o
    }

    /// Solves at the given slopes from each starting point and keeps the
    /// smallest Lagrangian.
    pub fn solve(
        &self,
        s1: Slope,
        s2: Slope,
        warm: Option<&Outputs>,
        multistart: bool,
        opts: &SolverOptions,
    ) -> LayeredSolution {
        let mut starts = Vec::new();
        if let Some(w) = warm {
            starts.push(Outputs {
                r1: floored(&w.r1, self.n1),
                ru: floored(&w.ru, self.nu),
                r2: floored(&w.r2, self.n2),
            });
        }
        if multistart || warm.is_none() {
            starts.push(self.uniform());
            if self.nu > 1 {
                starts.push(self.u_unused());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            for _ in 0..opts.restarts {
                starts.push(self.random(&mut rng));
            }
        }
        let mut best: Option<LayeredSolution> = None;
        for start in starts {
            let sol = self.run(s1, s2, start, opts);
            if best.as_ref().is_none_or(|b| sol.lagrangian < b.lagrangian - 1e-12) {
                best = Some(sol);
            }
        }
        best.expect("at least one start")
    }

    fn run(&self, s1: Slope, s2: Slope, mut out: Outputs, opts: &SolverOptions) -> LayeredSolution {
        let (ny, nx) = (self.ny(), self.nx());
        let (n1, nu, n2) = (self.n1, self.nu, self.n2);
        let w = self.weight;
        let ns = self.law.states();
        let probs = self.law.table();
        let coords = |s: usize| (s / (ny * nx), (s / nx) % ny, s % nx);

        // log kernels relative to the per-state minimum distortion
        let kernel = |m: &DistortionMetric, nz: usize, slope: Slope, scale: f64| -> Vec<f64> {
            let mut k = vec![0.0; ns * nz];
            for s in 0..ns {
                let (_, y, x) = coords(s);
                let dmin = (0..nz).map(|z| m.at(x, y, z)).fold(f64::INFINITY, f64::min);
                for z in 0..nz {
                    let excess = m.at(x, y, z) - dmin;
                    k[s * nz + z] = match slope {
                        Slope::Finite(beta) => -beta * excess / scale,
                        Slope::Infinite if excess > TIE => f64::NEG_INFINITY,
                        _ => 0.0,
                    };
                }
            }
            k
        };
        let k1 = kernel(self.m1, n1, s1, 1.0);
        let k2 = kernel(self.m2, n2, s2, w);

        let zstar1: Vec<usize> = (0..self.law.yd_size())
            .map(|yd| {
                let cost = |z: usize| -> f64 {
                    (0..ny * nx)
                        .map(|j| probs[yd * ny * nx + j] * self.m1.at(j % nx, j / nx, z))
                        .sum()
                };
                let mut best = (0, cost(0));
                for z in 1..n1 {
                    let c = cost(z);
                    if c < best.1 - TIE {
                        best = (z, c);
                    }
                }
                best.0
            })
            .collect();
        let c2_count = out.r2.len() / n2;
        let mut zstar2 = vec![0usize; c2_count];
        if s2 == Slope::Zero {
            // before any channel exists, pick the best letter given (y_d, y)
            for (c2, z) in zstar2.iter_mut().enumerate() {
                let cu = c2 / nu;
                let yy = cu / n1;
                let cost =
                    |zz: usize| -> f64 { (0..nx).map(|x| probs[yy * nx + x] * self.m2.at(x, yy % ny, zz)).sum() };
                let mut best = (0, cost(0));
                for zz in 1..n2 {
                    let c = cost(zz);
                    if c < best.1 - TIE {
                        best = (zz, c);
                    }
                }
                *z = best.0;
            }
        }

        let block = self.block();
        let mut table = vec![0.0; ns * block];
        let mut prev = f64::INFINITY;
        let mut its = 0;
        let mut l2 = vec![0.0; n2];
        let mut q2 = vec![0.0; nu * n2];
        let mut g2 = vec![0.0; nu];
        let mut lu = vec![0.0; nu];
        let mut qu = vec![0.0; n1 * nu];
        let mut gu = vec![0.0; n1];
        let mut l1 = vec![0.0; n1];
        let mut q2_all = vec![0.0; n1 * nu * n2];
        let (d1, d2, lagrangian) = loop {
            its += 1;
            let ln_r1: Vec<f64> = out.r1.iter().map(|v| v.ln()).collect();
            let ln_ru: Vec<f64> = out.ru.iter().map(|v| v.ln()).collect();
            let ln_r2: Vec<f64> = out.r2.iter().map(|v| v.ln()).collect();
            let mut a1 = vec![0.0; out.r1.len()];
            let mut au = vec![0.0; out.ru.len()];
            let mut a2 = vec![0.0; out.r2.len()];
            let mut e2 = vec![0.0; out.r2.len()];
            for s in 0..ns {
                let p = probs[s];
                let row = &mut table[s * block..(s + 1) * block];
                if p == 0.0 {
                    row.iter_mut().for_each(|v| *v = 0.0);
                    continue;
                }
                let (yd, y, x) = coords(s);
                for z1 in 0..n1 {
                    let cu = (yd * ny + y) * n1 + z1;
                    for u in 0..nu {
                        let c2 = cu * nu + u;
                        let q2row = &mut q2[u * n2..(u + 1) * n2];
                        if s2 == Slope::Zero {
                            q2row
                                .iter_mut()
                                .enumerate()
                                .for_each(|(z, v)| *v = (z == zstar2[c2]) as u8 as f64);
                            g2[u] = 0.0;
                        } else {
                            for z2 in 0..n2 {
                                l2[z2] = ln_r2[c2 * n2 + z2] + k2[s * n2 + z2];
                            }
                            let lse = log_sum_exp(&l2);
                            if lse == f64::NEG_INFINITY {
                                let allowed = (0..n2).filter(|z| k2[s * n2 + z] > f64::NEG_INFINITY).count() as f64;
                                for z2 in 0..n2 {
                                    q2row[z2] = if k2[s * n2 + z2] > f64::NEG_INFINITY {
                                        1.0 / allowed
                                    } else {
                                        0.0
                                    };
                                }
                                g2[u] = 0.0;
                            } else {
                                for z2 in 0..n2 {
                                    q2row[z2] = (l2[z2] - lse).exp();
                                }
                                g2[u] = -w * lse;
                            }
                        }
                        lu[u] = ln_ru[cu * nu + u] - g2[u];
                    }
                    let lse = log_sum_exp(&lu);
                    let qurow = &mut qu[z1 * nu..(z1 + 1) * nu];
                    if lse == f64::NEG_INFINITY {
                        qurow.iter_mut().for_each(|v| *v = 1.0 / nu as f64);
                        gu[z1] = 0.0;
                    } else {
                        for u in 0..nu {
                            qurow[u] = (lu[u] - lse).exp();
                        }
                        gu[z1] = -lse;
                    }
                    q2_all[z1 * nu * n2..(z1 + 1) * nu * n2].copy_from_slice(&q2);
                    l1[z1] = ln_r1[yd * n1 + z1] + k1[s * n1 + z1] - gu[z1];
                }
                let mut q1 = vec![0.0; n1];
                if s1 == Slope::Zero {
                    q1[zstar1[yd]] = 1.0;
                } else {
                    let lse = log_sum_exp(&l1);
                    if lse == f64::NEG_INFINITY {
                        let allowed: Vec<usize> = (0..n1).filter(|z| k1[s * n1 + z] > f64::NEG_INFINITY).collect();
                        for &z in &allowed {
                            q1[z] = 1.0 / allowed.len() as f64;
                        }
                    } else {
                        for z1 in 0..n1 {
                            q1[z1] = (l1[z1] - lse).exp();
                        }
                    }
                }
                for z1 in 0..n1 {
                    let m1 = p * q1[z1];
                    a1[yd * n1 + z1] += m1;
                    let cu = (yd * ny + y) * n1 + z1;
                    for u in 0..nu {
                        let mu = m1 * qu[z1 * nu + u];
                        au[cu * nu + u] += mu;
                        let c2 = cu * nu + u;
                        for z2 in 0..n2 {
                            let q = q2_all[(z1 * nu + u) * n2 + z2];
                            a2[c2 * n2 + z2] += mu * q;
                            e2[c2 * n2 + z2] += mu * self.m2.at(x, y, z2);
                            row[(z1 * nu + u) * n2 + z2] = q1[z1] * qu[z1 * nu + u] * q;
                        }
                    }
                }
            }
            out.r1 = normalize_rows(&a1, &out.r1, n1);
            out.ru = normalize_rows(&au, &out.ru, nu);
            out.r2 = normalize_rows(&a2, &out.r2, n2);
            if s2 == Slope::Zero {
                for (c2, z) in zstar2.iter_mut().enumerate() {
                    let costs = &e2[c2 * n2..(c2 + 1) * n2];
                    if costs.iter().any(|c| *c > 0.0) {
                        let mut best = 0;
                        for zz in 1..n2 {
                            if costs[zz] < costs[best] - TIE {
                                best = zz;
                            }
                        }
                        *z = best;
                    }
                }
            }
            let (j, d1, d2) = self.evaluate(&table, &out);
            let mut lag = j;
            if let Slope::Finite(b) = s1 {
                lag += b * d1;
            }
            if let Slope::Finite(b) = s2 {
                lag += b * d2;
            }
            let done = (prev - lag).abs() < opts.improvement_tolerance * lag.abs().max(1.0);
            prev = lag;
            if (done && its > 1) || its >= opts.max_iterations {
                break (d1, d2, lag);
            }
        };
        LayeredSolution {
            table,
            d1,
            d2,
            lagrangian,
            outputs: out,
            iterations: its,
        }
    }

    /// Weighted objective (nats) and both distortions of a full channel table,
    /// using `out` as the induced output laws.
    fn evaluate(&self, table: &[f64], out: &Outputs) -> (f64, f64, f64) {
        let (ny, nx) = (self.ny(), self.nx());
        let (n1, nu, n2) = (self.n1, self.nu, self.n2);
        let block = self.block();
        let probs = self.law.table();
        let mut j = CompensatedSum::new();
        let mut d1 = CompensatedSum::new();
        let mut d2 = CompensatedSum::new();
        for (s, &p) in probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let (yd, y, x) = (s / (ny * nx), (s / nx) % ny, s % nx);
            let row = &table[s * block..(s + 1) * block];
            for z1 in 0..n1 {
                let q1: f64 = row[z1 * nu * n2..(z1 + 1) * nu * n2].iter().sum();
                if q1 <= 0.0 {
                    continue;
                }
                d1.add(p * q1 * self.m1.at(x, y, z1));
                j.add(p * q1 * (q1 / out.r1[yd * n1 + z1]).ln());
                let cu = (yd * ny + y) * n1 + z1;
                for u in 0..nu {
                    let qzu: f64 = row[(z1 * nu + u) * n2..(z1 * nu + u + 1) * n2].iter().sum();
                    if qzu <= 0.0 {
                        continue;
                    }
                    let qu = qzu / q1;
                    j.add(p * qzu * (qu / out.ru[cu * nu + u]).ln());
                    let c2 = cu * nu + u;
                    for z2 in 0..n2 {
                        let q = row[(z1 * nu + u) * n2 + z2];
                        if q <= 0.0 {
                            continue;
                        }
                        d2.add(p * q * self.m2.at(x, y, z2));
                        j.add(self.weight * p * q * ((q / qzu) / out.r2[c2 * n2 + z2]).ln());
                    }
                }
            }
        }
        (j.value(), d1.value(), d2.value())
    }
}
