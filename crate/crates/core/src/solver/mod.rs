//! Numerical rate-distortion solvers on finite alphabets.
//!
//! Every reported rate comes with the test channel that achieves it, so the
//! value can be recomputed from scratch with [`TestChannel::joint_table`].

mod blahut;
mod law;
mod layered;
mod region;

pub use law::{DistortionMetric, FiniteJointLaw, JointTable};
pub use region::{Corner, RdRegion, RegionPoint};

use std::f64::consts::LN_2;

use blahut::{Block, BlockProblem, Slope};
use layered::{Layered, LayeredSolution, Outputs};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Blahut-Arimoto stops once the per-block duality gap (nats) is below this.
    pub gap_tolerance: f64,
    /// Relative Lagrangian change that stops the layered iteration.
    pub improvement_tolerance: f64,
    /// Bisection on the slope stops once the bracketing distortions are this close.
    pub distortion_tolerance: f64,
    pub max_bisection: usize,
    /// Largest certified duality gap (bits) accepted as converged.
    pub max_duality_gap: f64,
    /// Random starts in addition to the uniform and U-unused ones.
    pub restarts: usize,
    pub seed: u64,
    /// Interior weights used to trace the region between its corners.
    pub region_weights: Vec<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100_000,
            gap_tolerance: 1e-12,
            improvement_tolerance: 1e-12,
            distortion_tolerance: 1e-9,
            max_bisection: 200,
            max_duality_gap: 1e-6,
            restarts: 5,
            seed: 0,
            region_weights: vec![0.25, 0.5, 0.75],
        }
    }
}

/// Variable positions in [`TestChannel::joint_table`].
pub mod var {
    pub const YD: usize = 0;
    pub const Y: usize = 1;
    pub const X: usize = 2;
    pub const Z1: usize = 3;
    pub const U: usize = 4;
    pub const Z2: usize = 5;
}

/// `p(z1, u, z2 | y_d, y, x)` together with the source law it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct TestChannel {
    pub law: FiniteJointLaw,
    pub z1_size: usize,
    pub u_size: usize,
    pub z2_size: usize,
    /// Row per source state, `z2` fastest.
    pub table: Vec<f64>,
}

impl TestChannel {
    pub fn joint_table(&self) -> JointTable {
        let block = self.z1_size * self.u_size * self.z2_size;
        let probs = self
            .law
            .table()
            .iter()
            .enumerate()
            .flat_map(|(s, &p)| self.table[s * block..(s + 1) * block].iter().map(move |q| p * q))
            .collect();
        JointTable::new(
            vec![
                self.law.yd_size(),
                self.law.y_size(),
                self.law.x_size(),
                self.z1_size,
                self.u_size,
                self.z2_size,
            ],
            probs,
        )
    }

    pub fn distortion1(&self, metric: &DistortionMetric) -> f64 {
        self.joint_table()
            .expectation(|v| metric.at(v[var::X], v[var::Y], v[var::Z1]))
    }

    pub fn distortion2(&self, metric: &DistortionMetric) -> f64 {
        self.joint_table()
            .expectation(|v| metric.at(v[var::X], v[var::Y], v[var::Z2]))
    }

    /// `I(XY; Z1 | Y_d) + I(X; Z2 | Y Y_d Z1)` in bits.
    pub fn two_phase_rate(&self) -> f64 {
        use var::*;
        let t = self.joint_table();
        t.conditional_mi(&[X, Y], &[Z1], &[YD]) + t.conditional_mi(&[X], &[Z2], &[Y, YD, Z1])
    }

    /// `I(Y; Z1 | Y_d) + I(X; Z1 Z2 | Y Y_d)` in bits.
    pub fn split_rate(&self) -> f64 {
        use var::*;
        let t = self.joint_table();
        t.conditional_mi(&[Y], &[Z1], &[YD]) + t.conditional_mi(&[X], &[Z1, Z2], &[Y, YD])
    }

    /// `I(Y; Z1 | Y_d) + I(X; Z1 U | Y Y_d)` in bits.
    pub fn first_decoder_rate(&self) -> f64 {
        use var::*;
        let t = self.joint_table();
        t.conditional_mi(&[Y], &[Z1], &[YD]) + t.conditional_mi(&[X], &[Z1, U], &[Y, YD])
    }

    /// `I(Y; Z1 | Y_d) + I(X; Z1 Z2 U | Y Y_d)` in bits.
    pub fn sum_rate(&self) -> f64 {
        use var::*;
        let t = self.joint_table();
        t.conditional_mi(&[Y], &[Z1], &[YD]) + t.conditional_mi(&[X], &[Z1, Z2, U], &[Y, YD])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdSolution {
    /// Bits per source letter.
    pub rate: f64,
    pub distortion: f64,
    /// Certified lower bound on the optimum (bits).
    pub lower_bound: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub channel: TestChannel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoDecoderSolution {
    /// `I(XY; Z1 | Y_d) + I(X; Z2 | Y Y_d Z1)` at the optimizer, bits.
    pub rate: f64,
    /// `I(Y; Z1 | Y_d) + I(X; Z1 Z2 | Y Y_d)` at the same channel.
    pub rate_alternative: f64,
    pub distortion1: f64,
    pub distortion2: f64,
    pub iterations: usize,
    pub channel: TestChannel,
}

fn check_target(name: &'static str, value: f64) -> Result<()> {
    if !(value >= 0.0) || !value.is_finite() {
        return Err(Error::Domain {
            name,
            value,
            domain: "[0, inf)",
        });
    }
    Ok(())
}

fn finish(
    problem: &BlockProblem,
    sol: blahut::TargetSolution,
    channel: TestChannel,
    opts: &SolverOptions,
) -> Result<RdSolution> {
    let rate = sol.rate / LN_2;
    let lower_bound = (sol.lower_bound / LN_2).min(rate);
    let gap = rate - lower_bound;
    if gap > opts.max_duality_gap {
        return Err(Error::NotConverged {
            iterations: sol.iterations,
            gap,
        });
    }
    debug_assert!((problem.distortion(&sol.channels) - sol.distortion).abs() < 1e-12);
    Ok(RdSolution {
        rate,
        distortion: sol.distortion,
        lower_bound,
        duality_gap: gap,
        iterations: sol.iterations,
        channel,
    })
}

/// Minimum of `I(X; Z1 | Y_d)` subject to `E d(X, Z1) <= target`, for a
/// metric that ignores `y`.
pub fn conditional_rd(
    law: &FiniteJointLaw,
    metric: &DistortionMetric,
    target: f64,
    opts: &SolverOptions,
) -> Result<RdSolution> {
    check_target("D1", target)?;
    metric.check_against(law, "metric")?;
    if metric.depends_on_y() {
        return Err(Error::Validation(
            "conditional_rd needs a metric that does not depend on y".into(),
        ));
    }
    let reduced = law.without_y();
    let (nx, nz) = (law.x_size(), metric.z_size());
    let blocks = reduced
        .table()
        .chunks(nx)
        .map(|row| block_from(row, nz, |s, z| metric.at(s, 0, z)))
        .collect();
    let problem = BlockProblem { nz, blocks };
    let sol = problem.solve_target(target, opts)?;
    let mut table = Vec::with_capacity(law.states() * nz);
    for yd in 0..law.yd_size() {
        for _ in 0..law.y_size() {
            table.extend_from_slice(&sol.channels[yd]);
        }
    }
    let channel = TestChannel {
        law: law.clone(),
        z1_size: nz,
        u_size: 1,
        z2_size: 1,
        table,
    };
    finish(&problem, sol, channel, opts)
}

fn block_from(row: &[f64], nz: usize, dist: impl Fn(usize, usize) -> f64) -> Block {
    let weight: f64 = row.iter().sum();
    let source = if weight > 0.0 {
        row.iter().map(|p| p / weight).collect()
    } else {
        vec![1.0 / row.len() as f64; row.len()]
    };
    let mut d = Vec::with_capacity(row.len() * nz);
    for s in 0..row.len() {
        for z in 0..nz {
            d.push(dist(s, z));
        }
    }
    Block {
        weight,
        source,
        dist: d,
    }
}

/// Minimum of `I(XY; Z1 | Y_d)` subject to `E d(X, Y, Z1) <= target`.
pub fn general_conditional_rd(
    law: &FiniteJointLaw,
    metric: &DistortionMetric,
    target: f64,
    opts: &SolverOptions,
) -> Result<RdSolution> {
    check_target("D1", target)?;
    metric.check_against(law, "metric")?;
    let (nx, nz) = (law.x_size(), metric.z_size());
    let blocks = law
        .table()
        .chunks(law.y_size() * nx)
        .map(|row| block_from(row, nz, |s, z| metric.at(s % nx, s / nx, z)))
        .collect();
    let problem = BlockProblem { nz, blocks };
    let sol = problem.solve_target(target, opts)?;
    let table = sol.channels.iter().flatten().copied().collect();
    let channel = TestChannel {
        law: law.clone(),
        z1_size: nz,
        u_size: 1,
        z2_size: 1,
        table,
    };
    finish(&problem, sol, channel, opts)
}

fn min_distortion(law: &FiniteJointLaw, metric: &DistortionMetric) -> f64 {
    let (ny, nx) = (law.y_size(), law.x_size());
    law.table()
        .iter()
        .enumerate()
        .map(|(s, p)| {
            let (y, x) = ((s / nx) % ny, s % nx);
            p * (0..metric.z_size())
                .map(|z| metric.at(x, y, z))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

struct Mixed {
    table: Vec<f64>,
    d1: f64,
    d2: f64,
    outputs: Outputs,
    iterations: usize,
}

impl From<LayeredSolution> for Mixed {
    fn from(s: LayeredSolution) -> Self {
        Mixed {
            table: s.table,
            d1: s.d1,
            d2: s.d2,
            outputs: s.outputs,
            iterations: s.iterations,
        }
    }
}

fn mix(lo: Mixed, hi: Mixed, theta: f64, iterations: usize) -> Mixed {
    let table = lo
        .table
        .iter()
        .zip(&hi.table)
        .map(|(a, b)| theta * a + (1.0 - theta) * b)
        .collect();
    Mixed {
        table,
        d1: theta * lo.d1 + (1.0 - theta) * hi.d1,
        d2: theta * lo.d2 + (1.0 - theta) * hi.d2,
        outputs: if theta >= 0.5 { lo.outputs } else { hi.outputs },
        iterations,
    }
}

/// Bisection on one slope with the other held fixed. `pick` reads the
/// distortion that the bisected slope controls.
fn bisect(
    target: f64,
    opts: &SolverOptions,
    pick: fn(&Mixed) -> f64,
    mut solve: impl FnMut(Slope, Option<&Outputs>) -> Mixed,
    warm: Option<&Outputs>,
) -> Mixed {
    let zero = solve(Slope::Zero, warm);
    if pick(&zero) <= target {
        return zero;
    }
    let top = solve(Slope::Infinite, Some(&zero.outputs));
    if pick(&top) >= target - opts.distortion_tolerance {
        return top;
    }
    let mut iterations = zero.iterations + top.iterations;
    let (mut t_lo, mut lo) = (0.0, zero);
    let (mut t_hi, mut hi) = (1.0, top);
    for _ in 0..opts.max_bisection {
        if pick(&lo) - pick(&hi) <= opts.distortion_tolerance || t_hi - t_lo < 1e-15 {
            break;
        }
        let t = 0.5 * (t_lo + t_hi);
        let from = if t - t_lo < t_hi - t { &lo.outputs } else { &hi.outputs };
        let mid = solve(Slope::from_unit(t), Some(from));
        iterations += mid.iterations;
        if pick(&mid) > target {
            t_lo = t;
            lo = mid;
        } else {
            t_hi = t;
            hi = mid;
        }
    }
    let span = pick(&lo) - pick(&hi);
    let theta = if span > 0.0 {
        ((target - pick(&hi)) / span).clamp(0.0, 1.0)
    } else {
        0.0
    };
    mix(lo, hi, theta, iterations)
}

fn solve_layered(layered: &Layered, d1: f64, d2: f64, opts: &SolverOptions) -> Mixed {
    let inner = |s2: Slope, warm: Option<&Outputs>| -> Mixed {
        let mut first = true;
        bisect(
            d1,
            opts,
            |m| m.d1,
            |s1, w| {
                let multistart = first;
                first = false;
                layered.solve(s1, s2, w, multistart, opts).into()
            },
            warm,
        )
    };
    bisect(d2, opts, |m| m.d2, inner, None)
}

fn check_feasible(law: &FiniteJointLaw, metric: &DistortionMetric, target: f64, opts: &SolverOptions) -> Result<()> {
    let minimum = min_distortion(law, metric);
    if target < minimum - opts.distortion_tolerance {
        return Err(Error::Infeasible { target, minimum });
    }
    Ok(())
}

/// Minimum of `I(XY; Z1 | Y_d) + I(X; Z2 | Y Y_d Z1)` subject to
/// `E d1 <= d1_target` and `E d2 <= d2_target`.
pub fn two_decoder_rate(
    law: &FiniteJointLaw,
    metric1: &DistortionMetric,
    metric2: &DistortionMetric,
    d1_target: f64,
    d2_target: f64,
    opts: &SolverOptions,
) -> Result<TwoDecoderSolution> {
    check_target("D1", d1_target)?;
    check_target("D2", d2_target)?;
    metric1.check_against(law, "first metric")?;
    metric2.check_against(law, "second metric")?;
    check_feasible(law, metric1, d1_target, opts)?;
    check_feasible(law, metric2, d2_target, opts)?;
    let layered = Layered {
        law,
        m1: metric1,
        m2: metric2,
        n1: metric1.z_size(),
        nu: 1,
        n2: metric2.z_size(),
        weight: 1.0,
    };
    let m = solve_layered(&layered, d1_target, d2_target, opts);
    let channel = TestChannel {
        law: law.clone(),
        z1_size: layered.n1,
        u_size: 1,
        z2_size: layered.n2,
        table: m.table,
    };
    Ok(TwoDecoderSolution {
        rate: channel.two_phase_rate(),
        rate_alternative: channel.split_rate(),
        distortion1: channel.distortion1(metric1),
        distortion2: channel.distortion2(metric2),
        iterations: m.iterations,
        channel,
    })
}

/// Default auxiliary alphabet size `|X| |Y| |Y_d| + 2`. This is a heuristic:
/// no cardinality bound is known for the auxiliary variable.
pub fn default_u_cardinality(law: &FiniteJointLaw) -> usize {
    law.x_size() * law.y_size() * law.yd_size() + 2
}

/// Traces the `(R, Delta R)` region at distortions `(d1, d2)` with an
/// auxiliary alphabet of `u_cardinality` letters.
pub fn rate_region(
    law: &FiniteJointLaw,
    metric1: &DistortionMetric,
    metric2: &DistortionMetric,
    d1_target: f64,
    d2_target: f64,
    u_cardinality: usize,
    opts: &SolverOptions,
) -> Result<RdRegion> {
    if u_cardinality == 0 {
        return Err(Error::Validation("u_cardinality must be at least 1".into()));
    }
    check_target("D1", d1_target)?;
    check_target("D2", d2_target)?;
    metric1.check_against(law, "first metric")?;
    metric2.check_against(law, "second metric")?;
    check_feasible(law, metric1, d1_target, opts)?;
    check_feasible(law, metric2, d2_target, opts)?;

    let mut points = Vec::new();
    let mut certificates = Vec::new();
    let a = corner_a(law, metric1, metric2, d1_target, d2_target, u_cardinality, opts)?;
    points.push(RegionPoint::from_channel(&a, metric1, metric2, 1.0, Some(Corner::A)));
    certificates.push(a);
    let weights = opts
        .region_weights
        .iter()
        .map(|&l| (l, None))
        .chain([(0.0, Some(Corner::B))]);
    for (lambda, corner) in weights {
        let layered = Layered {
            law,
            m1: metric1,
            m2: metric2,
            n1: metric1.z_size(),
            nu: u_cardinality,
            n2: metric2.z_size(),
            weight: 1.0 - lambda,
        };
        let m = solve_layered(&layered, d1_target, d2_target, opts);
        let channel = TestChannel {
            law: law.clone(),
            z1_size: layered.n1,
            u_size: u_cardinality,
            z2_size: layered.n2,
            table: m.table,
        };
        let mut point = RegionPoint::from_channel(&channel, metric1, metric2, lambda, corner);
        if corner == Some(Corner::B) {
            // all of the sum rate on the first description
            point.rate = point.sum_rate();
            point.delta_rate = 0.0;
        }
        points.push(point);
        certificates.push(channel);
    }
    Ok(RdRegion::new(points, certificates, u_cardinality))
}

/// Corner with the smallest first-decoder rate: the first description is an
/// optimal point-to-point one, and the refinement is the cheapest given it.
fn corner_a(
    law: &FiniteJointLaw,
    metric1: &DistortionMetric,
    metric2: &DistortionMetric,
    d1_target: f64,
    d2_target: f64,
    u_cardinality: usize,
    opts: &SolverOptions,
) -> Result<TestChannel> {
    let first = general_conditional_rd(law, metric1, d1_target, opts)?;
    let (ny, nx) = (law.y_size(), law.x_size());
    let (n1, n2) = (metric1.z_size(), metric2.z_size());
    // blocks indexed by (y_d, y, z1); source letter x
    let mut blocks = Vec::with_capacity(law.yd_size() * ny * n1);
    for yd in 0..law.yd_size() {
        for y in 0..ny {
            for z1 in 0..n1 {
                let row: Vec<f64> = (0..nx)
                    .map(|x| {
                        let s = (yd * ny + y) * nx + x;
                        law.table()[s] * first.channel.table[s * n1 + z1]
                    })
                    .collect();
                blocks.push(block_from(&row, n2, |x, z| metric2.at(x, y, z)));
            }
        }
    }
    let problem = BlockProblem { nz: n2, blocks };
    let second = problem.solve_target(d2_target, opts)?;
    let gap = (second.rate - second.lower_bound) / LN_2;
    if gap > opts.max_duality_gap {
        return Err(Error::NotConverged {
            iterations: second.iterations,
            gap,
        });
    }
    let mut table = vec![0.0; law.states() * n1 * u_cardinality * n2];
    let block = n1 * u_cardinality * n2;
    for s in 0..law.states() {
        let (yd, y, x) = (s / (ny * nx), (s / nx) % ny, s % nx);
        for z1 in 0..n1 {
            let q1 = first.channel.table[s * n1 + z1];
            let q2 = &second.channels[(yd * ny + y) * n1 + z1];
            for z2 in 0..n2 {
                table[s * block + z1 * u_cardinality * n2 + z2] = q1 * q2[x * n2 + z2];
            }
        }
    }
    Ok(TestChannel {
        law: law.clone(),
        z1_size: n1,
        u_size: u_cardinality,
        z2_size: n2,
        table,
    })
}
