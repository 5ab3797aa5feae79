use anyhow::{bail, Context, Result};
use dsic::analytic::{binary_rd, gaussian_rd, BinaryHmmParams, Exactness, GaussMarkovParams};
use dsic::codec::{empirical_rate, CausalityProbe, Codec, CodecConfig, CodecMessage};
use dsic::hmm::HmmModel;
use dsic::solver::{
    conditional_rd, default_u_cardinality, rate_region, DistortionMetric, FiniteJointLaw, SolverOptions,
};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::config::{ExperimentConfig, ModelSpec};
use crate::table::{Cell, Table};

fn par_rows<T: Sync>(
    pool: &ThreadPool,
    items: &[T],
    f: impl Fn(&T) -> Result<Vec<Vec<Cell>>> + Sync,
) -> Result<Vec<Vec<Cell>>> {
    let chunks: Vec<Vec<Vec<Cell>>> = pool.install(|| items.par_iter().map(&f).collect::<Result<_>>())?;
    Ok(chunks.into_iter().flatten().collect())
}

fn solver_options(cfg: &ExperimentConfig) -> SolverOptions {
    SolverOptions {
        seed: cfg.seed,
        ..SolverOptions::default()
    }
}

/// Lossless rate against the delay (one series per `eps`) or against `q`
/// (one series per delay), closed by the entropy-rate bracket.
pub fn run_rate_curve(cfg: &ExperimentConfig, pool: &ThreadPool) -> Result<Table> {
    let mut table = Table::new(vec![
        "series",
        "eps",
        "q",
        "d",
        "rate",
        "bracket_width",
        "provenance",
        "exactness",
    ]);
    let order = cfg.sweep.bracket_order;
    let rows_for = |model: &HmmModel,
                    series: String,
                    eps: Cell,
                    q: Cell,
                    delays: &[u32],
                    asymptote: bool|
     -> Result<Vec<Vec<Cell>>> {
        let mut rows = Vec::new();
        for &d in delays {
            let rate = model.lossless_rate(d as usize)?;
            rows.push(vec![
                series.clone().into(),
                eps.clone(),
                q.clone(),
                d.into(),
                rate.into(),
                Cell::Empty,
                "formula".into(),
                "exact".into(),
            ]);
        }
        if asymptote {
            let b = model.entropy_rate_bounds(order)?;
            rows.push(vec![
                series.into(),
                eps,
                q,
                "inf".into(),
                b.midpoint().into(),
                b.width().into(),
                "formula".into(),
                "bracket".into(),
            ]);
        }
        Ok(rows)
    };
    match &cfg.model {
        ModelSpec::Binary { eps, q } => {
            if let Some(grid) = &cfg.sweep.q {
                let eps = *eps;
                let qs = grid.values();
                let rows = par_rows(pool, &qs, |&q| {
                    let model = HmmModel::binary(eps, q)?;
                    let mut rows = Vec::new();
                    for &d in &cfg.delays {
                        rows.extend(rows_for(&model, format!("d={d}"), eps.into(), q.into(), &[d], false)?);
                    }
                    rows.extend(rows_for(&model, "d=inf".into(), eps.into(), q.into(), &[], true)?);
                    Ok(rows)
                })?;
                // group by series, keeping q order inside each
                let mut series: Vec<String> = cfg.delays.iter().map(|d| format!("d={d}")).collect();
                series.push("d=inf".into());
                for s in series {
                    for r in rows.iter().filter(|r| r[0] == Cell::Text(s.clone())) {
                        table.push(r.clone());
                    }
                }
            } else {
                let list = if cfg.sweep.eps.is_empty() {
                    vec![*eps]
                } else {
                    cfg.sweep.eps.clone()
                };
                let q = *q;
                let rows = par_rows(pool, &list, |&e| {
                    let model = HmmModel::binary(e, q)?;
                    rows_for(&model, format!("eps={e}"), e.into(), q.into(), &cfg.delays, true)
                })?;
                rows.into_iter().for_each(|r| table.push(r));
            }
        }
        ModelSpec::Tables { .. } => {
            let model = cfg.require_hmm("rate-curve")?;
            for r in rows_for(&model, "model".into(), Cell::Empty, Cell::Empty, &cfg.delays, true)? {
                table.push(r);
            }
        }
        ModelSpec::Gaussian { .. } => bail!("rate-curve needs a finite-alphabet model (binary or tables)"),
    }
    Ok(table)
}

fn default_grid(limit: f64) -> Vec<f64> {
    (1..=21).map(|k| limit * k as f64 / 21.0).collect()
}

/// Closed-form rate next to the numerical solver, per delay and distortion.
pub fn run_rd_curve(cfg: &ExperimentConfig, pool: &ThreadPool) -> Result<Table> {
    let mut table = Table::new(vec![
        "d",
        "d1",
        "analytic_rate",
        "solver_rate",
        "discrepancy",
        "exactness",
        "analytic_provenance",
        "solver_provenance",
    ]);
    let opts = solver_options(cfg);
    let explicit = cfg.explicit_distortions();
    let mut points: Vec<(u32, f64)> = Vec::new();
    for &d in &cfg.delays {
        let grid = match (&explicit, &cfg.model) {
            (Some(g), _) => g.clone(),
            (None, ModelSpec::Binary { eps, q }) => {
                default_grid(BinaryHmmParams::new(*eps, *q, d)?.critical_distortion())
            }
            (None, ModelSpec::Gaussian { rho, sigma2_n }) => {
                default_grid(GaussMarkovParams::new(*rho, *sigma2_n, d)?.conditional_variance())
            }
            (None, ModelSpec::Tables { .. }) => default_grid(0.5),
        };
        points.extend(grid.into_iter().map(|d1| (d, d1)));
    }
    let hmm = cfg.hmm()?;
    let rows = par_rows(pool, &points, |&(d, d1)| {
        let analytic = match &cfg.model {
            ModelSpec::Binary { eps, q } => Some(binary_rd(&BinaryHmmParams::new(*eps, *q, d)?, d1)?),
            ModelSpec::Gaussian { rho, sigma2_n } => {
                Some(gaussian_rd(&GaussMarkovParams::new(*rho, *sigma2_n, d)?, d1)?)
            }
            ModelSpec::Tables { .. } => None,
        };
        let solver = hmm.as_ref().map(|model| {
            let law = FiniteJointLaw::from_model(model, d);
            let metric = DistortionMetric::hamming_x(model.x_size(), model.y_size());
            conditional_rd(&law, &metric, d1, &opts)
        });
        let exactness = Exactness::for_delay(d).as_str();
        let (solver_cell, solver_prov) = match &solver {
            Some(Ok(s)) => (Cell::Num(s.rate), "solver"),
            Some(Err(e)) => (Cell::Text(format!("error: {e}")), "solver"),
            None => (Cell::Text("NA".into()), "not_applicable"),
        };
        let discrepancy = match (&analytic, &solver) {
            (Some(a), Some(Ok(s))) => Cell::Num((a.rate - s.rate).abs()),
            _ => Cell::Empty,
        };
        Ok(vec![vec![
            d.into(),
            d1.into(),
            analytic.map_or(Cell::Text("NA".into()), |a| Cell::Num(a.rate)),
            solver_cell,
            discrepancy,
            exactness.into(),
            if analytic.is_some() {
                "formula"
            } else {
                "not_applicable"
            }
            .into(),
            solver_prov.into(),
        ]])
    })?;
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}

/// Corner points and traced boundary of the two-decoder region.
pub fn run_region(cfg: &ExperimentConfig) -> Result<Table> {
    let Some(section) = &cfg.region else {
        bail!("region needs a [region] section with d1 and d2");
    };
    let model = cfg.require_hmm("region")?;
    let law = FiniteJointLaw::from_model(&model, section.delay);
    let metric = DistortionMetric::hamming_x(model.x_size(), model.y_size());
    let mut opts = solver_options(cfg);
    if let Some(l) = &section.lambdas {
        opts.region_weights = l.clone();
    }
    let u = section.u_cardinality.unwrap_or_else(|| default_u_cardinality(&law));
    let region = rate_region(&law, &metric, &metric, section.d1, section.d2, u, &opts)?;
    let mut table = Table::new(vec![
        "lambda",
        "corner",
        "rate",
        "delta_rate",
        "sum_rate",
        "d1",
        "d2",
        "u_cardinality",
        "provenance",
    ]);
    for p in &region.points {
        table.push(vec![
            p.lambda.into(),
            p.corner.map_or(Cell::Empty, |c| Cell::Text(format!("{c:?}"))),
            p.rate.into(),
            p.delta_rate.into(),
            p.sum_rate().into(),
            p.d1.into(),
            p.d2.into(),
            u.into(),
            "solver".into(),
        ]);
    }
    Ok(table)
}

/// Encodes sampled sequences, checks the roundtrip, and compares the
/// measured rate with the lossless rate.
pub fn run_codec_bench(cfg: &ExperimentConfig, pool: &ThreadPool) -> Result<Table> {
    let model = cfg.require_hmm("codec-bench")?;
    let mut table = Table::new(vec![
        "n",
        "d",
        "seed",
        "payload_bits",
        "header_bytes",
        "empirical_rate",
        "formula_rate",
        "relative_gap",
        "within_bound",
        "roundtrip",
        "provenance",
    ]);
    let mut points = Vec::new();
    for &n in &cfg.codec.n {
        for &d in &cfg.delays {
            for &seed in &cfg.codec.seeds {
                points.push((n, d as usize, seed));
            }
        }
    }
    let rows = par_rows(pool, &points, |&(n, d, seed)| {
        let (x, y) = model.sample_joint(n, seed);
        let config = CodecConfig {
            d,
            x_fill: cfg.codec.x_fill,
            y_fill: cfg.codec.y_fill,
        };
        let codec = Codec::new(&model, config)?;
        let msg = codec.encode_block(&x, &y)?;
        let parsed = CodecMessage::from_bytes(&msg.to_bytes())?;
        let mut probe = CausalityProbe::new(&y, d);
        let back = codec
            .decode_block(&parsed, &mut probe)
            .with_context(|| format!("decoding n={n} d={d} seed={seed}"))?;
        if let Some(i) = back.iter().zip(&x).position(|(a, b)| a != b) {
            bail!(
                "roundtrip mismatch at n={n} d={d} seed={seed}, first at position {}",
                i + 1
            );
        }
        let rate = empirical_rate(msg.payload_bits(), n);
        let formula = model.lossless_rate(d)?;
        let gap = rate - formula;
        let relative = if formula > 0.0 {
            Cell::Num(gap / formula)
        } else {
            Cell::Empty
        };
        let within = gap.abs() <= 0.02 * formula + 64.0 / n as f64;
        Ok(vec![vec![
            n.into(),
            d.into(),
            seed.into(),
            msg.payload_bits().into(),
            msg.header_len().into(),
            rate.into(),
            formula.into(),
            relative,
            within.to_string().into(),
            "exact".into(),
            "empirical".into(),
        ]])
    })?;
    rows.into_iter().for_each(|r| table.push(r));
    Ok(table)
}
