//! Formula-versus-oracle checks, reported as JSON.

use anyhow::Result;
use dsic::analytic::{
    binary_convolve, binary_rd, binary_test_channel_joint, gaussian_conditional_mi, gaussian_rd, gaussian_test_channel,
    BinaryHmmParams, GaussMarkovParams,
};
use dsic::codec::{CausalityProbe, Codec, CodecConfig, CodecMessage, SliceReader};
use dsic::hmm::HmmModel;
use dsic::oracle::BlockLaw;
use dsic::solver::{conditional_rd, DistortionMetric, FiniteJointLaw, SolverOptions};
use dsic::Error;
use serde::Serialize;

use crate::config::{ExperimentConfig, ModelSpec};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub value: Option<f64>,
    pub expected: Option<f64>,
    pub tolerance: Option<f64>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn close(&mut self, suite: &'static str, name: String, value: f64, expected: f64, tol: f64) {
        let passed = (value - expected).abs() <= tol;
        self.0.push(Check {
            suite,
            name,
            value: Some(value),
            expected: Some(expected),
            tolerance: Some(tol),
            passed,
            detail: format!("|diff| = {:e}", (value - expected).abs()),
        });
    }

    fn flag(&mut self, suite: &'static str, name: String, passed: bool, detail: String) {
        self.0.push(Check {
            suite,
            name,
            value: None,
            expected: None,
            tolerance: None,
            passed,
            detail,
        });
    }

    fn error(&mut self, suite: &'static str, name: String, err: impl std::fmt::Display) {
        self.flag(suite, name, false, format!("error: {err}"));
    }
}

pub fn run_validate(cfg: &ExperimentConfig) -> Result<Report> {
    let mut checks = Checks::default();
    if let Some(model) = cfg.hmm()? {
        markov_suite(&mut checks, &model);
        source_suite(&mut checks, &model, &cfg.delays);
        oracle_suite(&mut checks, &model, cfg.validate.block);
        codec_suite(&mut checks, &model, cfg);
        solver_suite(&mut checks, cfg, &model);
    }
    match &cfg.model {
        ModelSpec::Binary { eps, q } => binary_suite(&mut checks, *eps, *q, &cfg.delays),
        ModelSpec::Gaussian { rho, sigma2_n } => gaussian_suite(&mut checks, *rho, *sigma2_n, &cfg.delays),
        ModelSpec::Tables { .. } => {}
    }
    let passed = checks.0.iter().all(|c| c.passed);
    Ok(Report {
        passed,
        checks: checks.0,
    })
}

fn markov_suite(checks: &mut Checks, model: &HmmModel) {
    let chain = model.chain();
    let r = chain.stationary().residual(chain.transition());
    checks.close("markov", "stationary residual".into(), r, 0.0, 1e-12);
    for d in [1u32, 2, 5] {
        let r = chain.stationary().residual(&chain.delay_kernel(d));
        checks.close("markov", format!("stationary under the {d}-step kernel"), r, 0.0, 1e-12);
    }
}

fn source_suite(checks: &mut Checks, model: &HmmModel, delays: &[u32]) {
    let max = delays.iter().copied().max().unwrap_or(0) as usize;
    let rates: Result<Vec<f64>, Error> = (0..=max).map(|d| model.lossless_rate(d)).collect();
    match rates {
        Ok(rates) => {
            let worst = rates.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
            checks.close(
                "hmm_source",
                format!("lossless rate non-decreasing for d <= {max}"),
                worst,
                0.0,
                1e-12,
            );
        }
        Err(e) => checks.error("hmm_source", "lossless rate".into(), e),
    }
}

fn oracle_suite(checks: &mut Checks, model: &HmmModel, n: usize) {
    let law = match BlockLaw::enumerate(model, n) {
        Ok(l) => l,
        Err(e) => return checks.error("oracle", format!("enumerate n={n}"), e),
    };
    for d in 0..=3usize.min(n.saturating_sub(1)) {
        let rate = match model.lossless_rate(d) {
            Ok(r) => r,
            Err(e) => return checks.error("oracle", format!("lossless rate d={d}"), e),
        };
        let worst = (d + 1..=n)
            .map(|i| (law.per_step_conditional_entropy(d, i).expect("step in range") - rate).abs())
            .fold(0.0, f64::max);
        checks.close(
            "oracle",
            format!("per-step entropy equals lossless rate, d={d}, n={n}"),
            worst,
            0.0,
            1e-10,
        );
    }
    checks.close(
        "oracle",
        format!("directed information with d = n = {n}"),
        law.directed_information(n),
        0.0,
        1e-12,
    );
}

fn codec_suite(checks: &mut Checks, model: &HmmModel, cfg: &ExperimentConfig) {
    let n = cfg.validate.roundtrip_n;
    for &d in &cfg.delays {
        let d = d as usize;
        let name = format!("roundtrip n={n} d={d}");
        let config = CodecConfig {
            d,
            x_fill: cfg.codec.x_fill,
            y_fill: cfg.codec.y_fill,
        };
        let (x, y) = model.sample_joint(n, cfg.seed);
        let outcome = Codec::new(model, config).and_then(|codec| {
            let msg = CodecMessage::from_bytes(&codec.encode_block(&x, &y)?.to_bytes())?;
            let mut probe = CausalityProbe::new(&y, d);
            codec.decode_block(&msg, &mut probe)
        });
        match outcome {
            Ok(back) => checks.flag("codec", name, back == x, "decoded under the causality probe".into()),
            Err(e) => checks.error("codec", name, e),
        }
    }
    let (x, y) = model.sample_joint(64.min(n.max(1)), cfg.seed);
    let outcome = Codec::new(model, CodecConfig::new(1)).and_then(|codec| {
        let mut msg = codec.encode_block(&x, &y)?;
        msg.header.digest[0] ^= 1;
        Ok(codec.decode_block(&msg, &mut SliceReader::new(&y)))
    });
    match outcome {
        Ok(Err(Error::Corrupt { position, .. })) => checks.flag(
            "codec",
            "corrupted digest is rejected".into(),
            true,
            format!("corruption error at {position}"),
        ),
        Ok(other) => checks.flag(
            "codec",
            "corrupted digest is rejected".into(),
            false,
            format!("unexpected outcome: {other:?}"),
        ),
        Err(e) => checks.error("codec", "corrupted digest is rejected".into(), e),
    }
}

fn solver_suite(checks: &mut Checks, cfg: &ExperimentConfig, model: &HmmModel) {
    let ModelSpec::Binary { eps, q } = cfg.model else {
        return;
    };
    let opts = SolverOptions {
        seed: cfg.seed,
        ..SolverOptions::default()
    };
    for d in cfg.delays.iter().copied().filter(|&d| d <= 1) {
        let params = match BinaryHmmParams::new(eps, q, d) {
            Ok(p) => p,
            Err(e) => return checks.error("rd_solver", format!("params d={d}"), e),
        };
        let law = FiniteJointLaw::from_model(model, d);
        let metric = DistortionMetric::hamming_x(2, 2);
        let crit = params.critical_distortion();
        for k in [1, 3, 5] {
            let d1 = crit * k as f64 / 6.0;
            let name = format!("solver vs closed form d={d} D1={d1:.6}");
            match (conditional_rd(&law, &metric, d1, &opts), binary_rd(&params, d1)) {
                (Ok(s), Ok(a)) => checks.close("rd_solver", name, s.rate, a.rate, 1e-4),
                (Err(e), _) => checks.error("rd_solver", name, e),
                (_, Err(e)) => checks.error("rd_solver", name, e),
            }
        }
    }
}

fn binary_suite(checks: &mut Checks, eps: f64, q: f64, delays: &[u32]) {
    for &d in delays {
        let params = match BinaryHmmParams::new(eps, q, d) {
            Ok(p) => p,
            Err(e) => return checks.error("analytic_rd", format!("params d={d}"), e),
        };
        let crit = params.critical_distortion();
        let worst = (0..=10)
            .map(|k| crit * k as f64 / 10.0)
            .filter(|&d1| d1 != 0.5)
            .map(|d1| {
                let joint = binary_test_channel_joint(&params, d1)?;
                let flip: f64 = (0..2)
                    .flat_map(|yd| (0..2).map(move |z| (yd, z)))
                    .map(|(yd, z)| joint[yd][z][1 - yd])
                    .sum();
                Ok((flip - params.effective_flip()).abs())
            })
            .collect::<Result<Vec<f64>, Error>>();
        match worst {
            Ok(v) => checks.close(
                "analytic_rd",
                format!("binary test channel flip d={d}"),
                v.into_iter().fold(0.0, f64::max),
                0.0,
                1e-12,
            ),
            Err(e) => checks.error("analytic_rd", format!("binary test channel d={d}"), e),
        }
        if let Ok(c) = binary_convolve(eps, q) {
            if d == 1 {
                checks.close(
                    "analytic_rd",
                    "effective flip at d=1".into(),
                    params.effective_flip(),
                    c,
                    1e-15,
                );
            }
        }
        match binary_rd(&params, crit) {
            Ok(p) => checks.close(
                "analytic_rd",
                format!("zero rate at the boundary d={d}"),
                p.rate,
                0.0,
                1e-12,
            ),
            Err(e) => checks.error("analytic_rd", format!("boundary d={d}"), e),
        }
    }
}

fn gaussian_suite(checks: &mut Checks, rho: f64, sigma2_n: f64, delays: &[u32]) {
    for &d in delays {
        let params = match GaussMarkovParams::new(rho, sigma2_n, d) {
            Ok(p) => p,
            Err(e) => return checks.error("analytic_rd", format!("params d={d}"), e),
        };
        let v = params.conditional_variance();
        for k in [1, 5, 9] {
            let d1 = v * k as f64 / 10.0;
            let (Ok(ch), Ok(rd)) = (gaussian_test_channel(&params, d1), gaussian_rd(&params, d1)) else {
                checks.error(
                    "analytic_rd",
                    format!("gaussian channel d={d} D1={d1}"),
                    "construction failed",
                );
                continue;
            };
            checks.close(
                "analytic_rd",
                format!("gaussian power balance d={d} D1={d1:.6}"),
                ch.z_variance + d1,
                v,
                1e-12,
            );
            checks.close(
                "analytic_rd",
                format!("gaussian conditional MI d={d} D1={d1:.6}"),
                gaussian_conditional_mi(&ch.covariance()),
                rd.rate,
                1e-9,
            );
        }
    }
}
