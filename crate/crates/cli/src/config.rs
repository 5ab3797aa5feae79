//! Experiment configuration, read from a TOML file.
//!
//! ```toml
//! seed = 1
//! delays = [0, 1, 2, 3]
//! distortions = [0.01, 0.05, 0.1]   # or [grid] from/to/points
//!
//! [model]
//! kind = "binary"                    # binary | gaussian | tables
//! eps = 0.1
//! q = 0.1
//! ```
//!
//! Each subcommand reads the sections it needs and ignores the rest.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dsic::analytic::{BinaryHmmParams, GaussMarkovParams};
use dsic::hmm::HmmModel;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Binary {
        eps: f64,
        q: f64,
    },
    Gaussian {
        rho: f64,
        sigma2_n: f64,
    },
    Tables {
        transition: Vec<Vec<f64>>,
        emission: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => vec![],
            1 => vec![self.from],
            k => (0..k)
                .map(|i| self.from + (self.to - self.from) * i as f64 / (k - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// One rate-versus-delay series per value.
    #[serde(default)]
    pub eps: Vec<f64>,
    /// One rate-versus-q series per delay.
    pub q: Option<Grid>,
    /// Order of the entropy-rate bracket used for the asymptote row.
    #[serde(default = "default_order")]
    pub bracket_order: usize,
}

fn default_order() -> usize {
    12
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSection {
    pub d1: f64,
    pub d2: f64,
    #[serde(default = "default_delay")]
    pub delay: u32,
    /// Defaults to |X||Y||Y_d| + 2.
    pub u_cardinality: Option<usize>,
    pub lambdas: Option<Vec<f64>>,
}

fn default_delay() -> u32 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecSection {
    /// Delay used by `encode` and `decode`.
    #[serde(default)]
    pub delay: usize,
    #[serde(default)]
    pub x_fill: usize,
    #[serde(default)]
    pub y_fill: usize,
    #[serde(default = "default_n")]
    pub n: Vec<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

impl Default for CodecSection {
    fn default() -> Self {
        Self {
            delay: 0,
            x_fill: 0,
            y_fill: 0,
            n: default_n(),
            seeds: default_seeds(),
        }
    }
}

fn default_n() -> Vec<usize> {
    vec![100_000]
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    /// Block length for the enumeration checks.
    #[serde(default = "default_block")]
    pub block: usize,
    /// Sequence length for codec roundtrips.
    #[serde(default = "default_roundtrip")]
    pub roundtrip_n: usize,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            block: default_block(),
            roundtrip_n: default_roundtrip(),
        }
    }
}

fn default_block() -> usize {
    6
}

fn default_roundtrip() -> usize {
    2000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSpec,
    #[serde(default = "default_delays")]
    pub delays: Vec<u32>,
    #[serde(default)]
    pub distortions: Option<Vec<f64>>,
    pub grid: Option<Grid>,
    #[serde(default)]
    pub sweep: SweepSection,
    pub region: Option<RegionSection>,
    #[serde(default)]
    pub codec: CodecSection,
    #[serde(default)]
    pub validate: ValidateSection,
    pub output: Option<PathBuf>,
}

fn default_delays() -> Vec<u32> {
    vec![0, 1, 2, 3]
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        match &self.model {
            ModelSpec::Binary { eps, q } => {
                BinaryHmmParams::new(*eps, *q, 0)?;
            }
            ModelSpec::Gaussian { rho, sigma2_n } => {
                GaussMarkovParams::new(*rho, *sigma2_n, 0)?;
            }
            ModelSpec::Tables { transition, emission } => {
                HmmModel::from_tables(transition.clone(), emission.clone())?;
            }
        }
        if self.distortions.is_some() && self.grid.is_some() {
            bail!("give either `distortions` or `[grid]`, not both");
        }
        if let Some(d) = self.distortions.iter().flatten().find(|d| d.is_nan() || **d < 0.0) {
            bail!("distortion {d} is negative");
        }
        if self.codec.seeds.is_empty() {
            bail!("codec.seeds is empty");
        }
        if self.codec.n.contains(&0) {
            bail!("codec.n must be at least 1");
        }
        Ok(())
    }

    /// Finite-alphabet model, if the config describes one.
    pub fn hmm(&self) -> Result<Option<HmmModel>> {
        Ok(match &self.model {
            ModelSpec::Binary { eps, q } => Some(HmmModel::binary(*eps, *q)?),
            ModelSpec::Tables { transition, emission } => {
                Some(HmmModel::from_tables(transition.clone(), emission.clone())?)
            }
            ModelSpec::Gaussian { .. } => None,
        })
    }

    pub fn require_hmm(&self, what: &str) -> Result<HmmModel> {
        match self.hmm()? {
            Some(m) => Ok(m),
            None => bail!("{what} needs a finite-alphabet model (binary or tables)"),
        }
    }

    pub fn explicit_distortions(&self) -> Option<Vec<f64>> {
        self.distortions
            .clone()
            .or_else(|| self.grid.as_ref().map(Grid::values))
    }

    /// Replaces every seed with `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.codec.seeds = vec![seed];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_model_kind() {
        let c: ExperimentConfig = toml::from_str("[model]\nkind = \"binary\"\neps = 0.1\nq = 0.1\n").unwrap();
        assert!(matches!(c.model, ModelSpec::Binary { .. }));
        assert_eq!(c.delays, vec![0, 1, 2, 3]);
        let c: ExperimentConfig = toml::from_str("[model]\nkind = \"gaussian\"\nrho = 0.9\nsigma2_n = 0.1\n").unwrap();
        assert!(c.hmm().unwrap().is_none());
        let c: ExperimentConfig = toml::from_str(
            "[model]\nkind = \"tables\"\ntransition = [[0.9, 0.1], [0.2, 0.8]]\nemission = [[1.0, 0.0], [0.5, 0.5]]\n",
        )
        .unwrap();
        assert_eq!(c.hmm().unwrap().unwrap().x_size(), 2);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(
            toml::from_str::<ExperimentConfig>("[model]\nkind = \"binary\"\neps = 0.1\nq = 0.1\nfoo = 1\n").is_err()
        );
        let c: ExperimentConfig = toml::from_str("[model]\nkind = \"binary\"\neps = 0.7\nq = 0.1\n").unwrap();
        assert!(c.check().is_err());
    }

    #[test]
    fn grid_endpoints() {
        let g = Grid {
            from: 0.0,
            to: 0.5,
            points: 6,
        };
        let v = g.values();
        assert_eq!(v.len(), 6);
        assert_eq!((v[0], v[5]), (0.0, 0.5));
        assert!((v[3] - 0.3).abs() < 1e-15);
    }
}
