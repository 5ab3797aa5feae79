use thiserror::Error;

/// Errors produced by the models, evaluators, solvers and the codec.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("chain is not ergodic: {0}")]
    NotErgodic(String),

    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("table of {required} entries exceeds the cap of {cap} entries")]
    Capacity { required: u128, cap: u128 },

    #[error("distortion target {target} is below the minimum achievable distortion {minimum}")]
    Infeasible { target: f64, minimum: f64 },

    #[error("solver did not converge after {iterations} iterations (gap {gap:e})")]
    NotConverged { iterations: usize, gap: f64 },

    #[error("corrupt bitstream at {position}: {reason}")]
    Corrupt { position: String, reason: String },

    #[error("side information read of index {index} at step {step} violates delay {delay}")]
    Causality { step: usize, index: usize, delay: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn corrupt(position: impl ToString, reason: impl ToString) -> Self {
        Error::Corrupt {
            position: position.to_string(),
            reason: reason.to_string(),
        }
    }

    pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<f64> {
        if (0.0..=1.0).contains(&value) {
            Ok(value)
        } else {
            Err(Error::Domain {
                name,
                value,
                domain: "[0, 1]",
            })
        }
    }
}
