#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail the domain checks

pub mod analytic;
pub mod codec;
pub mod error;
pub mod hmm;
pub mod info;
pub mod markov;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
