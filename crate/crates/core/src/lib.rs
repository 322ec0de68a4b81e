//! Exact sums and central (Gaussian) approximations for dense replica models
//! and factor-graph ensembles, with the covariances of the limiting fluctuations.

// `!(x > 0.0)` deliberately treats NaN as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::type_complexity)]

pub mod clt;
pub mod dense;
pub mod error;
pub mod factor_graph;
pub mod linalg;
pub mod replica;
pub mod selftest;
pub mod types;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use types::{Alphabet, ProbMeasure, TypeVector};
