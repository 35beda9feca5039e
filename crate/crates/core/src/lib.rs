//! Causal network inference for multivariate time series by optimal causation
//! entropy (oCSE), with exact Gaussian closed forms, analytic oracles for
//! chains, loops and trees, and a batch harness for error-ratio sweeps.

pub mod covariance;
pub mod entropy;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod network;
pub mod oracles;
pub mod process;
pub mod sweep;

pub use error::{OcseError, Result};
