//! Differentially private estimation in the generalized β-model for weighted
//! networks.
//!
//! Edge weights take values in `{0, …, q-1}` and each node carries one real
//! parameter. The degree sequence is released through a (skew) discrete
//! Laplace mechanism, and the node parameters are recovered by solving the
//! noisy moment equations with a damped Newton iteration.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`, see
//! [`Real`]); the aliases at the crate root fix it to `f64`, which is what the
//! simulation engine and the command-line tool use.

pub mod error;
pub mod estimator;
pub mod experiments;
pub mod graph_model;
pub mod io;
pub mod linalg;
pub mod mechanism;
pub mod normal;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// Node parameters in double precision.
pub type Params = graph_model::ParamVector<f64>;
/// Fit output in double precision.
pub type Fit = estimator::FitResult<f64>;
/// Dense matrix in double precision.
pub type Matrix = linalg::Matrix<f64>;
/// Contrast interval in double precision.
pub type ContrastInterval = estimator::ContrastCI<f64>;
/// Single-coordinate interval in double precision.
pub type SingleInterval = estimator::SingleCI<f64>;
/// Solver options in double precision.
pub type Options = estimator::SolverOptions<f64>;

/// Node parameters in single precision.
pub type Params32 = graph_model::ParamVector<f32>;
/// Fit output in single precision.
pub type Fit32 = estimator::FitResult<f32>;
