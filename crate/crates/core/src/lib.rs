//! GO gradient estimation: one-sample unbiased gradients of E_q[f(y)] for
//! continuous and discrete y, their deep extension through stochastic
//! computation graphs, baseline estimators, and numerical oracles.

pub mod distributions;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod integrand;
pub mod oracle;
pub mod rng;
pub mod special;
pub mod statgraph;

pub use distributions::{d_y_operator, Distribution, Family, Support, VariableNabla};
pub use error::{Error, Result};
pub use estimators::{EstimatorKind, GradientEstimate};
pub use integrand::{FnIntegrand, Integrand, TestFunction};
