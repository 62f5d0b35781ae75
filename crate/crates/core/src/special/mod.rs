//! Scalar special functions and their shape-parameter derivatives.
//!
//! Everything here is pure and total over the stated domain; arguments
//! outside it yield [`Error::Domain`](crate::Error::Domain) instead of NaN.

mod beta;
mod diff;
mod gamma;

pub use beta::{grad_reg_beta_wrt_shape, log_beta, reg_beta_i, Shape};
pub use diff::{richardson_central, shape_step};
pub use gamma::{
    digamma, grad_reg_gamma_p_wrt_a, grad_reg_gamma_p_wrt_a_fd, grad_reg_gamma_p_wrt_a_series,
    log_gamma, reg_gamma_p, reg_gamma_q,
};

pub(crate) use beta::beta_shape_cdf_ratio;
pub(crate) use gamma::gamma_shape_cdf_ratio;

/// A function value with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FnEvalResult {
    pub value: f64,
    pub est_abs_error: f64,
}

pub(crate) const EPS: f64 = 1e-16;
pub(crate) const FPMIN: f64 = 1e-300;
