//! Single-layer gradient estimators for E_q[f(y)] with q(y) = Π_v q_v(y_v).
//!
//! Every estimator exists in two forms: a per-sample function evaluated at a
//! given draw (used for identities and variance probes), and an n-sample
//! average drawing from one rng stream. Gradients of a product of factors are
//! concatenated in factor order.

mod elbo;
mod finite;
mod stats;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{d_y_operator, Distribution};
use crate::error::{Error, Result};
use crate::integrand::Integrand;

pub use elbo::{elbo_gradient_sticking, StickingIntegrand};
pub use finite::{
    finite_support_sample, finite_support_sample_batched, go_gradient_finite_support,
    go_gradient_finite_support_batched, AffineNonlinearIntegrand,
};
pub use stats::{gradient_variance, sample_variance, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Go,
    Reinforce,
    /// REINFORCE averaged over two independent draws.
    Reinforce2,
    Rep,
    GoFiniteSupport,
}

impl EstimatorKind {
    pub fn tag(self) -> &'static str {
        match self {
            EstimatorKind::Go => "go",
            EstimatorKind::Reinforce => "reinforce",
            EstimatorKind::Reinforce2 => "reinforce2",
            EstimatorKind::Rep => "rep",
            EstimatorKind::GoFiniteSupport => "go_finite_support",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// ∇_γ E[f] estimated from `n_samples` draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientEstimate {
    pub per_param: Vec<f64>,
    pub n_samples: usize,
    pub estimator: EstimatorKind,
}

fn total_params(dists: &[Distribution]) -> usize {
    dists.iter().map(Distribution::n_params).sum()
}

fn draw<R: Rng + ?Sized>(dists: &[Distribution], rng: &mut R) -> Vec<f64> {
    dists.iter().map(|d| d.sample(rng)).collect()
}

fn average<R, S>(
    dists: &[Distribution],
    n: usize,
    rng: &mut R,
    estimator: EstimatorKind,
    mut one: S,
) -> Result<GradientEstimate>
where
    R: Rng + ?Sized,
    S: FnMut(&mut R) -> Result<Vec<f64>>,
{
    if n == 0 {
        return Err(Error::domain("estimator", "sample count must be positive"));
    }
    let mut acc = vec![0.0; total_params(dists)];
    for _ in 0..n {
        for (a, g) in acc.iter_mut().zip(one(rng)?) {
            *a += g;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    Ok(GradientEstimate {
        per_param: acc,
        n_samples: n,
        estimator,
    })
}

/// One-sample GO gradient Σ_v g_γ(y_v) · D_{y_v}[f] at the draw `y`.
pub fn go_sample(dists: &[Distribution], f: &dyn Integrand, y: &[f64]) -> Result<Vec<f64>> {
    let grad = if dists.iter().any(|d| !d.is_discrete()) {
        Some(f.gradient(y).ok_or(Error::MissingEvaluator("gradient"))?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(total_params(dists));
    for (v, d) in dists.iter().enumerate() {
        let nabla = d.variable_nabla(y[v])?;
        let dy = match &grad {
            Some(g) if !d.is_discrete() => g[v],
            _ => d_y_operator(d.support(), f, y, v)?,
        };
        out.extend(nabla.per_param.iter().map(|g| g * dy));
    }
    Ok(out)
}

/// One-sample REINFORCE gradient (f(y) − b) ∇_γ ln q(y) at the draw `y`.
pub fn reinforce_sample(
    dists: &[Distribution],
    f: &dyn Integrand,
    y: &[f64],
    baseline: f64,
) -> Result<Vec<f64>> {
    let w = f.eval(y) - baseline;
    let mut out = Vec::with_capacity(total_params(dists));
    for (d, &yv) in dists.iter().zip(y) {
        out.extend(d.score(yv)?.iter().map(|s| w * s));
    }
    Ok(out)
}

/// One-sample pathwise gradient [∇_γ τ_γ(ε)] ∇_y f at y = τ_γ(ε).
pub fn rep_sample(dists: &[Distribution], f: &dyn Integrand, eps: &[f64]) -> Result<Vec<f64>> {
    let y = dists
        .iter()
        .zip(eps)
        .map(|(d, &e)| d.transform_noise(e))
        .collect::<Result<Vec<_>>>()?;
    let grad = f.gradient(&y).ok_or(Error::MissingEvaluator("gradient"))?;
    let mut out = Vec::with_capacity(total_params(dists));
    for (v, (d, &e)) in dists.iter().zip(eps).enumerate() {
        out.extend(d.rep_jacobian(e)?.iter().map(|j| j * grad[v]));
    }
    Ok(out)
}

/// GO gradient averaged over `n` joint draws.
pub fn go_gradient<R: Rng + ?Sized>(
    dists: &[Distribution],
    f: &dyn Integrand,
    n: usize,
    rng: &mut R,
) -> Result<GradientEstimate> {
    average(dists, n, rng, EstimatorKind::Go, |rng| {
        go_sample(dists, f, &draw(dists, rng))
    })
}

/// REINFORCE gradient averaged over `n` joint draws, with optional constant baseline.
pub fn reinforce_gradient<R: Rng + ?Sized>(
    dists: &[Distribution],
    f: &dyn Integrand,
    n: usize,
    rng: &mut R,
    baseline: Option<f64>,
) -> Result<GradientEstimate> {
    let b = baseline.unwrap_or(0.0);
    average(dists, n, rng, EstimatorKind::Reinforce, |rng| {
        reinforce_sample(dists, f, &draw(dists, rng), b)
    })
}

/// Pathwise gradient averaged over `n` noise draws.
pub fn rep_gradient<R: Rng + ?Sized>(
    dists: &[Distribution],
    f: &dyn Integrand,
    n: usize,
    rng: &mut R,
) -> Result<GradientEstimate> {
    if let Some(d) = dists.iter().find(|d| !d.family().is_reparameterizable()) {
        return Err(Error::NotReparameterizable(d.family()));
    }
    average(dists, n, rng, EstimatorKind::Rep, |rng| {
        let eps = dists
            .iter()
            .map(|d| d.sample_noise(rng))
            .collect::<Result<Vec<_>>>()?;
        rep_sample(dists, f, &eps)
    })
}

/// One fresh single-draw estimate of the requested kind.
pub fn one_sample<R: Rng + ?Sized>(
    kind: EstimatorKind,
    dists: &[Distribution],
    f: &dyn Integrand,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(match kind {
        EstimatorKind::Go => go_gradient(dists, f, 1, rng)?.per_param,
        EstimatorKind::Reinforce => reinforce_gradient(dists, f, 1, rng, None)?.per_param,
        EstimatorKind::Reinforce2 => {
            let mut est = reinforce_gradient(dists, f, 2, rng, None)?;
            est.estimator = EstimatorKind::Reinforce2;
            est.per_param
        }
        EstimatorKind::Rep => rep_gradient(dists, f, 1, rng)?.per_param,
        EstimatorKind::GoFiniteSupport => go_gradient_finite_support(dists, f, 1, rng)?.per_param,
    })
}
