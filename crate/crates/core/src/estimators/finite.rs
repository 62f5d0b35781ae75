use rand::Rng;

use super::{average, draw, EstimatorKind, GradientEstimate};
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::integrand::Integrand;

fn check_finite_support(dists: &[Distribution]) -> Result<()> {
    match dists
        .iter()
        .find(|d| !matches!(d, Distribution::Bernoulli { .. } | Distribution::Categorical { .. }))
    {
        Some(d) => Err(Error::WrongFamily {
            expected: "bernoulli or categorical factors",
            got: d.family(),
        }),
        None => Ok(()),
    }
}

/// One-sample finite-support GO gradient at the draw `y`.
///
/// For each coordinate the expectation over y_v is taken analytically while
/// y_{−v} stays at the draw: a Bernoulli entry is f(y_{−v}, 1) − f(y_{−v}, 0),
/// a Categorical entry k is f(y_{−v}, k) − f(y_{−v}, N).
pub fn finite_support_sample(dists: &[Distribution], f: &dyn Integrand, y: &[f64]) -> Result<Vec<f64>> {
    check_finite_support(dists)?;
    let mut point = y.to_vec();
    let mut out = Vec::new();
    for (v, d) in dists.iter().enumerate() {
        let n = d.n_params();
        let mut at = |k: usize| {
            point[v] = k as f64;
            f.eval(&point)
        };
        match d {
            Distribution::Bernoulli { .. } => out.push(at(1) - at(0)),
            _ => {
                let top = at(n - 1);
                for k in 0..n - 1 {
                    out.push(at(k) - top);
                }
                out.push(0.0);
            }
        }
        point[v] = y[v];
    }
    Ok(out)
}

/// Finite-support GO gradient averaged over `n` joint draws.
pub fn go_gradient_finite_support<R: Rng + ?Sized>(
    dists: &[Distribution],
    f: &dyn Integrand,
    n: usize,
    rng: &mut R,
) -> Result<GradientEstimate> {
    check_finite_support(dists)?;
    average(dists, n, rng, EstimatorKind::GoFiniteSupport, |rng| {
        finite_support_sample(dists, f, &draw(dists, rng))
    })
}

type Head = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type Separable = Box<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// f(y) = head(W y + b) + Σ_v h_v(y_v) over a binary code y.
///
/// The structure admits evaluating all single-coordinate flips of y in one
/// matrix pass: the pre-activations of the flipped codes are the columns of
/// (W y + b) 1ᵀ + W diag(1 − 2y).
pub struct AffineNonlinearIntegrand {
    /// Row-major, `rows × dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    dim: usize,
    head: Head,
    separable: Option<Separable>,
}

impl AffineNonlinearIntegrand {
    pub fn new(
        weights: Vec<f64>,
        bias: Vec<f64>,
        head: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let rows = bias.len();
        assert!(rows > 0 && weights.len() % rows == 0, "weights must be rows × dim");
        AffineNonlinearIntegrand {
            dim: weights.len() / rows,
            weights,
            bias,
            head: Box::new(head),
            separable: None,
        }
    }

    pub fn with_separable(mut self, h: impl Fn(usize, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.separable = Some(Box::new(h));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn preactivation(&self, y: &[f64]) -> Vec<f64> {
        self.bias
            .iter()
            .enumerate()
            .map(|(i, b)| b + dot(&self.weights[i * self.dim..(i + 1) * self.dim], y))
            .collect()
    }

    fn separable_sum(&self, y: &[f64]) -> f64 {
        self.separable
            .as_ref()
            .map_or(0.0, |h| y.iter().enumerate().map(|(v, &yv)| h(v, yv)).sum())
    }

    /// f at every single-coordinate flip of `y`, entry v holding f(y with y_v ↦ 1 − y_v).
    pub fn flip_values(&self, y: &[f64]) -> Vec<f64> {
        let rows = self.bias.len();
        let a = self.preactivation(y);
        // Ξ: column v is the pre-activation of the code with bit v flipped.
        let mut xi = vec![0.0; rows * self.dim];
        for i in 0..rows {
            let w = &self.weights[i * self.dim..(i + 1) * self.dim];
            for v in 0..self.dim {
                xi[v * rows + i] = a[i] + (1.0 - 2.0 * y[v]) * w[v];
            }
        }
        let base_sep = self.separable_sum(y);
        (0..self.dim)
            .map(|v| {
                let mut out = (self.head)(&xi[v * rows..(v + 1) * rows]);
                if let Some(h) = &self.separable {
                    out += base_sep - h(v, y[v]) + h(v, 1.0 - y[v]);
                }
                out
            })
            .collect()
    }
}

impl Integrand for AffineNonlinearIntegrand {
    fn eval(&self, y: &[f64]) -> f64 {
        (self.head)(&self.preactivation(y)) + self.separable_sum(y)
    }
}

impl std::fmt::Debug for AffineNonlinearIntegrand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AffineNonlinearIntegrand")
            .field("rows", &self.bias.len())
            .field("dim", &self.dim)
            .finish()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// [`finite_support_sample`] for Bernoulli codes through the flip batch:
/// entry v is a_v (f(flip_v y) − f(y)) with a_v = +1 when y_v = 0, −1 otherwise.
pub fn finite_support_sample_batched(
    dists: &[Distribution],
    f: &AffineNonlinearIntegrand,
    y: &[f64],
) -> Result<Vec<f64>> {
    if let Some(d) = dists.iter().find(|d| !matches!(d, Distribution::Bernoulli { .. })) {
        return Err(Error::WrongFamily {
            expected: "bernoulli factors",
            got: d.family(),
        });
    }
    let base = f.eval(y);
    Ok(f
        .flip_values(y)
        .into_iter()
        .zip(y)
        .map(|(flipped, &yv)| if yv == 0.0 { flipped - base } else { base - flipped })
        .collect())
}

pub fn go_gradient_finite_support_batched<R: Rng + ?Sized>(
    dists: &[Distribution],
    f: &AffineNonlinearIntegrand,
    n: usize,
    rng: &mut R,
) -> Result<GradientEstimate> {
    average(dists, n, rng, EstimatorKind::GoFiniteSupport, |rng| {
        finite_support_sample_batched(dists, f, &draw(dists, rng))
    })
}
