//! One-dimensional distribution families with CDFs, samplers and
//! variable-nablas g_κ(y) = −(∂Q(y)/∂κ) / q(y).
//!
//! Parameterization conventions:
//!
//! | family | params |
//! |---|---|
//! | `Delta` | location |
//! | `Bernoulli` | p = P(y = 1) |
//! | `Normal`, `LogNormal` | μ, σ |
//! | `Gamma` | shape α, rate β |
//! | `Beta` | a, b |
//! | `Exponential` | rate λ |
//! | `Weibull` | scale λ, shape k |
//! | `Laplace` | location μ, scale b |
//! | `Poisson` | rate λ |
//! | `Geometric` | p, counting failures before the first success |
//! | `NegativeBinomial` | r, p with mean r p / (1 − p) and CDF I_{1−p}(r, y + 1) |
//! | `Categorical` | p_0 … p_N |
//!
//! Categorical gradients treat p_N as 1 − Σ_{k<N} p_k, so the entry for the
//! last probability is always zero.

mod density;
mod nabla;
mod sample;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use nabla::{d_y_operator, VariableNabla};

/// Probabilities of Bernoulli and Categorical families are clamped into this
/// interval at construction so nablas and scores stay finite.
pub const PROB_CLAMP: f64 = 1e-12;

/// Below this mass a discrete point is treated as outside the support.
pub const MIN_PMF: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Delta,
    Bernoulli,
    Normal,
    LogNormal,
    Gamma,
    Beta,
    Exponential,
    Weibull,
    Laplace,
    Poisson,
    Geometric,
    NegativeBinomial,
    Categorical,
}

impl Family {
    pub const ALL: [Family; 13] = [
        Family::Delta,
        Family::Bernoulli,
        Family::Normal,
        Family::LogNormal,
        Family::Gamma,
        Family::Beta,
        Family::Exponential,
        Family::Weibull,
        Family::Laplace,
        Family::Poisson,
        Family::Geometric,
        Family::NegativeBinomial,
        Family::Categorical,
    ];

    pub fn is_discrete(self) -> bool {
        matches!(
            self,
            Family::Bernoulli
                | Family::Poisson
                | Family::Geometric
                | Family::NegativeBinomial
                | Family::Categorical
        )
    }

    /// Number of parameters; `None` for Categorical, whose arity is the alphabet size.
    pub fn arity(self) -> Option<usize> {
        match self {
            Family::Delta
            | Family::Bernoulli
            | Family::Exponential
            | Family::Poisson
            | Family::Geometric => Some(1),
            Family::Categorical => None,
            _ => Some(2),
        }
    }

    /// Families with a pathwise sampler y = τ_γ(ε).
    pub fn is_reparameterizable(self) -> bool {
        matches!(
            self,
            Family::Normal
                | Family::LogNormal
                | Family::Exponential
                | Family::Weibull
                | Family::Laplace
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Delta => "delta",
            Family::Bernoulli => "bernoulli",
            Family::Normal => "normal",
            Family::LogNormal => "log_normal",
            Family::Gamma => "gamma",
            Family::Beta => "beta",
            Family::Exponential => "exponential",
            Family::Weibull => "weibull",
            Family::Laplace => "laplace",
            Family::Poisson => "poisson",
            Family::Geometric => "geometric",
            Family::NegativeBinomial => "negative_binomial",
            Family::Categorical => "categorical",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where a distribution puts its mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    ContinuousInterval { lower: f64, upper: f64 },
    NonnegIntegers,
    FiniteAlphabet { size: usize },
}

impl Support {
    pub fn is_discrete(&self) -> bool {
        !matches!(self, Support::ContinuousInterval { .. })
    }

    pub fn contains(&self, y: f64) -> bool {
        match *self {
            Support::ContinuousInterval { lower, upper } => y >= lower && y <= upper,
            Support::NonnegIntegers => y >= 0.0 && y.fract() == 0.0 && y.is_finite(),
            Support::FiniteAlphabet { size } => {
                y >= 0.0 && y.fract() == 0.0 && (y as usize) < size
            }
        }
    }

    /// True for the largest value of a finite alphabet, where Q(y) ≡ 1.
    pub fn is_top(&self, y: f64) -> bool {
        matches!(*self, Support::FiniteAlphabet { size } if y == (size - 1) as f64)
    }
}

/// A member of the catalog with validated parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionSpec", into = "DistributionSpec")]
pub enum Distribution {
    Delta { loc: f64 },
    Bernoulli { p: f64 },
    Normal { mean: f64, std: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Gamma { shape: f64, rate: f64 },
    Beta { a: f64, b: f64 },
    Exponential { rate: f64 },
    Weibull { scale: f64, shape: f64 },
    Laplace { loc: f64, scale: f64 },
    Poisson { rate: f64 },
    Geometric { p: f64 },
    NegativeBinomial { r: f64, p: f64 },
    Categorical { probs: Vec<f64> },
}

/// Wire form `{"family": ..., "params": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub family: Family,
    pub params: Vec<f64>,
}

impl TryFrom<DistributionSpec> for Distribution {
    type Error = Error;

    fn try_from(spec: DistributionSpec) -> Result<Self> {
        Distribution::new(spec.family, &spec.params)
    }
}

impl From<Distribution> for DistributionSpec {
    fn from(d: Distribution) -> Self {
        DistributionSpec {
            family: d.family(),
            params: d.params(),
        }
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn require(ok: bool, family: Family, detail: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Domain {
            context: family.name(),
            detail: detail(),
        })
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl Distribution {
    /// Builds a distribution from a family tag and its parameter vector.
    pub fn new(family: Family, params: &[f64]) -> Result<Self> {
        if let Some(n) = family.arity() {
            require(params.len() == n, family, || {
                format!("expected {n} parameters, got {}", params.len())
            })?;
        }
        require(params.iter().all(|p| p.is_finite()), family, || {
            format!("non-finite parameter in {params:?}")
        })?;
        let p = params;
        let pos = |i: usize, name: &str| {
            require(positive(p[i]), family, || format!("{name} = {}, expected > 0", p[i]))
        };
        let unit = |i: usize| {
            require((0.0..=1.0).contains(&p[i]), family, || {
                format!("p = {}, expected in [0, 1]", p[i])
            })
        };
        let open_unit = |i: usize| {
            require(p[i] > 0.0 && p[i] < 1.0, family, || {
                format!("p = {}, expected in (0, 1)", p[i])
            })
        };
        Ok(match family {
            Family::Delta => Distribution::Delta { loc: p[0] },
            Family::Bernoulli => {
                unit(0)?;
                Distribution::Bernoulli { p: clamp_prob(p[0]) }
            }
            Family::Normal => {
                pos(1, "sigma")?;
                Distribution::Normal { mean: p[0], std: p[1] }
            }
            Family::LogNormal => {
                pos(1, "sigma")?;
                Distribution::LogNormal { mu: p[0], sigma: p[1] }
            }
            Family::Gamma => {
                pos(0, "shape")?;
                pos(1, "rate")?;
                Distribution::Gamma { shape: p[0], rate: p[1] }
            }
            Family::Beta => {
                pos(0, "a")?;
                pos(1, "b")?;
                Distribution::Beta { a: p[0], b: p[1] }
            }
            Family::Exponential => {
                pos(0, "rate")?;
                Distribution::Exponential { rate: p[0] }
            }
            Family::Weibull => {
                pos(0, "scale")?;
                pos(1, "shape")?;
                Distribution::Weibull { scale: p[0], shape: p[1] }
            }
            Family::Laplace => {
                pos(1, "scale")?;
                Distribution::Laplace { loc: p[0], scale: p[1] }
            }
            Family::Poisson => {
                pos(0, "rate")?;
                Distribution::Poisson { rate: p[0] }
            }
            Family::Geometric => {
                open_unit(0)?;
                Distribution::Geometric { p: p[0] }
            }
            Family::NegativeBinomial => {
                pos(0, "r")?;
                open_unit(1)?;
                Distribution::NegativeBinomial { r: p[0], p: p[1] }
            }
            Family::Categorical => {
                require(p.len() >= 2, family, || {
                    format!("needs at least 2 categories, got {}", p.len())
                })?;
                require(p.iter().all(|&q| q >= 0.0), family, || {
                    format!("negative probability in {p:?}")
                })?;
                let sum: f64 = p.iter().sum();
                require((sum - 1.0).abs() <= 1e-9, family, || {
                    format!("probabilities sum to {sum}")
                })?;
                let mut probs: Vec<f64> = p.iter().map(|&q| q.max(PROB_CLAMP)).collect();
                let total: f64 = probs.iter().sum();
                if total != 1.0 {
                    probs.iter_mut().for_each(|q| *q /= total);
                }
                Distribution::Categorical { probs }
            }
        })
    }

    pub fn normal(mean: f64, std: f64) -> Result<Self> {
        Self::new(Family::Normal, &[mean, std])
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        Self::new(Family::Gamma, &[shape, rate])
    }

    pub fn poisson(rate: f64) -> Result<Self> {
        Self::new(Family::Poisson, &[rate])
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::new(Family::Bernoulli, &[p])
    }

    pub fn negative_binomial(r: f64, p: f64) -> Result<Self> {
        Self::new(Family::NegativeBinomial, &[r, p])
    }

    pub fn family(&self) -> Family {
        match self {
            Distribution::Delta { .. } => Family::Delta,
            Distribution::Bernoulli { .. } => Family::Bernoulli,
            Distribution::Normal { .. } => Family::Normal,
            Distribution::LogNormal { .. } => Family::LogNormal,
            Distribution::Gamma { .. } => Family::Gamma,
            Distribution::Beta { .. } => Family::Beta,
            Distribution::Exponential { .. } => Family::Exponential,
            Distribution::Weibull { .. } => Family::Weibull,
            Distribution::Laplace { .. } => Family::Laplace,
            Distribution::Poisson { .. } => Family::Poisson,
            Distribution::Geometric { .. } => Family::Geometric,
            Distribution::NegativeBinomial { .. } => Family::NegativeBinomial,
            Distribution::Categorical { .. } => Family::Categorical,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            Distribution::Delta { loc } => vec![loc],
            Distribution::Bernoulli { p } | Distribution::Geometric { p } => vec![p],
            Distribution::Normal { mean, std } => vec![mean, std],
            Distribution::LogNormal { mu, sigma } => vec![mu, sigma],
            Distribution::Gamma { shape, rate } => vec![shape, rate],
            Distribution::Beta { a, b } => vec![a, b],
            Distribution::Exponential { rate } | Distribution::Poisson { rate } => vec![rate],
            Distribution::Weibull { scale, shape } => vec![scale, shape],
            Distribution::Laplace { loc, scale } => vec![loc, scale],
            Distribution::NegativeBinomial { r, p } => vec![r, p],
            Distribution::Categorical { ref probs } => probs.clone(),
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Distribution::Categorical { probs } => probs.len(),
            d => d.family().arity().unwrap_or(0),
        }
    }

    pub fn support(&self) -> Support {
        use std::f64::INFINITY;
        match self {
            Distribution::Delta { .. }
            | Distribution::Normal { .. }
            | Distribution::Laplace { .. } => Support::ContinuousInterval {
                lower: -INFINITY,
                upper: INFINITY,
            },
            Distribution::LogNormal { .. }
            | Distribution::Gamma { .. }
            | Distribution::Exponential { .. }
            | Distribution::Weibull { .. } => Support::ContinuousInterval {
                lower: 0.0,
                upper: INFINITY,
            },
            Distribution::Beta { .. } => Support::ContinuousInterval {
                lower: 0.0,
                upper: 1.0,
            },
            Distribution::Bernoulli { .. } => Support::FiniteAlphabet { size: 2 },
            Distribution::Categorical { probs } => Support::FiniteAlphabet { size: probs.len() },
            Distribution::Poisson { .. }
            | Distribution::Geometric { .. }
            | Distribution::NegativeBinomial { .. } => Support::NonnegIntegers,
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.family().is_discrete()
    }

    /// Richardson central differences of `eval` in each parameter.
    ///
    /// Steps shrink so perturbed parameters stay in-domain. Categorical
    /// entries move p_k against p_N, so the last entry is zero.
    pub fn param_fd_gradient<E>(&self, mut eval: E) -> Result<Vec<f64>>
    where
        E: FnMut(&Distribution) -> Result<f64>,
    {
        let family = self.family();
        let base = self.params();
        let n = base.len();
        let mut grad = vec![0.0; n];
        let last = if family == Family::Categorical { n - 1 } else { n };
        for k in 0..last {
            let scale = base[k].abs().max(if family.is_discrete() { 0.1 } else { 1.0 });
            let limit = match family {
                Family::Delta | Family::Normal | Family::LogNormal | Family::Laplace if k == 0 => {
                    f64::INFINITY
                }
                Family::Bernoulli | Family::Geometric => base[0].min(1.0 - base[0]),
                Family::NegativeBinomial if k == 1 => base[1].min(1.0 - base[1]),
                Family::Categorical => base[k].min(base[n - 1]),
                _ => base[k],
            };
            let h = (1e-3 * scale).min(limit / 8.0);
            let mut failure = None;
            let r = crate::special::richardson_central(
                |t| {
                    let mut p = base.clone();
                    p[k] = t;
                    if family == Family::Categorical {
                        p[n - 1] = base[n - 1] - (t - base[k]);
                    }
                    let v = Distribution::new(family, &p).and_then(|d| eval(&d));
                    v.unwrap_or_else(|e| {
                        failure.get_or_insert(e);
                        f64::NAN
                    })
                },
                base[k],
                h,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            grad[k] = r.value;
        }
        Ok(grad)
    }

    fn check_support(&self, context: &'static str, y: f64) -> Result<()> {
        if self.support().contains(y) {
            Ok(())
        } else {
            Err(Error::domain(
                context,
                format!("y = {y} outside the support of {}", self.family()),
            ))
        }
    }
}
