use std::f64::consts::PI;

use super::Distribution;
use crate::error::{Error, Result};
use crate::special::{log_beta, log_gamma, reg_beta_i, reg_gamma_p, reg_gamma_q};

/// Φ(z) through the incomplete gamma: erfc(t) = Q(1/2, t²).
pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z.is_infinite() {
        return if z > 0.0 { 1.0 } else { 0.0 };
    }
    let half_tail = 0.5 * reg_gamma_q(0.5, 0.5 * z * z).unwrap_or(0.0);
    if z < 0.0 {
        half_tail
    } else {
        1.0 - half_tail
    }
}

fn ln_factorial(y: f64) -> f64 {
    log_gamma(y + 1.0).unwrap_or(0.0)
}

impl Distribution {
    /// ln q(y): log density for continuous families, log mass for discrete ones.
    ///
    /// A point mass reports ln 1 = 0 at its location.
    pub fn log_density(&self, y: f64) -> Result<f64> {
        self.check_support("density", y)?;
        Ok(match *self {
            Distribution::Delta { loc } => {
                if y == loc {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Distribution::Bernoulli { p } => {
                if y == 1.0 {
                    p.ln()
                } else {
                    (-p).ln_1p()
                }
            }
            Distribution::Normal { mean, std } => {
                let z = (y - mean) / std;
                -0.5 * z * z - std.ln() - 0.5 * (2.0 * PI).ln()
            }
            Distribution::LogNormal { mu, sigma } => {
                if y == 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                let z = (y.ln() - mu) / sigma;
                -0.5 * z * z - sigma.ln() - y.ln() - 0.5 * (2.0 * PI).ln()
            }
            Distribution::Gamma { shape, rate } => {
                shape * rate.ln() + (shape - 1.0) * y.ln() - rate * y - log_gamma(shape)?
            }
            Distribution::Beta { a, b } => {
                (a - 1.0) * y.ln() + (b - 1.0) * (-y).ln_1p() - log_beta(a, b)?
            }
            Distribution::Exponential { rate } => rate.ln() - rate * y,
            Distribution::Weibull { scale, shape } => {
                let t = y / scale;
                shape.ln() - scale.ln() + (shape - 1.0) * t.ln() - t.powf(shape)
            }
            Distribution::Laplace { loc, scale } => -(2.0 * scale).ln() - (y - loc).abs() / scale,
            Distribution::Poisson { rate } => y * rate.ln() - rate - ln_factorial(y),
            Distribution::Geometric { p } => p.ln() + y * (-p).ln_1p(),
            Distribution::NegativeBinomial { r, p } => {
                log_gamma(y + r)? - ln_factorial(y) - log_gamma(r)?
                    + y * p.ln()
                    + r * (-p).ln_1p()
            }
            Distribution::Categorical { ref probs } => probs[y as usize].ln(),
        })
    }

    /// q(y): density for continuous families, mass for discrete ones.
    pub fn density(&self, y: f64) -> Result<f64> {
        Ok(self.log_density(y)?.exp())
    }

    /// Q(y) = P(Y ≤ y).
    pub fn cdf(&self, y: f64) -> Result<f64> {
        self.check_support("cdf", y)?;
        Ok(match *self {
            Distribution::Delta { loc } => {
                if y < loc {
                    0.0
                } else {
                    1.0
                }
            }
            Distribution::Bernoulli { p } => {
                if y == 0.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            Distribution::Normal { mean, std } => std_normal_cdf((y - mean) / std),
            Distribution::LogNormal { mu, sigma } => {
                if y == 0.0 {
                    0.0
                } else {
                    std_normal_cdf((y.ln() - mu) / sigma)
                }
            }
            Distribution::Gamma { shape, rate } => reg_gamma_p(shape, rate * y)?,
            Distribution::Beta { a, b } => reg_beta_i(y, a, b)?,
            Distribution::Exponential { rate } => -(-rate * y).exp_m1(),
            Distribution::Weibull { scale, shape } => -(-(y / scale).powf(shape)).exp_m1(),
            Distribution::Laplace { loc, scale } => {
                if y < loc {
                    0.5 * ((y - loc) / scale).exp()
                } else {
                    1.0 - 0.5 * (-(y - loc) / scale).exp()
                }
            }
            Distribution::Poisson { rate } => reg_gamma_q(y + 1.0, rate)?,
            Distribution::Geometric { p } => -((y + 1.0) * (-p).ln_1p()).exp_m1(),
            Distribution::NegativeBinomial { r, p } => reg_beta_i(1.0 - p, r, y + 1.0)?,
            Distribution::Categorical { ref probs } => {
                if y as usize == probs.len() - 1 {
                    1.0
                } else {
                    probs[..=y as usize].iter().sum::<f64>().min(1.0)
                }
            }
        })
    }

    /// Survival function 1 − Q(y), computed without cancellation where possible.
    pub fn sf(&self, y: f64) -> Result<f64> {
        self.check_support("sf", y)?;
        Ok(match *self {
            Distribution::Normal { mean, std } => std_normal_cdf(-(y - mean) / std),
            Distribution::LogNormal { mu, sigma } => {
                if y == 0.0 {
                    1.0
                } else {
                    std_normal_cdf(-(y.ln() - mu) / sigma)
                }
            }
            Distribution::Gamma { shape, rate } => reg_gamma_q(shape, rate * y)?,
            Distribution::Beta { a, b } => reg_beta_i(1.0 - y, b, a)?,
            Distribution::Exponential { rate } => (-rate * y).exp(),
            Distribution::Weibull { scale, shape } => (-(y / scale).powf(shape)).exp(),
            Distribution::Laplace { loc, scale } if y >= loc => 0.5 * (-(y - loc) / scale).exp(),
            Distribution::Poisson { rate } => reg_gamma_p(y + 1.0, rate)?,
            Distribution::Geometric { p } => ((y + 1.0) * (-p).ln_1p()).exp(),
            Distribution::NegativeBinomial { r, p } => reg_beta_i(p, y + 1.0, r)?,
            Distribution::Categorical { ref probs } => {
                probs[y as usize + 1..].iter().sum::<f64>()
            }
            _ => 1.0 - self.cdf(y)?,
        })
    }

    /// ∂/∂y ln q(y) for continuous families.
    pub fn log_density_dy(&self, y: f64) -> Result<f64> {
        self.check_support("log_density_dy", y)?;
        Ok(match *self {
            Distribution::Normal { mean, std } => -(y - mean) / (std * std),
            Distribution::LogNormal { mu, sigma } => -(1.0 + (y.ln() - mu) / (sigma * sigma)) / y,
            Distribution::Gamma { shape, rate } => (shape - 1.0) / y - rate,
            Distribution::Beta { a, b } => (a - 1.0) / y - (b - 1.0) / (1.0 - y),
            Distribution::Exponential { rate } => -rate,
            Distribution::Weibull { scale, shape } => {
                (shape - 1.0) / y - shape / scale * (y / scale).powf(shape - 1.0)
            }
            Distribution::Laplace { loc, scale } => -(y - loc).signum() / scale,
            _ => {
                return Err(Error::domain(
                    "log_density_dy",
                    format!("{} has no density derivative in y", self.family()),
                ))
            }
        })
    }

    /// E[y], used by tests and experiment reports.
    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Delta { loc } => loc,
            Distribution::Bernoulli { p } => p,
            Distribution::Normal { mean, .. } => mean,
            Distribution::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Distribution::Gamma { shape, rate } => shape / rate,
            Distribution::Beta { a, b } => a / (a + b),
            Distribution::Exponential { rate } => 1.0 / rate,
            Distribution::Weibull { scale, shape } => {
                scale * log_gamma(1.0 + 1.0 / shape).map_or(f64::NAN, f64::exp)
            }
            Distribution::Laplace { loc, .. } => loc,
            Distribution::Poisson { rate } => rate,
            Distribution::Geometric { p } => (1.0 - p) / p,
            Distribution::NegativeBinomial { r, p } => r * p / (1.0 - p),
            Distribution::Categorical { ref probs } => {
                probs.iter().enumerate().map(|(i, p)| i as f64 * p).sum()
            }
        }
    }
}
