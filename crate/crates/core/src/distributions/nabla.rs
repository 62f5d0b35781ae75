use serde::{Deserialize, Serialize};

use super::{Distribution, Support, MIN_PMF};
use crate::error::{Error, Result};
use crate::integrand::Integrand;
use crate::special::{beta_shape_cdf_ratio, digamma, gamma_shape_cdf_ratio, Shape};

/// g_κ(y) for every parameter κ of one distribution, in `params()` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableNabla {
    pub per_param: Vec<f64>,
}

impl Distribution {
    fn check_positive_mass(&self, context: &'static str, y: f64) -> Result<()> {
        let ln_q = self.log_density(y)?;
        let dead = if self.is_discrete() {
            ln_q < MIN_PMF.ln()
        } else {
            ln_q == f64::NEG_INFINITY
        };
        if dead {
            Err(Error::domain(
                context,
                format!("{} has zero density at y = {y}", self.family()),
            ))
        } else {
            Ok(())
        }
    }

    /// The variable-nabla g_γ(y) = −(∂Q(y)/∂γ) / q(y).
    pub fn variable_nabla(&self, y: f64) -> Result<VariableNabla> {
        self.check_positive_mass("variable_nabla", y)?;
        let per_param = match *self {
            Distribution::Delta { .. } | Distribution::Poisson { .. } => vec![1.0],
            Distribution::Bernoulli { p } => vec![if y == 0.0 { 1.0 / (1.0 - p) } else { 0.0 }],
            Distribution::Normal { mean, std } => vec![1.0, (y - mean) / std],
            Distribution::LogNormal { mu, sigma } => vec![y, y * (y.ln() - mu) / sigma],
            Distribution::Gamma { shape, rate } => {
                vec![-gamma_shape_cdf_ratio(shape, rate * y)? / rate, -y / rate]
            }
            Distribution::Beta { a, b } => vec![
                -beta_shape_cdf_ratio(y, 1.0 - y, a, b, Shape::A)?,
                -beta_shape_cdf_ratio(y, 1.0 - y, a, b, Shape::B)?,
            ],
            Distribution::Exponential { rate } => vec![-y / rate],
            Distribution::Weibull { scale, shape } => {
                vec![y / scale, y / shape * (scale / y).ln()]
            }
            Distribution::Laplace { loc, scale } => vec![1.0, (y - loc) / scale],
            Distribution::Geometric { p } => vec![-(y + 1.0) / p],
            Distribution::NegativeBinomial { r, p } => {
                // The NB mass equals the Beta(r, y+1) density at 1−p times (1−p)/(r+y).
                let ratio = beta_shape_cdf_ratio(1.0 - p, p, r, y + 1.0, Shape::A)?;
                vec![-ratio * (r + y) / (1.0 - p), (y + r) / (1.0 - p)]
            }
            Distribution::Categorical { ref probs } => {
                let n = probs.len() - 1;
                let k = y as usize;
                let mut g = vec![0.0; n + 1];
                if k < n {
                    let w = -1.0 / probs[k];
                    g[..=k].iter_mut().for_each(|e| *e = w);
                }
                g
            }
        };
        Ok(VariableNabla { per_param })
    }

    /// The score ∇_γ ln q_γ(y) in closed form.
    pub fn score(&self, y: f64) -> Result<Vec<f64>> {
        self.check_positive_mass("score", y)?;
        Ok(match *self {
            Distribution::Delta { .. } => {
                return Err(Error::domain("score", "a point mass has no score function"))
            }
            Distribution::Bernoulli { p } => vec![if y == 1.0 { 1.0 / p } else { -1.0 / (1.0 - p) }],
            Distribution::Normal { mean, std } => {
                let d = y - mean;
                vec![d / (std * std), (d * d - std * std) / (std * std * std)]
            }
            Distribution::LogNormal { mu, sigma } => {
                let z = (y.ln() - mu) / sigma;
                vec![z / sigma, (z * z - 1.0) / sigma]
            }
            Distribution::Gamma { shape, rate } => {
                vec![(rate * y).ln() - digamma(shape)?, shape / rate - y]
            }
            Distribution::Beta { a, b } => {
                let ab = digamma(a + b)?;
                vec![y.ln() - digamma(a)? + ab, (-y).ln_1p() - digamma(b)? + ab]
            }
            Distribution::Exponential { rate } => vec![1.0 / rate - y],
            Distribution::Weibull { scale, shape } => {
                let t = y / scale;
                let tk = t.powf(shape);
                vec![shape / scale * (tk - 1.0), 1.0 / shape + t.ln() - tk * t.ln()]
            }
            Distribution::Laplace { loc, scale } => {
                let d = y - loc;
                vec![d.signum() / scale, -1.0 / scale + d.abs() / (scale * scale)]
            }
            Distribution::Poisson { rate } => vec![y / rate - 1.0],
            Distribution::Geometric { p } => vec![1.0 / p - y / (1.0 - p)],
            Distribution::NegativeBinomial { r, p } => vec![
                digamma(y + r)? - digamma(r)? + (-p).ln_1p(),
                y / p - r / (1.0 - p),
            ],
            Distribution::Categorical { ref probs } => {
                let n = probs.len() - 1;
                let k = y as usize;
                let mut s = vec![0.0; n + 1];
                if k < n {
                    s[k] = 1.0 / probs[k];
                } else {
                    s[..n].iter_mut().for_each(|e| *e = -1.0 / probs[n]);
                }
                s
            }
        })
    }

    /// The score by Richardson differences of ln q in each parameter.
    ///
    /// Fallback for families without a closed form and a cross-check for
    /// those with one.
    pub fn score_by_fd(&self, y: f64) -> Result<Vec<f64>> {
        self.check_positive_mass("score", y)?;
        if let Distribution::Delta { .. } = self {
            return Err(Error::domain("score", "a point mass has no score function"));
        }
        self.param_fd_gradient(|d| d.log_density(y))
    }
}

/// D_{y_v}[f]: ∂f/∂y_v for a continuous coordinate, f(y + e_v) − f(y) for a
/// discrete one.
///
/// At the top of a finite alphabet the difference would leave the support;
/// the paired variable-nabla entry is identically zero there, so zero is
/// returned without evaluating f.
pub fn d_y_operator(support: Support, f: &dyn Integrand, y: &[f64], v: usize) -> Result<f64> {
    if support.is_discrete() {
        if support.is_top(y[v]) {
            return Ok(0.0);
        }
        let mut up = y.to_vec();
        up[v] += 1.0;
        Ok(f.eval(&up) - f.eval(y))
    } else {
        let g = f.gradient(y).ok_or(Error::MissingEvaluator("gradient"))?;
        Ok(g[v])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Family;
    use crate::integrand::{FnIntegrand, TestFunction};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn table_values() {
        let b = Distribution::bernoulli(0.5).unwrap();
        assert_eq!(b.variable_nabla(0.0).unwrap().per_param, vec![2.0]);
        assert_eq!(b.variable_nabla(1.0).unwrap().per_param, vec![0.0]);
        let n = Distribution::normal(1.0, 2.0).unwrap();
        assert_eq!(n.variable_nabla(5.0).unwrap().per_param, vec![1.0, 2.0]);
        let c = Distribution::new(Family::Categorical, &[0.2, 0.3, 0.5]).unwrap();
        let g = c.variable_nabla(1.0).unwrap().per_param;
        assert!(close(&g, &[-10.0 / 3.0, -10.0 / 3.0, 0.0], 1e-12));
        assert_eq!(c.variable_nabla(2.0).unwrap().per_param, vec![0.0; 3]);
        let g = Distribution::gamma(2.0, 3.0).unwrap().variable_nabla(0.5).unwrap();
        assert!((g.per_param[1] + 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_shape_nabla_matches_cdf_difference() {
        let d = Distribution::gamma(2.0, 3.0).unwrap();
        let y = 0.5;
        let fd = d.param_fd_gradient(|d| d.cdf(y)).unwrap();
        let q = d.density(y).unwrap();
        let g = d.variable_nabla(y).unwrap().per_param;
        assert!((g[0] + fd[0] / q).abs() < 1e-8, "{} vs {}", g[0], -fd[0] / q);
    }

    #[test]
    fn nablas_of_every_family_match_cdf_definition() {
        let cases: Vec<(Distribution, Vec<f64>)> = vec![
            (Distribution::normal(0.3, 1.7).unwrap(), vec![-2.0, 0.1, 3.0]),
            (Distribution::new(Family::LogNormal, &[0.2, 0.6]).unwrap(), vec![0.3, 1.0, 4.0]),
            (Distribution::gamma(0.3, 2.0).unwrap(), vec![1e-4, 0.2, 3.0]),
            (Distribution::gamma(7.0, 0.5).unwrap(), vec![2.0, 14.0, 40.0]),
            (Distribution::new(Family::Beta, &[0.7, 2.5]).unwrap(), vec![0.01, 0.3, 0.9]),
            (Distribution::new(Family::Exponential, &[1.3]).unwrap(), vec![0.1, 2.0]),
            (Distribution::new(Family::Weibull, &[1.5, 0.8]).unwrap(), vec![0.05, 1.0, 5.0]),
            (Distribution::new(Family::Laplace, &[0.5, 1.2]).unwrap(), vec![-1.0, 0.45, 2.0]),
            (Distribution::poisson(3.5).unwrap(), vec![0.0, 3.0, 9.0]),
            (Distribution::new(Family::Geometric, &[0.3]).unwrap(), vec![0.0, 2.0, 10.0]),
            (Distribution::negative_binomial(10.0, 0.2).unwrap(), vec![0.0, 2.0, 8.0]),
            (Distribution::negative_binomial(0.5, 0.7).unwrap(), vec![0.0, 1.0, 6.0]),
            (Distribution::bernoulli(0.35).unwrap(), vec![0.0, 1.0]),
            (
                Distribution::new(Family::Categorical, &[0.1, 0.2, 0.3, 0.4]).unwrap(),
                vec![0.0, 1.0, 2.0, 3.0],
            ),
        ];
        for (d, ys) in cases {
            for y in ys {
                let q = d.density(y).unwrap();
                let fd = d.param_fd_gradient(|d| d.cdf(y)).unwrap();
                let expect: Vec<f64> = fd.iter().map(|v| -v / q).collect();
                let got = d.variable_nabla(y).unwrap().per_param;
                assert!(close(&got, &expect, 1e-6), "{d:?} y={y}: {got:?} vs {expect:?}");
            }
        }
    }

    #[test]
    fn closed_form_scores_match_differences() {
        let cases: Vec<(Distribution, f64)> = vec![
            (Distribution::normal(0.3, 1.7).unwrap(), 1.1),
            (Distribution::new(Family::LogNormal, &[0.2, 0.6]).unwrap(), 0.7),
            (Distribution::gamma(0.3, 2.0).unwrap(), 0.05),
            (Distribution::new(Family::Beta, &[0.7, 2.5]).unwrap(), 0.4),
            (Distribution::new(Family::Exponential, &[1.3]).unwrap(), 0.9),
            (Distribution::new(Family::Weibull, &[1.5, 0.8]).unwrap(), 2.0),
            (Distribution::new(Family::Laplace, &[0.5, 1.2]).unwrap(), -0.3),
            (Distribution::poisson(3.5).unwrap(), 4.0),
            (Distribution::new(Family::Geometric, &[0.3]).unwrap(), 3.0),
            (Distribution::negative_binomial(10.0, 0.2).unwrap(), 2.0),
            (Distribution::bernoulli(0.35).unwrap(), 0.0),
            (Distribution::new(Family::Categorical, &[0.1, 0.2, 0.3, 0.4]).unwrap(), 3.0),
            (Distribution::new(Family::Categorical, &[0.1, 0.2, 0.3, 0.4]).unwrap(), 1.0),
        ];
        for (d, y) in cases {
            let a = d.score(y).unwrap();
            let b = d.score_by_fd(y).unwrap();
            assert!(close(&a, &b, 1e-7), "{d:?} y={y}: {a:?} vs {b:?}");
        }
        assert!(Distribution::new(Family::Delta, &[1.0]).unwrap().score(1.0).is_err());
    }

    #[test]
    fn zero_mass_points_are_rejected() {
        let p = Distribution::poisson(0.01).unwrap();
        assert!(p.variable_nabla(400.0).is_err());
        let d = Distribution::new(Family::Delta, &[1.0]).unwrap();
        assert!(d.variable_nabla(2.0).is_err());
        assert_eq!(d.variable_nabla(1.0).unwrap().per_param, vec![1.0]);
    }

    #[test]
    fn d_operator_cases() {
        let cont = Support::ContinuousInterval {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        };
        assert_eq!(d_y_operator(cont, &TestFunction::Square, &[3.0], 0).unwrap(), 6.0);
        assert_eq!(
            d_y_operator(Support::NonnegIntegers, &TestFunction::Square, &[3.0], 0).unwrap(),
            7.0
        );
        let constant = FnIntegrand::new(|_| 4.2);
        assert_eq!(d_y_operator(Support::NonnegIntegers, &constant, &[5.0], 0).unwrap(), 0.0);
        assert!(matches!(
            d_y_operator(cont, &constant, &[1.0], 0),
            Err(Error::MissingEvaluator(_))
        ));
        let two = FnIntegrand::new(|y| y[0] * y[1]);
        assert_eq!(
            d_y_operator(Support::NonnegIntegers, &two, &[2.0, 3.0], 1).unwrap(),
            2.0
        );
    }
}
