use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentKind, Optimizer, TraceRecord};
use crate::distributions::{Distribution, Family};
use crate::error::{Error, Result};
use crate::estimators::{one_sample, sample_variance, EstimatorKind, StickingIntegrand};
use crate::integrand::{FnIntegrand, Integrand};
use crate::oracle::{kl_gamma, kl_negative_binomial};
use crate::rng::substream;
use crate::statgraph::transform::{sigmoid, softplus};

/// One estimator's optimization run on a toy posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRun {
    pub estimator: EstimatorKind,
    pub trace: Vec<TraceRecord>,
    pub final_params: Vec<f64>,
    pub final_kl: f64,
}

impl ToyRun {
    /// Median over iterations of the recorded variance of gradient entry `k`.
    pub fn median_variance(&self, k: usize) -> f64 {
        let mut v: Vec<f64> = self.trace.iter().map(|r| r.grad_variance[k]).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n == 0 {
            return f64::NAN;
        }
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Link {
    Softplus,
    Sigmoid,
}

impl Link {
    fn forward(self, u: f64) -> f64 {
        match self {
            Link::Softplus => softplus(u),
            Link::Sigmoid => sigmoid(u),
        }
    }

    fn slope(self, u: f64) -> f64 {
        match self {
            Link::Softplus => sigmoid(u),
            Link::Sigmoid => {
                let s = sigmoid(u);
                s * (1.0 - s)
            }
        }
    }

    fn inverse(self, x: f64) -> f64 {
        match self {
            // softplus⁻¹(x) = x + ln(1 − e^{−x})
            Link::Softplus => x + (-(-x).exp_m1()).ln(),
            Link::Sigmoid => (x / (1.0 - x)).ln(),
        }
    }
}

struct Toy {
    family: Family,
    links: [Link; 2],
    kl: fn(&Distribution, &Distribution) -> Result<f64>,
}

/// Gamma(α, β) variational family fitted to a Gamma(α₀, β₀) posterior.
pub fn run_gamma_toy(cfg: &ExperimentConfig) -> Result<Vec<ToyRun>> {
    expect_kind(cfg, ExperimentKind::GammaToy)?;
    run_toy(
        cfg,
        &Toy {
            family: Family::Gamma,
            links: [Link::Softplus, Link::Softplus],
            kl: kl_gamma,
        },
    )
}

/// NB(r, p) variational family fitted to an NB(r₀, p₀) posterior.
pub fn run_nb_toy(cfg: &ExperimentConfig) -> Result<Vec<ToyRun>> {
    expect_kind(cfg, ExperimentKind::NbToy)?;
    run_toy(
        cfg,
        &Toy {
            family: Family::NegativeBinomial,
            links: [Link::Softplus, Link::Sigmoid],
            kl: kl_negative_binomial,
        },
    )
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.experiment != kind {
        return Err(Error::Config(format!(
            "experiment is {:?}, expected {kind:?}",
            cfg.experiment
        )));
    }
    cfg.validate()
}

fn run_toy(cfg: &ExperimentConfig, toy: &Toy) -> Result<Vec<ToyRun>> {
    let target = Distribution::new(toy.family, &cfg.target_params)?;
    let log_p = {
        let (p, pg) = (target.clone(), target.clone());
        let f = FnIntegrand::new(move |z| p.log_density(z[0]).unwrap_or(f64::NAN));
        if toy.family.is_discrete() {
            f
        } else {
            f.with_gradient(move |z| vec![pg.log_density_dy(z[0]).unwrap_or(f64::NAN)])
        }
    };
    cfg.estimators
        .iter()
        .enumerate()
        .map(|(k, &est)| {
            let mut rng = substream(cfg.seed, k as u64);
            let mut u: Vec<f64> = cfg
                .init_params
                .iter()
                .zip(toy.links)
                .map(|(&x, l)| l.inverse(x))
                .collect();
            let natural = |u: &[f64]| -> Vec<f64> {
                u.iter().zip(toy.links).map(|(&v, l)| l.forward(v)).collect()
            };
            let mut opt = Optimizer::new(cfg.optimizer.clone(), 2);
            let mut trace = Vec::with_capacity(cfg.iterations);
            for it in 0..cfg.iterations {
                let start = cfg.record_wall_clock.then(Instant::now);
                let numerical = |e: Error| Error::Numerical {
                    iteration: it,
                    detail: format!("{est}: {e}"),
                };
                let params = natural(&u);
                let q = Distribution::new(toy.family, &params).map_err(numerical)?;
                let qs = [q];
                let f = StickingIntegrand {
                    log_p: &log_p as &dyn Integrand,
                    q: &qs,
                };
                let probes = (0..cfg.variance_probes)
                    .map(|_| one_sample(est, &qs, &f, &mut rng))
                    .collect::<Result<Vec<_>>>()
                    .map_err(numerical)?;
                let record = TraceRecord {
                    iteration: it,
                    param_values: params,
                    elbo_estimate: -(toy.kl)(&qs[0], &target).map_err(numerical)?,
                    grad_variance: sample_variance(&probes)?,
                    wall_clock_ms: start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3),
                };
                if let Some(detail) = record.non_finite() {
                    return Err(Error::Numerical {
                        iteration: it,
                        detail: format!("{est}: {detail}"),
                    });
                }
                trace.push(record);
                let last = probes.last().expect("at least two probes");
                let grad_u: Vec<f64> = last
                    .iter()
                    .zip(&u)
                    .zip(toy.links)
                    .map(|((g, &v), l)| g * l.slope(v))
                    .collect();
                if let Some(i) = grad_u.iter().position(|g| !g.is_finite()) {
                    return Err(Error::Numerical {
                        iteration: it,
                        detail: format!("{est}: gradient entry {i} = {}", grad_u[i]),
                    });
                }
                opt.ascend(&mut u, &grad_u);
            }
            let final_params = natural(&u);
            let final_kl = Distribution::new(toy.family, &final_params)
                .and_then(|q| (toy.kl)(&q, &target))
                .map_err(|e| Error::Numerical {
                    iteration: cfg.iterations,
                    detail: format!("{est}: {e}"),
                })?;
            Ok(ToyRun {
                estimator: est,
                trace,
                final_params,
                final_kl,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn links_invert() {
        for x in [1e-3, 0.2, 0.5, 3.0, 40.0] {
            assert!((Link::Softplus.forward(Link::Softplus.inverse(x)) - x).abs() < 1e-12 * x.max(1.0));
        }
        for x in [1e-4, 0.2, 0.5, 0.9] {
            assert!((Link::Sigmoid.forward(Link::Sigmoid.inverse(x)) - x).abs() < 1e-14);
        }
    }

    #[test]
    fn short_runs_are_deterministic() {
        let mut c = ExperimentConfig::default_for(ExperimentKind::GammaToy);
        c.iterations = 30;
        let a = run_gamma_toy(&c).unwrap();
        let b = run_gamma_toy(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].trace.len(), 30);
        let mut c = ExperimentConfig::default_for(ExperimentKind::NbToy);
        c.iterations = 30;
        let runs = run_nb_toy(&c).unwrap();
        assert_eq!(runs[2].estimator, EstimatorKind::Reinforce2);
        assert!(run_gamma_toy(&c).is_err());
    }
}
