//! Bernoulli-latent VAE at desk scale.
//!
//! Model: z_k ~ Bern(σ(c_k)), x_d | z ~ Bern(σ(W z + b)_d), encoder
//! q(z|x) = Π_k Bern(σ(U x + e)_k). With K ≤ 16 the ELBO and its encoder
//! gradient are computed exactly by enumerating all 2^K codes.

use rand::Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentKind, Optimizer, TraceRecord};
use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::estimators::{
    finite_support_sample, finite_support_sample_batched, sample_variance, AffineNonlinearIntegrand,
    Summary,
};
use crate::integrand::Integrand;
use crate::rng::{substream, Stream};
use crate::statgraph::transform::{sigmoid, softplus};

const DATA_STREAM: u64 = u64::MAX;
const INIT_STREAM: u64 = u64::MAX - 1;
const TRAIN_STREAM: u64 = 0;

/// Binary observations drawn from a random ground-truth model of the same form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeData {
    pub x: Vec<Vec<f64>>,
}

impl VaeData {
    pub fn synthetic(latent_dim: usize, data_dim: usize, n: usize, seed: u64) -> Self {
        let mut rng = substream(seed, DATA_STREAM);
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        let wide = Normal::new(0.0, 3.0).expect("normal");
        let prior: Vec<f64> = (0..latent_dim).map(|_| std.sample(&mut rng)).collect();
        let w: Vec<f64> = (0..data_dim * latent_dim).map(|_| wide.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..data_dim).map(|_| std.sample(&mut rng)).collect();
        let bit = |p: f64, rng: &mut Stream| if rng.random::<f64>() < p { 1.0 } else { 0.0 };
        let x = (0..n)
            .map(|_| {
                let z: Vec<f64> = prior.iter().map(|&c| bit(sigmoid(c), &mut rng)).collect();
                (0..data_dim)
                    .map(|d| {
                        let a = b[d] + dot(&w[d * latent_dim..(d + 1) * latent_dim], &z);
                        bit(sigmoid(a), &mut rng)
                    })
                    .collect()
            })
            .collect();
        VaeData { x }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliVae {
    pub latent_dim: usize,
    pub data_dim: usize,
    /// φ: row-major K × D encoder weights, then K encoder biases.
    pub encoder: Vec<f64>,
    /// θ: row-major D × K decoder weights, D decoder biases, K prior logits.
    pub decoder: Vec<f64>,
}

/// One sampled code per data point with the encoder gradient it yields.
struct Probe {
    phi_grad: Vec<f64>,
    codes: Vec<Vec<f64>>,
    elbo: f64,
}

impl BernoulliVae {
    /// Small random weights; exact zeros would leave all latent bits interchangeable.
    pub fn new(latent_dim: usize, data_dim: usize, seed: u64) -> Self {
        let mut rng = substream(seed, INIT_STREAM);
        let n = Normal::new(0.0, 0.1).expect("normal");
        let (k, d) = (latent_dim, data_dim);
        let mut encoder: Vec<f64> = (0..k * d).map(|_| n.sample(&mut rng)).collect();
        encoder.resize(k * d + k, 0.0);
        let mut decoder: Vec<f64> = (0..d * k).map(|_| n.sample(&mut rng)).collect();
        decoder.resize(d * k + d + k, 0.0);
        BernoulliVae {
            latent_dim,
            data_dim,
            encoder,
            decoder,
        }
    }

    fn prior_logits(&self) -> &[f64] {
        &self.decoder[self.data_dim * (self.latent_dim + 1)..]
    }

    pub fn encoder_logits(&self, x: &[f64]) -> Vec<f64> {
        let (k, d) = (self.latent_dim, self.data_dim);
        (0..k)
            .map(|i| self.encoder[k * d + i] + dot(&self.encoder[i * d..(i + 1) * d], x))
            .collect()
    }

    /// f(z) = log p(x|z) + log p(z) − log q(z|x) with q held at `logits`.
    pub fn integrand(&self, x: &[f64], logits: &[f64]) -> AffineNonlinearIntegrand {
        let (k, d) = (self.latent_dim, self.data_dim);
        let w = self.decoder[..d * k].to_vec();
        let b = self.decoder[d * k..d * k + d].to_vec();
        let x = x.to_vec();
        let head = move |a: &[f64]| x.iter().zip(a).map(|(xd, ad)| xd * ad - softplus(*ad)).sum();
        let h: Vec<(f64, f64)> = self
            .prior_logits()
            .iter()
            .zip(logits)
            .map(|(&c, &l)| (c - l, softplus(l) - softplus(c)))
            .collect();
        AffineNonlinearIntegrand::new(w, b, head).with_separable(move |v, z| z * h[v].0 + h[v].1)
    }

    fn factors(logits: &[f64]) -> Result<Vec<Distribution>> {
        logits.iter().map(|&l| Distribution::bernoulli(sigmoid(l))).collect()
    }

    /// Exact mean ELBO over the data and its gradient in φ, by enumeration.
    pub fn exact_elbo_and_encoder_gradient(&self, data: &VaeData) -> (f64, Vec<f64>) {
        let (k, d) = (self.latent_dim, self.data_dim);
        let n = data.len() as f64;
        let mut elbo = 0.0;
        let mut grad = vec![0.0; self.encoder.len()];
        let mut z = vec![0.0; k];
        for x in &data.x {
            let l = self.encoder_logits(x);
            let p: Vec<f64> = l.iter().map(|&v| sigmoid(v)).collect();
            let f = self.integrand(x, &l);
            let mut dl = vec![0.0; k];
            for code in 0..1usize << k {
                let mut log_q = 0.0;
                for (i, zi) in z.iter_mut().enumerate() {
                    *zi = ((code >> i) & 1) as f64;
                    log_q += if *zi == 1.0 { p[i].ln() } else { (-p[i]).ln_1p() };
                }
                let qf = log_q.exp() * f.eval(&z);
                elbo += qf;
                // ∂q/∂l_k = q (z_k − p_k)
                for i in 0..k {
                    dl[i] += qf * (z[i] - p[i]);
                }
            }
            accumulate_phi(&mut grad, &dl, x, d, 1.0 / n);
        }
        (elbo / n, grad)
    }

    /// One code per data point and the resulting finite-support GO gradient in φ.
    fn probe(&self, data: &VaeData, rng: &mut Stream, batched: bool) -> Result<Probe> {
        let d = self.data_dim;
        let n = data.len() as f64;
        let mut phi_grad = vec![0.0; self.encoder.len()];
        let mut codes = Vec::with_capacity(data.len());
        let mut elbo = 0.0;
        for x in &data.x {
            let l = self.encoder_logits(x);
            let dists = Self::factors(&l)?;
            let z: Vec<f64> = dists.iter().map(|q| q.sample(rng)).collect();
            let f = self.integrand(x, &l);
            let g = if batched {
                finite_support_sample_batched(&dists, &f, &z)?
            } else {
                finite_support_sample(&dists, &f, &z)?
            };
            // Chain ∂/∂p_k through σ'(l_k) = p_k (1 − p_k).
            let dl: Vec<f64> = g
                .iter()
                .zip(&dists)
                .map(|(gk, q)| {
                    let p = q.params()[0];
                    gk * p * (1.0 - p)
                })
                .collect();
            accumulate_phi(&mut phi_grad, &dl, x, d, 1.0 / n);
            elbo += f.eval(&z) / n;
            codes.push(z);
        }
        Ok(Probe {
            phi_grad,
            codes,
            elbo,
        })
    }

    /// Pathwise gradient of the mean log p(x, z) in θ at the given codes.
    pub fn decoder_gradient(&self, data: &VaeData, codes: &[Vec<f64>]) -> Vec<f64> {
        let (k, d) = (self.latent_dim, self.data_dim);
        let n = data.len() as f64;
        let mut grad = vec![0.0; self.decoder.len()];
        let prior = self.prior_logits().to_vec();
        for (x, z) in data.x.iter().zip(codes) {
            for j in 0..d {
                let a = self.decoder[d * k + j] + dot(&self.decoder[j * k..(j + 1) * k], z);
                let r = (x[j] - sigmoid(a)) / n;
                for i in 0..k {
                    grad[j * k + i] += r * z[i];
                }
                grad[d * k + j] += r;
            }
            for i in 0..k {
                grad[d * (k + 1) + i] += (z[i] - sigmoid(prior[i])) / n;
            }
        }
        grad
    }
}

fn accumulate_phi(grad: &mut [f64], dl: &[f64], x: &[f64], d: usize, scale: f64) {
    let k = dl.len();
    for i in 0..k {
        let s = dl[i] * scale;
        for j in 0..d {
            grad[i * d + j] += s * x[j];
        }
        grad[k * d + i] += s;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Comparison of the probe-mean encoder gradient against enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: usize,
    pub exact_elbo: f64,
    pub oracle: Vec<f64>,
    pub probe_mean: Vec<f64>,
    pub se: Vec<f64>,
    /// Largest |probe_mean − oracle| / se over entries with se > 0.
    pub max_z: f64,
    pub pass: bool,
    /// Largest |batched − naive| over one probe's φ-gradient.
    pub batch_naive_max_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeRun {
    /// One row per iteration: φ, one-sample ELBO estimate, variance of the φ-gradient.
    pub trace: Vec<TraceRecord>,
    pub checkpoints: Vec<Checkpoint>,
    pub model: BernoulliVae,
    pub data: VaeData,
}

/// Entry tolerance at checkpoints: 5 SE plus a relative rounding floor.
const CHECK_SE: f64 = 5.0;
const CHECK_FLOOR: f64 = 1e-10;

fn checkpoint(
    model: &BernoulliVae,
    data: &VaeData,
    iteration: usize,
    probes: usize,
    rng: &mut Stream,
) -> Result<Checkpoint> {
    let (exact_elbo, oracle) = model.exact_elbo_and_encoder_gradient(data);
    // Same codes through both evaluation paths.
    let fast = model.probe(data, &mut rng.clone(), true)?;
    let slow = model.probe(data, &mut rng.clone(), false)?;
    let diff = fast
        .phi_grad
        .iter()
        .zip(&slow.phi_grad)
        .fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
    let draws = (0..probes)
        .map(|_| model.probe(data, rng, true).map(|p| p.phi_grad))
        .collect::<Result<Vec<_>>>()?;
    let summary = Summary::from_samples(draws);
    let se = summary.se();
    let mut max_z: f64 = 0.0;
    let mut pass = true;
    for ((m, s), o) in summary.mean.iter().zip(&se).zip(&oracle) {
        let gap = (m - o).abs();
        if *s > 0.0 {
            max_z = max_z.max(gap / s);
        }
        pass &= gap <= CHECK_SE * s + CHECK_FLOOR * (1.0 + o.abs());
    }
    Ok(Checkpoint {
        iteration,
        exact_elbo,
        oracle,
        probe_mean: summary.mean,
        se,
        max_z,
        pass,
        batch_naive_max_diff: diff,
    })
}

/// Trains encoder and decoder by ELBO ascent; φ by finite-support GO under
/// the variance-probe protocol, θ pathwise at the last probe's codes.
/// Checkpoints run before the update of every `checkpoint_every`-th iteration.
pub fn run_bernoulli_vae(cfg: &ExperimentConfig) -> Result<VaeRun> {
    if cfg.experiment != ExperimentKind::BernoulliVae {
        return Err(Error::Config(format!(
            "experiment is {:?}, expected BernoulliVae",
            cfg.experiment
        )));
    }
    cfg.validate()?;
    let v = &cfg.vae;
    let data = VaeData::synthetic(v.latent_dim, v.data_dim, v.n_data, cfg.seed);
    let mut model = BernoulliVae::new(v.latent_dim, v.data_dim, cfg.seed);
    let mut opt_phi = Optimizer::new(cfg.optimizer.clone(), model.encoder.len());
    let mut opt_theta = Optimizer::new(cfg.optimizer.clone(), model.decoder.len());
    let mut rng = substream(cfg.seed, TRAIN_STREAM);
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut checkpoints = Vec::new();
    for it in 0..cfg.iterations {
        let numerical = |e: Error| Error::Numerical {
            iteration: it,
            detail: e.to_string(),
        };
        if it % v.checkpoint_every == 0 {
            let mut crng = substream(cfg.seed, 1 + (it / v.checkpoint_every) as u64);
            checkpoints.push(checkpoint(&model, &data, it, v.oracle_probes, &mut crng).map_err(numerical)?);
        }
        let start = cfg.record_wall_clock.then(std::time::Instant::now);
        let probes = (0..cfg.variance_probes)
            .map(|_| model.probe(&data, &mut rng, true))
            .collect::<Result<Vec<_>>>()
            .map_err(numerical)?;
        let grads: Vec<Vec<f64>> = probes.iter().map(|p| p.phi_grad.clone()).collect();
        let last = probes.last().expect("at least two probes");
        let record = TraceRecord {
            iteration: it,
            param_values: model.encoder.clone(),
            elbo_estimate: last.elbo,
            grad_variance: sample_variance(&grads)?,
            wall_clock_ms: start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3),
        };
        if let Some(detail) = record.non_finite() {
            return Err(Error::Numerical {
                iteration: it,
                detail,
            });
        }
        trace.push(record);
        let theta_grad = model.decoder_gradient(&data, &last.codes);
        opt_phi.ascend(&mut model.encoder, &last.phi_grad);
        opt_theta.ascend(&mut model.decoder, &theta_grad);
    }
    Ok(VaeRun {
        trace,
        checkpoints,
        model,
        data,
    })
}
