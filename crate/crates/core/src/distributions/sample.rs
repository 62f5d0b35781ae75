use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Poisson, StandardNormal};

use super::Distribution;
use crate::error::{Error, Result};

/// ln of a Gamma(shape, 1) draw.
///
/// Marsaglia–Tsang for shape ≥ 1; below that the draw is boosted from
/// shape + 1 by u^{1/shape}, in log space so tiny shapes do not underflow.
pub(crate) fn ln_std_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let u: f64 = rng.sample(Open01);
        return ln_std_gamma(shape + 1.0, rng) + u.ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.sample(Open01);
        if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
            return d.ln() + v.ln();
        }
    }
}

impl Distribution {
    /// One draw y ~ q(y).
    ///
    /// Reparameterizable families draw through [`sample_noise`](Self::sample_noise)
    /// and [`transform_noise`](Self::transform_noise), so the pathwise and GO
    /// estimators see identical samples from identical streams.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.family().is_reparameterizable() {
            let eps = self.sample_noise(rng).expect("reparameterizable");
            return self.transform_noise(eps).expect("reparameterizable");
        }
        match *self {
            Distribution::Delta { loc } => loc,
            Distribution::Bernoulli { p } => {
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            // Draws below the smallest normal double are pushed up to it;
            // they have probability ~shape·1e-308^shape.
            Distribution::Gamma { shape, rate } => {
                (ln_std_gamma(shape, rng) - rate.ln()).exp().max(f64::MIN_POSITIVE)
            }
            Distribution::Beta { a, b } => {
                let lx = ln_std_gamma(a, rng);
                let ly = ln_std_gamma(b, rng);
                let y = 1.0 / (1.0 + (ly - lx).exp());
                y.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
            }
            Distribution::Poisson { rate } => poisson(rate, rng),
            Distribution::Geometric { p } => {
                let u: f64 = rng.sample(Open01);
                (u.ln() / (-p).ln_1p()).floor()
            }
            Distribution::NegativeBinomial { r, p } => {
                let lam = (ln_std_gamma(r, rng) + p.ln() - (-p).ln_1p()).exp();
                if lam > 0.0 {
                    poisson(lam, rng)
                } else {
                    0.0
                }
            }
            Distribution::Categorical { ref probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (k, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return k as f64;
                    }
                }
                (probs.len() - 1) as f64
            }
            _ => unreachable!("reparameterizable families handled above"),
        }
    }

    /// Base noise ε of the pathwise sampler y = τ_γ(ε): standard normal for
    /// Normal and LogNormal, uniform on (0, 1) for the others.
    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match self {
            Distribution::Normal { .. } | Distribution::LogNormal { .. } => {
                Ok(rng.sample(StandardNormal))
            }
            Distribution::Exponential { .. }
            | Distribution::Weibull { .. }
            | Distribution::Laplace { .. } => Ok(rng.sample(Open01)),
            d => Err(Error::NotReparameterizable(d.family())),
        }
    }

    /// τ_γ(ε).
    pub fn transform_noise(&self, eps: f64) -> Result<f64> {
        Ok(match *self {
            Distribution::Normal { mean, std } => mean + std * eps,
            Distribution::LogNormal { mu, sigma } => (mu + sigma * eps).exp(),
            Distribution::Exponential { rate } => -eps.ln() / rate,
            Distribution::Weibull { scale, shape } => scale * (-eps.ln()).powf(1.0 / shape),
            Distribution::Laplace { loc, scale } => {
                let c = eps - 0.5;
                loc - scale * c.signum() * (-2.0 * c.abs()).ln_1p()
            }
            ref d => return Err(Error::NotReparameterizable(d.family())),
        })
    }

    /// ∂τ_γ(ε)/∂γ, one entry per parameter.
    pub fn rep_jacobian(&self, eps: f64) -> Result<Vec<f64>> {
        let y = self.transform_noise(eps)?;
        Ok(match *self {
            Distribution::Normal { .. } => vec![1.0, eps],
            Distribution::LogNormal { .. } => vec![y, y * eps],
            Distribution::Exponential { rate } => vec![-y / rate],
            Distribution::Weibull { scale, shape } => {
                vec![y / scale, -y * (-eps.ln()).ln() / (shape * shape)]
            }
            Distribution::Laplace { loc, scale } => vec![1.0, (y - loc) / scale],
            _ => unreachable!("transform_noise rejects the rest"),
        })
    }
}

fn poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> f64 {
    // Rates beyond this bound have no representable mass at small counts
    // and are outside anything the experiments produce.
    let rate = rate.min(1e15);
    rng.sample(Poisson::new(rate).expect("positive finite rate"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Family;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(d: &Distribution, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
        (m, (v / n as f64).sqrt())
    }

    #[test]
    fn sample_means_within_five_se() {
        let ds = [
            Distribution::normal(1.0, 2.0).unwrap(),
            Distribution::new(Family::LogNormal, &[0.1, 0.5]).unwrap(),
            Distribution::gamma(2.5, 3.0).unwrap(),
            Distribution::gamma(0.3, 0.5).unwrap(),
            Distribution::new(Family::Beta, &[0.4, 2.0]).unwrap(),
            Distribution::new(Family::Exponential, &[2.0]).unwrap(),
            Distribution::new(Family::Weibull, &[1.5, 0.8]).unwrap(),
            Distribution::new(Family::Laplace, &[-1.0, 0.5]).unwrap(),
            Distribution::poisson(3.5).unwrap(),
            Distribution::new(Family::Geometric, &[0.3]).unwrap(),
            Distribution::negative_binomial(10.0, 0.2).unwrap(),
            Distribution::negative_binomial(0.5, 0.7).unwrap(),
            Distribution::bernoulli(0.3).unwrap(),
            Distribution::new(Family::Categorical, &[0.2, 0.3, 0.5]).unwrap(),
        ];
        for (i, d) in ds.iter().enumerate() {
            let (m, se) = moments(d, 100_000, i as u64);
            assert!((m - d.mean()).abs() < 5.0 * se, "{d:?}: {m} vs {}", d.mean());
        }
    }

    #[test]
    fn tiny_gamma_shape() {
        let d = Distribution::gamma(0.05, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..1_000_000).map(|_| d.sample(&mut rng)).collect();
        assert!(xs.iter().all(|&x| x > 0.0 && x.is_finite()));
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let se = (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0) / n).sqrt();
        assert!((m - 0.05).abs() < 5.0 * se, "{m} ± {se}");
        // Every draw must have a finite nabla, including the clamped ones.
        let d = Distribution::gamma(0.01, 0.5).unwrap();
        for _ in 0..10_000 {
            let y = d.sample(&mut rng);
            assert!(d.variable_nabla(y).unwrap().per_param.iter().all(|g| g.is_finite()));
        }
    }

    #[test]
    fn point_mass_and_clamped_bernoulli() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = Distribution::new(Family::Delta, &[3.7]).unwrap();
        assert!((0..100).all(|_| d.sample(&mut rng) == 3.7));
        let b = Distribution::bernoulli(1.0 - 1e-15).unwrap();
        assert!((0..1000).all(|_| b.support().contains(b.sample(&mut rng))));
    }

    #[test]
    fn kolmogorov_smirnov_continuous() {
        // Critical value at α = 1e-3 is about 1.949 / √n.
        let n = 100_000;
        let ds = [
            Distribution::normal(0.5, 1.5).unwrap(),
            Distribution::gamma(0.7, 2.0).unwrap(),
            Distribution::new(Family::Beta, &[2.0, 0.6]).unwrap(),
            Distribution::new(Family::Weibull, &[1.0, 2.5]).unwrap(),
            Distribution::new(Family::Laplace, &[0.0, 1.0]).unwrap(),
            Distribution::new(Family::LogNormal, &[0.0, 1.0]).unwrap(),
        ];
        for (i, d) in ds.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
            let mut xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
            xs.sort_by(f64::total_cmp);
            let dmax = xs
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    let c = d.cdf(x).unwrap();
                    (c - k as f64 / n as f64).abs().max(((k + 1) as f64 / n as f64 - c).abs())
                })
                .fold(0.0, f64::max);
            assert!(dmax < 1.949 / (n as f64).sqrt(), "{d:?}: D = {dmax}");
        }
    }

    #[test]
    fn chi_square_discrete() {
        let n = 100_000;
        let ds = [
            Distribution::poisson(3.5).unwrap(),
            Distribution::new(Family::Geometric, &[0.3]).unwrap(),
            Distribution::negative_binomial(10.0, 0.2).unwrap(),
            Distribution::new(Family::Categorical, &[0.1, 0.2, 0.3, 0.4]).unwrap(),
        ];
        for (i, d) in ds.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(200 + i as u64);
            let mut counts = vec![0usize; 12];
            for _ in 0..n {
                let y = (d.sample(&mut rng) as usize).min(11);
                counts[y] += 1;
            }
            let mut chi2 = 0.0;
            let mut dof = 0;
            for (y, &c) in counts.iter().enumerate() {
                let p = if y < 11 {
                    if !d.support().contains(y as f64) {
                        continue;
                    }
                    d.density(y as f64).unwrap()
                } else if d.support().contains(11.0) {
                    d.sf(10.0).unwrap()
                } else {
                    continue;
                };
                if p * n as f64 >= 5.0 {
                    chi2 += (c as f64 - p * n as f64).powi(2) / (p * n as f64);
                    dof += 1;
                }
            }
            // χ² 0.999 quantile for ≤ 11 degrees of freedom is below 32.
            assert!(chi2 < 32.0, "{d:?}: chi2 = {chi2} on {dof} cells");
        }
    }

    #[test]
    fn pathwise_jacobian_matches_difference() {
        let ds = [
            Distribution::normal(0.5, 1.5).unwrap(),
            Distribution::new(Family::LogNormal, &[0.2, 0.7]).unwrap(),
            Distribution::new(Family::Exponential, &[1.7]).unwrap(),
            Distribution::new(Family::Weibull, &[1.3, 0.9]).unwrap(),
            Distribution::new(Family::Laplace, &[0.0, 2.0]).unwrap(),
        ];
        for d in ds {
            let eps = if d.family() == Family::Normal || d.family() == Family::LogNormal {
                0.8
            } else {
                0.23
            };
            let fd = d.param_fd_gradient(|d| d.transform_noise(eps)).unwrap();
            let j = d.rep_jacobian(eps).unwrap();
            for (a, b) in j.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-8, "{d:?}: {j:?} vs {fd:?}");
            }
        }
        assert!(matches!(
            Distribution::gamma(1.0, 1.0).unwrap().rep_jacobian(0.5),
            Err(Error::NotReparameterizable(Family::Gamma))
        ));
    }
}
