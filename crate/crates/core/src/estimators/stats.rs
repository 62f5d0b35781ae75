use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-coordinate sample mean and unbiased variance of a stream of vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: Vec<f64>,
    /// (n − 1)-denominator variance; zero when n < 2.
    pub variance: Vec<f64>,
}

impl Summary {
    /// Welford accumulation, so identical inputs give exactly zero variance.
    pub fn from_samples<I: IntoIterator<Item = Vec<f64>>>(samples: I) -> Self {
        let mut n = 0usize;
        let mut mean: Vec<f64> = Vec::new();
        let mut m2: Vec<f64> = Vec::new();
        for x in samples {
            if n == 0 {
                mean = vec![0.0; x.len()];
                m2 = vec![0.0; x.len()];
            }
            n += 1;
            for ((m, s), xi) in mean.iter_mut().zip(m2.iter_mut()).zip(&x) {
                let delta = xi - *m;
                *m += delta / n as f64;
                *s += delta * (xi - *m);
            }
        }
        let variance = if n < 2 {
            vec![0.0; mean.len()]
        } else {
            m2.iter().map(|s| s / (n - 1) as f64).collect()
        };
        Summary { n, mean, variance }
    }

    /// Standard error of each mean.
    pub fn se(&self) -> Vec<f64> {
        self.variance
            .iter()
            .map(|v| (v / self.n as f64).sqrt())
            .collect()
    }
}

/// Unbiased per-coordinate variance across `probes` estimates.
pub fn sample_variance(probes: &[Vec<f64>]) -> Result<Vec<f64>> {
    if probes.len() < 2 {
        return Err(Error::domain("gradient_variance", "needs at least two probes"));
    }
    Ok(Summary::from_samples(probes.iter().cloned()).variance)
}

/// Variance across `m` independent one-sample estimates produced by `one`.
pub fn gradient_variance<F>(m: usize, mut one: F) -> Result<Vec<f64>>
where
    F: FnMut() -> Result<Vec<f64>>,
{
    let probes = (0..m).map(|_| one()).collect::<Result<Vec<_>>>()?;
    sample_variance(&probes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::Distribution;
    use crate::estimators::{one_sample, EstimatorKind};
    use crate::integrand::TestFunction;
    use crate::rng::stream;

    #[test]
    fn constant_estimates_have_zero_variance() {
        let v = gradient_variance(20, || Ok(vec![0.1, -3.7])).unwrap();
        assert_eq!(v, vec![0.0, 0.0]);
        assert!(gradient_variance(1, || Ok(vec![0.0])).is_err());
    }

    #[test]
    fn normal_mean_variances() {
        let d = [Distribution::normal(0.0, 1.0).unwrap()];
        let mut rng = stream(3);
        let go = gradient_variance(10_000, || {
            one_sample(EstimatorKind::Go, &d, &TestFunction::Identity, &mut rng)
        })
        .unwrap();
        assert_eq!(go[0], 0.0);
        // REINFORCE μ-entry is y², whose variance is E[y⁴] − 1 = 2.
        let rf = gradient_variance(10_000, || {
            one_sample(EstimatorKind::Reinforce, &d, &TestFunction::Identity, &mut rng)
        })
        .unwrap();
        assert!((rf[0] - 2.0).abs() < 0.2, "{}", rf[0]);
    }

    #[test]
    fn summary_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, -1.0];
        let s = Summary::from_samples(xs.iter().map(|&x| vec![x]));
        let m = xs.iter().sum::<f64>() / 4.0;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 3.0;
        assert!((s.mean[0] - m).abs() < 1e-15 && (s.variance[0] - v).abs() < 1e-14);
    }
}
