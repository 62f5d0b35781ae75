use rand::Rng;

use super::{go_gradient, GradientEstimate};
use crate::distributions::Distribution;
use crate::error::Result;
use crate::integrand::Integrand;

/// log p(z) − Σ_v ln q_v(z_v) with the variational factors held fixed.
///
/// Holding q fixed drops the score term of the ELBO gradient, whose
/// expectation is zero but whose samples only add variance.
pub struct StickingIntegrand<'a> {
    pub log_p: &'a dyn Integrand,
    pub q: &'a [Distribution],
}

impl Integrand for StickingIntegrand<'_> {
    fn eval(&self, z: &[f64]) -> f64 {
        let log_q: f64 = self
            .q
            .iter()
            .zip(z)
            .map(|(d, &zv)| d.log_density(zv).unwrap_or(f64::NAN))
            .sum();
        self.log_p.eval(z) - log_q
    }

    fn gradient(&self, z: &[f64]) -> Option<Vec<f64>> {
        let mut g = self.log_p.gradient(z)?;
        for (v, d) in self.q.iter().enumerate() {
            if !d.is_discrete() {
                g[v] -= d.log_density_dy(z[v]).unwrap_or(f64::NAN);
            }
        }
        Some(g)
    }
}

/// GO estimate of ∇_φ ELBO for q_φ = `var_dists` and the log joint `log_p`.
pub fn elbo_gradient_sticking<R: Rng + ?Sized>(
    var_dists: &[Distribution],
    log_p: &dyn Integrand,
    n: usize,
    rng: &mut R,
) -> Result<GradientEstimate> {
    let f = StickingIntegrand {
        log_p,
        q: var_dists,
    };
    go_gradient(var_dists, &f, n, rng)
}
