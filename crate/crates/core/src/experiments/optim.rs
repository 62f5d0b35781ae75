use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("optimizer.learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("optimizer.beta1 and optimizer.beta2 must lie in [0, 1)".into());
        }
        if !(self.eps > 0.0) {
            return bad(format!("optimizer.eps must be > 0, got {}", self.eps));
        }
        Ok(())
    }
}

/// Gradient ascent state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: OptimizerConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig, n: usize) -> Self {
        Optimizer {
            cfg,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One ascent step along `grad`.
    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64]) {
        let c = &self.cfg;
        match c.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p += c.learning_rate * g;
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let bc1 = 1.0 - c.beta1.powi(self.t);
                let bc2 = 1.0 - c.beta2.powi(self.t);
                for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
                    *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                    *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                    *p += c.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + c.eps);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_adam_step_has_learning_rate_length() {
        let mut o = Optimizer::new(OptimizerConfig::default(), 2);
        let mut p = [0.0, 1.0];
        o.ascend(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 1e-2).abs() < 1e-9 && (p[1] - (1.0 - 1e-2)).abs() < 1e-9);
    }

    #[test]
    fn sgd_ascends_quadratic() {
        let cfg = OptimizerConfig { kind: OptimizerKind::Sgd, learning_rate: 0.1, ..Default::default() };
        let mut o = Optimizer::new(cfg, 1);
        let mut p = [5.0];
        for _ in 0..200 {
            let g = [-2.0 * (p[0] - 1.0)];
            o.ascend(&mut p, &g);
        }
        assert!((p[0] - 1.0).abs() < 1e-9);
    }
}
