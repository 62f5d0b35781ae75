//! Parameter transforms: compositions of a few differentiable primitives
//! mapping parent values to distribution parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One step of a [`ParamTransform`].
///
/// Elementwise steps may carry `param: k` to act only on the entries that
/// become the k-th distribution parameter (entries `i·P + k` of the output),
/// leaving the rest unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Primitive {
    /// y = W x + b with `shape = [out, in]`; W row-major.
    Affine {
        shape: [usize; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias: Option<Vec<f64>>,
    },
    Exp {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        param: Option<usize>,
    },
    Softplus {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        param: Option<usize>,
    },
    Sigmoid {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        param: Option<usize>,
    },
    Tanh {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        param: Option<usize>,
    },
    Identity,
    /// y_i = exp(s_i) x_i with one learnable log-scale per entry, `shape = [n]`.
    ScalePositive {
        shape: [usize; 1],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        log_scale: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Pointwise {
    Exp,
    Softplus,
    Sigmoid,
    Tanh,
}

impl Pointwise {
    fn value(self, x: f64) -> f64 {
        match self {
            Pointwise::Exp => x.exp(),
            Pointwise::Softplus => softplus(x),
            Pointwise::Sigmoid => sigmoid(x),
            Pointwise::Tanh => x.tanh(),
        }
    }

    /// dy/dx from the input x and output y.
    fn slope(self, x: f64, y: f64) -> f64 {
        match self {
            Pointwise::Exp => y,
            Pointwise::Softplus => sigmoid(x),
            Pointwise::Sigmoid => y * (1.0 - y),
            Pointwise::Tanh => 1.0 - y * y,
        }
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Primitive {
    fn pointwise(&self) -> Option<(Pointwise, Option<usize>)> {
        match *self {
            Primitive::Exp { param } => Some((Pointwise::Exp, param)),
            Primitive::Softplus { param } => Some((Pointwise::Softplus, param)),
            Primitive::Sigmoid { param } => Some((Pointwise::Sigmoid, param)),
            Primitive::Tanh { param } => Some((Pointwise::Tanh, param)),
            _ => None,
        }
    }

    pub fn n_weights(&self) -> usize {
        match *self {
            Primitive::Affine { shape: [o, i], .. } => o * i + o,
            Primitive::ScalePositive { shape: [n], .. } => n,
            _ => 0,
        }
    }

    /// Initial weights from the JSON fields, zeros where absent.
    fn initial_weights(&self) -> Result<Vec<f64>> {
        let sized = |v: &Option<Vec<f64>>, n: usize, what: &str| match v {
            Some(v) if v.len() != n => Err(Error::Graph(format!(
                "{what} has {} entries, expected {n}",
                v.len()
            ))),
            Some(v) => Ok(v.clone()),
            None => Ok(vec![0.0; n]),
        };
        Ok(match self {
            Primitive::Affine {
                shape: [o, i],
                weight,
                bias,
            } => {
                let mut w = sized(weight, o * i, "affine weight")?;
                w.extend(sized(bias, *o, "affine bias")?);
                w
            }
            Primitive::ScalePositive { shape: [n], log_scale } => sized(log_scale, *n, "log_scale")?,
            _ => Vec::new(),
        })
    }

    /// Output length for an input of length `len`.
    fn out_len(&self, len: usize, arity: usize) -> Result<usize> {
        match *self {
            Primitive::Affine { shape: [o, i], .. } => {
                if i != len {
                    return Err(Error::Graph(format!("affine expects {i} inputs, got {len}")));
                }
                Ok(o)
            }
            Primitive::ScalePositive { shape: [n], .. } => {
                if n != len {
                    return Err(Error::Graph(format!("scale_positive expects {n} inputs, got {len}")));
                }
                Ok(n)
            }
            _ => {
                if let Some((_, Some(k))) = self.pointwise() {
                    if k >= arity {
                        return Err(Error::Graph(format!(
                            "param {k} out of range for a family with {arity} parameters"
                        )));
                    }
                }
                Ok(len)
            }
        }
    }
}

/// A composition of primitives with its weights stored externally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamTransform {
    pub primitives: Vec<Primitive>,
}

/// Inputs to each primitive of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    inputs: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

impl ParamTransform {
    pub fn new(primitives: Vec<Primitive>) -> Self {
        ParamTransform { primitives }
    }

    pub fn n_weights(&self) -> usize {
        self.primitives.iter().map(Primitive::n_weights).sum()
    }

    pub fn initial_weights(&self) -> Result<Vec<f64>> {
        let mut w = Vec::with_capacity(self.n_weights());
        for p in &self.primitives {
            w.extend(p.initial_weights()?);
        }
        Ok(w)
    }

    /// Output length for `n_in` inputs; `arity` is the target family's parameter count.
    pub fn output_len(&self, n_in: usize, arity: usize) -> Result<usize> {
        self.primitives
            .iter()
            .try_fold(n_in, |len, p| p.out_len(len, arity))
    }

    /// Forward pass; `arity` selects the entries addressed by `param`.
    pub fn forward(&self, x: &[f64], weights: &[f64], arity: usize) -> Trace {
        let mut inputs = Vec::with_capacity(self.primitives.len());
        let mut cur = x.to_vec();
        let mut off = 0;
        for p in &self.primitives {
            let w = &weights[off..off + p.n_weights()];
            off += p.n_weights();
            let next = match *p {
                Primitive::Affine { shape: [o, i], .. } => (0..o)
                    .map(|r| {
                        w[o * i + r] + w[r * i..(r + 1) * i].iter().zip(&cur).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .collect(),
                Primitive::ScalePositive { .. } => {
                    cur.iter().zip(w).map(|(xi, s)| s.exp() * xi).collect()
                }
                Primitive::Identity => cur.clone(),
                _ => {
                    let (f, sel) = p.pointwise().expect("pointwise");
                    cur.iter()
                        .enumerate()
                        .map(|(j, &xi)| if selected(j, sel, arity) { f.value(xi) } else { xi })
                        .collect()
                }
            };
            inputs.push(std::mem::replace(&mut cur, next));
        }
        Trace { inputs, output: cur }
    }

    /// Vector-Jacobian product: given ∂L/∂output, returns (∂L/∂weights, ∂L/∂input).
    pub fn vjp(&self, trace: &Trace, weights: &[f64], out_grad: &[f64], arity: usize) -> (Vec<f64>, Vec<f64>) {
        let mut wgrad = vec![0.0; self.n_weights()];
        let mut g = out_grad.to_vec();
        let mut off = self.n_weights();
        for (idx, p) in self.primitives.iter().enumerate().rev() {
            off -= p.n_weights();
            let w = &weights[off..off + p.n_weights()];
            let wg = &mut wgrad[off..off + p.n_weights()];
            let x = &trace.inputs[idx];
            g = match *p {
                Primitive::Affine { shape: [o, i], .. } => {
                    let mut gx = vec![0.0; i];
                    for r in 0..o {
                        let row = &w[r * i..(r + 1) * i];
                        for c in 0..i {
                            wg[r * i + c] += g[r] * x[c];
                            gx[c] += row[c] * g[r];
                        }
                        wg[o * i + r] += g[r];
                    }
                    gx
                }
                Primitive::ScalePositive { .. } => {
                    let mut gx = vec![0.0; x.len()];
                    for j in 0..x.len() {
                        let s = w[j].exp();
                        wg[j] += g[j] * s * x[j];
                        gx[j] = g[j] * s;
                    }
                    gx
                }
                Primitive::Identity => g,
                _ => {
                    let (f, sel) = p.pointwise().expect("pointwise");
                    x.iter()
                        .enumerate()
                        .map(|(j, &xi)| {
                            if selected(j, sel, arity) {
                                g[j] * f.slope(xi, f.value(xi))
                            } else {
                                g[j]
                            }
                        })
                        .collect()
                }
            };
        }
        (wgrad, g)
    }
}

fn selected(j: usize, sel: Option<usize>, arity: usize) -> bool {
    sel.is_none_or(|k| j % arity == k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn sample_transform() -> ParamTransform {
        ParamTransform::new(vec![
            Primitive::Affine { shape: [4, 3], weight: None, bias: None },
            Primitive::Tanh { param: None },
            Primitive::ScalePositive { shape: [4], log_scale: None },
            Primitive::Affine { shape: [4, 4], weight: None, bias: None },
            Primitive::Softplus { param: Some(1) },
            Primitive::Sigmoid { param: Some(0) },
            Primitive::Exp { param: Some(1) },
            Primitive::Identity,
        ])
    }

    #[test]
    fn vjp_matches_central_differences() {
        let t = sample_transform();
        let mut rng = stream(17);
        for _ in 0..200 {
            let w: Vec<f64> = (0..t.n_weights()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let gout: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let trace = t.forward(&x, &w, 2);
            let (wg, xg) = t.vjp(&trace, &w, &gout, 2);
            let loss = |x: &[f64], w: &[f64]| -> f64 {
                t.forward(x, w, 2).output.iter().zip(&gout).map(|(a, b)| a * b).sum()
            };
            for j in 0..w.len() {
                let h = 1e-5 * w[j].abs().max(1.0);
                let (mut wp, mut wm) = (w.clone(), w.clone());
                wp[j] += h;
                wm[j] -= h;
                let fd = (loss(&x, &wp) - loss(&x, &wm)) / (2.0 * h);
                assert!((fd - wg[j]).abs() < 1e-6, "weight {j}: {fd} vs {}", wg[j]);
            }
            for j in 0..x.len() {
                let h = 1e-5 * x[j].abs().max(1.0);
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[j] += h;
                xm[j] -= h;
                let fd = (loss(&xp, &w) - loss(&xm, &w)) / (2.0 * h);
                assert!((fd - xg[j]).abs() < 1e-6, "input {j}: {fd} vs {}", xg[j]);
            }
        }
    }

    #[test]
    fn json_form() {
        let t: ParamTransform = serde_json::from_str(
            r#"[{"op":"affine","shape":[2,1],"weight":[1,0],"bias":[0,1]},{"op":"softplus","param":1}]"#,
        )
        .unwrap();
        assert_eq!(t.n_weights(), 4);
        assert_eq!(t.initial_weights().unwrap(), vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(t.output_len(1, 2).unwrap(), 2);
        assert!(t.output_len(2, 2).is_err());
        let bad = serde_json::from_str::<ParamTransform>(r#"[{"op":"affine","shape":[2,1],"wieght":[1,0]}]"#);
        assert!(bad.is_err());
        let out = t.forward(&[3.0], &t.initial_weights().unwrap(), 2);
        assert_eq!(out.output()[0], 3.0);
        assert!((out.output()[1] - softplus(1.0)).abs() < 1e-15);
    }

    #[test]
    fn stable_links() {
        assert_eq!(softplus(-800.0), 0.0);
        assert_eq!(softplus(800.0), 800.0);
        assert!((sigmoid(-40.0) - (-40f64).exp() / (1.0 + (-40f64).exp())).abs() < 1e-30);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
