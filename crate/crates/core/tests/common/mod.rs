//! Random all-Delta graphs and a forward-mode dual-number oracle for them.
#![allow(dead_code)]

use gograd::statgraph::{GraphSpec, ParamTransform, Primitive, Role, StochasticGraph, StochasticNode};
use gograd::{Family, FnIntegrand, Integrand};
use rand::Rng;

/// Value with its gradient against every graph weight.
#[derive(Debug, Clone)]
pub struct Dual {
    pub v: f64,
    pub g: Vec<f64>,
}

impl Dual {
    fn constant(v: f64, n: usize) -> Self {
        Dual { v, g: vec![0.0; n] }
    }

    fn var(v: f64, n: usize, at: usize) -> Self {
        let mut d = Dual::constant(v, n);
        d.g[at] = 1.0;
        d
    }

    fn add(&self, o: &Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| a + b).collect(),
        }
    }

    fn mul(&self, o: &Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            g: self.g.iter().zip(&o.g).map(|(a, b)| a * o.v + self.v * b).collect(),
        }
    }

    /// Applies a scalar function with value `v` and slope `s`.
    fn chain(&self, v: f64, s: f64) -> Dual {
        Dual {
            v,
            g: self.g.iter().map(|a| a * s).collect(),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn apply(p: &Primitive, x: Vec<Dual>, w: &mut impl Iterator<Item = Dual>, n: usize) -> Vec<Dual> {
    match p {
        Primitive::Affine { shape: [o, i], .. } => {
            let wm: Vec<Dual> = w.take(o * i).collect();
            let b: Vec<Dual> = w.take(*o).collect();
            (0..*o)
                .map(|r| {
                    (0..*i).fold(b[r].clone(), |acc, c| acc.add(&wm[r * i + c].mul(&x[c])))
                })
                .collect()
        }
        Primitive::ScalePositive { shape: [k], .. } => {
            let s: Vec<Dual> = w.take(*k).collect();
            x.iter()
                .zip(s)
                .map(|(xi, si)| si.chain(si.v.exp(), si.v.exp()).mul(xi))
                .collect()
        }
        Primitive::Identity => x,
        Primitive::Exp { .. } => x.iter().map(|a| a.chain(a.v.exp(), a.v.exp())).collect(),
        Primitive::Tanh { .. } => x
            .iter()
            .map(|a| {
                let t = a.v.tanh();
                a.chain(t, 1.0 - t * t)
            })
            .collect(),
        Primitive::Sigmoid { .. } => x
            .iter()
            .map(|a| {
                let s = sigmoid(a.v);
                a.chain(s, s * (1.0 - s))
            })
            .collect(),
        Primitive::Softplus { .. } => x
            .iter()
            .map(|a| a.chain(a.v.exp().ln_1p(), sigmoid(a.v)))
            .collect(),
    }
    .into_iter()
    .map(|d| {
        debug_assert_eq!(d.g.len(), n);
        d
    })
    .collect()
}

/// Leaf values and d(leaf)/d(weights) by forward-mode differentiation.
pub fn dual_leaves(graph: &StochasticGraph) -> Vec<Dual> {
    let n = graph.weights().len();
    let mut values: Vec<Vec<Dual>> = Vec::new();
    for (i, node) in graph.nodes().iter().enumerate() {
        let mut x = Vec::new();
        for p in &node.parents {
            x.extend(values[graph.index_of(p).unwrap()].iter().cloned());
        }
        let range = graph.weight_range(i);
        let mut w = range.map(|k| Dual::var(graph.weights()[k], n, k));
        for p in &node.transform.primitives {
            x = apply(p, x, &mut w, n);
        }
        values.push(x);
    }
    graph.leaves().into_iter().flat_map(|i| values[i].clone()).collect()
}

/// ∇_w f(leaves(w)) for an integrand with a gradient.
pub fn chain_rule_gradient(graph: &StochasticGraph, f: &dyn Integrand) -> Vec<f64> {
    let leaves = dual_leaves(graph);
    let y: Vec<f64> = leaves.iter().map(|d| d.v).collect();
    let df = f.gradient(&y).unwrap();
    let mut out = vec![0.0; graph.weights().len()];
    for (d, s) in leaves.iter().zip(df) {
        for (o, g) in out.iter_mut().zip(&d.g) {
            *o += s * g;
        }
    }
    out
}

fn random_primitive<R: Rng>(rng: &mut R, dim: usize) -> Primitive {
    let param = if rng.random_bool(0.5) { Some(0) } else { None };
    match rng.random_range(0..7) {
        0 => Primitive::Tanh { param },
        1 => Primitive::Sigmoid { param },
        2 => Primitive::Softplus { param },
        3 => Primitive::Identity,
        4 => Primitive::ScalePositive { shape: [dim], log_scale: None },
        5 => Primitive::Affine { shape: [dim, dim], weight: None, bias: None },
        _ => Primitive::Exp { param },
    }
}

/// A random DAG of Delta nodes of depth at most 5 with random weights.
pub fn random_delta_graph<R: Rng>(rng: &mut R) -> StochasticGraph {
    let n_nodes = rng.random_range(1..=7);
    let mut depth: Vec<usize> = Vec::new();
    let mut dims: Vec<usize> = Vec::new();
    let mut specs: Vec<StochasticNode> = Vec::new();
    for i in 0..n_nodes {
        let dim = rng.random_range(1..=3);
        let mut parents: Vec<usize> = Vec::new();
        if i > 0 && rng.random_bool(0.8) {
            for _ in 0..rng.random_range(1..=2) {
                let p = rng.random_range(0..i);
                if depth[p] < 5 && !parents.contains(&p) {
                    parents.push(p);
                }
            }
        }
        let in_dim: usize = parents.iter().map(|&p| dims[p]).sum();
        let mut prims = vec![Primitive::Affine { shape: [dim, in_dim], weight: None, bias: None }];
        for _ in 0..rng.random_range(0..=3) {
            // Exp directly after an unbounded step can overflow; squash first.
            let p = random_primitive(rng, dim);
            if matches!(p, Primitive::Exp { .. }) {
                prims.push(Primitive::Tanh { param: None });
            }
            prims.push(p);
        }
        depth.push(1 + parents.iter().map(|&p| depth[p]).max().unwrap_or(0));
        dims.push(dim);
        specs.push(StochasticNode {
            id: format!("n{i}"),
            family: Family::Delta,
            parents: parents.iter().map(|p| format!("n{p}")).collect(),
            transform: ParamTransform::new(prims),
            role: Role::Leaf,
            dim,
        });
    }
    let has_child: Vec<bool> = (0..n_nodes)
        .map(|i| specs.iter().any(|s| s.parents.contains(&format!("n{i}"))))
        .collect();
    for (s, c) in specs.iter_mut().zip(has_child) {
        if c {
            s.role = Role::Internal;
        }
    }
    let mut g = StochasticGraph::new(GraphSpec { nodes: specs }).unwrap();
    let w: Vec<f64> = (0..g.weights().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    g.set_weights(&w).unwrap();
    g
}

/// Σ_j a_j y_j + b_j y_j² + sin(c_j y_j) over the leaf vector, with its gradient.
pub fn random_smooth_integrand<R: Rng>(rng: &mut R, len: usize) -> FnIntegrand {
    let coef: Vec<[f64; 3]> = (0..len)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-0.5..0.5), rng.random_range(-2.0..2.0)])
        .collect();
    let c2 = coef.clone();
    FnIntegrand::new(move |y| {
        y.iter()
            .zip(&coef)
            .map(|(v, [a, b, c])| a * v + b * v * v + (c * v).sin())
            .sum()
    })
    .with_gradient(move |y| {
        y.iter()
            .zip(&c2)
            .map(|(v, [a, b, c])| a + 2.0 * b * v + c * (c * v).cos())
            .collect()
    })
}
