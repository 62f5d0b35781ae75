//! Stochastic computation graphs and statistical back-propagation.
//!
//! Each node holds `dim` conditionally independent coordinates of one family.
//! Its transform maps the concatenated values of its parents to a vector of
//! `dim · P` parameters laid out coordinate-major: entry `i·P + k` is
//! parameter k of coordinate i. A root node's transform sees an empty input,
//! so an affine `[dim·P, 0]` step makes its parameters plain learnable biases.
//!
//! The backward pass carries BP[z] = ∂(one-sample objective)/∂z down the
//! graph. A child y with parameters θ(z) contributes g_θ(y) BP[y] ∂θ/∂z, where
//! g is the variable-nabla, and the same product with ∂θ/∂w yields the weight
//! gradient. Point-mass nodes have g = 1, which turns the recursion into
//! ordinary back-propagation.

mod io;
pub mod transform;

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{d_y_operator, Distribution, Family};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, GradientEstimate};
use crate::integrand::Integrand;

pub use io::{load_weights, save_weights, WeightManifest, WeightSlice};
pub use transform::{ParamTransform, Primitive};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Has at least one child node.
    Internal,
    /// Feeds only the integrand.
    Leaf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticNode {
    pub id: String,
    pub family: Family,
    #[serde(default)]
    pub parents: Vec<String>,
    pub transform: ParamTransform,
    pub role: Role,
    #[serde(default = "one")]
    pub dim: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub nodes: Vec<StochasticNode>,
}

/// A validated DAG with its learnable weights.
#[derive(Debug, Clone)]
pub struct StochasticGraph {
    /// Topological order.
    nodes: Vec<StochasticNode>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    arity: Vec<usize>,
    /// Start of each node's weights in `weights`.
    offsets: Vec<usize>,
    weights: Vec<f64>,
}

/// One joint draw of every node.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Per node in topological order.
    pub values: Vec<Vec<f64>>,
    /// Per node, the `dim · P` distribution parameters used for the draw.
    pub params: Vec<Vec<f64>>,
}

/// Output of [`statistical_backprop`].
#[derive(Debug, Clone, PartialEq)]
pub struct Backprop {
    /// Gradient with respect to the flat weight vector.
    pub weight_grad: Vec<f64>,
    /// BP vector of each node, in topological order.
    pub bp: Vec<Vec<f64>>,
}

impl StochasticGraph {
    pub fn new(spec: GraphSpec) -> Result<Self> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        for (i, n) in spec.nodes.iter().enumerate() {
            if index.insert(n.id.as_str(), i).is_some() {
                return Err(Error::Graph(format!("duplicate node id {:?}", n.id)));
            }
        }
        let k = spec.nodes.len();
        if k == 0 {
            return Err(Error::Graph("graph has no nodes".into()));
        }
        let mut parents = vec![Vec::new(); k];
        for (i, n) in spec.nodes.iter().enumerate() {
            for p in &n.parents {
                let &j = index
                    .get(p.as_str())
                    .ok_or_else(|| Error::Graph(format!("node {:?}: unknown parent {p:?}", n.id)))?;
                if parents[i].contains(&j) {
                    return Err(Error::Graph(format!("node {:?}: repeated parent {p:?}", n.id)));
                }
                parents[i].push(j);
            }
        }
        // Kahn's algorithm, taking the lowest declared index first so the
        // order is deterministic and respects the file where possible.
        let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut order = Vec::with_capacity(k);
        let mut done = vec![false; k];
        while order.len() < k {
            let next = (0..k).find(|&i| !done[i] && indeg[i] == 0).ok_or_else(|| {
                Error::Graph("cycle among nodes".into())
            })?;
            done[next] = true;
            order.push(next);
            for i in 0..k {
                if parents[i].contains(&next) {
                    indeg[i] -= 1;
                }
            }
        }
        let mut pos = vec![0; k];
        for (p, &i) in order.iter().enumerate() {
            pos[i] = p;
        }
        let mut slots: Vec<Option<StochasticNode>> = spec.nodes.into_iter().map(Some).collect();
        let nodes: Vec<StochasticNode> = order.iter().map(|&i| slots[i].take().expect("once")).collect();
        let parents: Vec<Vec<usize>> = order
            .iter()
            .map(|&i| parents[i].iter().map(|&j| pos[j]).collect())
            .collect();
        let mut children = vec![Vec::new(); k];
        for (i, ps) in parents.iter().enumerate() {
            for &p in ps {
                children[p].push(i);
            }
        }

        let mut arity = Vec::with_capacity(k);
        let mut offsets = Vec::with_capacity(k);
        let mut weights = Vec::new();
        for (i, n) in nodes.iter().enumerate() {
            let a = n.family.arity().ok_or_else(|| {
                Error::Graph(format!(
                    "node {:?}: categorical nodes need a softmax transform, which is not provided",
                    n.id
                ))
            })?;
            if n.dim == 0 {
                return Err(Error::Graph(format!("node {:?}: dim must be positive", n.id)));
            }
            match (n.role, children[i].is_empty()) {
                (Role::Internal, true) => {
                    return Err(Error::Graph(format!("internal node {:?} has no children", n.id)))
                }
                (Role::Leaf, false) => {
                    return Err(Error::Graph(format!("leaf node {:?} has children", n.id)))
                }
                _ => {}
            }
            if n.role == Role::Internal && n.family.is_discrete() {
                return Err(Error::Graph(format!(
                    "internal node {:?} is {}: internal variables must be continuous \
                     (discrete internal nodes would need an importance-sampled nabla, \
                     which is not supported)",
                    n.id, n.family
                )));
            }
            let n_in: usize = parents[i].iter().map(|&p| nodes[p].dim).sum();
            let out = n.transform.output_len(n_in, a).map_err(|e| match e {
                Error::Graph(m) => Error::Graph(format!("node {:?}: {m}", n.id)),
                e => e,
            })?;
            if out != n.dim * a {
                return Err(Error::Graph(format!(
                    "node {:?}: transform yields {out} values, {} {} coordinates need {}",
                    n.id,
                    n.dim,
                    n.family,
                    n.dim * a
                )));
            }
            arity.push(a);
            offsets.push(weights.len());
            weights.extend(n.transform.initial_weights().map_err(|e| match e {
                Error::Graph(m) => Error::Graph(format!("node {:?}: {m}", n.id)),
                e => e,
            })?);
        }
        Ok(StochasticGraph {
            nodes,
            parents,
            children,
            arity,
            offsets,
            weights,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GraphSpec =
            serde_json::from_str(text).map_err(|e| Error::Graph(e.to_string()))?;
        Self::new(spec)
    }

    pub fn nodes(&self) -> &[StochasticNode] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn set_weights(&mut self, w: &[f64]) -> Result<()> {
        if w.len() != self.weights.len() {
            return Err(Error::Graph(format!(
                "expected {} weights, got {}",
                self.weights.len(),
                w.len()
            )));
        }
        self.weights.copy_from_slice(w);
        Ok(())
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Weight range of node `i` (topological index).
    pub fn weight_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i] + self.nodes[i].transform.n_weights()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.children[i].is_empty()).collect()
    }

    /// True when every node has at most one parent and one child.
    pub fn is_chain(&self) -> bool {
        self.parents.iter().all(|p| p.len() <= 1)
            && self.children.iter().all(|c| c.len() <= 1)
            && self.parents.iter().filter(|p| p.is_empty()).count() == 1
    }

    fn inputs(&self, i: usize, values: &[Vec<f64>]) -> Vec<f64> {
        self.parents[i].iter().flat_map(|&p| values[p].iter().copied()).collect()
    }

    fn coordinate(&self, i: usize, params: &[f64], c: usize) -> Result<Distribution> {
        let a = self.arity[i];
        Distribution::new(self.nodes[i].family, &params[c * a..(c + 1) * a]).map_err(|e| {
            Error::Graph(format!(
                "node {:?} coordinate {c}: transform produced invalid parameters ({e})",
                self.nodes[i].id
            ))
        })
    }

    /// Draws every node in topological order.
    pub fn forward_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Assignment> {
        let k = self.nodes.len();
        let mut values: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut params = Vec::with_capacity(k);
        for i in 0..k {
            let x = self.inputs(i, &values);
            let w = &self.weights[self.weight_range(i)];
            let theta = self.nodes[i].transform.forward(&x, w, self.arity[i]).output().to_vec();
            let mut v = Vec::with_capacity(self.nodes[i].dim);
            for c in 0..self.nodes[i].dim {
                v.push(self.coordinate(i, &theta, c)?.sample(rng));
            }
            values.push(v);
            params.push(theta);
        }
        Ok(Assignment { values, params })
    }

    /// Integrand input: leaf values concatenated in topological order.
    pub fn leaf_vector(&self, a: &Assignment) -> Vec<f64> {
        self.leaves().into_iter().flat_map(|i| a.values[i].iter().copied()).collect()
    }

    /// D_z[f] for every leaf coordinate of `a`, keyed by node id.
    pub fn leaf_d(&self, a: &Assignment, f: &dyn Integrand) -> Result<HashMap<String, Vec<f64>>> {
        let leaves = self.leaves();
        let y = self.leaf_vector(a);
        let grad = if leaves.iter().any(|&i| !self.nodes[i].family.is_discrete()) {
            Some(f.gradient(&y).ok_or(Error::MissingEvaluator("gradient"))?)
        } else {
            None
        };
        let mut out = HashMap::new();
        let mut v = 0;
        for i in leaves {
            let mut d = Vec::with_capacity(self.nodes[i].dim);
            for c in 0..self.nodes[i].dim {
                d.push(match &grad {
                    Some(g) if !self.nodes[i].family.is_discrete() => g[v],
                    _ => {
                        let support = self.coordinate(i, &a.params[i], c)?.support();
                        d_y_operator(support, f, &y, v)?
                    }
                });
                v += 1;
            }
            out.insert(self.nodes[i].id.clone(), d);
        }
        Ok(out)
    }
}

/// One-sample gradient of E[f] with respect to the graph weights.
///
/// `leaf_d` must hold D_z[f] for every leaf. Entries for internal nodes are
/// optional and are added to their BP when f depends on them directly.
pub fn statistical_backprop(
    graph: &StochasticGraph,
    assignment: &Assignment,
    leaf_d: &HashMap<String, Vec<f64>>,
) -> Result<Backprop> {
    let k = graph.nodes.len();
    if assignment.values.len() != k {
        return Err(Error::Graph(format!(
            "assignment has {} nodes, graph has {k}",
            assignment.values.len()
        )));
    }
    for id in leaf_d.keys() {
        if graph.index_of(id).is_none() {
            return Err(Error::Graph(format!("D supplied for unknown node {id:?}")));
        }
    }
    let mut bp: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (i, n) in graph.nodes.iter().enumerate() {
        let d = match leaf_d.get(&n.id) {
            Some(d) => d.clone(),
            None if n.role == Role::Leaf => {
                return Err(Error::Graph(format!("missing D for leaf {:?}", n.id)))
            }
            None => vec![0.0; n.dim],
        };
        if d.len() != n.dim || assignment.values[i].len() != n.dim {
            return Err(Error::Graph(format!(
                "node {:?}: dimension mismatch (dim {}, D {}, value {})",
                n.id,
                n.dim,
                d.len(),
                assignment.values[i].len()
            )));
        }
        bp.push(d);
    }
    let mut weight_grad = vec![0.0; graph.weights.len()];
    for i in (0..k).rev() {
        let a = graph.arity[i];
        let theta = &assignment.params[i];
        let mut out_grad = vec![0.0; theta.len()];
        for c in 0..graph.nodes[i].dim {
            let dist = graph.coordinate(i, theta, c)?;
            let nabla = dist.variable_nabla(assignment.values[i][c])?;
            for (kk, g) in nabla.per_param.iter().enumerate() {
                out_grad[c * a + kk] = g * bp[i][c];
            }
        }
        let x = graph.inputs(i, &assignment.values);
        let range = graph.weight_range(i);
        let w = &graph.weights[range.clone()];
        let trace = graph.nodes[i].transform.forward(&x, w, a);
        let (wg, xg) = graph.nodes[i].transform.vjp(&trace, w, &out_grad, a);
        for (dst, g) in weight_grad[range].iter_mut().zip(wg) {
            *dst += g;
        }
        let mut off = 0;
        for &p in &graph.parents[i] {
            let dim = graph.nodes[p].dim;
            for (dst, g) in bp[p].iter_mut().zip(&xg[off..off + dim]) {
                *dst += g;
            }
            off += dim;
        }
    }
    Ok(Backprop { weight_grad, bp })
}

/// Deep GO gradient of E[f(leaf)] on a chain graph, averaged over `n` draws.
pub fn deep_go_gradient<R: Rng + ?Sized>(
    graph: &StochasticGraph,
    f: &dyn Integrand,
    n: usize,
    rng: &mut R,
) -> Result<GradientEstimate> {
    if !graph.is_chain() {
        return Err(Error::Graph("deep GO requires a chain graph".into()));
    }
    graph_go_gradient(graph, f, n, rng)
}

/// Statistical back-propagation averaged over `n` draws on any valid graph.
pub fn graph_go_gradient<R: Rng + ?Sized>(
    graph: &StochasticGraph,
    f: &dyn Integrand,
    n: usize,
    rng: &mut R,
) -> Result<GradientEstimate> {
    if n == 0 {
        return Err(Error::domain("estimator", "sample count must be positive"));
    }
    let mut acc = vec![0.0; graph.weights.len()];
    for _ in 0..n {
        let a = graph.forward_sample(rng)?;
        let d = graph.leaf_d(&a, f)?;
        for (s, g) in acc.iter_mut().zip(statistical_backprop(graph, &a, &d)?.weight_grad) {
            *s += g;
        }
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    Ok(GradientEstimate {
        per_param: acc,
        n_samples: n,
        estimator: EstimatorKind::Go,
    })
}
