//! `graph-run`: Monte Carlo gradient steps on the weights of a stochastic graph.

use std::path::{Path, PathBuf};

use gograd::estimators::Summary;
use gograd::experiments::{Optimizer, OptimizerConfig, TraceRecord};
use gograd::rng::stream;
use gograd::statgraph::{statistical_backprop, GraphSpec, StochasticGraph};
use gograd::Integrand;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::Failure;
use crate::registry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSource {
    Inline(GraphSpec),
    Path(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphRunConfig {
    pub graph: Option<GraphSource>,
    /// Name from the integrand registry.
    pub integrand: String,
    /// Draws per gradient estimate.
    pub samples: usize,
    pub iterations: usize,
    pub objective: Objective,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

pub fn defaults() -> Value {
    json!({
        "graph": null,
        "integrand": "sum_squares",
        "samples": 1000,
        "iterations": 1,
        "objective": "minimize",
        "optimizer": OptimizerConfig::default(),
        "seed": 0,
    })
}

impl GraphRunConfig {
    /// Checks the config and inlines a graph given by path, resolving it
    /// against `base` when relative.
    pub fn prepare(mut self, base: &Path) -> Result<(Self, StochasticGraph), Failure> {
        let bad = |m: String| Err(Failure::Invalid(m));
        if registry::lookup(&self.integrand).is_none() {
            return bad(format!(
                "integrand {:?} is not one of {:?}",
                self.integrand,
                registry::NAMES
            ));
        }
        if self.samples < 2 {
            return bad(format!("samples must be >= 2, got {}", self.samples));
        }
        if self.iterations < 1 {
            return bad(format!("iterations must be >= 1, got {}", self.iterations));
        }
        self.optimizer.validate()?;
        let spec = match self.graph.take() {
            None => return bad("graph must be set to a graph file or an inline graph".into()),
            Some(GraphSource::Inline(s)) => s,
            Some(GraphSource::Path(p)) => {
                let p = if p.is_relative() { base.join(p) } else { p };
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| Failure::Invalid(format!("cannot read graph {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Failure::Invalid(format!("graph {}: {e}", p.display())))?
            }
        };
        let graph = StochasticGraph::new(spec.clone())?;
        self.graph = Some(GraphSource::Inline(spec));
        Ok((self, graph))
    }
}

pub struct GraphRun {
    pub trace: Vec<TraceRecord>,
    pub graph: StochasticGraph,
    pub final_objective: f64,
    pub final_gradient: Vec<f64>,
}

/// Each iteration averages `samples` one-sample statistical-backprop
/// gradients, records their variance, then steps along the mean.
pub fn run(cfg: &GraphRunConfig, mut graph: StochasticGraph) -> Result<GraphRun, Failure> {
    let f = registry::lookup(&cfg.integrand).expect("checked in prepare");
    let sign = match cfg.objective {
        Objective::Minimize => -1.0,
        Objective::Maximize => 1.0,
    };
    let mut rng = stream(cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer.clone(), graph.weights().len());
    let mut trace = Vec::with_capacity(cfg.iterations);
    let numerical = |it: usize, d: String| Failure::Numerical(format!("iteration {it}: {d}"));
    let mut last = (f64::NAN, Vec::new());
    for it in 0..=cfg.iterations {
        let mut values = Vec::with_capacity(cfg.samples);
        let mut grads = Vec::with_capacity(cfg.samples);
        for _ in 0..cfg.samples {
            let a = graph.forward_sample(&mut rng).map_err(|e| numerical(it, e.to_string()))?;
            let d = graph.leaf_d(&a, &f).map_err(|e| numerical(it, e.to_string()))?;
            let bp = statistical_backprop(&graph, &a, &d).map_err(|e| numerical(it, e.to_string()))?;
            values.push(f.eval(&graph.leaf_vector(&a)));
            grads.push(bp.weight_grad);
        }
        let objective = values.iter().sum::<f64>() / values.len() as f64;
        let s = Summary::from_samples(grads);
        if !objective.is_finite() || s.mean.iter().any(|g| !g.is_finite()) {
            return Err(numerical(it, format!("objective {objective}, gradient {:?}", s.mean)));
        }
        if it == cfg.iterations {
            last = (objective, s.mean);
            break;
        }
        trace.push(TraceRecord {
            iteration: it,
            param_values: graph.weights().to_vec(),
            elbo_estimate: objective,
            grad_variance: s.variance,
            wall_clock_ms: 0.0,
        });
        let step: Vec<f64> = s.mean.iter().map(|g| sign * g).collect();
        opt.ascend(graph.weights_mut(), &step);
    }
    Ok(GraphRun {
        trace,
        graph,
        final_objective: last.0,
        final_gradient: last.1,
    })
}
