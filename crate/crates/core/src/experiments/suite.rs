use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentKind};
use crate::distributions::{Distribution, Family};
use crate::error::{Error, Result};
use crate::estimators::{one_sample, EstimatorKind, Summary};
use crate::integrand::{Integrand, TestFunction};
use crate::oracle::{expectation_gradient, test_function_expectation};
use crate::rng::{substream, Stream};

/// One (family, parameters, integrand, estimator) cell of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteCase {
    pub family: Family,
    pub params: Vec<f64>,
    pub integrand: TestFunction,
    pub estimator: EstimatorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub family: Family,
    pub params: Vec<f64>,
    pub integrand: String,
    pub estimator: EstimatorKind,
    pub oracle: Vec<f64>,
    pub estimate: Vec<f64>,
    pub se: Vec<f64>,
    pub pass: bool,
}

/// Two parameter points per family, chosen so every integrand has finite
/// variance under every applicable estimator.
fn parameter_grid(family: Family) -> [Vec<f64>; 2] {
    match family {
        Family::Delta => [vec![0.5], vec![-1.2]],
        Family::Bernoulli => [vec![0.3], vec![0.8]],
        Family::Normal => [vec![0.5, 1.2], vec![-1.0, 0.4]],
        Family::LogNormal => [vec![0.2, 0.4], vec![-0.5, 0.3]],
        Family::Gamma => [vec![2.5, 1.5], vec![0.6, 2.0]],
        Family::Beta => [vec![2.0, 3.0], vec![0.7, 1.5]],
        Family::Exponential => [vec![1.5], vec![0.7]],
        Family::Weibull => [vec![1.2, 1.8], vec![0.8, 3.0]],
        Family::Laplace => [vec![0.3, 0.8], vec![-1.0, 1.5]],
        Family::Poisson => [vec![2.5], vec![0.4]],
        Family::Geometric => [vec![0.4], vec![0.75]],
        Family::NegativeBinomial => [vec![3.0, 0.4], vec![0.8, 0.6]],
        Family::Categorical => [vec![0.2, 0.5, 0.3], vec![0.1, 0.15, 0.25, 0.5]],
    }
}

fn applicable(family: Family, est: EstimatorKind) -> bool {
    match est {
        EstimatorKind::Go => true,
        // The score of a point mass does not exist.
        EstimatorKind::Reinforce | EstimatorKind::Reinforce2 => family != Family::Delta,
        EstimatorKind::Rep => family.is_reparameterizable(),
        EstimatorKind::GoFiniteSupport => {
            matches!(family, Family::Bernoulli | Family::Categorical)
        }
    }
}

/// The grid for `cfg`, skipping estimators a family does not admit.
pub fn suite_cases(cfg: &ExperimentConfig) -> Vec<SuiteCase> {
    let fs = [
        TestFunction::Identity,
        TestFunction::Square,
        TestFunction::ShiftedSquare(cfg.suite.shift),
        TestFunction::GaussianBump,
    ];
    let mut out = Vec::new();
    for &family in &cfg.suite.families {
        for params in parameter_grid(family) {
            for f in fs {
                for &estimator in &cfg.estimators {
                    if applicable(family, estimator) {
                        out.push(SuiteCase {
                            family,
                            params: params.clone(),
                            integrand: f,
                            estimator,
                        });
                    }
                }
            }
        }
    }
    out
}

/// The production one-sample estimator used by the suite.
pub fn default_estimator(
    kind: EstimatorKind,
    dists: &[Distribution],
    f: &dyn Integrand,
    rng: &mut Stream,
) -> Result<Vec<f64>> {
    one_sample(kind, dists, f, rng)
}

pub fn run_unbiasedness_suite(cfg: &ExperimentConfig) -> Result<Vec<SuiteRow>> {
    run_unbiasedness_suite_with(cfg, default_estimator)
}

/// Runs the grid with a caller-supplied one-sample estimator. Row i draws
/// from substream i of the seed, so the report does not depend on how rows
/// are scheduled across threads.
pub fn run_unbiasedness_suite_with<E>(cfg: &ExperimentConfig, estimator: E) -> Result<Vec<SuiteRow>>
where
    E: Fn(EstimatorKind, &[Distribution], &dyn Integrand, &mut Stream) -> Result<Vec<f64>> + Sync,
{
    if cfg.experiment != ExperimentKind::UnbiasednessSuite {
        return Err(Error::Config(format!(
            "experiment is {:?}, expected UnbiasednessSuite",
            cfg.experiment
        )));
    }
    cfg.validate()?;
    suite_cases(cfg)
        .into_par_iter()
        .enumerate()
        .map(|(i, case)| run_case(cfg, &case, i as u64, &estimator))
        .collect()
}

fn run_case<E>(cfg: &ExperimentConfig, case: &SuiteCase, index: u64, estimator: &E) -> Result<SuiteRow>
where
    E: Fn(EstimatorKind, &[Distribution], &dyn Integrand, &mut Stream) -> Result<Vec<f64>>,
{
    let dist = Distribution::new(case.family, &case.params)?;
    let oracle = expectation_gradient(&dist, |d| test_function_expectation(d, case.integrand))?;
    let dists = [dist];
    let mut rng = substream(cfg.seed, index);
    let draws = (0..cfg.suite.samples)
        .map(|_| estimator(case.estimator, &dists, &case.integrand, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let summary = Summary::from_samples(draws);
    let se = summary.se();
    let pass = summary
        .mean
        .iter()
        .zip(&se)
        .zip(&oracle)
        .all(|((m, s), o)| {
            (m - o).abs() <= cfg.suite.se_multiplier * s + cfg.suite.oracle_floor * (1.0 + o.abs())
        });
    Ok(SuiteRow {
        family: case.family,
        params: case.params.clone(),
        integrand: case.integrand.label(),
        estimator: case.estimator,
        oracle,
        estimate: summary.mean,
        se,
        pass,
    })
}
