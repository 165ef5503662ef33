//! Multi-instance evaluation of localization methods against simulated
//! ground truth.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use thiserror::Error;

use crate::graph::GraphError;
use crate::metrics::{mae, normalized_mae, rmse, MetricsError};
use crate::model::{Method, NodeId};
use crate::pipeline::{run_pipeline, PipelineError, PipelineOutput};
use crate::signal::LinearFalloff;
use crate::sim::{run_instance, InstanceOutput, ScenarioSpec, SimError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("at least one instance is required")]
    NoInstances,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSample {
    pub node: NodeId,
    pub seq: u64,
    pub error: f64,
}

/// Errors of one method on one simulated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceEvaluation {
    pub seed: u64,
    pub samples: Vec<ErrorSample>,
    /// Ground-truth packages without an estimate.
    pub unlocalized: usize,
}

impl InstanceEvaluation {
    pub fn errors(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.error).collect()
    }

    pub fn irmse(&self) -> Option<f64> {
        rmse(&self.errors()).ok()
    }
}

/// Geodesic error of every estimate against the ground truth.
pub fn score(
    spec: &ScenarioSpec,
    instance: &InstanceOutput,
    output: &PipelineOutput,
    seed: u64,
) -> Result<InstanceEvaluation, ExperimentError> {
    let estimates: BTreeMap<(NodeId, u64), _> = output
        .localized
        .iter()
        .map(|m| ((m.node, m.seq), &m.position))
        .collect();
    let mut samples = Vec::with_capacity(instance.ground_truth.len());
    let mut unlocalized = 0;
    for truth in &instance.ground_truth {
        match estimates.get(&(truth.node, truth.seq)) {
            Some(est) => samples.push(ErrorSample {
                node: truth.node,
                seq: truth.seq,
                error: spec.graph.geodesic_distance(&truth.position, est)?,
            }),
            None => unlocalized += 1,
        }
    }
    Ok(InstanceEvaluation {
        seed,
        samples,
        unlocalized,
    })
}

pub fn evaluate_instance(
    spec: &ScenarioSpec,
    instance: &InstanceOutput,
    method: Method,
    seed: u64,
) -> Result<(PipelineOutput, InstanceEvaluation), ExperimentError> {
    let output = run_pipeline(
        &spec.graph,
        LinearFalloff,
        method,
        &spec.insertion_positions(),
        &instance.batches,
    )?;
    let eval = score(spec, instance, &output, seed)?;
    Ok((output, eval))
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub method: Method,
    /// Per instance, `None` when nothing of it was localized.
    pub irmse: Vec<Option<f64>>,
    /// Over the pooled errors of all instances.
    pub drmse: Option<f64>,
    pub mae: Option<f64>,
    /// MAE in percent of the mean insertion-to-root distance.
    pub nmae: Option<f64>,
    pub localized: usize,
    pub unlocalized: usize,
    pub truncated: usize,
}

impl ExperimentResult {
    pub fn coverage(&self) -> f64 {
        let total = self.localized + self.unlocalized;
        if total == 0 {
            0.0
        } else {
            self.localized as f64 / total as f64 * 100.0
        }
    }
}

/// Everything an experiment produced, per method.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub results: Vec<ExperimentResult>,
    /// Indexed like `results`, then by instance.
    pub instances: Vec<Vec<InstanceEvaluation>>,
}

/// Simulates seeds `seed0..seed0 + n` once each and localizes every
/// instance with each method.
pub fn run_experiment(
    spec: &ScenarioSpec,
    methods: &[Method],
    n: usize,
    seed0: u64,
) -> Result<ExperimentRun, ExperimentError> {
    if n == 0 {
        return Err(ExperimentError::NoInstances);
    }
    let mut instances: Vec<Vec<InstanceEvaluation>> = methods.iter().map(|_| Vec::with_capacity(n)).collect();
    let mut truncated = 0;
    for k in 0..n as u64 {
        let seed = seed0 + k;
        let instance = run_instance(spec, seed)?;
        truncated += usize::from(instance.truncated);
        for (slot, &method) in instances.iter_mut().zip(methods) {
            slot.push(evaluate_instance(spec, &instance, method, seed)?.1);
        }
    }
    let results = methods
        .iter()
        .zip(&instances)
        .map(|(&method, evals)| summarize(spec, method, evals, truncated))
        .collect::<Result<_, _>>()?;
    Ok(ExperimentRun { results, instances })
}

pub fn summarize(
    spec: &ScenarioSpec,
    method: Method,
    evals: &[InstanceEvaluation],
    truncated: usize,
) -> Result<ExperimentResult, ExperimentError> {
    let pooled: Vec<f64> = evals.iter().flat_map(|e| e.samples.iter().map(|s| s.error)).collect();
    let drmse = rmse(&pooled).ok();
    let mae = mae(&pooled).ok();
    let nmae = match mae {
        Some(m) => Some(normalized_mae(m, spec.route_length()?)?),
        None => None,
    };
    Ok(ExperimentResult {
        method,
        irmse: evals.iter().map(InstanceEvaluation::irmse).collect(),
        drmse,
        mae,
        nmae,
        localized: pooled.len(),
        unlocalized: evals.iter().map(|e| e.unlocalized).sum(),
        truncated,
    })
}
