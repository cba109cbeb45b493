//! Derivative-free optimizers behind a common ask/tell interface.
//!
//! One *iteration* is one ask/tell cycle: a CMA-ES generation (a batch of
//! `λ` evaluations) or a single COBYLA evaluation.

mod cmaes;
mod cobyla;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cmaes::CmaEs;
pub use cobyla::Cobyla;

#[derive(Debug, Error, PartialEq)]
pub enum OptimizerError {
    #[error("optimizer has finished")]
    OptimizerFinished,
    #[error("told batch does not match the asked candidates")]
    BatchMismatch,
    #[error("tell called without a pending ask")]
    NothingAsked,
    #[error("invalid optimizer config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Error)]
pub enum RunError<E> {
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("objective failed: {0}")]
    Objective(E),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerKind {
    Cmaes {
        /// Defaults to `4 + ⌊3 ln n⌋`.
        #[serde(default)]
        population: Option<usize>,
        #[serde(default = "default_sigma0")]
        sigma0: f64,
    },
    Cobyla {
        #[serde(default = "default_rho_begin")]
        rho_begin: f64,
        #[serde(default = "default_rho_end")]
        rho_end: f64,
    },
}

fn default_sigma0() -> f64 {
    0.3
}
fn default_rho_begin() -> f64 {
    0.5
}
fn default_rho_end() -> f64 {
    1e-4
}

impl OptimizerKind {
    pub fn cmaes() -> Self {
        OptimizerKind::Cmaes {
            population: None,
            sigma0: default_sigma0(),
        }
    }

    pub fn cobyla() -> Self {
        OptimizerKind::Cobyla {
            rho_begin: default_rho_begin(),
            rho_end: default_rho_end(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            OptimizerKind::Cmaes { .. } => "cmaes",
            OptimizerKind::Cobyla { .. } => "cobyla",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub max_iterations: usize,
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        if self.max_iterations < 1 {
            return Err(OptimizerError::InvalidConfig("max_iterations must be >= 1".into()));
        }
        match self.kind {
            OptimizerKind::Cmaes { population, sigma0 } => {
                if population.is_some_and(|p| p < 2) {
                    return Err(OptimizerError::InvalidConfig("population must be >= 2".into()));
                }
                if !(sigma0 > 0.0 && sigma0.is_finite()) {
                    return Err(OptimizerError::InvalidConfig("sigma0 must be > 0".into()));
                }
            }
            OptimizerKind::Cobyla { rho_begin, rho_end } => {
                if !(rho_begin > rho_end && rho_end > 0.0 && rho_begin.is_finite()) {
                    return Err(OptimizerError::InvalidConfig(
                        "need rho_begin > rho_end > 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

pub trait AskTell {
    /// Candidates to evaluate next. Asking again before telling returns the
    /// same pending batch.
    fn ask(&mut self) -> Result<Vec<Vec<f64>>, OptimizerError>;

    /// Results for the pending batch, in the order it was asked.
    fn tell(&mut self, evaluated: &[(Vec<f64>, f64)]) -> Result<(), OptimizerError>;

    /// Best point evaluated so far.
    fn best(&self) -> Option<(&[f64], f64)>;

    /// Completed ask/tell cycles.
    fn iteration(&self) -> usize;

    fn is_finished(&self) -> bool;
}

/// Pending-batch check shared by both optimizers.
pub(crate) fn check_batch(
    pending: &[Vec<f64>],
    evaluated: &[(Vec<f64>, f64)],
) -> Result<(), OptimizerError> {
    if pending.is_empty() {
        return Err(OptimizerError::NothingAsked);
    }
    if pending.len() != evaluated.len()
        || pending.iter().zip(evaluated).any(|(p, (e, _))| p != e)
    {
        return Err(OptimizerError::BatchMismatch);
    }
    Ok(())
}

/// NaN costs rank last.
pub(crate) fn sanitize(cost: f64) -> f64 {
    if cost.is_nan() {
        f64::INFINITY
    } else {
        cost
    }
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    Cmaes(CmaEs),
    Cobyla(Cobyla),
}

impl Optimizer {
    pub fn new(config: &OptimizerConfig, initial: &[f64]) -> Result<Self, OptimizerError> {
        config.validate()?;
        if initial.is_empty() {
            return Err(OptimizerError::InvalidConfig("empty parameter vector".into()));
        }
        Ok(match config.kind {
            OptimizerKind::Cmaes { population, sigma0 } => {
                Optimizer::Cmaes(CmaEs::new(initial, sigma0, population, config.seed))
            }
            OptimizerKind::Cobyla { rho_begin, rho_end } => {
                Optimizer::Cobyla(Cobyla::new(initial, rho_begin, rho_end))
            }
        })
    }

    fn inner(&self) -> &dyn AskTell {
        match self {
            Optimizer::Cmaes(o) => o,
            Optimizer::Cobyla(o) => o,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn AskTell {
        match self {
            Optimizer::Cmaes(o) => o,
            Optimizer::Cobyla(o) => o,
        }
    }
}

impl AskTell for Optimizer {
    fn ask(&mut self) -> Result<Vec<Vec<f64>>, OptimizerError> {
        self.inner_mut().ask()
    }
    fn tell(&mut self, evaluated: &[(Vec<f64>, f64)]) -> Result<(), OptimizerError> {
        self.inner_mut().tell(evaluated)
    }
    fn best(&self) -> Option<(&[f64], f64)> {
        self.inner().best()
    }
    fn iteration(&self) -> usize {
        self.inner().iteration()
    }
    fn is_finished(&self) -> bool {
        self.inner().is_finished()
    }
}

/// What the per-iteration observer sees.
#[derive(Debug, Clone, Copy)]
pub struct IterationInfo<'a> {
    /// 1-based.
    pub iteration: usize,
    pub best_params: &'a [f64],
    pub best_cost: f64,
    /// Lowest cost within this iteration's batch.
    pub incumbent_cost: f64,
    pub evaluations: usize,
    /// Set once the optimizer has stopped on its own; the remaining
    /// iterations report the frozen best point without new evaluations.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub best_cost: f64,
    pub incumbent_cost: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub best_params: Vec<f64>,
    pub best_cost: f64,
    pub evaluations: usize,
    pub trace: Vec<TraceRow>,
}

/// Runs `max_iterations` ask/tell cycles with a point-wise objective.
pub fn run<E, F, C>(
    mut objective: F,
    config: &OptimizerConfig,
    initial: &[f64],
    callback: C,
) -> Result<RunOutcome, RunError<E>>
where
    F: FnMut(&[f64]) -> Result<f64, E>,
    C: FnMut(&IterationInfo<'_>),
{
    run_batched(
        |batch: &[Vec<f64>]| batch.iter().map(|x| objective(x)).collect(),
        config,
        initial,
        callback,
    )
}

/// Like [`run`], but hands each whole batch to `evaluate`, which may score
/// the candidates in parallel. Costs must come back in batch order.
pub fn run_batched<E, F, C>(
    mut evaluate: F,
    config: &OptimizerConfig,
    initial: &[f64],
    mut callback: C,
) -> Result<RunOutcome, RunError<E>>
where
    F: FnMut(&[Vec<f64>]) -> Result<Vec<f64>, E>,
    C: FnMut(&IterationInfo<'_>),
{
    let mut opt = Optimizer::new(config, initial)?;
    let mut trace = Vec::with_capacity(config.max_iterations);
    let mut evaluations = 0;

    for iteration in 1..=config.max_iterations {
        // the optimizer may discover it is done only when asked
        let batch = if opt.is_finished() {
            None
        } else {
            match opt.ask() {
                Ok(batch) => Some(batch),
                Err(OptimizerError::OptimizerFinished) => None,
                Err(e) => return Err(e.into()),
            }
        };
        let converged = batch.is_none();
        let incumbent_cost = if let Some(batch) = batch {
            let costs = evaluate(&batch).map_err(RunError::Objective)?;
            if costs.len() != batch.len() {
                return Err(OptimizerError::BatchMismatch.into());
            }
            evaluations += batch.len();
            let told: Vec<(Vec<f64>, f64)> = batch.into_iter().zip(costs).collect();
            opt.tell(&told)?;
            told.iter().map(|t| sanitize(t.1)).fold(f64::INFINITY, f64::min)
        } else {
            opt.best().map_or(f64::INFINITY, |b| b.1)
        };
        let (best_params, best_cost) = opt.best().expect("at least one evaluation");
        callback(&IterationInfo {
            iteration,
            best_params,
            best_cost,
            incumbent_cost,
            evaluations,
            converged,
        });
        trace.push(TraceRow {
            iteration,
            best_cost,
            incumbent_cost,
            evaluations,
        });
    }

    let (best_params, best_cost) = opt.best().expect("at least one evaluation");
    Ok(RunOutcome {
        best_params: best_params.to_vec(),
        best_cost,
        evaluations,
        trace,
    })
}

/// `iteration,best_cost,incumbent_cost` CSV.
pub fn trace_to_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("iteration,best_cost,incumbent_cost\n");
    for row in trace {
        writeln!(out, "{},{},{}", row.iteration, row.best_cost, row.incumbent_cost).unwrap();
    }
    out
}
