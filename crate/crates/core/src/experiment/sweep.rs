//! Cartesian sweep over ansatz × optimizer × cost × α.
//!
//! The problem is built and solved once; every cell then runs its repeats
//! and writes a full report into `out/<cell label>/`, and one line per cell
//! goes into `out/sweep_summary.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CostKind, OptimizerName};
use super::report::write_report;
use super::{run_with_problem, ExperimentConfig, ExperimentError, Problem};
use crate::ansatz::AnsatzFamily;

pub const SUMMARY_HEADER: &str =
    "cell,ansatz,optimizer,cost,alpha,iterations,n_runs,final_mean_cum_success_rate,final_mean_ground_prob";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub families: Vec<AnsatzFamily>,
    pub optimizers: Vec<OptimizerName>,
    pub costs: Vec<CostKind>,
    pub alphas: Vec<f64>,
    pub cmaes_iterations: usize,
    pub cobyla_iterations: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            families: vec![AnsatzFamily::TwoLocal, AnsatzFamily::Block],
            optimizers: vec![OptimizerName::Cmaes, OptimizerName::Cobyla],
            costs: vec![CostKind::Cvar, CostKind::Wcvar],
            alphas: vec![1.0, 0.5, 0.25, 0.1],
            cmaes_iterations: 100,
            cobyla_iterations: 150,
        }
    }
}

impl SweepGrid {
    /// One config per cell, in ansatz, optimizer, cost, α order.
    pub fn cells(&self, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &family in &self.families {
            for &opt in &self.optimizers {
                for &cost in &self.costs {
                    for &alpha in &self.alphas {
                        let mut cfg = base.clone();
                        cfg.ansatz.family = family;
                        cfg.ansatz.layers = base.ansatz.layers;
                        cfg.optimizer.kind = opt;
                        cfg.optimizer.max_iterations = match opt {
                            OptimizerName::Cmaes => self.cmaes_iterations,
                            OptimizerName::Cobyla => self.cobyla_iterations,
                        };
                        cfg.cost.kind = cost;
                        cfg.cost.alpha = alpha;
                        out.push(cfg);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub cell: String,
    pub ansatz: &'static str,
    pub optimizer: &'static str,
    pub cost: &'static str,
    pub alpha: f64,
    pub iterations: usize,
    pub n_runs: usize,
    pub final_mean_cum_success_rate: f64,
    pub final_mean_ground_prob: f64,
}

pub fn run_sweep(base: &ExperimentConfig, grid: &SweepGrid, out: &Path) -> Result<Vec<CellResult>, ExperimentError> {
    let cells = grid.cells(base);
    for cfg in &cells {
        cfg.validate()?;
    }
    if cells.is_empty() {
        return Err(ExperimentError::Config("sweep grid is empty".into()));
    }
    let problem = Problem::from_config(base)?;
    fs::create_dir_all(out).map_err(|e| ExperimentError::io(out, e))?;

    let results: Vec<Result<CellResult, ExperimentError>> = cells
        .par_iter()
        .map(|cfg| {
            let label = cfg.cell_label();
            let n_params = cfg.ansatz.family.build(problem.n(), cfg.ansatz.layers())?.n_params();
            let outcome = run_with_problem(cfg, problem.clone())?;
            let rows = write_report(&outcome, n_params, &out.join(&label))?;
            if !outcome.failures.is_empty() {
                return Err(ExperimentError::PartialFailure(outcome.failures.len()));
            }
            let last = rows.last().copied();
            Ok(CellResult {
                cell: label,
                ansatz: cfg.ansatz.family.label(),
                optimizer: cfg.optimizer.kind.label(),
                cost: cfg.cost.kind.label(),
                alpha: cfg.cost.alpha,
                iterations: cfg.optimizer.max_iterations,
                n_runs: outcome.records.len(),
                final_mean_cum_success_rate: last.map_or(0.0, |r| r.mean_cum_success_rate),
                final_mean_ground_prob: last.map_or(0.0, |r| r.mean_ground_prob),
            })
        })
        .collect();

    let mut done = Vec::new();
    let mut first_error = None;
    for r in results {
        match r {
            Ok(c) => done.push(c),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    let path = out.join("sweep_summary.csv");
    fs::write(&path, summary_csv(&done)).map_err(|e| ExperimentError::io(&path, e))?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(done),
    }
}

pub fn summary_csv(cells: &[CellResult]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            c.cell,
            c.ansatz,
            c.optimizer,
            c.cost,
            c.alpha,
            c.iterations,
            c.n_runs,
            c.final_mean_cum_success_rate,
            c.final_mean_ground_prob
        )
        .unwrap();
    }
    out
}
