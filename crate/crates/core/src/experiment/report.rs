//! Output files for an experiment directory:
//!
//! ```text
//! out/
//!   summary.json
//!   aggregate.csv           iteration,mean_cum_success_rate,mean_ground_prob,n_runs
//!   run_000/trace.csv       iteration,cost,ground_prob,success
//!   run_000/optimizer.csv   iteration,best_cost,incumbent_cost
//!   ...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{selected, ExperimentConfig, ExperimentError, ExperimentOutcome, RunRecord};
use crate::optimizers::trace_to_csv;

pub const TRACE_HEADER: &str = "iteration,cost,ground_prob,success";
pub const AGGREGATE_HEADER: &str = "iteration,mean_cum_success_rate,mean_ground_prob,n_runs";

/// One parsed trace row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub cost: f64,
    pub ground_prob: f64,
    pub success: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateRow {
    pub iteration: usize,
    /// Mean over runs of (successes up to this iteration) / iteration.
    pub mean_cum_success_rate: f64,
    pub mean_ground_prob: f64,
    pub n_runs: usize,
}

pub fn trace_points(record: &RunRecord) -> Vec<TracePoint> {
    record
        .rows
        .iter()
        .map(|r| TracePoint {
            iteration: r.iteration,
            cost: r.cost,
            ground_prob: r.ground_prob,
            success: r.success,
        })
        .collect()
}

pub fn trace_csv(points: &[TracePoint]) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for p in points {
        writeln!(out, "{},{},{},{}", p.iteration, p.cost, p.ground_prob, u8::from(p.success)).unwrap();
    }
    out
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TracePoint>, String> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?.clone();
    if header.iter().collect::<Vec<_>>().join(",") != TRACE_HEADER {
        return Err(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()));
    }
    let mut points = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let bad = |what: &str| format!("line {}: bad {what}", line + 2);
        points.push(TracePoint {
            iteration: rec[0].parse().map_err(|_| bad("iteration"))?,
            cost: rec[1].parse().map_err(|_| bad("cost"))?,
            ground_prob: rec[2].parse().map_err(|_| bad("ground_prob"))?,
            success: match &rec[3] {
                "1" | "true" => true,
                "0" | "false" => false,
                _ => return Err(bad("success")),
            },
        });
    }
    Ok(points)
}

/// Per-iteration means across runs. Runs shorter than the longest one drop
/// out of the later rows, which `n_runs` reflects.
pub fn aggregate(traces: &[Vec<TracePoint>]) -> Vec<AggregateRow> {
    let len = traces.iter().map(Vec::len).max().unwrap_or(0);
    let mut rate_sum = vec![0.0; len];
    let mut prob_sum = vec![0.0; len];
    let mut count = vec![0usize; len];
    for trace in traces {
        let mut successes = 0usize;
        for (t, p) in trace.iter().enumerate() {
            successes += usize::from(p.success);
            rate_sum[t] += successes as f64 / (t + 1) as f64;
            prob_sum[t] += p.ground_prob;
            count[t] += 1;
        }
    }
    (0..len)
        .map(|t| AggregateRow {
            iteration: t + 1,
            mean_cum_success_rate: rate_sum[t] / count[t] as f64,
            mean_ground_prob: prob_sum[t] / count[t] as f64,
            n_runs: count[t],
        })
        .collect()
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = format!("{AGGREGATE_HEADER}\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.iteration, r.mean_cum_success_rate, r.mean_ground_prob, r.n_runs
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub repeat: usize,
    pub seed: u64,
    pub iterations: usize,
    pub cumulative_successes: usize,
    pub final_success_rate: f64,
    pub final_ground_prob: f64,
    pub first_success: Option<usize>,
    pub best_cost: f64,
    pub evaluations: usize,
    pub best_bitstring: String,
    pub best_bitstring_assets: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub cell: String,
    pub n_qubits: usize,
    pub n_params: usize,
    pub penalty: f64,
    pub budget: usize,
    pub ground_bitstring: String,
    pub ground_energy: f64,
    pub ground_degeneracy: usize,
    pub selected_assets: Vec<String>,
    pub mean_final_success_rate: f64,
    pub mean_final_ground_prob: f64,
    pub runs: Vec<RunSummary>,
    pub failures: Vec<(usize, String)>,
    pub wall_time_seconds: f64,
}

pub fn summarize(outcome: &ExperimentOutcome, n_params: usize) -> Summary {
    let names = &outcome.problem.asset_names;
    let runs: Vec<RunSummary> = outcome
        .records
        .iter()
        .map(|r| {
            let last = r.rows.last();
            RunSummary {
                repeat: r.repeat,
                seed: r.seed,
                iterations: r.rows.len(),
                cumulative_successes: r.cumulative_successes,
                final_success_rate: r.cumulative_successes as f64 / r.rows.len().max(1) as f64,
                final_ground_prob: last.map_or(0.0, |l| l.ground_prob),
                first_success: r.rows.iter().find(|x| x.success).map(|x| x.iteration),
                best_cost: r.best_cost,
                evaluations: r.evaluations,
                best_bitstring: r.best_bitstring.clone(),
                best_bitstring_assets: selected(names, r.best_bitstring_index),
            }
        })
        .collect();
    let k = runs.len().max(1) as f64;
    let p = &outcome.problem;
    Summary {
        config: outcome.config.clone(),
        cell: outcome.config.cell_label(),
        n_qubits: p.n(),
        n_params,
        penalty: p.spec.penalty,
        budget: p.spec.budget,
        ground_bitstring: crate::qubo::index_to_string(p.exact.ground_index, p.n()),
        ground_energy: p.exact.ground_energy,
        ground_degeneracy: p.exact.degeneracy,
        selected_assets: p.selected_assets(),
        mean_final_success_rate: runs.iter().map(|r| r.final_success_rate).sum::<f64>() / k,
        mean_final_ground_prob: runs.iter().map(|r| r.final_ground_prob).sum::<f64>() / k,
        runs,
        failures: outcome.failures.clone(),
        wall_time_seconds: outcome.wall_time_seconds,
    }
}

fn write(path: PathBuf, contents: &str) -> Result<(), ExperimentError> {
    fs::write(&path, contents).map_err(|e| ExperimentError::io(path, e))
}

/// Writes the full directory layout and returns the aggregate rows.
pub fn write_report(outcome: &ExperimentOutcome, n_params: usize, dir: &Path) -> Result<Vec<AggregateRow>, ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let mut traces = Vec::with_capacity(outcome.records.len());
    for rec in &outcome.records {
        let run_dir = dir.join(format!("run_{:03}", rec.repeat));
        fs::create_dir_all(&run_dir).map_err(|e| ExperimentError::io(&run_dir, e))?;
        let points = trace_points(rec);
        write(run_dir.join("trace.csv"), &trace_csv(&points))?;
        write(run_dir.join("optimizer.csv"), &trace_to_csv(&rec.optimizer_trace))?;
        traces.push(points);
    }
    let rows = aggregate(&traces);
    write(dir.join("aggregate.csv"), &aggregate_csv(&rows))?;
    let summary = serde_json::to_string_pretty(&summarize(outcome, n_params)).expect("summary serializes");
    write(dir.join("summary.json"), &(summary + "\n"))?;
    Ok(rows)
}

/// Rebuilds `aggregate.csv` from the `run_*/trace.csv` files under `dir`.
pub fn reaggregate(dir: &Path) -> Result<Vec<AggregateRow>, ExperimentError> {
    let mut run_dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| ExperimentError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("run_"))
        })
        .collect();
    run_dirs.sort();
    if run_dirs.is_empty() {
        return Err(ExperimentError::Config(format!("{}: no run_* directories", dir.display())));
    }
    let mut traces = Vec::new();
    for run in run_dirs {
        let path = run.join("trace.csv");
        let text = fs::read_to_string(&path).map_err(|e| ExperimentError::io(&path, e))?;
        let points = parse_trace_csv(&text)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        traces.push(points);
    }
    let rows = aggregate(&traces);
    write(dir.join("aggregate.csv"), &aggregate_csv(&rows))?;
    Ok(rows)
}
