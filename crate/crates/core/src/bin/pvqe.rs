use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use portfolio_vqe::ansatz::AnsatzFamily;
use portfolio_vqe::experiment::config::{
    parse_override_args, CostKind, OptimizerName, Penalty,
};
use portfolio_vqe::experiment::report::{reaggregate, write_report};
use portfolio_vqe::experiment::sweep::{run_sweep, SweepGrid};
use portfolio_vqe::experiment::{run_experiment, ExperimentConfig, ExperimentError};
use portfolio_vqe::market_data::{load_prices, stats_from_prices, synthetic_prices};
use portfolio_vqe::qubo::{
    build_qubo, default_penalty, index_to_string, solve_exact, PortfolioSpec, QuboProblem,
    VarianceForm,
};

#[derive(Parser)]
#[command(name = "pvqe", version, about = "Portfolio selection with a simulated VQE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a price CSV and print return statistics.
    Ingest {
        data: PathBuf,
        /// Print the statistics as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Brute-force the ground state of a portfolio QUBO.
    Exact(ExactArgs),
    /// Run a VQE experiment. Trailing `--field.path value` pairs override the config.
    Vqe {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
        overrides: Vec<String>,
    },
    /// Rebuild aggregate.csv from the run traces in an output directory.
    Report { dir: PathBuf },
    /// Run every ansatz × optimizer × cost × α cell with the config as a base.
    Sweep(SweepArgs),
    /// Write a seeded synthetic price CSV.
    Synth {
        #[arg(long)]
        assets: usize,
        #[arg(long, default_value_t = 252)]
        periods: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ExactArgs {
    /// Price CSV to build the portfolio QUBO from.
    #[arg(required_unless_present = "qubo", conflicts_with = "qubo")]
    data: Option<PathBuf>,
    /// Solve a QUBO given as JSON instead.
    #[arg(long)]
    qubo: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// A number or `auto`.
    #[arg(long, default_value = "auto")]
    penalty: String,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value = "full", value_parser = serde_word::<VarianceForm>)]
    variance_form: VarianceForm,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', value_parser = serde_word::<AnsatzFamily>)]
    families: Option<Vec<AnsatzFamily>>,
    #[arg(long, value_delimiter = ',', value_parser = serde_word::<OptimizerName>)]
    optimizers: Option<Vec<OptimizerName>>,
    #[arg(long, value_delimiter = ',', value_parser = serde_word::<CostKind>)]
    costs: Option<Vec<CostKind>>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long)]
    cmaes_iterations: Option<usize>,
    #[arg(long)]
    cobyla_iterations: Option<usize>,
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

fn serde_word<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Ingest { data, json } => ingest(&data, json),
        Command::Exact(args) => exact(args),
        Command::Vqe {
            config,
            out,
            overrides,
        } => vqe(&config, &out, &overrides),
        Command::Report { dir } => {
            let rows = reaggregate(&dir)?;
            println!("wrote {} ({} iterations)", dir.join("aggregate.csv").display(), rows.len());
            Ok(())
        }
        Command::Sweep(args) => sweep(args),
        Command::Synth {
            assets,
            periods,
            seed,
            out,
        } => {
            if assets < 2 || periods < 3 {
                return Err(ExperimentError::Config("need at least 2 assets and 3 periods".into()));
            }
            let prices = synthetic_prices(assets, periods, seed);
            std::fs::write(&out, prices.to_csv_string()).map_err(|e| ExperimentError::io(&out, e))?;
            println!("wrote {} ({assets} assets, {periods} periods)", out.display());
            Ok(())
        }
    }
}

fn ingest(path: &Path, json: bool) -> Result<(), ExperimentError> {
    let prices = load_prices(path)?;
    let stats = stats_from_prices(&prices)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
        return Ok(());
    }
    println!("assets: {}  periods: {}", prices.n_assets(), prices.n_periods());
    println!("{:<12} {:>14} {:>14}", "asset", "mean return", "std dev");
    for (i, name) in prices.asset_names().iter().enumerate() {
        println!("{:<12} {:>14.6e} {:>14.6e}", name, stats.mu[i], stats.sigma[i][i].sqrt());
    }
    Ok(())
}

fn exact(args: ExactArgs) -> Result<(), ExperimentError> {
    let (qubo, names) = match (&args.qubo, &args.data) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
            let q: QuboProblem = serde_json::from_str(&text)
                .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
            (q, None)
        }
        (None, Some(data)) => {
            let prices = load_prices(data)?;
            let stats = stats_from_prices(&prices)?;
            let n = stats.n_assets();
            let penalty = match serde_word::<Penalty>(&args.penalty)
                .or_else(|_| args.penalty.parse::<f64>().map(Penalty::Value).map_err(|e| e.to_string()))
            {
                Ok(Penalty::Value(p)) => p,
                Ok(Penalty::Auto(_)) => default_penalty(&stats, args.lambda),
                Err(_) => {
                    return Err(ExperimentError::Config(format!(
                        "penalty: expected a number or \"auto\", got {:?}",
                        args.penalty
                    )))
                }
            };
            let budget = match args.budget {
                Some(b) => b,
                None => PortfolioSpec::default_budget(n).map_err(|e| ExperimentError::Config(format!("budget: {e}")))?,
            };
            let spec = PortfolioSpec::new(args.lambda, penalty, budget, n)
                .map_err(|e| ExperimentError::Config(e.to_string()))?;
            println!("lambda: {}  penalty: {penalty}  budget: {budget}", args.lambda);
            (build_qubo(&stats, &spec, args.variance_form)?, Some(prices.asset_names().to_vec()))
        }
        (None, None) => unreachable!("clap requires one of them"),
    };
    let sol = solve_exact(&qubo, false)?;
    let n = qubo.n();
    let strings: Vec<String> = sol.ground_indices.iter().map(|&i| index_to_string(i, n)).collect();
    println!("ground state: {}", strings.join(" or "));
    println!("energy: {}", sol.ground_energy);
    println!("degeneracy: {}", sol.degeneracy);
    if let Some(names) = names {
        for &g in &sol.ground_indices {
            let chosen: Vec<&str> = names
                .iter()
                .enumerate()
                .filter(|(i, _)| g >> i & 1 == 1)
                .map(|(_, s)| s.as_str())
                .collect();
            println!("selected assets ({}): {}", chosen.len(), chosen.join(" "));
        }
    }
    Ok(())
}

fn vqe(config: &Path, out: &Path, overrides: &[String]) -> Result<(), ExperimentError> {
    let cfg = ExperimentConfig::load(config, &parse_override_args(overrides)?)?;
    let outcome = run_experiment(&cfg)?;
    let n_params = cfg.ansatz.family.build(outcome.problem.n(), cfg.ansatz.layers())?.n_params();
    let rows = write_report(&outcome, n_params, out)?;
    for rec in &outcome.records {
        println!(
            "run {:03}: {}/{} successful iterations, best cost {:.6}, most probable {}",
            rec.repeat,
            rec.cumulative_successes,
            rec.rows.len(),
            rec.best_cost,
            rec.best_bitstring
        );
    }
    for (r, msg) in &outcome.failures {
        eprintln!("run {r:03} failed: {msg}");
    }
    if let Some(last) = rows.last() {
        println!(
            "ground {} (energy {}), mean success rate {:.3}, mean ground probability {:.4}",
            index_to_string(outcome.problem.exact.ground_index, outcome.problem.n()),
            outcome.problem.exact.ground_energy,
            last.mean_cum_success_rate,
            last.mean_ground_prob
        );
    }
    println!("wrote {}", out.display());
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(ExperimentError::PartialFailure(outcome.failures.len()))
    }
}

fn sweep(args: SweepArgs) -> Result<(), ExperimentError> {
    let base = ExperimentConfig::load(&args.config, &parse_override_args(&args.overrides)?)?;
    let mut grid = SweepGrid::default();
    if let Some(f) = args.families {
        grid.families = f;
    }
    if let Some(o) = args.optimizers {
        grid.optimizers = o;
    }
    if let Some(c) = args.costs {
        grid.costs = c;
    }
    if let Some(a) = args.alphas {
        grid.alphas = a;
    }
    if let Some(n) = args.cmaes_iterations {
        grid.cmaes_iterations = n;
    }
    if let Some(n) = args.cobyla_iterations {
        grid.cobyla_iterations = n;
    }
    let cells = run_sweep(&base, &grid, &args.out)?;
    for c in &cells {
        println!(
            "{:<28} success rate {:.3}  ground probability {:.4}",
            c.cell, c.final_mean_cum_success_rate, c.final_mean_ground_prob
        );
    }
    println!("wrote {} cells to {}", cells.len(), args.out.display());
    Ok(())
}
