//! JSON experiment configuration.
//!
//! Every field has a default except `data`. Any field can be overridden with
//! a dotted path (`cost.alpha=0.5`, `optimizer.kind=cobyla`); the value is
//! parsed as JSON when possible and taken as a plain string otherwise.
//! Unknown fields are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ExperimentError;
use crate::ansatz::AnsatzFamily;
use crate::cost::{CostFunction, WeightScheme};
use crate::optimizers::{OptimizerConfig, OptimizerKind};
use crate::qubo::VarianceForm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Price CSV, relative to the working directory.
    pub data: PathBuf,
    #[serde(default)]
    pub portfolio: PortfolioConfig,
    #[serde(default)]
    pub ansatz: AnsatzConfig,
    #[serde(default)]
    pub cost: CostConfig,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    /// Shots per cost evaluation; 0 evaluates the cost on the exact distribution.
    #[serde(default = "default_shots")]
    pub shots: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_repeats")]
    pub n_repeats: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_shots() -> usize {
    1000
}
fn default_top_k() -> usize {
    10
}
fn default_repeats() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Penalty {
    Auto(AutoWord),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoWord {
    Auto,
}

impl Default for Penalty {
    fn default() -> Self {
        Penalty::Auto(AutoWord::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PortfolioConfig {
    pub lambda: f64,
    pub penalty: Penalty,
    /// Defaults to half the asset count.
    pub budget: Option<usize>,
    pub variance_form: VarianceForm,
}

impl Default for PortfolioConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            penalty: Penalty::default(),
            budget: None,
            variance_form: VarianceForm::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnsatzConfig {
    pub family: AnsatzFamily,
    /// Defaults to 3 for two-local and 2 for block.
    pub layers: Option<usize>,
}

impl AnsatzConfig {
    pub fn layers(&self) -> usize {
        self.layers.unwrap_or_else(|| self.family.default_layers())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    Mean,
    Cvar,
    Wcvar,
}

impl CostKind {
    pub fn label(self) -> &'static str {
        match self {
            CostKind::Mean => "mean",
            CostKind::Cvar => "cvar",
            CostKind::Wcvar => "wcvar",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Uniform,
    EnergyExp,
    RankExp,
    PiecewiseExp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostConfig {
    pub kind: CostKind,
    pub alpha: f64,
    /// Weighting used when `kind` is `wcvar`.
    pub scheme: SchemeKind,
    pub beta: f64,
    pub n1: usize,
    pub n2: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            kind: CostKind::Wcvar,
            alpha: 1.0,
            scheme: SchemeKind::PiecewiseExp,
            beta: 0.5,
            n1: 5,
            n2: 20,
            beta1: 0.7,
            beta2: 0.2,
            beta3: 0.05,
        }
    }
}

impl CostConfig {
    pub fn cost_function(&self) -> CostFunction {
        let alpha = self.alpha;
        match self.kind {
            CostKind::Mean => CostFunction::Mean,
            CostKind::Cvar => CostFunction::Cvar { alpha },
            CostKind::Wcvar => CostFunction::Wcvar(match self.scheme {
                SchemeKind::Uniform => WeightScheme::Uniform { alpha },
                SchemeKind::EnergyExp => WeightScheme::EnergyExp {
                    alpha,
                    beta: self.beta,
                },
                SchemeKind::RankExp => WeightScheme::RankExp {
                    alpha,
                    beta: self.beta,
                },
                SchemeKind::PiecewiseExp => WeightScheme::PiecewiseExp {
                    alpha,
                    n1: self.n1,
                    n2: self.n2,
                    beta1: self.beta1,
                    beta2: self.beta2,
                    beta3: self.beta3,
                },
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerName {
    Cmaes,
    Cobyla,
}

impl OptimizerName {
    pub fn label(self) -> &'static str {
        match self {
            OptimizerName::Cmaes => "cmaes",
            OptimizerName::Cobyla => "cobyla",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    pub kind: OptimizerName,
    pub population: Option<usize>,
    pub sigma0: f64,
    pub rho_begin: f64,
    pub rho_end: f64,
    pub max_iterations: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            kind: OptimizerName::Cmaes,
            population: None,
            sigma0: 0.3,
            rho_begin: 0.5,
            rho_end: 1e-4,
            max_iterations: 100,
        }
    }
}

impl OptimizerSettings {
    pub fn to_config(&self, seed: u64) -> OptimizerConfig {
        let kind = match self.kind {
            OptimizerName::Cmaes => OptimizerKind::Cmaes {
                population: self.population,
                sigma0: self.sigma0,
            },
            OptimizerName::Cobyla => OptimizerKind::Cobyla {
                rho_begin: self.rho_begin,
                rho_end: self.rho_end,
            },
        };
        OptimizerConfig {
            kind,
            max_iterations: self.max_iterations,
            seed,
        }
    }
}

impl ExperimentConfig {
    pub fn new(data: impl Into<PathBuf>) -> Self {
        Self {
            data: data.into(),
            portfolio: PortfolioConfig::default(),
            ansatz: AnsatzConfig::default(),
            cost: CostConfig::default(),
            optimizer: OptimizerSettings::default(),
            shots: default_shots(),
            top_k: default_top_k(),
            n_repeats: default_repeats(),
            seed: 0,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, ExperimentError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self, ExperimentError> {
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            ExperimentError::Config(format!("{path}: {}", e.into_inner()))
        })
    }

    /// Reads a config file and applies `key=value` overrides on top.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let mut value: Value =
            serde_json::from_str(&text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        Self::from_value(value)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self, ExperimentError> {
        let mut value = self.to_value();
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        Self::from_value(value)
    }

    /// Field-level checks that do not need the data file.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |field: &str, msg: String| Err(ExperimentError::Config(format!("{field}: {msg}")));
        if self.top_k < 1 {
            return bad("top_k", "must be >= 1".into());
        }
        if self.n_repeats < 1 {
            return bad("n_repeats", "must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.portfolio.lambda) {
            return bad("portfolio.lambda", format!("{} not in [0, 1]", self.portfolio.lambda));
        }
        if let Penalty::Value(p) = self.portfolio.penalty {
            if !(p.is_finite() && p >= 0.0) {
                return bad("portfolio.penalty", format!("{p} must be >= 0 or \"auto\""));
            }
        }
        if self.ansatz.layers == Some(0) {
            return bad("ansatz.layers", "must be >= 1".into());
        }
        let cost = self.cost.cost_function();
        if let Err(e) = cost.validate() {
            return bad("cost", e.to_string());
        }
        if self.shots == 0 && !cost.supports_exact_mode() {
            return bad(
                "shots",
                format!("exact mode (shots = 0) does not support {} weighting", self.cost.scheme_label()),
            );
        }
        if let Err(e) = self.optimizer.to_config(0).validate() {
            return bad("optimizer", e.to_string());
        }
        if !self.data.exists() {
            return bad("data", format!("{} does not exist", self.data.display()));
        }
        Ok(())
    }
}

impl CostConfig {
    fn scheme_label(&self) -> &'static str {
        match self.scheme {
            SchemeKind::Uniform => "uniform",
            SchemeKind::EnergyExp => "energy_exp",
            SchemeKind::RankExp => "rank_exp",
            SchemeKind::PiecewiseExp => "piecewise_exp",
        }
    }
}

/// Sets the value at a dotted path, creating intermediate objects.
pub fn apply_override(root: &mut Value, key: &str, raw: &str) -> Result<(), ExperimentError> {
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ExperimentError::Config(format!("bad override key {key:?}")));
    }
    let (last, parents) = parts.split_last().expect("split yields one part");
    for part in parents {
        if !node.is_object() {
            return Err(ExperimentError::Config(format!("{key}: {part} is not an object")));
        }
        node = node
            .as_object_mut()
            .unwrap()
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    match node.as_object_mut() {
        Some(obj) => {
            obj.insert(last.to_string(), parsed);
            Ok(())
        }
        None => Err(ExperimentError::Config(format!("{key}: parent is not an object"))),
    }
}

/// Splits `--a.b value` / `--a.b=value` argument lists into pairs.
pub fn parse_override_args(args: &[String]) -> Result<Vec<(String, String)>, ExperimentError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            return Err(ExperimentError::Config(format!("unexpected argument {arg:?}")));
        };
        if let Some((k, v)) = flag.split_once('=') {
            out.push((k.to_owned(), v.to_owned()));
        } else {
            let v = it
                .next()
                .ok_or_else(|| ExperimentError::Config(format!("--{flag} needs a value")))?;
            out.push((flag.to_owned(), v.clone()));
        }
    }
    Ok(out)
}
