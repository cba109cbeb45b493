//! Penalized portfolio QUBO, its Ising form, and exhaustive ground-truth solving.
//!
//! Bit convention used throughout the crate: variable / qubit `i` is bit `i`
//! of a basis-state index, so qubit 0 is the least-significant bit.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::AssetStats;

/// Largest instance [`solve_exact`] will enumerate.
pub const MAX_EXACT_VARIABLES: usize = 26;

const PENALTY_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum QuboError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("bitstring length {found} does not match {expected} variables")]
    LengthMismatch { expected: usize, found: usize },
    #[error("{0} variables is too many for exhaustive enumeration (max {MAX_EXACT_VARIABLES})")]
    TooManyVariables(usize),
    #[error("invalid portfolio spec: {0}")]
    InvalidSpec(String),
    #[error("quadratic key ({0}, {1}) is not strictly upper triangular")]
    InvalidKey(usize, usize),
}

/// How the covariance term enters the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceForm {
    /// `Σ_ij σ_ij x_i x_j` over all ordered pairs; diagonal folds into the
    /// linear term via `x² = x`, off-diagonals give `2σ_ij` per unordered pair.
    #[default]
    Full,
    /// Only `Σ_{i<j} σ_ij x_i x_j`.
    UpperTriangle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioSpec {
    pub lambda: f64,
    pub penalty: f64,
    pub budget: usize,
    pub n_assets: usize,
}

impl PortfolioSpec {
    /// `penalty = 0` is accepted and disables the budget constraint.
    pub fn new(lambda: f64, penalty: f64, budget: usize, n_assets: usize) -> Result<Self, QuboError> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(QuboError::InvalidSpec(format!("lambda {lambda} not in [0, 1]")));
        }
        if !(penalty.is_finite() && penalty >= 0.0) {
            return Err(QuboError::InvalidSpec(format!("penalty {penalty} must be >= 0")));
        }
        if budget < 1 || budget > n_assets {
            return Err(QuboError::InvalidSpec(format!(
                "budget {budget} not in [1, {n_assets}]"
            )));
        }
        Ok(Self {
            lambda,
            penalty,
            budget,
            n_assets,
        })
    }

    /// Budget `N/2`; odd `N` needs an explicit budget.
    pub fn default_budget(n_assets: usize) -> Result<usize, QuboError> {
        if n_assets % 2 == 1 {
            return Err(QuboError::InvalidSpec(format!(
                "odd asset count {n_assets} needs an explicit budget"
            )));
        }
        Ok(n_assets / 2)
    }
}

/// `Q(x) = Σ_{i<j} q_ij x_i x_j + Σ_i q_i x_i + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuboWire", into = "QuboWire")]
pub struct QuboProblem {
    n: usize,
    linear: Vec<f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    constant: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuboWire {
    n: usize,
    linear: Vec<f64>,
    quadratic: Vec<(usize, usize, f64)>,
    constant: f64,
}

impl TryFrom<QuboWire> for QuboProblem {
    type Error = QuboError;
    fn try_from(w: QuboWire) -> Result<Self, QuboError> {
        let mut q = QuboProblem::new(w.linear, w.constant);
        if q.n != w.n {
            return Err(QuboError::DimensionMismatch {
                expected: w.n,
                found: q.n,
            });
        }
        for (i, j, v) in w.quadratic {
            q.add_quadratic(i, j, v)?;
        }
        Ok(q)
    }
}

impl From<QuboProblem> for QuboWire {
    fn from(q: QuboProblem) -> Self {
        QuboWire {
            n: q.n,
            quadratic: q.quadratic.iter().map(|(&(i, j), &v)| (i, j, v)).collect(),
            linear: q.linear,
            constant: q.constant,
        }
    }
}

impl QuboProblem {
    pub fn new(linear: Vec<f64>, constant: f64) -> Self {
        Self {
            n: linear.len(),
            linear,
            quadratic: BTreeMap::new(),
            constant,
        }
    }

    pub fn zero(n: usize) -> Self {
        Self::new(vec![0.0; n], 0.0)
    }

    /// Adds to `q_ij`, requiring `i < j < n`.
    pub fn add_quadratic(&mut self, i: usize, j: usize, value: f64) -> Result<(), QuboError> {
        if i >= j || j >= self.n {
            return Err(QuboError::InvalidKey(i, j));
        }
        *self.quadratic.entry((i, j)).or_insert(0.0) += value;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.quadratic
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn energy(&self, x: &[bool]) -> Result<f64, QuboError> {
        if x.len() != self.n {
            return Err(QuboError::LengthMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        let mut e = self.constant;
        for (&q, &xi) in self.linear.iter().zip(x) {
            if xi {
                e += q;
            }
        }
        for (&(i, j), &q) in &self.quadratic {
            if x[i] && x[j] {
                e += q;
            }
        }
        Ok(e)
    }

    /// Energy of the bitstring encoded by `index` (bit `i` is `x_i`).
    pub fn energy_of_index(&self, index: usize) -> f64 {
        let bit = |i: usize| (index >> i) & 1 == 1;
        let mut e = self.constant;
        for (i, &q) in self.linear.iter().enumerate() {
            if bit(i) {
                e += q;
            }
        }
        for (&(i, j), &q) in &self.quadratic {
            if bit(i) && bit(j) {
                e += q;
            }
        }
        e
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("qubo serializes")
    }
}

/// `qubo_energy` as a free function.
pub fn qubo_energy(q: &QuboProblem, x: &[bool]) -> Result<f64, QuboError> {
    q.energy(x)
}

/// `E(s) = -Σ h_i s_i - Σ_{i<j} J_ij s_i s_j + offset` with `s_i = 1 - 2 x_i`.
///
/// The offset is carried as an identity term, so [`energy_of_index`]
/// reproduces the QUBO energy of the same bitstring.
///
/// [`energy_of_index`]: IsingHamiltonian::energy_of_index
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IsingWire", into = "IsingWire")]
pub struct IsingHamiltonian {
    n: usize,
    h: Vec<f64>,
    j: BTreeMap<(usize, usize), f64>,
    offset: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IsingWire {
    n: usize,
    linear: Vec<f64>,
    quadratic: Vec<(usize, usize, f64)>,
    offset: f64,
}

impl TryFrom<IsingWire> for IsingHamiltonian {
    type Error = QuboError;
    fn try_from(w: IsingWire) -> Result<Self, QuboError> {
        if w.linear.len() != w.n {
            return Err(QuboError::DimensionMismatch {
                expected: w.n,
                found: w.linear.len(),
            });
        }
        let mut j = BTreeMap::new();
        for (a, b, v) in w.quadratic {
            if a >= b || b >= w.n {
                return Err(QuboError::InvalidKey(a, b));
            }
            *j.entry((a, b)).or_insert(0.0) += v;
        }
        Ok(Self {
            n: w.n,
            h: w.linear,
            j,
            offset: w.offset,
        })
    }
}

impl From<IsingHamiltonian> for IsingWire {
    fn from(h: IsingHamiltonian) -> Self {
        IsingWire {
            n: h.n,
            quadratic: h.j.iter().map(|(&(a, b), &v)| (a, b, v)).collect(),
            linear: h.h,
            offset: h.offset,
        }
    }
}

impl IsingHamiltonian {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn j(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.j
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Spin energy without the offset. `spins[i]` must be ±1.
    pub fn spin_energy(&self, spins: &[i8]) -> Result<f64, QuboError> {
        if spins.len() != self.n {
            return Err(QuboError::LengthMismatch {
                expected: self.n,
                found: spins.len(),
            });
        }
        let mut e = 0.0;
        for (&h, &s) in self.h.iter().zip(spins) {
            e -= h * f64::from(s);
        }
        for (&(a, b), &v) in &self.j {
            e -= v * f64::from(spins[a]) * f64::from(spins[b]);
        }
        Ok(e)
    }

    /// Diagonal entry for basis state `index`, offset included.
    pub fn energy_of_index(&self, index: usize) -> f64 {
        let spin = |i: usize| if (index >> i) & 1 == 1 { -1.0 } else { 1.0 };
        let mut e = self.offset;
        for (i, &h) in self.h.iter().enumerate() {
            e -= h * spin(i);
        }
        for (&(a, b), &v) in &self.j {
            e -= v * spin(a) * spin(b);
        }
        e
    }

    /// All `2^n` diagonal entries, indexed by basis state.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..1usize << self.n).map(|x| self.energy_of_index(x)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("hamiltonian serializes")
    }
}

/// Substitutes `x_i = (1 - s_i) / 2`:
/// `q_ij x_i x_j = q_ij/4 (1 - s_i - s_j + s_i s_j)` and `q_i x_i = q_i/2 (1 - s_i)`.
pub fn to_ising(q: &QuboProblem) -> IsingHamiltonian {
    let mut h: Vec<f64> = q.linear.iter().map(|&qi| qi / 2.0).collect();
    let mut j = BTreeMap::new();
    let mut offset = q.constant + q.linear.iter().sum::<f64>() / 2.0;
    for (&(a, b), &v) in &q.quadratic {
        h[a] += v / 4.0;
        h[b] += v / 4.0;
        j.insert((a, b), -v / 4.0);
        offset += v / 4.0;
    }
    IsingHamiltonian {
        n: q.n,
        h,
        j,
        offset,
    }
}

/// Encodes `-λ Σ μ_i x_i + (1-λ) V(x) + p (Σ x_i - B)²` with `x² = x` folding.
pub fn build_qubo(
    stats: &AssetStats,
    spec: &PortfolioSpec,
    variance_form: VarianceForm,
) -> Result<QuboProblem, QuboError> {
    let n = stats.n_assets();
    if n != spec.n_assets {
        return Err(QuboError::DimensionMismatch {
            expected: spec.n_assets,
            found: n,
        });
    }
    if stats.sigma.len() != n || stats.sigma.iter().any(|row| row.len() != n) {
        return Err(QuboError::DimensionMismatch {
            expected: n,
            found: stats.sigma.len(),
        });
    }
    let lambda = spec.lambda;
    let p = spec.penalty;
    let b = spec.budget as f64;

    let linear = (0..n)
        .map(|i| {
            let variance = match variance_form {
                VarianceForm::Full => (1.0 - lambda) * stats.sigma[i][i],
                VarianceForm::UpperTriangle => 0.0,
            };
            -lambda * stats.mu[i] + variance + p * (1.0 - 2.0 * b)
        })
        .collect();
    let mut qubo = QuboProblem::new(linear, p * b * b);
    for i in 0..n {
        for j in i + 1..n {
            let cov = match variance_form {
                VarianceForm::Full => stats.sigma[i][j] + stats.sigma[j][i],
                VarianceForm::UpperTriangle => stats.sigma[i][j],
            };
            let v = (1.0 - lambda) * cov + 2.0 * p;
            if v != 0.0 {
                qubo.add_quadratic(i, j, v)?;
            }
        }
    }
    Ok(qubo)
}

/// `λ Σ|μ_i| + (1-λ) Σ_ij |σ_ij| + 1e-6`.
///
/// Moving one asset in or out of a selection changes the objective by at most
/// `λ|μ_i| + (1-λ)(|σ_ii| + 2 Σ_{j≠i} |σ_ij|)`, which the returned sum
/// dominates, while it lowers the penalty of any infeasible selection by at
/// least `p`. Every infeasible bitstring therefore has a strictly better
/// neighbour and the ground state satisfies the budget.
pub fn default_penalty(stats: &AssetStats, lambda: f64) -> f64 {
    let ret: f64 = stats.mu.iter().map(|m| m.abs()).sum();
    let var: f64 = stats.sigma.iter().flatten().map(|s| s.abs()).sum();
    lambda * ret + (1.0 - lambda) * var + PENALTY_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactSolution {
    pub n: usize,
    /// Smallest ground-state index.
    pub ground_index: usize,
    pub ground_energy: f64,
    /// Every index whose energy ties the minimum, ascending.
    pub ground_indices: Vec<usize>,
    pub degeneracy: usize,
    /// `(index, energy)` sorted by energy then index.
    pub spectrum: Option<Vec<(usize, f64)>>,
}

impl ExactSolution {
    pub fn ground_bitstring(&self) -> Vec<bool> {
        index_to_bits(self.ground_index, self.n)
    }
}

/// Energies within this distance of the minimum count as degenerate ground states.
fn tie_tolerance(e_min: f64) -> f64 {
    1e-12 * e_min.abs().max(1.0)
}

/// Enumerates all `2^n` bitstrings. Ties resolve to the smallest index, and
/// the result is independent of how the range is split across threads.
pub fn solve_exact(q: &QuboProblem, keep_spectrum: bool) -> Result<ExactSolution, QuboError> {
    if q.n > MAX_EXACT_VARIABLES {
        return Err(QuboError::TooManyVariables(q.n));
    }
    let size = 1usize << q.n;
    let energies: Vec<f64> = (0..size)
        .into_par_iter()
        .with_min_len(4096)
        .map(|x| q.energy_of_index(x))
        .collect();

    let (ground_index, ground_energy) = energies
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, e)| if e < best.1 { (i, e) } else { best });
    let tol = tie_tolerance(ground_energy);
    let ground_indices: Vec<usize> = energies
        .iter()
        .enumerate()
        .filter(|(_, &e)| e - ground_energy <= tol)
        .map(|(i, _)| i)
        .collect();
    let spectrum = keep_spectrum.then(|| {
        let mut s: Vec<(usize, f64)> = energies.iter().copied().enumerate().collect();
        s.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        s
    });
    Ok(ExactSolution {
        n: q.n,
        ground_index,
        ground_energy,
        degeneracy: ground_indices.len(),
        ground_indices,
        spectrum,
    })
}

pub fn index_to_bits(index: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| (index >> i) & 1 == 1).collect()
}

pub fn bits_to_index(bits: &[bool]) -> usize {
    bits.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .fold(0, |acc, (i, _)| acc | (1 << i))
}

/// `0/1` string with qubit 0 as the rightmost character.
pub fn index_to_string(index: usize, n: usize) -> String {
    (0..n)
        .rev()
        .map(|i| if (index >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}
