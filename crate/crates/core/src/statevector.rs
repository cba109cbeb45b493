//! Dense statevector simulation of RY / RZ / CNOT circuits.
//!
//! Amplitude `k` belongs to the basis state whose bit `i` is the value of
//! qubit `i` (qubit 0 is the least-significant bit).

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ansatz::Circuit;
use crate::qubo::IsingHamiltonian;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("gate {0} needs a rotation angle")]
    MissingParameter(String),
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    IndexOutOfRange { index: usize, n_qubits: usize },
    #[error("CNOT control and target are both qubit {0}")]
    SameControlTarget(usize),
    #[error("circuit takes {expected} parameters, got {found}")]
    ParamCountMismatch { expected: usize, found: usize },
    #[error("dimension mismatch: state has {state} qubits, operator has {operator}")]
    DimensionMismatch { state: usize, operator: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "lowercase")]
pub enum Gate {
    Ry { qubit: usize, param: usize },
    Rz { qubit: usize, param: usize },
    Cnot { control: usize, target: usize },
}

impl Gate {
    pub fn param_slot(&self) -> Option<usize> {
        match *self {
            Gate::Ry { param, .. } | Gate::Rz { param, .. } => Some(param),
            Gate::Cnot { .. } => None,
        }
    }

    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::Ry { qubit, .. } | Gate::Rz { qubit, .. } => (qubit, None),
            Gate::Cnot { control, target } => (control, Some(target)),
        }
    }

    pub(crate) fn check(&self, n_qubits: usize) -> Result<(), SimError> {
        let (a, b) = self.qubits();
        for q in std::iter::once(a).chain(b) {
            if q >= n_qubits {
                return Err(SimError::IndexOutOfRange { index: q, n_qubits });
            }
        }
        if b == Some(a) {
            return Err(SimError::SameControlTarget(a));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero_state(n_qubits: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self {
            n_qubits,
            amplitudes,
        }
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Option<Self> {
        let len = amplitudes.len();
        if len == 0 || !len.is_power_of_two() {
            return None;
        }
        Some(Self {
            n_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn apply_gate(&mut self, gate: &Gate, theta: Option<f64>) -> Result<(), SimError> {
        gate.check(self.n_qubits)?;
        match *gate {
            Gate::Ry { qubit, .. } => {
                let t = theta.ok_or_else(|| SimError::MissingParameter(format!("{gate:?}")))?;
                self.ry(qubit, t);
            }
            Gate::Rz { qubit, .. } => {
                let t = theta.ok_or_else(|| SimError::MissingParameter(format!("{gate:?}")))?;
                self.rz(qubit, t);
            }
            Gate::Cnot { control, target } => self.cnot(control, target),
        }
        Ok(())
    }

    fn ry(&mut self, qubit: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        self.for_pairs(qubit, |a0, a1| {
            let (x, y) = (*a0, *a1);
            *a0 = x * c - y * s;
            *a1 = x * s + y * c;
        });
    }

    fn rz(&mut self, qubit: usize, theta: f64) {
        let (s, c) = (theta / 2.0).sin_cos();
        let lo = Complex64::new(c, -s);
        let hi = Complex64::new(c, s);
        self.for_pairs(qubit, |a0, a1| {
            *a0 *= lo;
            *a1 *= hi;
        });
    }

    fn cnot(&mut self, control: usize, target: usize) {
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for k in 0..self.amplitudes.len() {
            if k & cmask != 0 && k & tmask == 0 {
                self.amplitudes.swap(k, k | tmask);
            }
        }
    }

    /// Applies `f` to every amplitude pair `(k, k | 1<<qubit)` with bit `qubit` clear.
    fn for_pairs(&mut self, qubit: usize, mut f: impl FnMut(&mut Complex64, &mut Complex64)) {
        let stride = 1usize << qubit;
        for block in self.amplitudes.chunks_exact_mut(stride * 2) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi) {
                f(a0, a1);
            }
        }
    }

    /// `|amp_k|²` for every basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Runs `circuit` from `|0…0⟩`.
pub fn run_circuit(circuit: &Circuit, params: &[f64]) -> Result<StateVector, SimError> {
    if params.len() != circuit.n_params() {
        return Err(SimError::ParamCountMismatch {
            expected: circuit.n_params(),
            found: params.len(),
        });
    }
    let mut state = StateVector::zero_state(circuit.n_qubits());
    for gate in circuit.gates() {
        let theta = gate.param_slot().map(|slot| params[slot]);
        state.apply_gate(gate, theta)?;
    }
    Ok(state)
}

pub fn probabilities(state: &StateVector) -> Vec<f64> {
    state.probabilities()
}

/// Inverse-CDF sampler over a fixed distribution.
///
/// Each shot consumes exactly one `f64` from the generator (`Rng::random`,
/// uniform on `[0, 1)`), and returns the first index whose cumulative
/// probability exceeds it.
#[derive(Debug, Clone)]
pub struct Sampler {
    cdf: Vec<f64>,
    last_support: usize,
}

impl Sampler {
    pub fn new(probabilities: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = probabilities
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect();
        let last_support = probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        Self { cdf, last_support }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u);
        // rounding can leave the final cumulative value just below u
        idx.min(self.last_support)
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, shots: usize, rng: &mut R) -> Vec<usize> {
        (0..shots).map(|_| self.sample(rng)).collect()
    }
}

/// `shots` i.i.d. basis-state indices drawn from `state`'s distribution.
pub fn sample_bitstrings<R: Rng + ?Sized>(state: &StateVector, shots: usize, rng: &mut R) -> Vec<usize> {
    Sampler::new(&state.probabilities()).sample_n(shots, rng)
}

/// `Σ_x |c_x|² E_x` for a diagonal Hamiltonian (offset included).
pub fn diagonal_expectation(state: &StateVector, h: &IsingHamiltonian) -> Result<f64, SimError> {
    if state.n_qubits() != h.n() {
        return Err(SimError::DimensionMismatch {
            state: state.n_qubits(),
            operator: h.n(),
        });
    }
    Ok(state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(x, a)| a.norm_sqr() * h.energy_of_index(x))
        .sum())
}
