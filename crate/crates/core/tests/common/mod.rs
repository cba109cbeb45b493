//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code under test except for plain data accessors.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use portfolio_vqe::ansatz::Circuit;
use portfolio_vqe::market_data::AssetStats;
use portfolio_vqe::qubo::QuboProblem;
use portfolio_vqe::Gate;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ry(theta: f64) -> DMatrix<Complex64> {
    let (s, co) = (theta / 2.0).sin_cos();
    DMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
}

fn rz(theta: f64) -> DMatrix<Complex64> {
    let a = Complex64::from_polar(1.0, -theta / 2.0);
    let b = Complex64::from_polar(1.0, theta / 2.0);
    DMatrix::from_row_slice(2, 2, &[a, c(0.0, 0.0), c(0.0, 0.0), b])
}

fn eye2() -> DMatrix<Complex64> {
    DMatrix::identity(2, 2)
}

/// `⊗_{k = n-1 .. 0} factor(k)`, so qubit 0 is the least-significant bit.
fn kron_chain(n: usize, factor: impl Fn(usize) -> DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut m = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for k in (0..n).rev() {
        m = m.kronecker(&factor(k));
    }
    m
}

/// Full `2^n × 2^n` unitary of one gate, built only from Kronecker products.
pub fn dense_gate(n: usize, gate: &Gate, params: &[f64]) -> DMatrix<Complex64> {
    match *gate {
        Gate::Ry { qubit, param } => kron_chain(n, |k| if k == qubit { ry(params[param]) } else { eye2() }),
        Gate::Rz { qubit, param } => kron_chain(n, |k| if k == qubit { rz(params[param]) } else { eye2() }),
        Gate::Cnot { control, target } => {
            let p0 = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
            let p1 = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
            let x = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
            let off = kron_chain(n, |k| if k == control { p0.clone() } else { eye2() });
            let on = kron_chain(n, |k| {
                if k == control {
                    p1.clone()
                } else if k == target {
                    x.clone()
                } else {
                    eye2()
                }
            });
            off + on
        }
    }
}

pub fn dense_run(circuit: &Circuit, params: &[f64]) -> DVector<Complex64> {
    let n = circuit.n_qubits();
    let mut v = DVector::from_element(1 << n, c(0.0, 0.0));
    v[0] = c(1.0, 0.0);
    for g in circuit.gates() {
        v = dense_gate(n, g, params) * v;
    }
    v
}

/// Random gate list over `n` qubits using `n_params` slots, each slot used at
/// least once.
pub fn random_circuit(n: usize, n_gates: usize, r: &mut impl Rng) -> (Circuit, Vec<f64>) {
    let mut gates = Vec::new();
    let mut next_slot = 0;
    for _ in 0..n_gates {
        let kind = r.random_range(0..3);
        if kind == 2 && n >= 2 {
            let control = r.random_range(0..n);
            let mut target = r.random_range(0..n - 1);
            if target >= control {
                target += 1;
            }
            gates.push(Gate::Cnot { control, target });
        } else {
            let qubit = r.random_range(0..n);
            let param = next_slot;
            next_slot += 1;
            gates.push(if kind == 0 {
                Gate::Ry { qubit, param }
            } else {
                Gate::Rz { qubit, param }
            });
        }
    }
    let params = (0..next_slot).map(|_| r.random_range(-7.0..7.0)).collect();
    (Circuit::new(n, next_slot, gates).expect("valid circuit"), params)
}

/// Double loop over the coefficient tables.
pub fn naive_qubo_energy(q: &QuboProblem, x: &[bool]) -> f64 {
    let mut e = q.constant();
    for (i, &xi) in x.iter().enumerate() {
        if xi {
            e += q.linear()[i];
        }
    }
    for (&(i, j), &v) in q.quadratic() {
        if x[i] && x[j] {
            e += v;
        }
    }
    e
}

pub fn random_qubo(n: usize, r: &mut impl Rng) -> QuboProblem {
    let linear = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
    let mut q = QuboProblem::new(linear, r.random_range(-2.0..2.0));
    for i in 0..n {
        for j in i + 1..n {
            if r.random_bool(0.7) {
                q.add_quadratic(i, j, r.random_range(-3.0..3.0)).unwrap();
            }
        }
    }
    q
}

/// Random mean vector and covariance `A Aᵀ / n`.
pub fn random_stats(n: usize, r: &mut impl Rng) -> AssetStats {
    let mu = (0..n).map(|_| r.random_range(-0.01..0.01)).collect();
    let a: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| r.random_range(-0.05..0.05)).collect())
        .collect();
    let sigma = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| a[i][k] * a[j][k]).sum::<f64>() / n as f64)
                .collect()
        })
        .collect();
    AssetStats { mu, sigma }
}

/// `-λ Σ μ_i x_i + (1-λ) Σ_ij σ_ij x_i x_j + p (Σ x_i - B)²` evaluated term by term.
pub fn literal_objective(stats: &AssetStats, lambda: f64, p: f64, budget: usize, x: &[bool]) -> f64 {
    let n = x.len();
    let xf: Vec<f64> = x.iter().map(|&b| f64::from(u8::from(b))).collect();
    let ret: f64 = (0..n).map(|i| stats.mu[i] * xf[i]).sum();
    let mut var = 0.0;
    for i in 0..n {
        for j in 0..n {
            var += stats.sigma[i][j] * xf[i] * xf[j];
        }
    }
    let count: f64 = xf.iter().sum();
    -lambda * ret + (1.0 - lambda) * var + p * (count - budget as f64).powi(2)
}

/// Same objective with only the strictly upper-triangular covariance terms.
pub fn literal_objective_upper(stats: &AssetStats, lambda: f64, p: f64, budget: usize, x: &[bool]) -> f64 {
    let n = x.len();
    let xf: Vec<f64> = x.iter().map(|&b| f64::from(u8::from(b))).collect();
    let ret: f64 = (0..n).map(|i| stats.mu[i] * xf[i]).sum();
    let mut var = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            var += stats.sigma[i][j] * xf[i] * xf[j];
        }
    }
    let count: f64 = xf.iter().sum();
    -lambda * ret + (1.0 - lambda) * var + p * (count - budget as f64).powi(2)
}

pub fn bits(index: usize, n: usize) -> Vec<bool> {
    (0..n).map(|k| index >> k & 1 == 1).collect()
}

/// Normalized random amplitudes.
pub fn random_amplitudes(n: usize, r: &mut impl Rng) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..1 << n)
        .map(|_| c(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / norm).collect()
}
