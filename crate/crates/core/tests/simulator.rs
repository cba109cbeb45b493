mod common;

use std::f64::consts::PI;

use common::*;
use proptest::prelude::*;

use portfolio_vqe::ansatz::{block_ansatz, two_local, AnsatzFamily};
use portfolio_vqe::qubo::{solve_exact, to_ising};
use portfolio_vqe::rng::stream;
use portfolio_vqe::statevector::{diagonal_expectation, run_circuit, sample_bitstrings};
use portfolio_vqe::StateVector;

proptest! {
    #[test]
    fn matches_kronecker_oracle(n in 1usize..=4, n_gates in 0usize..25, seed in any::<u64>()) {
        let (circuit, params) = random_circuit(n, n_gates, &mut rng(seed));
        let got = run_circuit(&circuit, &params).unwrap();
        let want = dense_run(&circuit, &params);
        for (a, b) in got.amplitudes().iter().zip(want.iter()) {
            prop_assert!((a - b).norm() <= 1e-10);
        }
        prop_assert!((got.norm_sqr() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn ansatz_states_stay_normalized(n in 2usize..=6, layers in 1usize..=3, seed in any::<u64>(), block in any::<bool>()) {
        let circuit = if block { block_ansatz(n, layers) } else { two_local(n, layers) }.unwrap();
        let mut r = rng(seed);
        let params: Vec<f64> = (0..circuit.n_params()).map(|_| rand::Rng::random_range(&mut r, -PI..PI)).collect();
        let state = run_circuit(&circuit, &params).unwrap();
        prop_assert!((state.norm_sqr() - 1.0).abs() <= 1e-9);
        let p: f64 = state.probabilities().iter().sum();
        prop_assert!((p - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn expectation_within_spectrum(seed in any::<u64>()) {
        let mut r = rng(seed);
        let q = random_qubo(3, &mut r);
        let h = to_ising(&q);
        let state = StateVector::from_amplitudes(random_amplitudes(3, &mut r)).unwrap();
        let e = diagonal_expectation(&state, &h).unwrap();
        let d = h.diagonal();
        let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(e >= lo - 1e-12 && e <= hi + 1e-12);
    }
}

#[test]
fn ansatz_matches_kronecker_oracle() {
    let mut r = rng(17);
    for family in [AnsatzFamily::TwoLocal, AnsatzFamily::Block] {
        for n in 2..=4 {
            let circuit = family.build(n, 2).unwrap();
            let params: Vec<f64> = (0..circuit.n_params()).map(|_| rand::Rng::random_range(&mut r, -PI..PI)).collect();
            let got = run_circuit(&circuit, &params).unwrap();
            let want = dense_run(&circuit, &params);
            for (a, b) in got.amplitudes().iter().zip(want.iter()) {
                assert!((a - b).norm() <= 1e-10);
            }
        }
    }
}

#[test]
fn uniform_superposition_gives_spectrum_mean() {
    let q = random_qubo(4, &mut rng(5));
    let h = to_ising(&q);
    let circuit = two_local(4, 1).unwrap();
    // RY(π/2) on every qubit in the first layer, everything else zero
    let mut params = vec![0.0; circuit.n_params()];
    for g in circuit.gates().iter().take(8) {
        if let portfolio_vqe::Gate::Ry { param, .. } = *g {
            params[param] = PI / 2.0;
        }
    }
    // the CNOT chain permutes a uniform superposition onto itself
    let state = run_circuit(&circuit, &params).unwrap();
    for p in state.probabilities() {
        assert!((p - 1.0 / 16.0).abs() < 1e-12);
    }
    let spectrum = solve_exact(&q, true).unwrap().spectrum.unwrap();
    let mean = spectrum.iter().map(|s| s.1).sum::<f64>() / 16.0;
    assert!((diagonal_expectation(&state, &h).unwrap() - mean).abs() < 1e-12);
}

#[test]
fn basis_state_expectation_is_its_energy() {
    let q = random_qubo(3, &mut rng(6));
    let h = to_ising(&q);
    for x in 0..8usize {
        let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); 8];
        amps[x] = num_complex::Complex64::new(0.0, 1.0);
        let s = StateVector::from_amplitudes(amps).unwrap();
        assert!((diagonal_expectation(&s, &h).unwrap() - naive_qubo_energy(&q, &bits(x, 3))).abs() < 1e-12);
    }
}

#[test]
fn half_half_sampling_frequency() {
    let mut s = StateVector::zero_state(1);
    s.apply_gate(&portfolio_vqe::Gate::Ry { qubit: 0, param: 0 }, Some(PI / 2.0)).unwrap();
    for seed in 0..5 {
        let shots = sample_bitstrings(&s, 10_000, &mut stream(seed));
        let zeros = shots.iter().filter(|&&x| x == 0).count() as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&zeros), "seed {seed}: {zeros}");
    }
}

#[test]
fn empirical_distribution_converges() {
    let mut r = rng(99);
    for seed in 0..10u64 {
        let state = StateVector::from_amplitudes(random_amplitudes(4, &mut r)).unwrap();
        let probs = state.probabilities();
        let k = 100_000;
        let mut counts = [0usize; 16];
        for x in sample_bitstrings(&state, k, &mut stream(seed)) {
            counts[x] += 1;
        }
        let tv: f64 = counts
            .iter()
            .zip(&probs)
            .map(|(&c, &p)| (c as f64 / k as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.02, "seed {seed}: tv {tv}");
    }
}

#[test]
fn qubit_zero_is_least_significant() {
    // X on qubit 0 via RY(π): index 1, bitstring "…01", energy of x_0 = 1
    let mut q = portfolio_vqe::QuboProblem::new(vec![1.0, 10.0], 0.0);
    q.add_quadratic(0, 1, 100.0).unwrap();
    let mut s = StateVector::zero_state(2);
    s.apply_gate(&portfolio_vqe::Gate::Ry { qubit: 0, param: 0 }, Some(PI)).unwrap();
    let probs = s.probabilities();
    assert!((probs[1] - 1.0).abs() < 1e-12);
    assert!((diagonal_expectation(&s, &to_ising(&q)).unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(portfolio_vqe::qubo::index_to_string(1, 2), "01");
}

/// Random search over angles can put > 0.99 probability on every basis state.
#[test]
fn ansatz_families_reach_every_basis_state() {
    for family in [AnsatzFamily::TwoLocal, AnsatzFamily::Block] {
        for n in 2..=3 {
            let circuit = family.build(n, 1).unwrap();
            let mut r = rng(1000 + n as u64);
            let mut best = vec![0.0f64; 1 << n];
            let grid = [0.0, PI / 2.0, PI, -PI / 2.0];
            for _ in 0..4000 {
                let params: Vec<f64> = (0..circuit.n_params())
                    .map(|_| grid[rand::Rng::random_range(&mut r, 0..grid.len())])
                    .collect();
                let probs = run_circuit(&circuit, &params).unwrap().probabilities();
                for (b, p) in best.iter_mut().zip(probs) {
                    *b = b.max(p);
                }
                if best.iter().all(|&b| b > 0.99) {
                    break;
                }
            }
            assert!(best.iter().all(|&b| b > 0.99), "{family:?} n={n}: {best:?}");
        }
    }
}
