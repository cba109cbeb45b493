mod common;

use common::*;
use proptest::prelude::*;

use portfolio_vqe::cost::{compute_weights, cvar, exact_mode_cost, tail_size, wcvar, CostFunction, WeightScheme};
use portfolio_vqe::qubo::to_ising;
use portfolio_vqe::statevector::diagonal_expectation;
use portfolio_vqe::StateVector;

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s
}

/// Weights built by multiplying per-rank decay ratios, then normalized.
fn ratio_weights(m: usize, beta_at: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut w = vec![1.0];
    for k in 2..=m {
        let prev = *w.last().unwrap();
        w.push(prev * (-beta_at(k)).exp());
    }
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn energies() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 1..300)
}

fn schemes() -> impl Strategy<Value = WeightScheme> {
    let alpha = 0.01f64..=1.0;
    prop_oneof![
        alpha.clone().prop_map(|alpha| WeightScheme::Uniform { alpha }),
        (alpha.clone(), 0.01f64..3.0).prop_map(|(alpha, beta)| WeightScheme::EnergyExp { alpha, beta }),
        (alpha.clone(), 0.01f64..3.0).prop_map(|(alpha, beta)| WeightScheme::RankExp { alpha, beta }),
        (alpha, 1usize..10, 1usize..30, 0.01f64..2.0, 0.01f64..2.0, 0.01f64..2.0).prop_map(
            |(alpha, n1, gap, beta1, beta2, beta3)| WeightScheme::PiecewiseExp {
                alpha,
                n1,
                n2: n1 + gap,
                beta1,
                beta2,
                beta3,
            }
        ),
    ]
}

proptest! {
    #[test]
    fn cvar_extremes_are_exact(e in energies()) {
        let s = sorted(&e);
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        let mean_sorted = s.iter().sum::<f64>() / s.len() as f64;
        let got = cvar(&e, 1.0).unwrap();
        prop_assert!(got == mean_sorted);
        prop_assert!((got - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        let tiny = 0.5 / e.len() as f64;
        prop_assert_eq!(cvar(&e, tiny).unwrap(), s[0]);
    }

    #[test]
    fn cvar_is_mean_of_tail(e in energies(), alpha in 0.001f64..=1.0) {
        let s = sorted(&e);
        let m = ((alpha * e.len() as f64) - 1e-9 * e.len() as f64).ceil().max(1.0) as usize;
        prop_assert_eq!(tail_size(alpha, e.len()), m.min(e.len()));
        let m = m.min(e.len());
        let want = s[..m].iter().sum::<f64>() / m as f64;
        prop_assert!((cvar(&e, alpha).unwrap() - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn cvar_monotone_in_alpha(e in energies(), a in 0.01f64..=1.0, b in 0.01f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(cvar(&e, lo).unwrap() <= cvar(&e, hi).unwrap() + 1e-12);
    }

    #[test]
    fn uniform_wcvar_is_cvar_bitwise(e in energies(), alpha in 0.01f64..=1.0) {
        prop_assert_eq!(
            wcvar(&e, &WeightScheme::Uniform { alpha }).unwrap().to_bits(),
            cvar(&e, alpha).unwrap().to_bits()
        );
    }

    #[test]
    fn weights_are_a_distribution(e in energies(), scheme in schemes()) {
        let s = sorted(&e);
        let m = tail_size(scheme.alpha(), s.len());
        let w = compute_weights(&scheme, &s, m).unwrap();
        prop_assert_eq!(w.len(), m);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        // nonincreasing weights put the weighted tail at or below the plain tail mean
        prop_assert!(wcvar(&e, &scheme).unwrap() <= cvar(&e, scheme.alpha()).unwrap() + 1e-9);
    }

    #[test]
    fn permutation_invariance(e in energies(), scheme in schemes(), seed in any::<u64>()) {
        let mut shuffled = e.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rng(seed));
        prop_assert_eq!(wcvar(&e, &scheme).unwrap(), wcvar(&shuffled, &scheme).unwrap());
        prop_assert_eq!(cvar(&e, scheme.alpha()).unwrap(), cvar(&shuffled, scheme.alpha()).unwrap());
    }

    #[test]
    fn rank_and_energy_weights_match_closed_form(e in energies(), beta in 0.01f64..3.0) {
        let s = sorted(&e);
        let m = s.len();
        let w = compute_weights(&WeightScheme::RankExp { alpha: 1.0, beta }, &s, m).unwrap();
        let want = ratio_weights(m, |_| beta);
        for (a, b) in w.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let w = compute_weights(&WeightScheme::EnergyExp { alpha: 1.0, beta }, &s, m).unwrap();
        let raw: Vec<f64> = s.iter().map(|x| (-beta * (x - s[0])).exp()).collect();
        let total: f64 = raw.iter().sum();
        for (a, r) in w.iter().zip(&raw) {
            prop_assert!((a - r / total).abs() <= 1e-12);
        }
    }

    #[test]
    fn piecewise_ratios(m in 1usize..120, n1 in 1usize..15, gap in 1usize..40,
                        b1 in 0.01f64..2.0, b2 in 0.01f64..2.0, b3 in 0.01f64..2.0) {
        let n2 = n1 + gap;
        let scheme = WeightScheme::PiecewiseExp { alpha: 1.0, n1, n2, beta1: b1, beta2: b2, beta3: b3 };
        let s: Vec<f64> = (0..m).map(|k| k as f64).collect();
        let w = compute_weights(&scheme, &s, m).unwrap();
        let want = ratio_weights(m, |k| if k < n1 { b1 } else if k < n2 { b2 } else { b3 });
        for (a, b) in w.iter().zip(&want) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        if n1 >= 2 && n1 <= m {
            prop_assert!((w[n1 - 1] / w[n1 - 2] - (-b2).exp()).abs() <= 1e-9);
        }
        if n2 <= m {
            prop_assert!((w[n2 - 1] / w[n2 - 2] - (-b3).exp()).abs() <= 1e-9);
        }
    }

    #[test]
    fn equal_betas_reduce_to_rank_exp(e in energies(), alpha in 0.01f64..=1.0, beta in 0.01f64..3.0,
                                      n1 in 1usize..10, gap in 1usize..30) {
        let rank = WeightScheme::RankExp { alpha, beta };
        let piece = WeightScheme::PiecewiseExp { alpha, n1, n2: n1 + gap, beta1: beta, beta2: beta, beta3: beta };
        let s = sorted(&e);
        let m = tail_size(alpha, s.len());
        let a = compute_weights(&rank, &s, m).unwrap();
        let b = compute_weights(&piece, &s, m).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        prop_assert!((wcvar(&e, &rank).unwrap() - wcvar(&e, &piece).unwrap()).abs() <= 1e-12 * 50.0);
    }

    #[test]
    fn exact_mode_alpha_one_is_expectation(n in 1usize..=4, seed in any::<u64>()) {
        let mut r = rng(seed);
        let h = to_ising(&random_qubo(n, &mut r));
        let state = StateVector::from_amplitudes(random_amplitudes(n, &mut r)).unwrap();
        let probs = state.probabilities();
        let want = diagonal_expectation(&state, &h).unwrap();
        for cost in [CostFunction::Mean, CostFunction::Cvar { alpha: 1.0 }, CostFunction::Wcvar(WeightScheme::Uniform { alpha: 1.0 })] {
            let got = exact_mode_cost(&probs, &h.diagonal(), &cost).unwrap();
            prop_assert!((got - want).abs() <= 1e-10);
        }
    }

    #[test]
    fn exact_mode_cvar_matches_expanded_sample(seed in any::<u64>(), alpha in 0.05f64..=1.0) {
        // a distribution whose masses are multiples of 1/K behaves like a
        // K-element sample whenever αK is an integer
        let mut r = rng(seed);
        let k = 40usize;
        let counts: Vec<usize> = {
            let mut c = vec![0usize; 8];
            for _ in 0..k {
                c[rand::Rng::random_range(&mut r, 0..8)] += 1;
            }
            c
        };
        let energies: Vec<f64> = (0..8).map(|_| rand::Rng::random_range(&mut r, -5.0..5.0)).collect();
        let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / k as f64).collect();
        let alpha = (alpha * k as f64).ceil() / k as f64;
        let sample: Vec<f64> = counts.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat_n(energies[i], c)).collect();
        let got = exact_mode_cost(&probs, &energies, &CostFunction::Cvar { alpha }).unwrap();
        prop_assert!((got - cvar(&sample, alpha).unwrap()).abs() <= 1e-9);
    }
}

#[test]
fn single_element_sample_for_every_scheme() {
    let schemes = [
        WeightScheme::Uniform { alpha: 0.3 },
        WeightScheme::EnergyExp { alpha: 1.0, beta: 2.0 },
        WeightScheme::RankExp { alpha: 0.5, beta: 0.1 },
        WeightScheme::PiecewiseExp { alpha: 1.0, n1: 5, n2: 20, beta1: 0.7, beta2: 0.2, beta3: 0.05 },
    ];
    for s in schemes {
        assert_eq!(wcvar(&[4.25], &s).unwrap(), 4.25);
    }
}

#[test]
fn two_term_rank_example() {
    let v = wcvar(&[10.0, 0.0], &WeightScheme::RankExp { alpha: 1.0, beta: std::f64::consts::LN_2 }).unwrap();
    assert!((v - 10.0 / 3.0).abs() < 1e-12);
}
