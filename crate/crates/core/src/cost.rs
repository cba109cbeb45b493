//! Scalar costs over sampled energies: mean, CVaR and weighted CVaR.
//!
//! Every cost sorts the energies ascending first, so the result never depends
//! on the order samples arrive in. The CVaR tail holds the `m = ⌈αK⌉`
//! smallest energies and CVaR is their mean.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("energy sample is empty")]
    EmptySample,
    #[error("alpha {0} is not in (0, 1]")]
    AlphaOutOfRange(f64),
    #[error("invalid piecewise segments: need 1 <= n1 < n2 (got n1={n1}, n2={n2})")]
    InvalidSegments { n1: usize, n2: usize },
    #[error("decay parameter {0} must be positive")]
    InvalidBeta(f64),
    #[error("{0} weighting needs discrete samples and is unavailable in exact mode")]
    UnsupportedInExactMode(&'static str),
    #[error("probabilities sum to {0}, expected 1")]
    InvalidProbabilities(f64),
    #[error("{probabilities} probabilities but {energies} energies")]
    LengthMismatch { probabilities: usize, energies: usize },
}

/// How weights are assigned across the CVaR tail. Ranks are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightScheme {
    /// `w_k = 1`.
    Uniform { alpha: f64 },
    /// `w_k = exp(-β (E_(k) - E_(1)))`.
    EnergyExp { alpha: f64, beta: f64 },
    /// `w_k = exp(-β k)`.
    RankExp { alpha: f64, beta: f64 },
    /// Rank decay `β1` for `k < n1`, `β2` for `n1 <= k < n2`, `β3` beyond,
    /// with each segment continuing from the last weight of the previous one
    /// so that `w_k / w_{k-1} = exp(-β_segment(k))` at every rank.
    PiecewiseExp {
        alpha: f64,
        n1: usize,
        n2: usize,
        beta1: f64,
        beta2: f64,
        beta3: f64,
    },
}

impl WeightScheme {
    pub fn alpha(&self) -> f64 {
        match *self {
            WeightScheme::Uniform { alpha }
            | WeightScheme::EnergyExp { alpha, .. }
            | WeightScheme::RankExp { alpha, .. }
            | WeightScheme::PiecewiseExp { alpha, .. } => alpha,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightScheme::Uniform { .. } => "uniform",
            WeightScheme::EnergyExp { .. } => "energy_exp",
            WeightScheme::RankExp { .. } => "rank_exp",
            WeightScheme::PiecewiseExp { .. } => "piecewise_exp",
        }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        check_alpha(self.alpha())?;
        let betas: &[f64] = match self {
            WeightScheme::Uniform { .. } => &[],
            WeightScheme::EnergyExp { beta, .. } | WeightScheme::RankExp { beta, .. } => {
                std::slice::from_ref(beta)
            }
            WeightScheme::PiecewiseExp {
                n1,
                n2,
                beta1,
                beta2,
                beta3,
                ..
            } => {
                if *n1 < 1 || n1 >= n2 {
                    return Err(CostError::InvalidSegments { n1: *n1, n2: *n2 });
                }
                for b in [beta1, beta2, beta3] {
                    if !(*b > 0.0 && b.is_finite()) {
                        return Err(CostError::InvalidBeta(*b));
                    }
                }
                &[]
            }
        };
        for &b in betas {
            if !(b > 0.0 && b.is_finite()) {
                return Err(CostError::InvalidBeta(b));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostFunction {
    Mean,
    Cvar { alpha: f64 },
    Wcvar(WeightScheme),
}

impl CostFunction {
    pub fn validate(&self) -> Result<(), CostError> {
        match self {
            CostFunction::Mean => Ok(()),
            CostFunction::Cvar { alpha } => check_alpha(*alpha),
            CostFunction::Wcvar(s) => s.validate(),
        }
    }

    /// Whether [`exact_mode_cost`] supports this cost.
    pub fn supports_exact_mode(&self) -> bool {
        !matches!(
            self,
            CostFunction::Wcvar(WeightScheme::RankExp { .. } | WeightScheme::PiecewiseExp { .. })
        )
    }

    pub fn evaluate(&self, energies: &[f64]) -> Result<f64, CostError> {
        match self {
            CostFunction::Mean => cvar(energies, 1.0),
            CostFunction::Cvar { alpha } => cvar(energies, *alpha),
            CostFunction::Wcvar(s) => wcvar(energies, s),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<(), CostError> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(CostError::AlphaOutOfRange(alpha))
    }
}

/// `⌈αK⌉`, treating products within rounding noise of an integer as that
/// integer (`0.7 * 10` is 7, not 8), clamped to `[1, K]`.
pub fn tail_size(alpha: f64, k: usize) -> usize {
    let x = alpha * k as f64;
    let nearest = x.round();
    let m = if (x - nearest).abs() <= 1e-9 * (k as f64).max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    (m as usize).clamp(1, k.max(1))
}

fn sorted(energies: &[f64]) -> Vec<f64> {
    let mut v = energies.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Mean of the `⌈αK⌉` smallest energies.
pub fn cvar(energies: &[f64], alpha: f64) -> Result<f64, CostError> {
    check_alpha(alpha)?;
    if energies.is_empty() {
        return Err(CostError::EmptySample);
    }
    let e = sorted(energies);
    let m = tail_size(alpha, e.len());
    Ok(e[..m].iter().sum::<f64>() / m as f64)
}

fn log_weights(scheme: &WeightScheme, sorted_energies: &[f64], m: usize) -> Vec<f64> {
    match *scheme {
        WeightScheme::Uniform { .. } => vec![0.0; m],
        WeightScheme::EnergyExp { beta, .. } => {
            let e0 = sorted_energies[0];
            sorted_energies[..m].iter().map(|e| -beta * (e - e0)).collect()
        }
        WeightScheme::RankExp { beta, .. } => (1..=m).map(|k| -beta * k as f64).collect(),
        WeightScheme::PiecewiseExp {
            n1,
            n2,
            beta1,
            beta2,
            beta3,
            ..
        } => {
            let end1 = -beta1 * (n1 - 1) as f64;
            let end2 = end1 - beta2 * (n2 - n1) as f64;
            (1..=m)
                .map(|k| {
                    if k < n1 {
                        -beta1 * k as f64
                    } else if k < n2 {
                        end1 - beta2 * (k - n1 + 1) as f64
                    } else {
                        end2 - beta3 * (k - n2 + 1) as f64
                    }
                })
                .collect()
        }
    }
}

/// Normalized weights for ranks `1..=m` of an ascending energy list.
/// Exponents are shifted by their maximum before exponentiation.
pub fn compute_weights(
    scheme: &WeightScheme,
    sorted_energies: &[f64],
    m: usize,
) -> Result<Vec<f64>, CostError> {
    scheme.validate()?;
    if m == 0 || sorted_energies.len() < m {
        return Err(CostError::EmptySample);
    }
    let logw = log_weights(scheme, sorted_energies, m);
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// `Σ_k w_k E_(k)` over the `⌈αK⌉` tail. The uniform scheme returns exactly [`cvar`].
pub fn wcvar(energies: &[f64], scheme: &WeightScheme) -> Result<f64, CostError> {
    scheme.validate()?;
    if let WeightScheme::Uniform { alpha } = *scheme {
        return cvar(energies, alpha);
    }
    if energies.is_empty() {
        return Err(CostError::EmptySample);
    }
    let e = sorted(energies);
    let m = tail_size(scheme.alpha(), e.len());
    let w = compute_weights(scheme, &e, m)?;
    Ok(w.iter().zip(&e).map(|(w, e)| w * e).sum())
}

/// Continuum version of the costs over a full distribution.
///
/// States are ordered by energy (index breaks ties) and probability mass is
/// accumulated until `α` is reached, taking a fraction of the boundary state.
/// CVaR is the mass-weighted mean of that tail; energy-exponential WCVaR
/// weights each included state by `mass · exp(-β (E - E_min))`. Rank-based
/// schemes have no continuum form.
pub fn exact_mode_cost(
    probabilities: &[f64],
    energies: &[f64],
    cost: &CostFunction,
) -> Result<f64, CostError> {
    cost.validate()?;
    if probabilities.len() != energies.len() {
        return Err(CostError::LengthMismatch {
            probabilities: probabilities.len(),
            energies: energies.len(),
        });
    }
    if probabilities.is_empty() {
        return Err(CostError::EmptySample);
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(CostError::InvalidProbabilities(total));
    }
    let (alpha, beta) = match *cost {
        CostFunction::Mean => (1.0, None),
        CostFunction::Cvar { alpha } | CostFunction::Wcvar(WeightScheme::Uniform { alpha }) => {
            (alpha, None)
        }
        CostFunction::Wcvar(WeightScheme::EnergyExp { alpha, beta }) => (alpha, Some(beta)),
        CostFunction::Wcvar(s) => return Err(CostError::UnsupportedInExactMode(s.name())),
    };

    let mut order: Vec<usize> = (0..energies.len())
        .filter(|&i| probabilities[i] > 0.0)
        .collect();
    order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]).then(a.cmp(&b)));

    let mut tail: Vec<(f64, f64)> = Vec::new();
    let mut mass = 0.0;
    for &i in &order {
        let take = probabilities[i].min(alpha - mass);
        if take <= 0.0 {
            break;
        }
        tail.push((take, energies[i]));
        mass += take;
    }

    let e_min = tail[0].1;
    let (num, den) = tail.iter().fold((0.0, 0.0), |(num, den), &(q, e)| {
        let w = match beta {
            Some(beta) => q * (-beta * (e - e_min)).exp(),
            None => q,
        };
        (num + w * e, den + w)
    });
    Ok(num / den)
}
