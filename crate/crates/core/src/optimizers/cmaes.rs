//! (μ/μ_w, λ)-CMA-ES with rank-one and rank-μ covariance updates and
//! cumulative step-size adaptation, using the standard default strategy
//! parameters (positive recombination weights only).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_batch, sanitize, AskTell, OptimizerError};
use crate::rng::{self, StreamRng};

/// Eigenvalues of C are kept at or above this fraction of the largest one.
const EIGEN_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct CmaEs {
    dim: usize,
    lambda: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,

    mean: DVector<f64>,
    sigma: f64,
    cov: DMatrix<f64>,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
    path_sigma: DVector<f64>,
    path_c: DVector<f64>,

    rng: StreamRng,
    generation: usize,
    pending: Vec<Vec<f64>>,
    pending_steps: Vec<DVector<f64>>,
    best: Option<(Vec<f64>, f64)>,
}

impl CmaEs {
    pub fn new(initial: &[f64], sigma0: f64, population: Option<usize>, seed: u64) -> Self {
        let dim = initial.len();
        let n = dim as f64;
        let lambda = population.unwrap_or(4 + (3.0 * n.ln()).floor() as usize);
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff)).min(1.0 - c_1);
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

        Self {
            dim,
            lambda,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
            mean: DVector::from_column_slice(initial),
            sigma: sigma0,
            cov: DMatrix::identity(dim, dim),
            basis: DMatrix::identity(dim, dim),
            scales: DVector::from_element(dim, 1.0),
            path_sigma: DVector::zeros(dim),
            path_c: DVector::zeros(dim),
            rng: rng::stream(rng::derive_seed(seed, &["cmaes"])),
            generation: 0,
            pending: Vec::new(),
            pending_steps: Vec::new(),
            best: None,
        }
    }

    pub fn population_size(&self) -> usize {
        self.lambda
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Refreshes `basis`/`scales` from `cov`, flooring tiny or negative
    /// eigenvalues and rebuilding `cov` when the floor was applied.
    fn decompose(&mut self) {
        let eig = SymmetricEigen::new(self.cov.clone());
        let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let floor = (top * EIGEN_FLOOR).max(f64::MIN_POSITIVE);
        let mut values = eig.eigenvalues.clone();
        let mut clamped = false;
        for v in values.iter_mut() {
            if *v < floor {
                *v = floor;
                clamped = true;
            }
        }
        self.basis = eig.eigenvectors;
        if clamped {
            self.cov = &self.basis * DMatrix::from_diagonal(&values) * self.basis.transpose();
            self.symmetrize();
        }
        self.scales = values.map(f64::sqrt);
    }

    fn symmetrize(&mut self) {
        let t = self.cov.transpose();
        self.cov = (&self.cov + t) * 0.5;
    }
}

impl AskTell for CmaEs {
    fn ask(&mut self) -> Result<Vec<Vec<f64>>, OptimizerError> {
        if !self.pending.is_empty() {
            return Ok(self.pending.clone());
        }
        for _ in 0..self.lambda {
            let z = DVector::from_fn(self.dim, |_, _| self.rng.sample::<f64, _>(StandardNormal));
            let y = &self.basis * z.component_mul(&self.scales);
            let x = &self.mean + &y * self.sigma;
            self.pending.push(x.as_slice().to_vec());
            self.pending_steps.push(y);
        }
        Ok(self.pending.clone())
    }

    fn tell(&mut self, evaluated: &[(Vec<f64>, f64)]) -> Result<(), OptimizerError> {
        check_batch(&self.pending, evaluated)?;
        let n = self.dim as f64;

        for (x, f) in evaluated {
            let f = sanitize(*f);
            if self.best.as_ref().is_none_or(|b| f < b.1) {
                self.best = Some((x.clone(), f));
            }
        }

        let mut order: Vec<usize> = (0..evaluated.len()).collect();
        order.sort_by(|&a, &b| {
            sanitize(evaluated[a].1)
                .total_cmp(&sanitize(evaluated[b].1))
                .then(a.cmp(&b))
        });
        let steps = std::mem::take(&mut self.pending_steps);
        self.pending.clear();

        let mut y_w = DVector::zeros(self.dim);
        for (w, &i) in self.weights.iter().zip(&order) {
            y_w += &steps[i] * *w;
        }
        self.mean += &y_w * self.sigma;

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let inv_sqrt_y = &self.basis * (self.basis.transpose() * &y_w).component_div(&self.scales);
        self.path_sigma = &self.path_sigma * (1.0 - self.c_sigma)
            + inv_sqrt_y * (self.c_sigma * (2.0 - self.c_sigma) * self.mu_eff).sqrt();

        let g = (self.generation + 1) as f64;
        let ps_norm = self.path_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - self.c_sigma).powf(2.0 * g)).sqrt()
            < (1.4 + 2.0 / (n + 1.0)) * self.chi_n;
        let h = if h_sigma { 1.0 } else { 0.0 };

        self.path_c = &self.path_c * (1.0 - self.c_c)
            + &y_w * (h * (self.c_c * (2.0 - self.c_c) * self.mu_eff).sqrt());
        let delta_h = (1.0 - h) * self.c_c * (2.0 - self.c_c);

        let mut rank_mu = DMatrix::zeros(self.dim, self.dim);
        for (w, &i) in self.weights.iter().zip(&order) {
            rank_mu += &steps[i] * steps[i].transpose() * *w;
        }
        let rank_one = &self.path_c * self.path_c.transpose() + &self.cov * delta_h;
        self.cov = &self.cov * (1.0 - self.c_1 - self.c_mu) + rank_one * self.c_1 + rank_mu * self.c_mu;
        self.symmetrize();

        self.sigma *= ((self.c_sigma / self.d_sigma) * (ps_norm / self.chi_n - 1.0)).exp();
        self.generation += 1;
        self.decompose();
        Ok(())
    }

    fn best(&self) -> Option<(&[f64], f64)> {
        self.best.as_ref().map(|(x, f)| (x.as_slice(), *f))
    }

    fn iteration(&self) -> usize {
        self.generation
    }

    fn is_finished(&self) -> bool {
        false
    }
}
