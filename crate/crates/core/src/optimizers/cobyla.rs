//! Unconstrained COBYLA: Powell's simplex of `n + 1` interpolation points,
//! a linear model of the objective, and a trust region of radius `ρ` that
//! shrinks from `ρ_begin` to `ρ_end`.
//!
//! With no constraints the trust-region subproblem has the closed form
//! `d = -ρ g / |g|`. Geometry steps, vertex replacement and the acceptability
//! test follow Powell's rules with his constants `α = 0.25`, `β = 2.1`,
//! `γ = 0.5`, `δ = 1.1`.

use nalgebra::{DMatrix, DVector};

use super::{check_batch, sanitize, AskTell, OptimizerError};

const ALPHA: f64 = 0.25;
const BETA: f64 = 2.1;
const GAMMA: f64 = 0.5;
const DELTA: f64 = 1.1;

#[derive(Debug, Clone, PartialEq)]
enum Pending {
    /// Initial simplex: `0` is the start point, `j >= 1` is `x0 + ρ e_j`.
    Init(usize),
    /// Replaces vertex `j` to repair the simplex shape.
    Geometry(usize),
    /// Trust-region trial displacement `d` with predicted reduction.
    Trial { step: DVector<f64>, predicted: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Next {
    /// Run the acceptability check first.
    Check,
    /// Straight to a trust-region step.
    Trial,
}

#[derive(Debug, Clone)]
pub struct Cobyla {
    n: usize,
    rho: f64,
    rho_end: f64,
    pole: DVector<f64>,
    pole_value: f64,
    /// Vertex `j` sits at `pole + offsets[j]`.
    offsets: Vec<DVector<f64>>,
    values: Vec<f64>,
    phase: Option<Pending>,
    next: Next,
    candidate: Vec<Vec<f64>>,
    finished: bool,
    evaluations: usize,
    best: Option<(Vec<f64>, f64)>,
}

impl Cobyla {
    pub fn new(initial: &[f64], rho_begin: f64, rho_end: f64) -> Self {
        let n = initial.len();
        Self {
            n,
            rho: rho_begin,
            rho_end,
            pole: DVector::from_column_slice(initial),
            pole_value: f64::INFINITY,
            offsets: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            phase: Some(Pending::Init(0)),
            next: Next::Check,
            candidate: Vec::new(),
            finished: false,
            evaluations: 0,
            best: None,
        }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    fn point(&self, phase: &Pending) -> DVector<f64> {
        match phase {
            Pending::Init(0) => self.pole.clone(),
            Pending::Init(j) => {
                let mut x = self.pole.clone();
                x[j - 1] += self.rho;
                x
            }
            Pending::Geometry(j) => &self.pole + &self.offsets[*j],
            Pending::Trial { step, .. } => &self.pole + step,
        }
    }

    /// Makes the lowest vertex the pole.
    fn promote_best(&mut self) {
        let Some(j) = (0..self.values.len())
            .filter(|&j| self.values[j] < self.pole_value)
            .min_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
        else {
            return;
        };
        let shift = self.offsets[j].clone();
        self.pole += &shift;
        for (k, off) in self.offsets.iter_mut().enumerate() {
            if k == j {
                *off = -&shift;
            } else {
                *off -= &shift;
            }
        }
        std::mem::swap(&mut self.pole_value, &mut self.values[j]);
    }

    /// Inverse of the matrix whose rows are the vertex offsets. Column `j`
    /// is the dual vector of vertex `j`.
    fn inverse(&self) -> Option<DMatrix<f64>> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for (j, off) in self.offsets.iter().enumerate() {
            d.set_row(j, &off.transpose());
        }
        d.try_inverse()
    }

    fn gradient(&self, inv: &DMatrix<f64>) -> DVector<f64> {
        let df = DVector::from_iterator(self.n, self.values.iter().map(|v| v - self.pole_value));
        inv * df
    }

    /// `(sigma_j, eta_j)`: distance from vertex `j` to the opposite face,
    /// and its distance from the pole.
    fn shape(&self, inv: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
        let sigma = (0..self.n).map(|j| 1.0 / inv.column(j).norm()).collect();
        let eta = self.offsets.iter().map(|o| o.norm()).collect();
        (sigma, eta)
    }

    fn acceptable(&self, sigma: &[f64], eta: &[f64]) -> bool {
        sigma.iter().all(|&s| s >= ALPHA * self.rho) && eta.iter().all(|&e| e <= BETA * self.rho)
    }

    /// Rebuilds the simplex around the pole when it has collapsed numerically.
    fn reset_simplex(&mut self) -> Pending {
        self.offsets.clear();
        self.values.clear();
        Pending::Init(1)
    }

    fn geometry_step(&mut self, inv: &DMatrix<f64>, sigma: &[f64], eta: &[f64]) -> Pending {
        let far = (0..self.n)
            .filter(|&j| eta[j] > BETA * self.rho)
            .max_by(|&a, &b| eta[a].total_cmp(&eta[b]).then(b.cmp(&a)));
        let j = far.unwrap_or_else(|| {
            (0..self.n)
                .min_by(|&a, &b| sigma[a].total_cmp(&sigma[b]).then(a.cmp(&b)))
                .expect("n >= 1")
        });
        let mut dx = inv.column(j) * (GAMMA * self.rho * sigma[j]);
        if self.gradient(inv).dot(&dx) > 0.0 {
            dx = -dx;
        }
        self.offsets[j] = dx;
        Pending::Geometry(j)
    }

    /// Picks the next evaluation once the simplex is complete.
    fn plan(&mut self) -> Option<Pending> {
        loop {
            self.promote_best();
            let Some(inv) = self.inverse() else {
                return Some(self.reset_simplex());
            };
            let (sigma, eta) = self.shape(&inv);
            let acceptable = self.acceptable(&sigma, &eta);

            if self.next == Next::Check && !acceptable {
                return Some(self.geometry_step(&inv, &sigma, &eta));
            }
            let g = self.gradient(&inv);
            let gnorm = g.norm();
            if gnorm > 0.0 && gnorm.is_finite() {
                let step = &g * (-self.rho / gnorm);
                return Some(Pending::Trial {
                    step,
                    predicted: self.rho * gnorm,
                });
            }
            // flat model: no useful step at this radius
            if !acceptable {
                return Some(self.geometry_step(&inv, &sigma, &eta));
            }
            if !self.shrink() {
                return None;
            }
        }
    }

    /// Halves ρ (snapping to `ρ_end` near the end). False when already at `ρ_end`.
    fn shrink(&mut self) -> bool {
        if self.rho <= self.rho_end {
            return false;
        }
        self.rho *= 0.5;
        if self.rho <= 1.5 * self.rho_end {
            self.rho = self.rho_end;
        }
        self.next = Next::Check;
        true
    }

    fn absorb_trial(&mut self, step: DVector<f64>, predicted: f64, value: f64) {
        let reduction = self.pole_value - value;
        let inv = self.inverse();
        let mut drop = None;
        if let Some(inv) = inv {
            let (sigma, eta) = self.shape(&inv);
            // barycentric weight of the trial point on each vertex
            let coords: Vec<f64> = (0..self.n).map(|j| inv.column(j).dot(&step).abs()).collect();
            let mut best = if reduction > 0.0 { 0.0 } else { 1.0 };
            for (j, &c) in coords.iter().enumerate() {
                if c > best {
                    best = c;
                    drop = Some(j);
                }
            }
            let mut edge = DELTA * self.rho;
            let mut far = None;
            for j in 0..self.n {
                let sigbar = coords[j] * sigma[j];
                if sigbar >= ALPHA * self.rho || sigbar >= sigma[j] {
                    let dist = if reduction > 0.0 {
                        (&step - &self.offsets[j]).norm()
                    } else {
                        eta[j]
                    };
                    if dist > edge {
                        edge = dist;
                        far = Some(j);
                    }
                }
            }
            if far.is_some() {
                drop = far;
            }
        }

        if let Some(j) = drop {
            self.offsets[j] = step;
            self.values[j] = value;
        }

        if reduction > 0.0 && reduction >= 0.1 * predicted {
            self.next = Next::Trial;
            return;
        }
        // poor step: fix the geometry if needed, otherwise shrink ρ
        self.promote_best();
        let acceptable = self
            .inverse()
            .map(|inv| {
                let (s, e) = self.shape(&inv);
                self.acceptable(&s, &e)
            })
            .unwrap_or(false);
        if acceptable {
            if !self.shrink() {
                self.finished = true;
            }
        } else {
            self.next = Next::Check;
        }
    }

    fn record_best(&mut self, x: &[f64], value: f64) {
        if self.best.as_ref().is_none_or(|b| value < b.1) {
            self.best = Some((x.to_vec(), value));
        }
    }
}

impl AskTell for Cobyla {
    fn ask(&mut self) -> Result<Vec<Vec<f64>>, OptimizerError> {
        if self.finished {
            return Err(OptimizerError::OptimizerFinished);
        }
        if self.candidate.is_empty() {
            let phase = match self.phase.take() {
                Some(p) => p,
                None => match self.plan() {
                    Some(p) => p,
                    None => {
                        self.finished = true;
                        return Err(OptimizerError::OptimizerFinished);
                    }
                },
            };
            self.candidate = vec![self.point(&phase).as_slice().to_vec()];
            self.phase = Some(phase);
        }
        Ok(self.candidate.clone())
    }

    fn tell(&mut self, evaluated: &[(Vec<f64>, f64)]) -> Result<(), OptimizerError> {
        check_batch(&self.candidate, evaluated)?;
        let (x, value) = &evaluated[0];
        let value = sanitize(*value);
        self.candidate.clear();
        self.evaluations += 1;
        self.record_best(x, value);

        match self.phase.take().expect("candidate implies phase") {
            Pending::Init(0) => {
                self.pole_value = value;
                self.phase = (self.n > 0).then_some(Pending::Init(1));
            }
            Pending::Init(j) => {
                let mut off = DVector::zeros(self.n);
                off[j - 1] = self.rho;
                self.offsets.push(off);
                self.values.push(value);
                // Powell: a better initial vertex becomes the pole straight away
                if value < self.pole_value {
                    self.promote_best();
                }
                if j < self.n {
                    self.phase = Some(Pending::Init(j + 1));
                } else {
                    self.next = Next::Check;
                }
            }
            Pending::Geometry(j) => {
                self.values[j] = value;
                self.next = Next::Check;
            }
            Pending::Trial { step, predicted } => self.absorb_trial(step, predicted, value),
        }
        Ok(())
    }

    fn best(&self) -> Option<(&[f64], f64)> {
        self.best.as_ref().map(|(x, f)| (x.as_slice(), *f))
    }

    fn iteration(&self) -> usize {
        self.evaluations
    }

    fn is_finished(&self) -> bool {
        self.finished
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drive(opt: &mut Cobyla, f: impl Fn(&[f64]) -> f64, evals: usize) {
        for _ in 0..evals {
            let Ok(batch) = opt.ask() else { break };
            let told: Vec<_> = batch.into_iter().map(|x| {
                let v = f(&x);
                (x, v)
            }).collect();
            opt.tell(&told).unwrap();
        }
    }

    #[test]
    fn batch_of_one() {
        let mut c = Cobyla::new(&[0.0; 7], 0.5, 1e-4);
        assert_eq!(c.ask().unwrap().len(), 1);
    }

    #[test]
    fn initial_simplex_is_axis_aligned() {
        let mut c = Cobyla::new(&[1.0, 2.0], 0.5, 1e-4);
        let mut seen = Vec::new();
        for _ in 0..3 {
            let b = c.ask().unwrap();
            seen.push(b[0].clone());
            c.tell(&[(b[0].clone(), 1.0)]).unwrap();
        }
        assert_eq!(seen, vec![vec![1.0, 2.0], vec![1.5, 2.0], vec![1.0, 2.5]]);
    }

    #[test]
    fn shifted_quadratic() {
        let mut c = Cobyla::new(&[0.0, 0.0, 0.0], 0.5, 1e-6);
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 2.0 * (x[1] + 0.5).powi(2) + 0.5 * (x[2] - 2.0).powi(2);
        drive(&mut c, f, 500);
        let (_, v) = c.best().unwrap();
        assert!(v < 1e-8, "{v}");
    }

    #[test]
    fn finishes_at_rho_end() {
        let mut c = Cobyla::new(&[0.3, -0.2], 0.5, 1e-3);
        drive(&mut c, |x| x[0].abs() + x[1].abs(), 10_000);
        assert!(c.is_finished());
        assert_eq!(c.ask(), Err(OptimizerError::OptimizerFinished));
        assert!(c.rho() <= 1e-3);
    }
}
