//! Mean-variance portfolio selection solved with a simulated variational
//! quantum eigensolver.
//!
//! The pipeline runs historical prices → expected returns and covariance →
//! penalized QUBO → diagonal Ising Hamiltonian → parameterized circuit on a
//! dense statevector → CVaR / weighted-CVaR cost → CMA-ES or COBYLA.
//! [`qubo::solve_exact`] enumerates every bitstring and provides the ground
//! truth that the per-iteration success metric is measured against.

pub mod ansatz;
pub mod cost;
pub mod experiment;
pub mod market_data;
pub mod optimizers;
pub mod qubo;
pub mod rng;
pub mod statevector;

pub use ansatz::{block_ansatz, two_local, Circuit};
pub use cost::{CostFunction, WeightScheme};
pub use market_data::{AssetStats, PriceMatrix};
pub use qubo::{ExactSolution, IsingHamiltonian, PortfolioSpec, QuboProblem, VarianceForm};
pub use statevector::{Gate, StateVector};
