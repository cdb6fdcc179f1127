//! Mean-field phase diagram and Gaussian quantum fluctuations of cooperative
//! Jahn-Teller spin-boson chains.
//!
//! A chain of `N` two-level systems couples through `g σ^z_j (a_j + a_j†)` to
//! bosons that hop between neighbouring sites, with a transverse field
//! `(Ω/2) σ^x_j` on every spin. The crate provides
//!
//! - [`lattice`]: collective boson modes and effective Ising couplings,
//! - [`meanfield`]: the variational product-state solution and its critical point,
//! - [`spinwave`]: Holstein-Primakoff fluctuations around it, analytically for
//!   periodic chains and through a general quadrature diagonalization,
//! - [`oracle`]: brute-force exact diagonalization for `N <= 3`.
//!
//! Every solver is generic over a [`Real`] scalar. The aliases at the crate
//! root fix the scalar to `f64` (or `f32`).

pub mod error;
pub mod lattice;
pub mod meanfield;
pub mod oracle;
pub mod scalar;
pub mod spinwave;

pub use error::{Error, Result};
pub use lattice::Boundary;
pub use meanfield::Phase;
pub use scalar::Real;

pub type ModelParams = lattice::ModelParams<f64>;
pub type HoppingMatrix = lattice::HoppingMatrix<f64>;
pub type BosonModes = lattice::BosonModes<f64>;
pub type CouplingMatrix = lattice::CouplingMatrix<f64>;
pub type MeanFieldSolution = meanfield::MeanFieldSolution<f64>;
pub type GaussianSpectrum = spinwave::GaussianSpectrum<f64>;
pub type QuadraticForm = spinwave::QuadraticForm<f64>;
pub type Bogoliubov = spinwave::Bogoliubov<f64>;
pub type FluctuationReport = spinwave::FluctuationReport<f64>;
pub type EdConfig = oracle::EdConfig<f64>;
pub type EdResult = oracle::EdResult<f64>;

pub type ModelParams32 = lattice::ModelParams<f32>;
pub type BosonModes32 = lattice::BosonModes<f32>;
pub type MeanFieldSolution32 = meanfield::MeanFieldSolution<f32>;
pub type GaussianSpectrum32 = spinwave::GaussianSpectrum<f32>;
pub type FluctuationReport32 = spinwave::FluctuationReport<f32>;
