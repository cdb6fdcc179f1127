use thiserror::Error;

use crate::lattice::Boundary;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the lattice, mean-field, spin-wave and oracle modules.
///
/// Numerical payloads are carried as `f64` regardless of the scalar type in
/// use so that the error stays independent of the generic parameter.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("collective mode {index} has non-positive energy {energy}")]
    NonPositiveSpectrum { index: usize, energy: f64 },

    #[error("operation requires {required:?} boundary, got {found:?}")]
    UnsupportedBoundary { required: Boundary, found: Boundary },

    #[error("self-consistent iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("mode {mode} is unstable: E_-^2 = {e_minus_sq:e}; the mean-field input is not a minimum")]
    GaplessMode { mode: usize, e_minus_sq: f64 },

    #[error("spin gap undefined at zero transverse field")]
    UndefinedGap,

    #[error("quadratic form is indefinite (lowest eigenvalue {lowest:e})")]
    NotAMinimum { lowest: f64 },

    #[error("coupling g = {g} is not the critical coupling g_c = {g_c}")]
    NotCritical { g: f64, g_c: f64 },

    #[error("need at least {required} points, got {found}")]
    TooFewPoints { required: usize, found: usize },

    #[error("range [{lo}, {hi}] does not bracket the critical coupling")]
    NoBracket { lo: f64, hi: f64 },

    #[error("Hilbert space dimension {dim} exceeds the limit {limit}")]
    HilbertSpaceTooLarge { dim: usize, limit: usize },

    #[error("exact diagonalization supports at most {limit} sites, got {found}")]
    TooManySites { found: usize, limit: usize },

    #[error("Fock cutoff must be at least 1, got {0}")]
    InvalidCutoff(usize),

    #[error("Lanczos did not converge after {iterations} iterations (residual {residual:e})")]
    EigenNonConvergence { residual: f64, iterations: usize },

    #[error("Fock cutoff not converged: last energies {energies:?}")]
    CutoffNotConverged { energies: Vec<(usize, f64)> },
}
