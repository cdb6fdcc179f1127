//! Variational product-state solution: spins at angles `θ_j` in the x-z plane
//! and coherently displaced collective modes `ᾱ_n`.
//!
//! The spin state is `cos(θ/2)|0> + sin(θ/2)|1>`, so `<σ^x> = sin θ` and
//! `<σ^z> = -cos θ`. Solutions are reported on the branch `sin θ <= 0`,
//! `Σ_j cos θ_j >= 0`; flipping every `cos θ_j` and `ᾱ_n` gives the degenerate
//! partner.

use nalgebra::DVector;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{ising_couplings, plane_wave_modes, BosonModes, Boundary, ModelParams};
use crate::scalar::{modulus, re, Real};

/// Half-width of the band in `|Ω - 2J|` classified as critical.
pub const CRITICAL_BAND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Spins polarized along x, no boson displacement.
    Disordered,
    /// σ^z order with displaced bosons.
    Ordered,
    Critical,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Disordered => "disordered",
            Phase::Ordered => "ordered",
            Phase::Critical => "critical",
        }
    }

    /// Classifies by comparing the transverse field with twice the largest
    /// effective coupling.
    pub fn classify<T: Real>(omega: T, j_eff: T) -> Phase {
        let two_j = T::lit(2.0) * j_eff;
        if (omega - two_j).abs() < T::lit(CRITICAL_BAND) {
            Phase::Critical
        } else if omega < two_j {
            Phase::Ordered
        } else {
            Phase::Disordered
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldSolution<T: Real> {
    pub thetas: Vec<T>,
    /// `sin θ_j`, kept alongside the angles so that exact values such as
    /// `sin θ = -1, cos θ = 0` survive without trigonometric round-off.
    pub sin_theta: Vec<T>,
    pub cos_theta: Vec<T>,
    /// Displacements, aligned with the columns of the [`BosonModes`] used.
    pub alphas: Vec<Complex<T>>,
    pub energy: T,
    pub phase: Phase,
    pub converged: bool,
    pub iterations: usize,
    /// Largest violation of the stationarity equations.
    pub residual: T,
}

impl<T: Real> MeanFieldSolution<T> {
    pub fn n_sites(&self) -> usize {
        self.thetas.len()
    }

    /// The common `sin θ` if all sites agree within `tol`.
    pub fn homogeneous_sin(&self, tol: T) -> Option<T> {
        let s0 = *self.sin_theta.first()?;
        self.sin_theta.iter().all(|&s| (s - s0).abs() <= tol).then_some(s0)
    }

    /// The degenerate partner with `cos θ_j -> -cos θ_j`, `ᾱ_n -> -ᾱ_n`.
    pub fn flipped(&self) -> Self {
        let mut out = self.clone();
        for (c, th) in out.cos_theta.iter_mut().zip(out.thetas.iter_mut()) {
            *c = -*c;
            *th = T::pi() - *th;
        }
        for a in out.alphas.iter_mut() {
            *a = -*a;
        }
        out
    }
}

fn check_dims<T: Real>(modes: &BosonModes<T>, params: &ModelParams<T>, len: usize) -> Result<()> {
    let n = modes.n_modes();
    if params.n_sites != n {
        return Err(Error::DimensionMismatch { expected: n, found: params.n_sites });
    }
    if len != n {
        return Err(Error::DimensionMismatch { expected: n, found: len });
    }
    Ok(())
}

/// Mean-field energy
/// `Σ_n ω̄_n |ᾱ_n|² - g Σ_{j,n} cos θ_j (M*_{j,n} ᾱ*_n + M_{j,n} ᾱ_n) + (Ω/2) Σ_j sin θ_j`.
pub fn mean_field_energy<T: Real>(
    modes: &BosonModes<T>,
    params: &ModelParams<T>,
    thetas: &[T],
    alphas: &[Complex<T>],
) -> Result<T> {
    check_dims(modes, params, thetas.len())?;
    check_dims(modes, params, alphas.len())?;
    let sin: Vec<T> = thetas.iter().map(|t| t.sin()).collect();
    let cos: Vec<T> = thetas.iter().map(|t| t.cos()).collect();
    Ok(energy_from_components(modes, params, &sin, &cos, alphas))
}

pub(crate) fn energy_from_components<T: Real>(
    modes: &BosonModes<T>,
    params: &ModelParams<T>,
    sin: &[T],
    cos: &[T],
    alphas: &[Complex<T>],
) -> T {
    let m = modes.amplitudes();
    let w = modes.energies();
    let n = modes.n_modes();
    let mut boson = T::zero();
    for k in 0..n {
        boson += w[k] * alphas[k].norm_sqr();
    }
    let mut coupling = T::zero();
    for j in 0..n {
        let mut acc = Complex::new(T::zero(), T::zero());
        for k in 0..n {
            acc += m[(j, k)] * alphas[k];
        }
        // M* ᾱ* + M ᾱ = 2 Re(M ᾱ)
        coupling += cos[j] * T::lit(2.0) * acc.re;
    }
    let field: T = sin.iter().fold(T::zero(), |a, &s| a + s);
    boson - params.g * coupling + params.omega * T::lit(0.5) * field
}

/// `ᾱ_n = (g/ω̄_n) Σ_j M*_{j,n} cos θ_j`.
fn optimal_alphas<T: Real>(modes: &BosonModes<T>, g: T, cos: &[T]) -> Vec<Complex<T>> {
    let m = modes.amplitudes();
    let n = modes.n_modes();
    (0..n)
        .map(|k| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for j in 0..n {
                acc += m[(j, k)].conj() * re(cos[j]);
            }
            acc * re(g / modes.energies()[k])
        })
        .collect()
}

fn alpha_residual<T: Real>(modes: &BosonModes<T>, g: T, cos: &[T], alphas: &[Complex<T>]) -> T {
    optimal_alphas(modes, g, cos).iter().zip(alphas).fold(T::zero(), |w, (a, b)| w.max(modulus(*a - *b)))
}

/// Closed-form periodic-chain solution.
///
/// With `J = 2g²/ω̄_0`: `sin θ = -Ω/(2J)` for `Ω <= 2J`, otherwise `sin θ = -1`;
/// `ᾱ_0 = (g/ω̄_0) √N cos θ` and all other displacements vanish.
pub fn solve_pbc<T: Real>(params: &ModelParams<T>) -> Result<MeanFieldSolution<T>> {
    params.require(Boundary::Periodic)?;
    let modes = plane_wave_modes(params)?;
    let n = params.n_sites;
    let j = T::lit(2.0) * params.g * params.g / params.omega0;
    let phase = Phase::classify(params.omega, j);
    let s = match phase {
        Phase::Ordered if j > T::zero() => -params.omega / (T::lit(2.0) * j),
        _ => -T::one(),
    };
    let c = (T::one() - s * s).max(T::zero()).sqrt();

    let mut alphas = vec![Complex::new(T::zero(), T::zero()); n];
    let zero_slot = modes.position_of(0).expect("plane waves carry label 0");
    alphas[zero_slot] = re(params.g / params.omega0 * T::from_count(n).sqrt() * c);

    let sin = vec![s; n];
    let cos = vec![c; n];
    let energy = energy_from_components(&modes, params, &sin, &cos, &alphas);
    // Every row of the mean-field coupling sums to J under periodic boundaries.
    let stationarity = (j * c * s + params.omega * T::lit(0.5) * c).abs();
    let residual = stationarity.max(alpha_residual(&modes, params.g, &cos, &alphas));
    Ok(MeanFieldSolution {
        thetas: vec![s.atan2(c); n],
        sin_theta: sin,
        cos_theta: cos,
        alphas,
        energy,
        phase,
        converged: true,
        iterations: 0,
        residual,
    })
}

/// `g_c = √(Ω ω̄_0)/2` for periodic chains, independent of `t` and `N`.
pub fn critical_coupling<T: Real>(params: &ModelParams<T>) -> Result<T> {
    params.require(Boundary::Periodic)?;
    Ok((params.omega * params.omega0).sqrt() * T::lit(0.5))
}

/// Iteration controls for [`solve_self_consistent_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the new iterate in the damped update.
    pub mixing: f64,
    pub random_restarts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 100_000, mixing: 0.5, random_restarts: 5, seed: 0x5eed_cafe }
    }
}

/// Self-consistent solution for an arbitrary lattice with default options
/// apart from `tol` and `max_iter`.
pub fn solve_self_consistent<T: Real>(
    modes: &BosonModes<T>,
    params: &ModelParams<T>,
    init: &[T],
    tol: T,
    max_iter: usize,
) -> Result<MeanFieldSolution<T>> {
    let opts = SolverOptions { tol: tol.as_f64(), max_iter, ..SolverOptions::default() };
    solve_self_consistent_with(modes, params, init, &opts)
}

/// Damped fixed-point iteration of the stationarity equations, restarted from
/// several initial states; the lowest-energy converged fixed point wins.
///
/// Each step moves `cos θ_j` towards `h_j / √(h_j² + Ω²/4)` with
/// `h_j = Σ_l J_{j,l} cos θ_l`, the polynomial form of the angle equation
/// `h_j sin θ_j = -(Ω/2) cos θ_j` on the `sin θ <= 0` branch.
pub fn solve_self_consistent_with<T: Real>(
    modes: &BosonModes<T>,
    params: &ModelParams<T>,
    init: &[T],
    opts: &SolverOptions,
) -> Result<MeanFieldSolution<T>> {
    params.validate()?;
    let n = modes.n_modes();
    check_dims(modes, params, n)?;
    if !init.is_empty() && init.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: init.len() });
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    if !(opts.mixing > 0.0 && opts.mixing <= 1.0) {
        return Err(Error::InvalidParams("mixing must lie in (0, 1]".into()));
    }
    let coupling = ising_couplings(modes, params.g).mean_field;
    let half_field = params.omega * T::lit(0.5);

    let mut starts: Vec<Vec<T>> = Vec::new();
    if !init.is_empty() {
        starts.push(init.iter().map(|t| t.cos()).collect());
    }
    let mean_row = coupling.sum() / T::from_count(n);
    let guess = if mean_row > T::zero() {
        let s = (-params.omega / (T::lit(2.0) * mean_row)).max(-T::one());
        (T::one() - s * s).sqrt()
    } else {
        T::zero()
    };
    starts.push(vec![guess; n]);
    starts.push(vec![T::one(); n]);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.random_restarts {
        starts.push((0..n).map(|_| T::lit(rng.random_range(-1.0..=1.0))).collect());
    }

    let tol = T::lit(opts.tol);
    let mix = T::lit(opts.mixing);
    let mut best: Option<MeanFieldSolution<T>> = None;
    let mut best_unconverged = T::max_value().unwrap_or_else(T::one);
    for start in starts {
        let mut cos = DVector::from_vec(start);
        let mut converged = false;
        let mut iterations = 0;
        let mut step = T::zero();
        for it in 1..=opts.max_iter {
            iterations = it;
            let h = &coupling * &cos;
            step = T::zero();
            for j in 0..n {
                let target = if h[j] == T::zero() && half_field == T::zero() {
                    cos[j]
                } else {
                    h[j] / (h[j] * h[j] + half_field * half_field).sqrt()
                };
                step = step.max((target - cos[j]).abs());
                cos[j] = (T::one() - mix) * cos[j] + mix * target;
            }
            if step < tol {
                converged = true;
                break;
            }
        }
        if !converged {
            best_unconverged = best_unconverged.min(step);
            continue;
        }
        if cos.sum() < T::zero() {
            cos.neg_mut();
        }
        let cos: Vec<T> = cos.iter().copied().collect();
        let sin: Vec<T> = cos.iter().map(|c| -(T::one() - *c * *c).max(T::zero()).sqrt()).collect();
        let alphas = optimal_alphas(modes, params.g, &cos);
        let energy = energy_from_components(modes, params, &sin, &cos, &alphas);
        let better =
            best.as_ref().is_none_or(|b| energy < b.energy - T::eps() * energy.abs().max(T::one()) * T::lit(16.0));
        if better {
            let h = &coupling * DVector::from_column_slice(&cos);
            let stationarity = (0..n).fold(T::zero(), |w, j| w.max((h[j] * sin[j] + half_field * cos[j]).abs()));
            best = Some(MeanFieldSolution {
                thetas: sin.iter().zip(&cos).map(|(s, c)| s.atan2(*c)).collect(),
                sin_theta: sin,
                cos_theta: cos,
                alphas,
                energy,
                phase: Phase::Disordered,
                converged: true,
                iterations,
                residual: stationarity,
            });
        }
    }

    let mut sol =
        best.ok_or(Error::NonConvergence { residual: best_unconverged.as_f64(), iterations: opts.max_iter })?;
    // Largest eigenvalue of the mean-field coupling is 2g²/ω̄_min.
    let j_max = T::lit(2.0) * params.g * params.g / modes.lowest_energy();
    sol.phase = Phase::classify(params.omega, j_max);
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_hopping, collective_modes};
    use approx::assert_relative_eq;

    fn pbc(n: usize, t: f64, g: f64, omega: f64) -> ModelParams<f64> {
        ModelParams::periodic(n, 1.0, t, g, omega).unwrap()
    }

    #[test]
    fn critical_point_is_exact() {
        for n in [1, 4, 20] {
            let sol = solve_pbc(&pbc(n, 0.4, 0.5, 1.0)).unwrap();
            assert_eq!(sol.phase, Phase::Critical);
            assert_eq!(sol.sin_theta[0], -1.0);
            assert_eq!(sol.cos_theta[0], 0.0);
        }
        assert_relative_eq!(critical_coupling(&pbc(3, 0.4, 0.1, 1.0)).unwrap(), 0.5);
    }

    #[test]
    fn zero_field_fully_polarizes() {
        let sol = solve_pbc(&pbc(5, 0.4, 0.3, 0.0)).unwrap();
        assert_eq!(sol.phase, Phase::Ordered);
        assert_eq!(sol.sin_theta[0], 0.0);
        assert_eq!(sol.cos_theta[0], 1.0);
        assert_relative_eq!(sol.alphas[0].re, 0.3 * 5f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(sol.energy, -5.0 * 0.09, epsilon = 1e-12);
    }

    #[test]
    fn ordered_phase_closed_form() {
        let sol = solve_pbc(&pbc(20, 0.4, 0.6, 1.0)).unwrap();
        assert_eq!(sol.phase, Phase::Ordered);
        assert_relative_eq!(sol.sin_theta[0], -1.0 / 1.44, epsilon = 1e-15);
        assert_relative_eq!(sol.cos_theta[0], 0.7195463248327011, epsilon = 1e-12);
        assert_relative_eq!(sol.alphas[0].re, 1.9307453943432775, epsilon = 1e-12);
        assert!(sol.alphas[1..].iter().all(|a| a.norm() < 1e-12));
        assert!(sol.residual < 1e-12);
    }

    #[test]
    fn critical_coupling_values() {
        assert_relative_eq!(critical_coupling(&pbc(4, 0.4, 0.1, 0.0)).unwrap(), 0.0);
        assert_relative_eq!(
            critical_coupling(&pbc(4, 0.4, 0.1, 2.0)).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        let open = ModelParams::new(4, 1.0, 0.4, 0.1, 1.0, Boundary::Open).unwrap();
        assert!(critical_coupling(&open).is_err());
    }

    #[test]
    fn self_consistent_reproduces_closed_form() {
        let p = pbc(8, 0.4, 0.6, 1.0);
        let modes = collective_modes(&build_hopping(&p).unwrap()).unwrap();
        let sc = solve_self_consistent(&modes, &p, &[], 1e-12, 100_000).unwrap();
        let exact = solve_pbc(&p).unwrap();
        for j in 0..8 {
            assert_relative_eq!(sc.thetas[j], exact.thetas[j], epsilon = 1e-8);
        }
        assert_relative_eq!(sc.energy, exact.energy, epsilon = 1e-10);
        assert!(sc.residual < 1e-10);
        assert_eq!(sc.phase, Phase::Ordered);
    }

    #[test]
    fn self_consistent_without_coupling() {
        let p = pbc(6, 0.4, 0.0, 1.0);
        let modes = plane_wave_modes(&p).unwrap();
        let sol = solve_self_consistent(&modes, &p, &[], 1e-12, 1000).unwrap();
        for j in 0..6 {
            assert_relative_eq!(sol.thetas[j], -std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        }
        assert!(sol.alphas.iter().all(|a| a.norm() == 0.0));
        assert_relative_eq!(sol.energy, -3.0, epsilon = 1e-12);
    }

    #[test]
    fn strong_field_is_disordered() {
        let p = pbc(6, 0.4, 0.1, 100.0);
        let modes = plane_wave_modes(&p).unwrap();
        let sol = solve_self_consistent(&modes, &p, &[], 1e-12, 100_000).unwrap();
        assert_eq!(sol.phase, Phase::Disordered);
        assert!(sol.sin_theta.iter().all(|s| (s + 1.0).abs() < 1e-12));
        assert!(sol.alphas.iter().all(|a| a.norm() < 1e-6));
    }

    #[test]
    fn open_chain_is_inhomogeneous() {
        let p = ModelParams::new(6, 1.0, 0.4, 0.55, 1.0, Boundary::Open).unwrap();
        let modes = collective_modes(&build_hopping(&p).unwrap()).unwrap();
        let sol = solve_self_consistent(&modes, &p, &[], 1e-12, 100_000).unwrap();
        assert!(sol.converged && sol.residual < 1e-10);
        assert!(sol.homogeneous_sin(1e-6).is_none());
        // Mirror symmetry of the open chain.
        for j in 0..3 {
            assert_relative_eq!(sol.cos_theta[j], sol.cos_theta[5 - j], epsilon = 1e-9);
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let p = ModelParams::new(6, 1.0, 0.4, 0.6, 1.0, Boundary::Open).unwrap();
        let modes = collective_modes(&build_hopping(&p).unwrap()).unwrap();
        let opts = SolverOptions { max_iter: 2, random_restarts: 0, ..SolverOptions::default() };
        let err = solve_self_consistent_with(&modes, &p, &[0.3, 0.2, 0.1, 0.4, 0.2, 0.1], &opts).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }));
    }

    #[test]
    fn energy_reference_points() {
        let p = pbc(4, 0.4, 0.3, 1.0);
        let modes = plane_wave_modes(&p).unwrap();
        let down = vec![-std::f64::consts::FRAC_PI_2; 4];
        let zero = vec![Complex::new(0.0, 0.0); 4];
        assert_relative_eq!(mean_field_energy(&modes, &p, &down, &zero).unwrap(), -2.0, epsilon = 1e-15);
        assert!(mean_field_energy(&modes, &p, &down[..3], &zero).is_err());
    }
}
