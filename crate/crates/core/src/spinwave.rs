//! Gaussian (Holstein-Primakoff) fluctuations around the mean-field state.
//!
//! Two routes are provided:
//!
//! - periodic chains with a homogeneous solution decouple into independent
//!   2x2 quadrature problems per momentum `n`, solved in closed form by
//!   [`gaussian_spectrum_pbc`] and [`fluctuations_pbc`];
//! - any lattice and any (possibly site-dependent) solution is handled by
//!   building the full `2N x 2N` position-space form
//!   ([`build_gaussian_hamiltonian`]) and diagonalizing it orthogonally
//!   ([`diagonalize_quadratic`]).
//!
//! Fluctuations are reported per atom: `F = (1/N) Σ <d† d>` in the
//! fluctuation vacuum.

use nalgebra::{Cholesky, DMatrix, Matrix2, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::lattice::{pbc_dispersion, BosonModes, Boundary, ModelParams};
use crate::meanfield::{critical_coupling, solve_pbc, MeanFieldSolution};
use crate::scalar::{re, Real};

/// Mode energies below this are treated as exact zeros.
pub const ZERO_MODE_FLOOR: f64 = 1e-12;
/// Squared energies more negative than this mean the input is not a minimum.
pub const INSTABILITY_TOL: f64 = 1e-10;
/// Eigenvalues of the quadrature matrix below this fraction of the largest
/// one are numerically indistinguishable from zero.
pub const EIGEN_NOISE_FLOOR: f64 = 1e-12;
/// Default bound on the per-atom spin fluctuation for the linearized
/// Holstein-Primakoff expansion to be trusted.
pub const GAUSSIAN_VALIDITY_THRESHOLD: f64 = 0.1;

/// Per-momentum Bogoliubov branches of a periodic chain, indexed by `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpectrum<T: Real> {
    pub omega_bar: Vec<T>,
    pub e_plus: Vec<T>,
    pub e_minus: Vec<T>,
    pub e_plus_sq: Vec<T>,
    pub e_minus_sq: Vec<T>,
    /// Columns are the eigenvectors for `(E_+, E_-)` in the `(boson, spin)`
    /// quadrature basis.
    pub u: Vec<Matrix2<T>>,
    pub v_norm: Vec<T>,
    /// Spin gap `Ω/|sin θ|`.
    pub delta: T,
    pub sin_theta: T,
    pub params: ModelParams<T>,
}

impl<T: Real> GaussianSpectrum<T> {
    pub fn n_modes(&self) -> usize {
        self.omega_bar.len()
    }

    /// Off-diagonal magnitude `2 g √(Ω ω̄_n |sin θ|)`.
    pub fn coupling(&self, n: usize) -> T {
        coupling_strength(&self.params, self.omega_bar[n], self.sin_theta.abs())
    }

    /// Quadrature matrix `K^(n)`.
    pub fn k_matrix(&self, n: usize) -> Matrix2<T> {
        let w = self.omega_bar[n];
        let x = self.coupling(n);
        Matrix2::new(w * w, -x, -x, self.delta * self.delta)
    }

    /// Momenta whose lower branch is gapless.
    pub fn zero_modes(&self) -> Vec<usize> {
        (0..self.n_modes()).filter(|&n| self.e_minus[n] == T::zero()).collect()
    }

    /// `½ Σ_n (E_+ + E_- - ω̄_n - Δ)`, the Gaussian shift of the ground energy.
    pub fn zero_point_energy(&self) -> T {
        let half = T::lit(0.5);
        (0..self.n_modes())
            .fold(T::zero(), |acc, n| acc + half * (self.e_plus[n] + self.e_minus[n] - self.omega_bar[n] - self.delta))
    }
}

fn coupling_strength<T: Real>(params: &ModelParams<T>, w: T, abs_sin: T) -> T {
    T::lit(2.0) * params.g * (params.omega * w * abs_sin).sqrt()
}

/// Raw `(E_+², E_-²)` of the 2x2 problem. `E_-²` is taken as `det/E_+²`,
/// algebraically equal to the difference form but free of cancellation.
fn branches<T: Real>(w: T, delta: T, x: T) -> (T, T) {
    let d2 = delta * delta;
    let w2 = w * w;
    let tr = d2 + w2;
    let disc = (T::lit(4.0) * x * x + (d2 - w2) * (d2 - w2)).sqrt();
    let plus = (tr + disc) * T::lit(0.5);
    let det = w2 * d2 - x * x;
    let minus = if plus > T::zero() { det / plus } else { T::zero() };
    (plus, minus)
}

/// `E_-² - Δ²`, which equals `-(E_+² - ω̄²)` by the trace identity, in a
/// form without cancellation.
fn branch_shift<T: Real>(w: T, delta: T, x: T) -> T {
    let gap = w * w - delta * delta;
    let disc = (T::lit(4.0) * x * x + gap * gap).sqrt();
    if gap >= T::zero() {
        if gap + disc == T::zero() {
            T::zero()
        } else {
            -T::lit(2.0) * x * x / (gap + disc)
        }
    } else {
        (gap - disc) * T::lit(0.5)
    }
}

/// Eigenvector columns `(-x, E_+² - ω̄²)/v` and `(E_-² - Δ², -x)/v`.
fn rotation<T: Real>(w: T, delta: T, x: T) -> (Matrix2<T>, T) {
    let q = branch_shift(w, delta, x);
    let v = (q * q + x * x).sqrt();
    if v > T::zero() {
        let u = Matrix2::new(-x / v, q / v, -q / v, -x / v);
        return (u, v);
    }
    // Decoupled: the g -> 0+ limit of the closed form.
    if w > delta {
        return (-Matrix2::identity(), v);
    }
    let s = T::lit(0.5).sqrt();
    (Matrix2::new(-s, -s, s, -s), v)
}

/// Closed-form spectrum of a periodic chain around a homogeneous solution.
pub fn gaussian_spectrum_pbc<T: Real>(
    params: &ModelParams<T>,
    mf: &MeanFieldSolution<T>,
) -> Result<GaussianSpectrum<T>> {
    params.validate()?;
    params.require(Boundary::Periodic)?;
    if mf.n_sites() != params.n_sites {
        return Err(Error::DimensionMismatch { expected: params.n_sites, found: mf.n_sites() });
    }
    let s = mf
        .homogeneous_sin(T::lit(1e-12))
        .ok_or_else(|| Error::InvalidParams("periodic spectrum needs a homogeneous solution".into()))?;
    if params.omega == T::zero() || s == T::zero() {
        return Err(Error::UndefinedGap);
    }
    let a = s.abs();
    let delta = params.omega / a;
    let n = params.n_sites;
    let floor = T::lit(ZERO_MODE_FLOOR);

    let mut out = GaussianSpectrum {
        omega_bar: Vec::with_capacity(n),
        e_plus: Vec::with_capacity(n),
        e_minus: Vec::with_capacity(n),
        e_plus_sq: Vec::with_capacity(n),
        e_minus_sq: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        v_norm: Vec::with_capacity(n),
        delta,
        sin_theta: s,
        params: *params,
    };
    for k in 0..n {
        let w = pbc_dispersion(params, k);
        let x = coupling_strength(params, w, a);
        let (plus, mut minus) = branches(w, delta, x);
        if minus < -T::lit(INSTABILITY_TOL) {
            return Err(Error::GaplessMode { mode: k, e_minus_sq: minus.as_f64() });
        }
        minus = minus.max(T::zero());
        let mut e_minus = minus.sqrt();
        if e_minus < floor {
            e_minus = T::zero();
        }
        let (u, v) = rotation(w, delta, x);
        out.omega_bar.push(w);
        out.e_plus.push(plus.sqrt());
        out.e_minus.push(e_minus);
        out.e_plus_sq.push(plus);
        out.e_minus_sq.push(minus);
        out.u.push(u);
        out.v_norm.push(v);
    }
    Ok(out)
}

/// Lower-branch `E_-,0²` of the uniform mode around the x-polarized state
/// (`sin θ = -1`). Positive below the critical coupling, negative above it.
pub fn soft_mode_sq<T: Real>(params: &ModelParams<T>) -> T {
    let w = params.omega0;
    let x = coupling_strength(params, w, T::one());
    branches(w, params.omega, x).1
}

/// Bisection for the coupling where the uniform soft mode closes.
pub fn bisect_critical_coupling<T: Real>(params: &ModelParams<T>, lo: T, hi: T, tol: T) -> Result<T> {
    let f = |g: T| soft_mode_sq(&params.with_g(g));
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (fa, fb) = (f(a), f(b));
    if a < T::zero() || !(fa >= T::zero() && fb <= T::zero()) || (fa == T::zero() && fb == T::zero()) {
        return Err(Error::NoBracket { lo: lo.as_f64(), hi: hi.as_f64() });
    }
    if fa == T::zero() {
        return Ok(a);
    }
    if fb == T::zero() {
        return Ok(b);
    }
    while b - a > tol {
        let mid = (a + b) * T::lit(0.5);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm > T::zero() {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok((a + b) * T::lit(0.5))
}

/// Per-atom fluctuations, total and resolved by collective mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationReport<T: Real> {
    /// Mode label of each entry (plane-wave index for periodic chains).
    pub mode_labels: Vec<usize>,
    pub per_mode_spin: Vec<T>,
    pub per_mode_boson: Vec<T>,
    pub f_spin_total: T,
    pub f_boson_total: T,
    pub zero_mode_spin: T,
    pub zero_mode_boson: T,
    pub rest_spin: T,
    pub rest_boson: T,
    /// Set when a gapless mode makes some entries infinite.
    pub diverged: bool,
}

/// One half of [`mode_decomposition`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSplit<T> {
    pub spin: T,
    pub boson: T,
}

impl<T: Real> FluctuationReport<T> {
    /// Builds the totals from per-mode entries. The zero mode is the entry
    /// labelled 0.
    pub fn from_modes(mode_labels: Vec<usize>, per_mode_spin: Vec<T>, per_mode_boson: Vec<T>) -> Self {
        let mut zero = (T::zero(), T::zero());
        let mut rest = (T::zero(), T::zero());
        let mut total = (T::zero(), T::zero());
        let mut diverged = false;
        for ((&label, &s), &b) in mode_labels.iter().zip(&per_mode_spin).zip(&per_mode_boson) {
            diverged |= !s.as_f64().is_finite() || !b.as_f64().is_finite();
            total = (total.0 + s, total.1 + b);
            if label == 0 {
                zero = (zero.0 + s, zero.1 + b);
            } else {
                rest = (rest.0 + s, rest.1 + b);
            }
        }
        Self {
            mode_labels,
            per_mode_spin,
            per_mode_boson,
            f_spin_total: total.0,
            f_boson_total: total.1,
            zero_mode_spin: zero.0,
            zero_mode_boson: zero.1,
            rest_spin: rest.0,
            rest_boson: rest.1,
            diverged,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_modes((0..n).collect(), vec![T::zero(); n], vec![T::zero(); n])
    }

    /// Whether the linearized expansion is self-consistent: finite and
    /// `F_b < threshold`.
    pub fn is_self_consistent(&self, threshold: T) -> bool {
        !self.diverged && self.f_spin_total < threshold
    }
}

/// Splits a report into the `n = 0` contribution and the sum over `n != 0`.
pub fn mode_decomposition<T: Real>(report: &FluctuationReport<T>) -> (ModeSplit<T>, ModeSplit<T>) {
    (
        ModeSplit { spin: report.zero_mode_spin, boson: report.zero_mode_boson },
        ModeSplit { spin: report.rest_spin, boson: report.rest_boson },
    )
}

/// Closed-form per-mode fluctuations of a periodic chain.
///
/// Gapless modes contribute `+inf` and set `diverged`; the remaining modes
/// stay finite.
pub fn fluctuations_pbc<T: Real>(spec: &GaussianSpectrum<T>) -> FluctuationReport<T> {
    let p = &spec.params;
    let n = spec.n_modes();
    if p.g == T::zero() {
        return FluctuationReport::zeros(n);
    }
    let inv_n = T::one() / T::from_count(n);
    let quarter = T::lit(0.25);
    let a = spec.sin_theta.abs();
    let d = spec.delta;
    let g2 = p.g * p.g;
    let mut spin = Vec::with_capacity(n);
    let mut boson = Vec::with_capacity(n);
    for k in 0..n {
        let (w, ep, em) = (spec.omega_bar[k], spec.e_plus[k], spec.e_minus[k]);
        if em == T::zero() {
            spin.push(T::inf());
            boson.push(T::inf());
            continue;
        }
        let v2 = spec.v_norm[k] * spec.v_norm[k];
        let lower = branch_shift(w, d, spec.coupling(k));
        let upper = -lower;
        let fa = g2 * p.omega * a * ep * (w / ep - T::one()).powi(2)
            + lower * lower * quarter * (em / w) * (T::one() - w / em).powi(2);
        let fb = g2 * w * a * a * em * (d / em - T::one()).powi(2)
            + upper * upper * quarter / ep * d * (T::one() - ep * a / p.omega).powi(2);
        boson.push(inv_n * fa / v2);
        spin.push(inv_n * fb / v2);
    }
    FluctuationReport::from_modes((0..n).collect(), spin, boson)
}

/// Degree of freedom of a [`QuadraticForm`] coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    /// Boson fluctuation in the given column of the real mode basis.
    Boson(usize),
    /// Holstein-Primakoff spin fluctuation at a site.
    Spin(usize),
}

/// `H = ½ Pᵀ P + ½ Xᵀ K X` (minus the vacuum constant) over `N` boson and
/// `N` spin quadratures.
///
/// Each coordinate `i` is the position quadrature `(d_i + d_i†)/√(2 ε_i)` of
/// its ladder operator, with `ε = ω̄_k` for bosons and `ε = Δ_j` for spins.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm<T: Real> {
    pub k: DMatrix<T>,
    pub labels: Vec<Coordinate>,
    pub scales: Vec<T>,
    /// Real orthonormal site amplitudes of the boson coordinates.
    pub real_modes: DMatrix<T>,
    /// Complex mode amplitudes used to resolve fluctuations per mode.
    pub modes: DMatrix<Complex<T>>,
    pub mode_labels: Vec<usize>,
}

impl<T: Real> QuadraticForm<T> {
    pub fn n_sites(&self) -> usize {
        self.modes.nrows()
    }

    pub fn dim(&self) -> usize {
        self.k.nrows()
    }

    /// `K` restricted to collective column `k`: its boson coordinate and the
    /// spin combination `Σ_j R_{j,k} X_{N+j}`. For periodic chains this is
    /// exactly `K^(n)` of the corresponding plane wave pair.
    pub fn mode_block(&self, k: usize) -> Matrix2<T> {
        let n = self.n_sites();
        let r = self.real_modes.column(k);
        let mut cross = T::zero();
        let mut spin = T::zero();
        for j in 0..n {
            cross += self.k[(k, n + j)] * r[j];
            for l in 0..n {
                spin += r[j] * self.k[(n + j, n + l)] * r[l];
            }
        }
        Matrix2::new(self.k[(k, k)], cross, cross, spin)
    }

    /// `(E_-, E_+)` of [`Self::mode_block`].
    pub fn mode_energies(&self, k: usize) -> (T, T) {
        let b = self.mode_block(k);
        let half_tr = (b[(0, 0)] + b[(1, 1)]) * T::lit(0.5);
        let half_gap = (b[(0, 0)] - b[(1, 1)]) * T::lit(0.5);
        let disc = (half_gap * half_gap + b[(0, 1)] * b[(0, 1)]).sqrt();
        let plus = half_tr + disc;
        let det = b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(0, 1)];
        let minus = if plus > T::zero() { det / plus } else { T::zero() };
        (minus.max(T::zero()).sqrt(), plus.max(T::zero()).sqrt())
    }

    /// Builds a form from an explicit matrix with unit scales, all labelled as
    /// bosons in a trivial one-site-per-mode basis. Mostly for testing the
    /// diagonalizer on arbitrary input.
    pub fn from_matrix(k: DMatrix<T>, scales: Vec<T>) -> Result<Self> {
        let dim = k.nrows();
        if k.ncols() != dim || scales.len() != dim || !dim.is_multiple_of(2) {
            return Err(Error::DimensionMismatch { expected: dim, found: scales.len() });
        }
        let n = dim / 2;
        let labels = (0..n).map(Coordinate::Boson).chain((0..n).map(Coordinate::Spin)).collect();
        let eye = DMatrix::<T>::identity(n, n);
        Ok(Self { k, labels, scales, real_modes: eye.clone(), modes: eye.map(re), mode_labels: (0..n).collect() })
    }
}

/// Spin gaps `Δ_j = -Ω sin θ_j + 2 g cos θ_j Σ_n (M_{j,n} ᾱ_n + c.c.)`.
pub fn spin_gaps<T: Real>(modes: &BosonModes<T>, mf: &MeanFieldSolution<T>, params: &ModelParams<T>) -> Vec<T> {
    let m = modes.amplitudes();
    (0..modes.n_modes())
        .map(|j| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for k in 0..modes.n_modes() {
                acc += m[(j, k)] * mf.alphas[k];
            }
            -params.omega * mf.sin_theta[j] + T::lit(2.0) * params.g * mf.cos_theta[j] * T::lit(2.0) * acc.re
        })
        .collect()
}

/// Position-space matrix of the Gaussian Hamiltonian for any lattice.
///
/// Boson block `diag(ω̄_k²)`, spin block `diag(Δ_j²)`, and coupling
/// `K_{k,j} = 2 g sin θ_j R_{j,k} √(ω̄_k Δ_j)` with `R` the real mode basis.
pub fn build_gaussian_hamiltonian<T: Real>(
    modes: &BosonModes<T>,
    mf: &MeanFieldSolution<T>,
    params: &ModelParams<T>,
) -> Result<QuadraticForm<T>> {
    params.validate()?;
    let n = modes.n_modes();
    if params.n_sites != n {
        return Err(Error::DimensionMismatch { expected: n, found: params.n_sites });
    }
    if mf.n_sites() != n || mf.alphas.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: mf.n_sites() });
    }
    if !mf.converged {
        return Err(Error::InvalidParams("mean-field solution is not converged".into()));
    }
    let gaps = spin_gaps(modes, mf, params);
    for &d in &gaps {
        if d == T::zero() {
            return Err(Error::UndefinedGap);
        }
        if d < T::zero() {
            return Err(Error::NotAMinimum { lowest: d.as_f64() });
        }
    }
    let r = modes.real_amplitudes()?;
    let w = modes.energies();
    let mut k = DMatrix::<T>::zeros(2 * n, 2 * n);
    for a in 0..n {
        k[(a, a)] = w[a] * w[a];
        k[(n + a, n + a)] = gaps[a] * gaps[a];
    }
    for a in 0..n {
        for j in 0..n {
            let c = T::lit(2.0) * params.g * mf.sin_theta[j] * r[(j, a)] * (w[a] * gaps[j]).sqrt();
            k[(a, n + j)] = c;
            k[(n + j, a)] = c;
        }
    }
    let shifted = &k + DMatrix::<T>::identity(2 * n, 2 * n) * T::lit(INSTABILITY_TOL);
    if Cholesky::new(shifted).is_none() {
        let lowest = SymmetricEigen::new(k.clone()).eigenvalues.min();
        return Err(Error::NotAMinimum { lowest: lowest.as_f64() });
    }
    let labels = (0..n).map(Coordinate::Boson).chain((0..n).map(Coordinate::Spin)).collect();
    let scales = w.iter().copied().chain(gaps.iter().copied()).collect();
    Ok(QuadraticForm {
        k,
        labels,
        scales,
        real_modes: r,
        modes: modes.amplitudes().clone(),
        mode_labels: modes.labels().to_vec(),
    })
}

/// Normal modes of a [`QuadraticForm`] and the ladder-operator transformation
/// `d_i = Σ_m (W_{i,m} c_m + V_{i,m} c_m†)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bogoliubov<T: Real> {
    /// Ascending normal-mode energies `E_m = √λ_m`.
    pub energies: Vec<T>,
    /// Orthogonal eigenbasis of `K`, columns aligned with `energies`.
    pub orthogonal: DMatrix<T>,
    pub w: DMatrix<T>,
    pub v: DMatrix<T>,
    /// Normal modes treated as gapless; their `W`, `V` columns are zero.
    pub zero_modes: Vec<usize>,
}

impl<T: Real> Bogoliubov<T> {
    /// `max(|W Wᵀ - V Vᵀ - 1|, |W Vᵀ - V Wᵀ|)`; only meaningful without zero modes.
    pub fn commutation_residual(&self) -> T {
        let dim = self.w.nrows();
        let a = &self.w * self.w.transpose() - &self.v * self.v.transpose() - DMatrix::<T>::identity(dim, dim);
        let b = &self.w * self.v.transpose() - &self.v * self.w.transpose();
        a.amax().max(b.amax())
    }

    /// `½ Σ_m E_m - ½ Σ_i ε_i`.
    pub fn zero_point_energy(&self, form: &QuadraticForm<T>) -> T {
        let half = T::lit(0.5);
        let e: T = self.energies.iter().fold(T::zero(), |a, &x| a + x);
        let s: T = form.scales.iter().fold(T::zero(), |a, &x| a + x);
        half * (e - s)
    }
}

/// Orthogonal diagonalization of the quadrature matrix.
pub fn diagonalize_quadratic<T: Real>(form: &QuadraticForm<T>) -> Result<Bogoliubov<T>> {
    let dim = form.dim();
    let eig = SymmetricEigen::new(form.k.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let lambdas: Vec<T> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let orthogonal = DMatrix::from_fn(dim, dim, |i, m| eig.eigenvectors[(i, order[m])]);
    if dim == 0 {
        return Ok(Bogoliubov {
            energies: vec![],
            orthogonal,
            w: DMatrix::zeros(0, 0),
            v: DMatrix::zeros(0, 0),
            zero_modes: vec![],
        });
    }
    if lambdas[0] < -T::lit(INSTABILITY_TOL) {
        return Err(Error::NotAMinimum { lowest: lambdas[0].as_f64() });
    }
    let lmax = lambdas[dim - 1].max(T::zero());
    let noise = (T::lit(EIGEN_NOISE_FLOOR) * lmax).max(T::lit(ZERO_MODE_FLOOR * ZERO_MODE_FLOOR));
    let mut zero_modes = Vec::new();
    let energies: Vec<T> = lambdas
        .iter()
        .enumerate()
        .map(|(m, &l)| {
            if l <= noise {
                zero_modes.push(m);
                T::zero()
            } else {
                l.sqrt()
            }
        })
        .collect();

    let half = T::lit(0.5);
    let mut w = DMatrix::<T>::zeros(dim, dim);
    let mut v = DMatrix::<T>::zeros(dim, dim);
    for m in 0..dim {
        let e = energies[m];
        if e == T::zero() {
            continue;
        }
        for i in 0..dim {
            let ratio = (form.scales[i] / e).sqrt();
            let o = orthogonal[(i, m)];
            w[(i, m)] = half * o * (ratio + T::one() / ratio);
            v[(i, m)] = half * o * (ratio - T::one() / ratio);
        }
    }
    Ok(Bogoliubov { energies, orthogonal, w, v, zero_modes })
}

/// Per-atom fluctuations `F = (1/N) Σ |V|²` from the general route, resolved
/// onto the collective modes of the form.
pub fn fluctuations_general<T: Real>(bogo: &Bogoliubov<T>, form: &QuadraticForm<T>) -> FluctuationReport<T> {
    let n = form.n_sites();
    let inv_n = T::one() / T::from_count(n);
    let m = &form.modes;
    // Boson coordinates are in the real basis R; collective amplitudes are
    // reached through T = M† R.
    let to_modes: DMatrix<Complex<T>> = m.adjoint() * form.real_modes.map(re);

    let va = bogo.v.rows(0, n).into_owned();
    let vb = bogo.v.rows(n, n).into_owned();
    let cov_a = (&va * va.transpose()).map(re);
    let cov_b = (&vb * vb.transpose()).map(re);

    let boson_cov = &to_modes.conjugate() * cov_a * to_modes.transpose();
    let spin_cov = m.transpose() * cov_b * m.conjugate();
    let mut boson: Vec<T> = (0..n).map(|k| boson_cov[(k, k)].re.max(T::zero()) * inv_n).collect();
    let mut spin: Vec<T> = (0..n).map(|k| spin_cov[(k, k)].re.max(T::zero()) * inv_n).collect();

    let overlap = T::lit(1e-8);
    for &z in &bogo.zero_modes {
        let col = bogo.orthogonal.column(z);
        for k in 0..n {
            let mut wa = Complex::new(T::zero(), T::zero());
            let mut wb = Complex::new(T::zero(), T::zero());
            for i in 0..n {
                wa += to_modes[(k, i)] * re(col[i]);
                wb += m[(i, k)].conj() * re(col[n + i]);
            }
            if wa.norm_sqr() > overlap {
                boson[k] = T::inf();
            }
            if wb.norm_sqr() > overlap {
                spin[k] = T::inf();
            }
        }
    }
    let mut report = FluctuationReport::from_modes(form.mode_labels.clone(), spin, boson);
    report.diverged |= !bogo.zero_modes.is_empty();
    report
}

/// Quantity fitted against `log N` by [`log_divergence_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticalSum {
    /// `Σ_{n≠0} F_{b̄_n}`.
    SpinRest,
    /// `(1/N) Σ_{n≠0} 1/E_-,n`.
    InverseGap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogFit<T> {
    pub slope: T,
    pub intercept: T,
    /// Largest deviation from the fitted line relative to the data range.
    pub residual: T,
    pub sizes: Vec<usize>,
    pub values: Vec<T>,
}

/// Least-squares fit of the critical `n != 0` sum against `log N`.
pub fn log_divergence_fit<T: Real>(
    params: &ModelParams<T>,
    sizes: &[usize],
    quantity: CriticalSum,
) -> Result<LogFit<T>> {
    params.require(Boundary::Periodic)?;
    if sizes.len() < 4 {
        return Err(Error::TooFewPoints { required: 4, found: sizes.len() });
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] < 2 {
        return Err(Error::InvalidParams("sizes must be strictly ascending and >= 2".into()));
    }
    let g_c = critical_coupling(params)?;
    if (params.g - g_c).abs() > T::lit(1e-10) * g_c.max(T::one()) {
        return Err(Error::NotCritical { g: params.g.as_f64(), g_c: g_c.as_f64() });
    }
    let mut values = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let p = params.with_n_sites(n);
        let spec = gaussian_spectrum_pbc(&p, &solve_pbc(&p)?)?;
        let y = match quantity {
            CriticalSum::SpinRest => fluctuations_pbc(&spec).rest_spin,
            CriticalSum::InverseGap => {
                let s = spec.e_minus[1..].iter().fold(T::zero(), |a, &e| a + T::one() / e);
                s / T::from_count(n)
            }
        };
        values.push(y);
    }
    let xs: Vec<T> = sizes.iter().map(|&n| T::from_count(n).ln()).collect();
    let count = T::from_count(xs.len());
    let mx = xs.iter().fold(T::zero(), |a, &x| a + x) / count;
    let my = values.iter().fold(T::zero(), |a, &y| a + y) / count;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(&values) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let lo = values.iter().copied().fold(values[0], |a, b| a.min(b));
    let hi = values.iter().copied().fold(values[0], |a, b| a.max(b));
    let worst = xs.iter().zip(&values).fold(T::zero(), |a, (&x, &y)| a.max((y - slope * x - intercept).abs()));
    let residual = if hi > lo { worst / (hi - lo) } else { T::zero() };
    Ok(LogFit { slope, intercept, residual, sizes: sizes.to_vec(), values })
}
