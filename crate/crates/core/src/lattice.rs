//! Boson sector of the chain: hopping matrix, collective modes and the
//! effective Ising couplings obtained by eliminating the bosons.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{modulus, phase, re, Real};

/// Boundary condition of the boson chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    Open,
    /// User-supplied hopping matrix.
    Custom,
}

/// Physical couplings of the chain, all in one energy unit.
///
/// `omega0` is the lowest collective mode energy under periodic boundaries;
/// local boson energies are parametrized as `omega0 + 2 t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    pub n_sites: usize,
    pub omega0: T,
    pub t: T,
    pub g: T,
    /// Transverse field Ω.
    pub omega: T,
    pub boundary: Boundary,
}

impl<T: Real> ModelParams<T> {
    pub fn new(n_sites: usize, omega0: T, t: T, g: T, omega: T, boundary: Boundary) -> Result<Self> {
        let p = Self { n_sites, omega0, t, g, omega, boundary };
        p.validate()?;
        Ok(p)
    }

    pub fn periodic(n_sites: usize, omega0: T, t: T, g: T, omega: T) -> Result<Self> {
        Self::new(n_sites, omega0, t, g, omega, Boundary::Periodic)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 {
            return Err(Error::InvalidParams("n_sites must be at least 1".into()));
        }
        let finite = |x: T| x.as_f64().is_finite();
        for (name, v) in [("omega0", self.omega0), ("t", self.t), ("g", self.g), ("omega", self.omega)] {
            if !finite(v) {
                return Err(Error::InvalidParams(format!("{name} must be finite")));
            }
        }
        if self.omega0 <= T::zero() {
            return Err(Error::InvalidParams(format!("omega0 must be > 0, got {}", self.omega0)));
        }
        if self.t < T::zero() {
            return Err(Error::InvalidParams(format!("hopping t must be >= 0, got {}", self.t)));
        }
        if self.g < T::zero() {
            return Err(Error::InvalidParams(format!("coupling g must be >= 0, got {}", self.g)));
        }
        if self.omega < T::zero() {
            return Err(Error::InvalidParams(format!("transverse field must be >= 0, got {}", self.omega)));
        }
        Ok(())
    }

    pub fn with_g(mut self, g: T) -> Self {
        self.g = g;
        self
    }

    pub fn with_t(mut self, t: T) -> Self {
        self.t = t;
        self
    }

    pub fn with_n_sites(mut self, n: usize) -> Self {
        self.n_sites = n;
        self
    }

    pub fn with_omega(mut self, omega: T) -> Self {
        self.omega = omega;
        self
    }

    pub(crate) fn require(&self, boundary: Boundary) -> Result<()> {
        if self.boundary == boundary {
            Ok(())
        } else {
            Err(Error::UnsupportedBoundary { required: boundary, found: self.boundary })
        }
    }
}

/// Single-particle boson Hamiltonian split into local energies and hopping.
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingMatrix<T: Real> {
    local_energies: DVector<T>,
    hop: DMatrix<T>,
    boundary: Boundary,
}

impl<T: Real> HoppingMatrix<T> {
    /// A custom lattice. `hop` must be symmetric with a zero diagonal.
    pub fn custom(local_energies: DVector<T>, hop: DMatrix<T>) -> Result<Self> {
        let n = local_energies.len();
        if n == 0 {
            return Err(Error::InvalidParams("empty lattice".into()));
        }
        if hop.nrows() != n || hop.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: hop.nrows().max(hop.ncols()) });
        }
        let scale = hop.amax().max(T::one());
        let tol = T::lit(1e-12) * scale;
        for j in 0..n {
            if hop[(j, j)] != T::zero() {
                return Err(Error::InvalidParams(format!("hopping diagonal ({j},{j}) must be zero")));
            }
            for l in 0..j {
                if (hop[(j, l)] - hop[(l, j)]).abs() > tol {
                    return Err(Error::InvalidParams(format!("hopping matrix not symmetric at ({j},{l})")));
                }
            }
        }
        Ok(Self { local_energies, hop, boundary: Boundary::Custom })
    }

    /// Splits a full single-particle matrix `t_{j,l} + ω_j δ_{j,l}` into parts.
    pub fn from_single_particle(h: &DMatrix<T>) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::DimensionMismatch { expected: h.nrows(), found: h.ncols() });
        }
        let local = h.diagonal();
        let mut hop = h.clone();
        hop.fill_diagonal(T::zero());
        Self::custom(local, hop)
    }

    pub fn n_sites(&self) -> usize {
        self.local_energies.len()
    }

    pub fn local_energies(&self) -> &DVector<T> {
        &self.local_energies
    }

    pub fn hop(&self) -> &DMatrix<T> {
        &self.hop
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// `t_{j,l} + ω_j δ_{j,l}`.
    pub fn single_particle(&self) -> DMatrix<T> {
        let mut h = self.hop.clone();
        for j in 0..self.n_sites() {
            h[(j, j)] += self.local_energies[j];
        }
        h
    }
}

/// Nearest-neighbour tunneling `t_{j,l} = -t (δ_{j,l+1} + δ_{j,l-1})`.
///
/// Local energies are `omega0 + 2 t` for both periodic and open chains. For
/// `N = 2` with periodic wrap both neighbour terms land on the same pair and
/// the link carries `-2 t`.
pub fn build_hopping<T: Real>(params: &ModelParams<T>) -> Result<HoppingMatrix<T>> {
    params.validate()?;
    let n = params.n_sites;
    let wrap = match params.boundary {
        Boundary::Periodic => true,
        Boundary::Open => false,
        Boundary::Custom => return Err(Error::InvalidParams("custom lattices supply their own hopping matrix".into())),
    };
    let mut hop = DMatrix::zeros(n, n);
    for j in 0..n {
        for l in 0..n {
            if j == l {
                continue;
            }
            let links = if wrap {
                usize::from((l + 1) % n == j) + usize::from((l + n - 1) % n == j)
            } else {
                usize::from(l + 1 == j) + usize::from(j + 1 == l)
            };
            if links > 0 {
                hop[(j, l)] = -params.t * T::from_count(links);
            }
        }
    }
    let local = DVector::from_element(n, params.omega0 + T::lit(2.0) * params.t);
    Ok(HoppingMatrix { local_energies: local, hop, boundary: params.boundary })
}

/// Collective boson modes: energies `ω̄_n` and amplitudes `M_{j,n}`.
///
/// Columns of `amplitudes` are modes, rows are sites. Modes are sorted by
/// ascending energy; `labels` holds the plane-wave index `n` for periodic
/// chains and the sorted position otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct BosonModes<T: Real> {
    energies: DVector<T>,
    amplitudes: DMatrix<Complex<T>>,
    labels: Vec<usize>,
    boundary: Boundary,
}

impl<T: Real> BosonModes<T> {
    /// Assembles modes from explicit data, checking positivity and unitarity.
    pub fn new(
        energies: DVector<T>,
        amplitudes: DMatrix<Complex<T>>,
        labels: Vec<usize>,
        boundary: Boundary,
    ) -> Result<Self> {
        let n = energies.len();
        if amplitudes.nrows() != n || amplitudes.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: amplitudes.ncols() });
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: labels.len() });
        }
        check_positive(&energies)?;
        let modes = Self { energies, amplitudes, labels, boundary };
        if modes.unitarity_residual() > T::eps().sqrt() {
            return Err(Error::InvalidParams("mode amplitudes are not unitary".into()));
        }
        Ok(modes)
    }

    pub fn n_modes(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &DVector<T> {
        &self.energies
    }

    pub fn amplitudes(&self) -> &DMatrix<Complex<T>> {
        &self.amplitudes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Column position of the mode carrying `label`.
    pub fn position_of(&self, label: usize) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn lowest_energy(&self) -> T {
        self.energies[0]
    }

    /// `max |M†M - 1|`.
    pub fn unitarity_residual(&self) -> T {
        let n = self.n_modes();
        let gram = self.amplitudes.adjoint() * &self.amplitudes;
        let mut worst = T::zero();
        for a in 0..n {
            for b in 0..n {
                let target = if a == b { T::one() } else { T::zero() };
                worst = worst.max(modulus(gram[(a, b)] - re(target)));
            }
        }
        worst
    }

    /// `max |M† h M - diag(ω̄)|` against a hopping matrix.
    pub fn eigen_residual(&self, h: &HoppingMatrix<T>) -> T {
        let n = self.n_modes();
        let hc = h.single_particle().map(re);
        let d = self.amplitudes.adjoint() * hc * &self.amplitudes;
        let mut worst = T::zero();
        for a in 0..n {
            for b in 0..n {
                let target = if a == b { self.energies[a] } else { T::zero() };
                worst = worst.max(modulus(d[(a, b)] - re(target)));
            }
        }
        worst
    }

    /// Real part of `Σ_n M_{j,n} M*_{l,n} / ω̄_n`, i.e. the inverse of the
    /// single-particle matrix in the site basis.
    pub fn lattice_green(&self) -> DMatrix<T> {
        let n = self.n_modes();
        let mut g = DMatrix::zeros(n, n);
        for j in 0..n {
            for l in j..n {
                let mut acc = Complex::new(T::zero(), T::zero());
                for m in 0..n {
                    acc += self.amplitudes[(j, m)] * self.amplitudes[(l, m)].conj() / re(self.energies[m]);
                }
                g[(j, l)] = acc.re;
                g[(l, j)] = acc.re;
            }
        }
        g
    }

    /// A real orthonormal basis spanning the same eigenspaces, column-aligned
    /// with `energies`. Used by the quadrature construction.
    pub fn real_amplitudes(&self) -> Result<DMatrix<T>> {
        let n = self.n_modes();
        let mut out = DMatrix::<T>::zeros(n, n);
        for cluster in clusters(&self.energies) {
            let mut basis: Vec<DVector<T>> = Vec::with_capacity(cluster.len());
            let candidates = cluster.iter().flat_map(|&c| {
                let col = self.amplitudes.column(c);
                [col.map(|z| z.re), col.map(|z| z.im)]
            });
            for mut v in candidates {
                for b in &basis {
                    let proj = b.dot(&v);
                    v.axpy(-proj, b, T::one());
                }
                let nv = v.norm();
                if nv > T::lit(1e-6) {
                    basis.push(v / nv);
                }
                if basis.len() == cluster.len() {
                    break;
                }
            }
            if basis.len() != cluster.len() {
                return Err(Error::InvalidParams("mode subspace is not spanned by real vectors".into()));
            }
            for (slot, v) in cluster.iter().zip(basis) {
                let mut v = v;
                fix_sign(&mut v);
                out.set_column(*slot, &v);
            }
        }
        Ok(out)
    }
}

fn check_positive<T: Real>(energies: &DVector<T>) -> Result<()> {
    for (index, &e) in energies.iter().enumerate() {
        if e.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::NonPositiveSpectrum { index, energy: e.as_f64() });
        }
    }
    Ok(())
}

/// Groups consecutive indices of an ascending spectrum into degenerate clusters.
fn clusters<T: Real>(energies: &DVector<T>) -> Vec<Vec<usize>> {
    let scale = energies.amax().max(T::one());
    let tol = T::eps().sqrt() * scale * T::lit(1e-1);
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in 0..energies.len() {
        match out.last_mut() {
            Some(c) if (energies[i] - energies[*c.last().unwrap()]).abs() <= tol => c.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

/// Makes the largest-magnitude component positive. Ties go to the lowest index.
fn fix_sign<T: Real>(v: &mut DVector<T>) {
    let max = v.amax();
    if max == T::zero() {
        return;
    }
    let tol = max * T::lit(1e-9);
    if let Some(k) = v.iter().position(|x| x.abs() >= max - tol) {
        if v[k] < T::zero() {
            v.neg_mut();
        }
    }
}

fn plane_wave<T: Real>(n_sites: usize, n: usize) -> DVector<Complex<T>> {
    let norm = T::from_count(n_sites).sqrt();
    DVector::from_fn(n_sites, |j, _| {
        let arg = -T::two_pi() * T::from_count((n * j) % n_sites) / T::from_count(n_sites);
        phase(arg) / re(norm)
    })
}

/// Numerically diagonalizes a hopping matrix.
///
/// Periodic chains are canonicalized onto plane waves inside each degenerate
/// subspace; other chains get real eigenvectors with their largest component
/// made positive.
pub fn collective_modes<T: Real>(h: &HoppingMatrix<T>) -> Result<BosonModes<T>> {
    let n = h.n_sites();
    let eig = SymmetricEigen::new(h.single_particle());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let energies = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    check_positive(&energies)?;
    let vectors = DMatrix::from_fn(n, n, |j, c| eig.eigenvectors[(j, order[c])]);

    let mut amplitudes = DMatrix::from_element(n, n, Complex::new(T::zero(), T::zero()));
    let mut labels: Vec<usize> = (0..n).collect();
    for cluster in clusters(&energies) {
        let projected =
            if h.boundary() == Boundary::Periodic { project_onto_plane_waves(&vectors, &cluster) } else { None };
        match projected {
            Some(cols) => {
                for (&slot, (label, col)) in cluster.iter().zip(cols) {
                    amplitudes.set_column(slot, &col);
                    labels[slot] = label;
                }
            }
            None => {
                for &slot in &cluster {
                    let mut v = vectors.column(slot).into_owned();
                    fix_sign(&mut v);
                    amplitudes.set_column(slot, &v.map(re));
                }
            }
        }
    }
    Ok(BosonModes { energies, amplitudes, labels, boundary: h.boundary() })
}

/// Projects the plane waves with weight in a degenerate cluster onto it.
/// Returns `None` when the cluster is not spanned by plane waves.
fn project_onto_plane_waves<T: Real>(
    vectors: &DMatrix<T>,
    cluster: &[usize],
) -> Option<Vec<(usize, DVector<Complex<T>>)>> {
    let n = vectors.nrows();
    let half = T::lit(0.5);
    let mut picked = Vec::new();
    for k in 0..n {
        let pw = plane_wave::<T>(n, k);
        let mut proj = DVector::from_element(n, Complex::new(T::zero(), T::zero()));
        let mut weight = T::zero();
        for &c in cluster {
            let col = vectors.column(c).map(re);
            let coef = col.dotc(&pw);
            weight += coef.norm_sqr();
            proj.axpy(coef, &col, Complex::new(T::one(), T::zero()));
        }
        if weight > half {
            let norm = proj.norm();
            picked.push((k, proj / re(norm)));
        }
    }
    (picked.len() == cluster.len()).then_some(picked)
}

/// Periodic-chain dispersion `ω̄_n = ω̄_0 + 2 t (1 - cos(2πn/N))`, evaluated so
/// that the pair `(n, N-n)` is bitwise degenerate.
pub fn pbc_dispersion<T: Real>(params: &ModelParams<T>, n: usize) -> T {
    let size = params.n_sites;
    let k = (n % size).min(size - n % size);
    let arg = T::two_pi() * T::from_count(k) / T::from_count(size);
    params.omega0 + T::lit(2.0) * params.t * (T::one() - arg.cos())
}

/// Analytic plane-wave modes `M_{j,n} = e^{-i2πnj/N}/√N` for periodic chains.
pub fn plane_wave_modes<T: Real>(params: &ModelParams<T>) -> Result<BosonModes<T>> {
    params.validate()?;
    params.require(Boundary::Periodic)?;
    let n = params.n_sites;
    let mut labels: Vec<usize> = (0..n).collect();
    if params.t > T::zero() {
        labels.sort_by_key(|&k| (k.min(n - k), k));
    }
    let energies = DVector::from_iterator(n, labels.iter().map(|&k| pbc_dispersion(params, k)));
    check_positive(&energies)?;
    let mut amplitudes = DMatrix::from_element(n, n, Complex::new(T::zero(), T::zero()));
    for (slot, &k) in labels.iter().enumerate() {
        amplitudes.set_column(slot, &plane_wave::<T>(n, k));
    }
    Ok(BosonModes { energies, amplitudes, labels, boundary: Boundary::Periodic })
}

/// Modes appropriate for a parameter set: analytic plane waves for periodic
/// chains, numeric eigenmodes of the nearest-neighbour hopping for open ones.
pub fn modes_for<T: Real>(params: &ModelParams<T>) -> Result<BosonModes<T>> {
    match params.boundary {
        Boundary::Periodic => plane_wave_modes(params),
        Boundary::Open => collective_modes(&build_hopping(params)?),
        Boundary::Custom => Err(Error::InvalidParams("custom lattices need explicit modes".into())),
    }
}

/// Effective spin-spin couplings from adiabatic elimination of the bosons.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix<T: Real> {
    /// `J_{j,l} = -g² Σ_n M*_{j,n} M_{l,n} / ω̄_n` (Ising form at Ω = 0).
    pub ising: DMatrix<T>,
    /// `J_{l,j} = 2 Σ_n Re(g² M*_{j,n} M_{l,n} / ω̄_n)` (variational equations).
    pub mean_field: DMatrix<T>,
}

impl<T: Real> CouplingMatrix<T> {
    pub fn mean_field_row_sums(&self) -> DVector<T> {
        DVector::from_iterator(self.mean_field.nrows(), self.mean_field.row_iter().map(|r| r.sum()))
    }
}

pub fn ising_couplings<T: Real>(modes: &BosonModes<T>, g: T) -> CouplingMatrix<T> {
    let green = modes.lattice_green();
    let g2 = g * g;
    CouplingMatrix { ising: &green * (-g2), mean_field: &green * (T::lit(2.0) * g2) }
}
