//! Exact diagonalization of the full spin-boson Hamiltonian for `N <= 3`.
//!
//! Each collective mode is truncated at `n_max` quanta. The basis index packs
//! the spin configuration in the low `N` bits (bit set means `σ^z = -1`)
//! followed by the mode occupations as base-`(n_max + 1)` digits.
//!
//! In the bare basis the Hamiltonian commutes with the parity
//! `P = Π_j σ^x_j Π_n (-1)^{a_n† a_n}`, so both parity sectors are solved
//! separately and the lower one is kept. That pins `<σ^z>` and `<a_n>` to
//! zero even when the two sectors are degenerate (for instance at `Ω = 0`).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::lattice::{modes_for, BosonModes, Boundary, ModelParams};
use crate::meanfield::{solve_pbc, solve_self_consistent, MeanFieldSolution};
use crate::scalar::{modulus, re, Real};
use crate::spinwave::{
    build_gaussian_hamiltonian, diagonalize_quadratic, fluctuations_general, fluctuations_pbc, gaussian_spectrum_pbc,
};

pub const MAX_SITES: usize = 3;
pub const MAX_DIMENSION: usize = 1_000_000;
/// Sector dimensions up to this size are diagonalized densely.
pub const DENSE_LIMIT: usize = 256;
pub const LANCZOS_TOL: f64 = 1e-10;
pub const LANCZOS_MAX_ITER: usize = 10_000;
/// Successive cutoff energies closer than this count as converged.
pub const CUTOFF_TOL: f64 = 1e-8;
pub const HERMITICITY_TOL: f64 = 1e-12;

const KRYLOV_SIZE: usize = 150;

type C<T> = Complex<T>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// Fock states of the collective modes themselves.
    BareModes,
    /// Fock states of the lowest mode shifted by its mean-field displacement.
    ///
    /// Parity is broken: the shifted vacuum follows one of the two ordered
    /// branches, so the tunnelling splitting between them only appears once
    /// the cutoff reaches a few times `|ᾱ_0|²`.
    DisplacedModes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdConfig<T: Real> {
    pub params: ModelParams<T>,
    pub fock_cutoff: usize,
    pub basis: Basis,
    modes: BosonModes<T>,
}

impl<T: Real> EdConfig<T> {
    /// Uses the modes of [`modes_for`].
    pub fn new(params: ModelParams<T>, fock_cutoff: usize, basis: Basis) -> Result<Self> {
        params.validate()?;
        check_sites(params.n_sites)?;
        let modes = modes_for(&params)?;
        Self::with_modes(params, modes, fock_cutoff, basis)
    }

    /// Explicit collective modes, e.g. for a custom lattice.
    pub fn with_modes(params: ModelParams<T>, modes: BosonModes<T>, fock_cutoff: usize, basis: Basis) -> Result<Self> {
        params.validate()?;
        check_sites(params.n_sites)?;
        if modes.n_modes() != params.n_sites {
            return Err(Error::DimensionMismatch { expected: params.n_sites, found: modes.n_modes() });
        }
        if fock_cutoff < 1 {
            return Err(Error::InvalidCutoff(fock_cutoff));
        }
        let cfg = Self { params, fock_cutoff, basis, modes };
        let dim = cfg.dimension();
        if dim > MAX_DIMENSION {
            return Err(Error::HilbertSpaceTooLarge { dim, limit: MAX_DIMENSION });
        }
        Ok(cfg)
    }

    pub fn modes(&self) -> &BosonModes<T> {
        &self.modes
    }

    pub fn with_cutoff(&self, fock_cutoff: usize) -> Result<Self> {
        Self::with_modes(self.params, self.modes.clone(), fock_cutoff, self.basis)
    }

    /// `2^N (n_max + 1)^N`, saturating on overflow.
    pub fn dimension(&self) -> usize {
        let n = self.params.n_sites as u32;
        let per_mode = self.fock_cutoff.saturating_add(1);
        per_mode.checked_pow(n).and_then(|b| b.checked_mul(1 << n)).unwrap_or(usize::MAX)
    }
}

fn check_sites(n: usize) -> Result<()> {
    if n > MAX_SITES {
        return Err(Error::TooManySites { found: n, limit: MAX_SITES });
    }
    Ok(())
}

/// Hermitian matrix in compressed-row form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitian<T: Real> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C<T>>,
}

impl<T: Real> SparseHermitian<T> {
    fn from_rows(rows: Vec<Vec<(usize, C<T>)>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    let top = vals.len() - 1;
                    vals[top] += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn from_dense(m: &DMatrix<C<T>>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols()).filter(|&j| m[(i, j)] != C::new(T::zero(), T::zero())).map(|j| (j, m[(i, j)])).collect()
            })
            .collect();
        Ok(Self::from_rows(rows))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C<T>)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> C<T> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => C::new(T::zero(), T::zero()),
        }
    }

    pub fn matvec(&self, x: &DVector<C<T>>, y: &mut DVector<C<T>>) {
        for i in 0..self.dim {
            let mut acc = C::new(T::zero(), T::zero());
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }

    /// `max |H_ij - conj(H_ji)|`.
    pub fn hermiticity_residual(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max(modulus(v - self.get(j, i).conj()));
            }
        }
        worst
    }

    pub fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im == T::zero())
    }

    pub fn to_dense(&self) -> DMatrix<C<T>> {
        let mut m = DMatrix::from_element(self.dim, self.dim, C::new(T::zero(), T::zero()));
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Index arithmetic of the truncated product basis.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: usize,
    levels: usize,
}

impl Layout {
    fn spin_states(&self) -> usize {
        1 << self.n
    }

    fn dim(&self) -> usize {
        self.spin_states() * self.levels.pow(self.n as u32)
    }

    fn spins(&self, x: usize) -> usize {
        x % self.spin_states()
    }

    fn sz<T: Real>(&self, x: usize, j: usize) -> T {
        if (x >> j) & 1 == 0 {
            T::one()
        } else {
            -T::one()
        }
    }

    fn stride(&self, k: usize) -> usize {
        self.spin_states() * self.levels.pow(k as u32)
    }

    fn occ(&self, x: usize, k: usize) -> usize {
        (x / self.stride(k)) % self.levels
    }

    fn total_occ(&self, x: usize) -> usize {
        (0..self.n).map(|k| self.occ(x, k)).sum()
    }

    /// Image under `P` up to the sign `(-1)^{total occupation}`.
    fn partner(&self, x: usize) -> usize {
        x ^ (self.spin_states() - 1)
    }

    fn parity_sign<T: Real>(&self, x: usize) -> T {
        if self.total_occ(x).is_multiple_of(2) {
            T::one()
        } else {
            -T::one()
        }
    }

    fn is_representative(&self, x: usize) -> bool {
        let s = self.spins(x);
        s < s ^ (self.spin_states() - 1)
    }
}

/// Displacement of the lowest mode used by [`Basis::DisplacedModes`].
fn basis_shift<T: Real>(cfg: &EdConfig<T>) -> Result<C<T>> {
    match cfg.basis {
        Basis::BareModes => Ok(C::new(T::zero(), T::zero())),
        Basis::DisplacedModes => {
            let mf = mean_field_for(&cfg.params, &cfg.modes)?;
            Ok(mf.alphas[0])
        }
    }
}

fn mean_field_for<T: Real>(params: &ModelParams<T>, modes: &BosonModes<T>) -> Result<MeanFieldSolution<T>> {
    if params.boundary == Boundary::Periodic {
        let mut mf = solve_pbc(params)?;
        // Reorder displacements to the column order of `modes`.
        let pw = crate::lattice::plane_wave_modes(params)?;
        let mut alphas = vec![C::new(T::zero(), T::zero()); modes.n_modes()];
        for (pos, &label) in modes.labels().iter().enumerate() {
            if let Some(src) = pw.position_of(label) {
                alphas[pos] = mf.alphas[src];
            }
        }
        mf.alphas = alphas;
        Ok(mf)
    } else {
        solve_self_consistent(modes, params, &[], T::lit(1e-12), 100_000)
    }
}

/// Full Hamiltonian in the truncated collective-mode basis.
pub fn build_full_hamiltonian<T: Real>(cfg: &EdConfig<T>) -> Result<SparseHermitian<T>> {
    let shift = basis_shift(cfg)?;
    let h = assemble(cfg, shift);
    let residual = h.hermiticity_residual();
    if residual > T::lit(HERMITICITY_TOL) {
        return Err(Error::InvalidParams(format!(
            "assembled Hamiltonian is not Hermitian (residual {:e})",
            residual.as_f64()
        )));
    }
    Ok(h)
}

fn assemble<T: Real>(cfg: &EdConfig<T>, shift: C<T>) -> SparseHermitian<T> {
    let p = &cfg.params;
    let n = p.n_sites;
    let layout = Layout { n, levels: cfg.fock_cutoff + 1 };
    let m = cfg.modes.amplitudes();
    let w = cfg.modes.energies();
    let half_field = re(p.omega * T::lit(0.5));
    let g = p.g;
    let zero = C::new(T::zero(), T::zero());

    // Constant and spin-diagonal terms from the displaced lowest mode.
    let shift_energy = w[0] * shift.norm_sqr();
    let shift_field: Vec<T> = (0..n).map(|j| g * T::lit(2.0) * (m[(j, 0)] * shift).re).collect();

    let rows = (0..layout.dim())
        .map(|y| {
            let mut row = Vec::with_capacity(1 + 3 * n);
            let mut diag = shift_energy;
            for k in 0..n {
                diag += w[k] * T::from_count(layout.occ(y, k));
            }
            for (j, &f) in shift_field.iter().enumerate() {
                diag += f * layout.sz::<T>(y, j);
            }
            row.push((y, re(diag)));
            if half_field != zero {
                for j in 0..n {
                    row.push((y ^ (1 << j), half_field));
                }
            }
            for k in 0..n {
                let occ = layout.occ(y, k);
                let mut coupling = zero;
                for j in 0..n {
                    coupling += m[(j, k)] * re(g * layout.sz::<T>(y, j));
                }
                let lin = if k == 0 { shift * re(w[0]) } else { zero };
                // <y| a_k |y + 1_k>
                if occ + 1 < layout.levels {
                    let amp = (coupling + lin.conj()) * re(T::from_count(occ + 1).sqrt());
                    if amp != zero {
                        row.push((y + layout.stride(k), amp));
                    }
                }
                // <y| a_k† |y - 1_k>
                if occ >= 1 {
                    let amp = (coupling.conj() + lin) * re(T::from_count(occ).sqrt());
                    if amp != zero {
                        row.push((y - layout.stride(k), amp));
                    }
                }
            }
            row
        })
        .collect();
    SparseHermitian::from_rows(rows)
}

/// Restriction of `h` to the parity sector `p = ±1`, spanned by
/// `(|x> + p (-1)^{occ(x)} |x̄>)/√2` over representatives `x`.
fn parity_sector<T: Real>(
    h: &SparseHermitian<T>,
    layout: Layout,
    p: T,
    reps: &[usize],
    index: &[usize],
) -> SparseHermitian<T> {
    let rows = reps
        .iter()
        .map(|&y| {
            h.row(y)
                .map(|(x, v)| {
                    if layout.is_representative(x) {
                        (index[x], v)
                    } else {
                        let r = layout.partner(x);
                        (index[r], v * re(p * layout.parity_sign::<T>(r)))
                    }
                })
                .collect()
        })
        .collect();
    SparseHermitian::from_rows(rows)
}

/// Lowest eigenpair of a Hermitian matrix. `Auto` goes dense up to
/// [`DENSE_LIMIT`].
pub fn ground_state<T: Real>(h: &SparseHermitian<T>, method: Method) -> Result<(T, DVector<C<T>>)> {
    if h.dim() == 0 {
        return Err(Error::InvalidParams("empty matrix".into()));
    }
    let dense = match method {
        Method::Dense => true,
        Method::Lanczos => false,
        Method::Auto => h.dim() <= DENSE_LIMIT,
    };
    if dense {
        Ok(dense_ground_state(h))
    } else {
        lanczos(h, T::lit(LANCZOS_TOL), LANCZOS_MAX_ITER)
    }
}

fn dense_ground_state<T: Real>(h: &SparseHermitian<T>) -> (T, DVector<C<T>>) {
    let full = h.to_dense();
    if h.is_real() {
        let eig = SymmetricEigen::new(full.map(|v| v.re));
        let i = eig.eigenvalues.imin();
        (eig.eigenvalues[i], eig.eigenvectors.column(i).map(re))
    } else {
        let eig = SymmetricEigen::new(full);
        let i = eig.eigenvalues.imin();
        (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned())
    }
}

/// Lanczos with full reorthogonalization, restarted from the current Ritz
/// vector, starting from the normalized all-ones vector.
fn lanczos<T: Real>(h: &SparseHermitian<T>, tol: T, max_iter: usize) -> Result<(T, DVector<C<T>>)> {
    let dim = h.dim();
    let zero = C::new(T::zero(), T::zero());
    let mut start = DVector::from_element(dim, re(T::one() / T::from_count(dim).sqrt()));
    let mut work = DVector::from_element(dim, zero);
    let mut iterations = 0;
    let krylov = dim.min(KRYLOV_SIZE);
    loop {
        let mut basis: Vec<DVector<C<T>>> = vec![start.clone()];
        let mut diag: Vec<T> = Vec::new();
        let mut off: Vec<T> = Vec::new();
        for j in 0..krylov {
            h.matvec(&basis[j], &mut work);
            iterations += 1;
            let a = basis[j].dotc(&work).re;
            diag.push(a);
            for _ in 0..2 {
                for v in &basis {
                    let c = v.dotc(&work);
                    work.axpy(-c, v, C::new(T::one(), T::zero()));
                }
            }
            let mut b = work.norm();
            if j + 1 == krylov || iterations >= max_iter {
                break;
            }
            if b <= T::lit(1e-12) * a.abs().max(T::one()) {
                // Invariant subspace found: continue from a fixed vector
                // orthogonal to it so other eigenvalues stay reachable.
                match fresh_direction(&basis, dim) {
                    Some(v) => {
                        off.push(T::zero());
                        basis.push(v);
                        continue;
                    }
                    None => break,
                }
            }
            off.push(b);
            b = T::one() / b;
            basis.push(work.scale(b));
        }
        let k = diag.len();
        let mut tri = DMatrix::<T>::zeros(k, k);
        for i in 0..k {
            tri[(i, i)] = diag[i];
            if i + 1 < k {
                tri[(i, i + 1)] = off[i];
                tri[(i + 1, i)] = off[i];
            }
        }
        let eig = SymmetricEigen::new(tri);
        let i = eig.eigenvalues.imin();
        let theta = eig.eigenvalues[i];
        let mut x = DVector::from_element(dim, zero);
        for (c, v) in eig.eigenvectors.column(i).iter().zip(&basis) {
            x.axpy(re(*c), v, C::new(T::one(), T::zero()));
        }
        let norm = x.norm();
        x.unscale_mut(norm);
        h.matvec(&x, &mut work);
        iterations += 1;
        work.axpy(re(-theta), &x, C::new(T::one(), T::zero()));
        let residual = work.norm();
        if residual <= tol * theta.abs().max(T::one()) {
            return Ok((theta, x));
        }
        if iterations >= max_iter {
            return Err(Error::EigenNonConvergence { residual: residual.as_f64(), iterations });
        }
        start = x;
    }
}

fn fresh_direction<T: Real>(basis: &[DVector<C<T>>], dim: usize) -> Option<DVector<C<T>>> {
    let one = C::new(T::one(), T::zero());
    for seed in 1..=dim.min(8) {
        let mut v = DVector::from_fn(dim, |i, _| re(T::from_count((i * (2 * seed + 1) + seed) % 7) - T::lit(3.0)));
        for _ in 0..2 {
            for u in basis {
                let c = u.dotc(&v);
                v.axpy(-c, u, one);
            }
        }
        let norm = v.norm();
        if norm > T::lit(1e-8) {
            return Some(v.unscale(norm));
        }
    }
    None
}

/// Exact ground-state expectation values.
#[derive(Debug, Clone, PartialEq)]
pub struct EdResult<T: Real> {
    pub energy: T,
    pub sx_mean: Vec<T>,
    pub sz_mean: Vec<T>,
    /// `<σ^z_j σ^z_l>`, diagonal exactly 1.
    pub zz_corr: DMatrix<T>,
    /// `<a_n† a_n>` per collective mode, in the column order of the modes.
    pub boson_occupation: Vec<T>,
    pub boson_displacement: Vec<C<T>>,
    pub cutoff_converged: bool,
    pub cutoff_used: usize,
    /// `(n_max, energy)` history when the cutoff was scanned.
    pub cutoff_table: Vec<(usize, T)>,
    pub hermiticity_residual: T,
    /// Parity of the returned state in the bare basis; `None` when displaced.
    pub parity: Option<i8>,
}

impl<T: Real> EdResult<T> {
    /// Mean off-diagonal `<σ^z_j σ^z_l>`; zero for a single site.
    pub fn mean_zz(&self) -> T {
        let n = self.zz_corr.nrows();
        if n < 2 {
            return T::zero();
        }
        let mut acc = T::zero();
        for j in 0..n {
            for l in 0..n {
                if j != l {
                    acc += self.zz_corr[(j, l)];
                }
            }
        }
        acc / T::from_count(n * (n - 1))
    }
}

/// Expectation values of a normalized state in the full basis.
pub fn observables<T: Real>(state: &DVector<C<T>>, cfg: &EdConfig<T>) -> Result<EdResult<T>> {
    let layout = Layout { n: cfg.params.n_sites, levels: cfg.fock_cutoff + 1 };
    if state.len() != layout.dim() {
        return Err(Error::DimensionMismatch { expected: layout.dim(), found: state.len() });
    }
    let shift = basis_shift(cfg)?;
    let n = layout.n;
    let zero = C::new(T::zero(), T::zero());
    let mut sx = vec![T::zero(); n];
    let mut sz = vec![T::zero(); n];
    let mut zz = DMatrix::<T>::zeros(n, n);
    let mut occ = vec![T::zero(); n];
    let mut disp = vec![zero; n];
    for x in 0..layout.dim() {
        let amp = state[x];
        let prob = amp.norm_sqr();
        for j in 0..n {
            sx[j] += (amp.conj() * state[x ^ (1 << j)]).re;
            sz[j] += prob * layout.sz::<T>(x, j);
            for l in 0..n {
                zz[(j, l)] += prob * layout.sz::<T>(x, j) * layout.sz::<T>(x, l);
            }
        }
        for k in 0..n {
            let o = layout.occ(x, k);
            occ[k] += prob * T::from_count(o);
            if o >= 1 {
                disp[k] += state[x - layout.stride(k)].conj() * amp * re(T::from_count(o).sqrt());
            }
        }
    }
    for j in 0..n {
        zz[(j, j)] = T::one();
    }
    // Undo the basis shift of the lowest mode.
    occ[0] += T::lit(2.0) * (shift.conj() * disp[0]).re + shift.norm_sqr();
    disp[0] += shift;
    Ok(EdResult {
        energy: T::zero(),
        sx_mean: sx,
        sz_mean: sz,
        zz_corr: zz,
        boson_occupation: occ,
        boson_displacement: disp,
        cutoff_converged: false,
        cutoff_used: cfg.fock_cutoff,
        cutoff_table: Vec::new(),
        hermiticity_residual: T::zero(),
        parity: None,
    })
}

/// Ground state and observables at the configured cutoff.
pub fn solve<T: Real>(cfg: &EdConfig<T>, method: Method) -> Result<EdResult<T>> {
    let h = build_full_hamiltonian(cfg)?;
    let herm = h.hermiticity_residual();
    let layout = Layout { n: cfg.params.n_sites, levels: cfg.fock_cutoff + 1 };
    let (energy, state, parity) = match cfg.basis {
        Basis::DisplacedModes => {
            let (e, psi) = ground_state(&h, method)?;
            (e, psi, None)
        }
        Basis::BareModes => {
            let reps: Vec<usize> = (0..layout.dim()).filter(|&x| layout.is_representative(x)).collect();
            let mut index = vec![usize::MAX; layout.dim()];
            for (i, &x) in reps.iter().enumerate() {
                index[x] = i;
            }
            let mut best: Option<(T, DVector<C<T>>, i8)> = None;
            for p in [1i8, -1] {
                let pv = T::lit(p as f64);
                let sector = parity_sector(&h, layout, pv, &reps, &index);
                let (e, phi) = ground_state(&sector, method)?;
                if best.as_ref().is_none_or(|b| e < b.0) {
                    let mut psi = DVector::from_element(layout.dim(), C::new(T::zero(), T::zero()));
                    let r = T::lit(0.5).sqrt();
                    for (i, &x) in reps.iter().enumerate() {
                        psi[x] = phi[i] * re(r);
                        psi[layout.partner(x)] = phi[i] * re(r * pv * layout.parity_sign::<T>(x));
                    }
                    best = Some((e, psi, p));
                }
            }
            let (e, psi, p) = best.expect("two sectors solved");
            (e, psi, Some(p))
        }
    };
    let mut res = observables(&state, cfg)?;
    res.energy = energy;
    res.hermiticity_residual = herm;
    res.parity = parity;
    Ok(res)
}

/// Ground energies over ascending cutoffs; `converged` when the last two
/// differ by less than [`CUTOFF_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffScan<T: Real> {
    pub table: Vec<(usize, T)>,
    pub converged: bool,
    /// Result at the largest cutoff.
    pub last: EdResult<T>,
}

pub fn cutoff_convergence<T: Real>(cfg: &EdConfig<T>, cutoffs: &[usize]) -> Result<CutoffScan<T>> {
    if cutoffs.is_empty() {
        return Err(Error::TooFewPoints { required: 1, found: 0 });
    }
    if cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("cutoffs must be strictly ascending".into()));
    }
    let mut table = Vec::with_capacity(cutoffs.len());
    let mut last = None;
    for &c in cutoffs {
        let res = solve(&cfg.with_cutoff(c)?, Method::Auto)?;
        table.push((c, res.energy));
        last = Some(res);
    }
    let converged = table.len() >= 2 && {
        let k = table.len();
        (table[k - 1].1 - table[k - 2].1).abs() < T::lit(CUTOFF_TOL)
    };
    let mut last = last.expect("nonempty");
    last.cutoff_converged = converged;
    last.cutoff_table = table.clone();
    Ok(CutoffScan { table, converged, last })
}

/// Raises the cutoff in steps of `step` from `start` until the ground energy
/// is stable, failing with the table once `max_cutoff` is exceeded.
pub fn converged_ground_state<T: Real>(
    params: &ModelParams<T>,
    basis: Basis,
    start: usize,
    step: usize,
    max_cutoff: usize,
) -> Result<EdResult<T>> {
    let mut cfg = EdConfig::new(*params, start.max(1), basis)?;
    let mut table: Vec<(usize, T)> = Vec::new();
    let mut cutoff = start.max(1);
    loop {
        cfg = cfg.with_cutoff(cutoff)?;
        let mut res = solve(&cfg, Method::Auto)?;
        let done = table.last().is_some_and(|&(_, e)| (res.energy - e).abs() < T::lit(CUTOFF_TOL));
        table.push((cutoff, res.energy));
        if done {
            res.cutoff_converged = true;
            res.cutoff_table = table;
            return Ok(res);
        }
        cutoff += step.max(1);
        if cutoff > max_cutoff {
            return Err(Error::CutoffNotConverged { energies: table.iter().map(|&(c, e)| (c, e.as_f64())).collect() });
        }
    }
}

/// Exact and mean-field (plus spin-wave) predictions side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison<T: Real> {
    pub e_exact: T,
    pub e_mean_field: T,
    /// `E_MF - E_exact`, nonnegative for a variational ansatz.
    pub variational_gap: T,
    pub sx_exact: Vec<T>,
    pub sin_theta: Vec<T>,
    pub zz_exact: T,
    pub cos_sq: T,
    pub occupation_exact: Vec<T>,
    pub occupation_mean_field: Vec<T>,
    /// Per-atom spin fluctuation around the mean-field axis from the exact state.
    pub f_spin_exact: T,
    /// Per-atom spin-wave prediction, when the Gaussian expansion exists.
    pub f_spin_wave: Option<T>,
    pub zero_point_energy: Option<T>,
}

impl<T: Real> Comparison<T> {
    /// `|F_exact - F_sw| / F_sw`.
    pub fn fluctuation_discrepancy(&self) -> Option<T> {
        self.f_spin_wave.filter(|f| *f > T::zero() && f.as_f64().is_finite()).map(|f| (self.f_spin_exact - f).abs() / f)
    }
}

/// Compares a cutoff-converged exact result with the mean-field solution of
/// the same parameters.
pub fn exact_vs_meanfield<T: Real>(cfg: &EdConfig<T>, ed: &EdResult<T>) -> Result<Comparison<T>> {
    if !ed.cutoff_converged {
        return Err(Error::CutoffNotConverged {
            energies: ed.cutoff_table.iter().map(|&(c, e)| (c, e.as_f64())).collect(),
        });
    }
    let p = &cfg.params;
    let modes = &cfg.modes;
    let mf = mean_field_for(p, modes)?;
    let n = p.n_sites;
    let count = T::from_count(n);
    let e_mf = mf.energy;

    let m_z = ed.mean_zz().max(T::zero()).sqrt();
    let mut f_exact = T::zero();
    for j in 0..n {
        let along = mf.sin_theta[j] * ed.sx_mean[j] + mf.cos_theta[j] * m_z;
        f_exact += (T::one() - along) * T::lit(0.5);
    }
    f_exact /= count;

    let (f_sw, zpe) = spin_wave_prediction(p, modes, &mf);
    let cos_sq = mf.cos_theta.iter().fold(T::zero(), |a, &c| a + c * c) / count;
    Ok(Comparison {
        e_exact: ed.energy,
        e_mean_field: e_mf,
        variational_gap: e_mf - ed.energy,
        sx_exact: ed.sx_mean.clone(),
        sin_theta: mf.sin_theta.clone(),
        zz_exact: ed.mean_zz(),
        cos_sq,
        occupation_exact: ed.boson_occupation.clone(),
        occupation_mean_field: mf.alphas.iter().map(|a| a.norm_sqr()).collect(),
        f_spin_exact: f_exact,
        f_spin_wave: f_sw,
        zero_point_energy: zpe,
    })
}

fn spin_wave_prediction<T: Real>(
    p: &ModelParams<T>,
    modes: &BosonModes<T>,
    mf: &MeanFieldSolution<T>,
) -> (Option<T>, Option<T>) {
    if p.boundary == Boundary::Periodic {
        if let Ok(spec) = gaussian_spectrum_pbc(p, mf) {
            return (Some(fluctuations_pbc(&spec).f_spin_total), Some(spec.zero_point_energy()));
        }
        return (None, None);
    }
    let Ok(form) = build_gaussian_hamiltonian(modes, mf, p) else {
        return (None, None);
    };
    let Ok(bogo) = diagonalize_quadratic(&form) else {
        return (None, None);
    };
    let rep = fluctuations_general(&bogo, &form);
    (Some(rep.f_spin_total), Some(bogo.zero_point_energy(&form)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(n: usize, t: f64, g: f64, omega: f64) -> ModelParams<f64> {
        ModelParams::periodic(n, 1.0, t, g, omega).unwrap()
    }

    #[test]
    fn two_by_two_ground_state() {
        let one = C::new(1.0, 0.0);
        let z = C::new(0.0, 0.0);
        let h = SparseHermitian::from_dense(&DMatrix::from_row_slice(2, 2, &[z, one, one, z])).unwrap();
        let (e, _) = ground_state(&h, Method::Dense).unwrap();
        assert_relative_eq!(e, -1.0, epsilon = 1e-14);
        let (e, _) = ground_state(&h, Method::Lanczos).unwrap();
        assert_relative_eq!(e, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_decoupled_site() {
        let cfg = EdConfig::new(params(1, 0.4, 0.0, 1.0), 3, Basis::BareModes).unwrap();
        let h = build_full_hamiltonian(&cfg).unwrap();
        let mut ev: Vec<f64> = SymmetricEigen::new(h.to_dense().map(|v| v.re)).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let w = cfg.modes().energies()[0];
        let mut expected: Vec<f64> = (0..4).flat_map(|m| [-0.5 + m as f64 * w, 0.5 + m as f64 * w]).collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in ev.iter().zip(&expected) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
        let res = solve(&cfg, Method::Auto).unwrap();
        assert_relative_eq!(res.energy, -0.5, epsilon = 1e-14);
        assert_relative_eq!(res.sx_mean[0], -1.0, epsilon = 1e-12);
        assert!(res.boson_occupation[0].abs() < 1e-14);
    }

    #[test]
    fn guards() {
        assert!(matches!(
            EdConfig::new(params(4, 0.4, 0.3, 1.0), 1, Basis::BareModes),
            Err(Error::TooManySites { .. })
        ));
        assert_eq!(EdConfig::new(params(2, 0.4, 0.3, 1.0), 0, Basis::BareModes).unwrap_err(), Error::InvalidCutoff(0));
        assert!(matches!(
            EdConfig::new(params(3, 0.4, 0.3, 1.0), 100, Basis::BareModes),
            Err(Error::HilbertSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn polaron_limit() {
        let p: ModelParams<f64> = ModelParams::periodic(1, 1.0, 0.0, 1.0, 0.0).unwrap();
        let cfg = EdConfig::new(p, 2, Basis::BareModes).unwrap();
        let scan = cutoff_convergence(&cfg, &[2, 4, 8, 16, 24]).unwrap();
        for w in scan.table.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-12);
            assert!(w[1].1 >= -1.0 - 1e-12);
        }
        assert!((scan.table.last().unwrap().1 + 1.0).abs() < 1e-10);
        assert!(scan.converged);

        let displaced = EdConfig::new(p, 1, Basis::DisplacedModes).unwrap();
        let res = solve(&displaced, Method::Auto).unwrap();
        assert!((res.energy + 1.0).abs() < 1e-12);
        assert!((scan.table[0].1 + 1.0).abs() > 1e-3);
    }

    #[test]
    fn ising_limit_two_sites() {
        let p = params(2, 0.4, 0.6, 0.0);
        let res = converged_ground_state(&p, Basis::BareModes, 4, 2, 30).unwrap();
        assert!((res.energy + 0.72).abs() < 1e-8);
        assert!(res.sz_mean.iter().all(|s| s.abs() < 1e-10));
        assert!(res.boson_displacement.iter().all(|a| a.norm() < 1e-10));
    }

    #[test]
    fn dense_and_lanczos_agree() {
        let cfg = EdConfig::new(params(2, 0.4, 0.4, 1.0), 6, Basis::BareModes).unwrap();
        let h = build_full_hamiltonian(&cfg).unwrap();
        assert!(h.hermiticity_residual() < 1e-12);
        let (ed, _) = ground_state(&h, Method::Dense).unwrap();
        let (el, _) = ground_state(&h, Method::Lanczos).unwrap();
        assert!((ed - el).abs() < 1e-10);
        let a = solve(&cfg, Method::Dense).unwrap();
        let b = solve(&cfg, Method::Lanczos).unwrap();
        assert!((a.energy - b.energy).abs() < 1e-10);
        assert!((a.energy - ed).abs() < 1e-10);
    }

    #[test]
    fn three_sites_complex_modes() {
        let cfg = EdConfig::new(params(3, 0.4, 0.3, 1.0), 3, Basis::BareModes).unwrap();
        let h = build_full_hamiltonian(&cfg).unwrap();
        assert!(!h.is_real());
        assert!(h.hermiticity_residual() < 1e-12);
        let a = solve(&cfg, Method::Dense).unwrap();
        let b = solve(&cfg, Method::Lanczos).unwrap();
        assert!((a.energy - b.energy).abs() < 1e-10);
        assert!(a.sz_mean.iter().all(|s| s.abs() < 1e-10));
    }

    #[test]
    fn decoupled_observables() {
        let cfg = EdConfig::new(params(2, 0.4, 0.0, 1.0), 2, Basis::BareModes).unwrap();
        let res = solve(&cfg, Method::Auto).unwrap();
        for j in 0..2 {
            assert_relative_eq!(res.sx_mean[j], -1.0, epsilon = 1e-12);
            assert_eq!(res.zz_corr[(j, j)], 1.0);
            assert!(res.boson_occupation[j].abs() < 1e-12);
        }
        assert!(res.zz_corr[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn ordered_two_sites() {
        let p = params(2, 0.4, 1.2, 1.0);
        let res = converged_ground_state(&p, Basis::BareModes, 8, 2, 40).unwrap();
        assert!(res.zz_corr[(0, 1)] > 0.9);
        assert!(res.sz_mean.iter().all(|s| s.abs() < 1e-10));
    }

    #[test]
    fn comparison_refuses_unconverged() {
        let cfg = EdConfig::new(params(2, 0.4, 0.3, 1.0), 4, Basis::BareModes).unwrap();
        let res = solve(&cfg, Method::Auto).unwrap();
        assert!(matches!(exact_vs_meanfield(&cfg, &res), Err(Error::CutoffNotConverged { .. })));
    }

    #[test]
    fn weak_coupling_comparison() {
        let p = params(2, 0.4, 0.3, 1.0);
        let res = converged_ground_state(&p, Basis::BareModes, 4, 2, 30).unwrap();
        let cfg = EdConfig::new(p, res.cutoff_used, Basis::BareModes).unwrap();
        let cmp = exact_vs_meanfield(&cfg, &res).unwrap();
        assert!(cmp.variational_gap > 0.0);
        assert!(cmp.variational_gap < cmp.zero_point_energy.unwrap().abs());
        assert!(cmp.fluctuation_discrepancy().unwrap() < 0.3);
    }
}
