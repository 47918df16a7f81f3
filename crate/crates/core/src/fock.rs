//! Truncated Fock-space linear algebra.
//!
//! Everything here is dense: cutoffs stay below ~40, so a single mode never
//! exceeds a few dozen levels and the multi-mode carriers stay in the low
//! thousands of amplitudes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::specfun::ln_factorial;

pub type C64 = Complex64;

/// Tolerance used when normalizing or checking normalization.
pub const NORM_TOL: f64 = 1e-10;

/// Retained norm² below `1 - COHERENT_DEFICIT_TOL` flags an inadequate cutoff.
pub const COHERENT_DEFICIT_TOL: f64 = 1e-6;

/// Outcomes less likely than this are treated as impossible.
pub const MIN_PROBABILITY: f64 = 1e-14;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Pure state of one mode, amplitudes indexed by photon number.
#[derive(Debug, Clone, PartialEq)]
pub struct FockVector {
    amps: DVector<C64>,
}

impl FockVector {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidParameter("empty Fock vector".into()));
        }
        if amplitudes.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("Fock vector construction"));
        }
        let v = Self { amps: DVector::from_vec(amplitudes) };
        let n2 = v.norm_sqr();
        if n2 <= 0.0 || n2 > 1.0 + NORM_TOL {
            return Err(Error::InvalidParameter(format!(
                "Fock vector norm^2 = {n2} outside (0, 1]"
            )));
        }
        Ok(v)
    }

    /// Builds and normalizes in one go.
    pub fn normalized_from(amplitudes: Vec<C64>) -> Result<Self> {
        let v = DVector::from_vec(amplitudes);
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter("cannot normalize a zero vector".into()));
        }
        Ok(Self { amps: v.unscale(n) })
    }

    /// Number state |n⟩ in a space of `dim` levels.
    pub fn basis(n: usize, dim: usize) -> Self {
        assert!(n < dim, "level {n} outside dimension {dim}");
        let mut amps = DVector::zeros(dim);
        amps[n] = ONE;
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitude(&self, n: usize) -> C64 {
        self.amps.get(n).copied().unwrap_or(ZERO)
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    pub fn normalize(&mut self) {
        let n = self.amps.norm();
        self.amps.unscale_mut(n);
    }

    /// Zero-pads up to `dim`; an error if the vector carries weight beyond it.
    pub fn padded(&self, dim: usize) -> Result<Self> {
        if self.dim() > dim {
            if self.amps.rows(dim, self.dim() - dim).iter().any(|c| *c != ZERO) {
                return Err(Error::DimensionMismatch { expected: dim, found: self.dim() });
            }
            return Ok(Self { amps: self.amps.rows(0, dim).into_owned() });
        }
        let mut amps = DVector::zeros(dim);
        amps.rows_mut(0, self.dim()).copy_from(&self.amps);
        Ok(Self { amps })
    }

    /// ⟨self|other⟩ over the common levels.
    pub fn inner(&self, other: &FockVector) -> C64 {
        let n = self.dim().min(other.dim());
        (0..n).map(|i| self.amps[i].conj() * other.amps[i]).sum()
    }

    /// |⟨self|other⟩| / (‖self‖‖other‖) deviation from 1 is zero iff the two
    /// states agree up to a global phase.
    pub fn phase_insensitive_distance(&self, other: &FockVector) -> f64 {
        let ov = self.inner(other);
        if ov.norm() == 0.0 {
            return f64::INFINITY;
        }
        let phase = ov / ov.norm();
        let n = self.dim().max(other.dim());
        (0..n)
            .map(|i| (self.amplitude(i) * phase - other.amplitude(i)).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }
}

/// Coherent state truncated to a finite cutoff.
#[derive(Debug, Clone)]
pub struct TruncatedCoherent {
    pub state: FockVector,
    /// 1 − Σ_{n≤cutoff} |c_n|² before renormalization.
    pub norm_deficit: f64,
}

/// Glauber coherent state over levels 0..=cutoff, renormalized.
pub fn coherent_state(alpha: C64, cutoff: usize) -> Result<TruncatedCoherent> {
    let amps = coherent_amplitudes(alpha, cutoff);
    let retained: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
    if retained < 1.0 - COHERENT_DEFICIT_TOL {
        return Err(Error::CutoffTooSmall { cutoff, norm_sqr: retained });
    }
    Ok(TruncatedCoherent {
        state: FockVector::normalized_from(amps)?,
        norm_deficit: 1.0 - retained,
    })
}

/// Raw expansion coefficients e^{−|α|²/2} αⁿ/√(n!), not renormalized.
pub fn coherent_amplitudes(alpha: C64, cutoff: usize) -> Vec<C64> {
    let ln_abs = alpha.norm().ln();
    let phase = alpha.arg();
    (0..=cutoff)
        .map(|n| {
            if alpha.norm() == 0.0 {
                return if n == 0 { ONE } else { ZERO };
            }
            let nf = n as f64;
            let ln_mag = -0.5 * alpha.norm_sqr() + nf * ln_abs - 0.5 * ln_factorial(n);
            C64::from_polar(ln_mag.exp(), nf * phase)
        })
        .collect()
}

/// (|0⟩ + α|1⟩)/√(1+|α|²).
pub fn truncated_coherent_state(alpha: C64) -> FockVector {
    let norm = (1.0 + alpha.norm_sqr()).sqrt();
    FockVector { amps: DVector::from_vec(vec![ONE / norm, alpha / norm]) }
}

/// cos(kε)|0⟩ − i sin(kε)|1⟩, the ideal output after `kicks` kicks.
pub fn nqs_target_state(kicks: usize, epsilon: f64) -> FockVector {
    let phi = kicks as f64 * epsilon;
    FockVector {
        amps: DVector::from_vec(vec![C64::new(phi.cos(), 0.0), C64::new(0.0, -phi.sin())]),
    }
}

/// a with a_{n−1,n} = √n on levels 0..=cutoff.
pub fn annihilation_matrix(cutoff: usize) -> DMatrix<C64> {
    let d = cutoff + 1;
    let mut a = DMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn creation_matrix(cutoff: usize) -> DMatrix<C64> {
    annihilation_matrix(cutoff).adjoint()
}

/// n̂ = a†a, diagonal.
pub fn number_matrix(cutoff: usize) -> DMatrix<C64> {
    let d = cutoff + 1;
    DMatrix::from_diagonal(&DVector::from_fn(d, |n, _| C64::new(n as f64, 0.0)))
}

/// Density matrix over a truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidParameter("empty density matrix".into()));
        }
        if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("density matrix construction"));
        }
        Ok(Self { m })
    }

    pub(crate) fn from_matrix_unchecked(m: DMatrix<C64>) -> Self {
        Self { m }
    }

    pub fn from_pure(psi: &FockVector) -> Self {
        Self { m: &psi.amps * psi.amps.adjoint() }
    }

    pub fn vacuum(dim: usize) -> Self {
        Self::from_pure(&FockVector::basis(0, dim))
    }

    pub fn number_state(n: usize, dim: usize) -> Self {
        Self::from_pure(&FockVector::basis(n, dim))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn cutoff(&self) -> usize {
        self.dim() - 1
    }

    pub fn get(&self, n: usize, m: usize) -> C64 {
        self.m[(n, m)]
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    /// Tr ρ².
    pub fn purity(&self) -> f64 {
        // Tr(ρρ) = Σ_nm ρ_nm ρ_mn = Σ |ρ_nm|² for Hermitian ρ
        self.m.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn mean_photon_number(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.m[(n, n)].re).sum()
    }

    /// max |ρ_nm − ρ*_mn|
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut err: f64 = 0.0;
        for n in 0..d {
            for m in n..d {
                err = err.max((self.m[(n, m)] - self.m[(m, n)].conj()).norm());
            }
        }
        err
    }

    /// Replaces ρ with (ρ + ρ†)/2.
    pub fn symmetrize(&mut self) {
        let adj = self.m.adjoint();
        self.m = (&self.m + adj).scale(0.5);
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.m + self.m.adjoint()).scale(0.5);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Total population on levels ≥ `from`.
    pub fn population_above(&self, from: usize) -> f64 {
        (from..self.dim()).map(|n| self.m[(n, n)].re).sum()
    }

    /// Largest level with diagonal population above `threshold`.
    pub fn support(&self, threshold: f64) -> usize {
        (0..self.dim()).rev().find(|&n| self.m[(n, n)].re > threshold).unwrap_or(0)
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        max_abs_diff(&self.m, &other.m)
    }

    /// Restriction or zero extension to `dim` levels.
    pub fn resized(&self, dim: usize) -> DensityMatrix {
        let mut m = DMatrix::zeros(dim, dim);
        let k = dim.min(self.dim());
        m.view_mut((0, 0), (k, k)).copy_from(&self.m.view((0, 0), (k, k)));
        DensityMatrix { m }
    }
}

pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// ⟨ψ|ρ|ψ⟩, with ψ zero-padded to ρ's dimension. Not clamped.
pub fn fidelity(psi: &FockVector, rho: &DensityMatrix) -> Result<f64> {
    let psi = psi.padded(rho.dim())?;
    let v = psi.amps.adjoint() * rho.matrix() * &psi.amps;
    Ok(v[(0, 0)].re)
}

/// Clamp into [0, 1] for reporting.
pub fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Pure state on a tensor product of truncated modes; the last mode varies
/// fastest in the flat amplitude array.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiModeState {
    dims: Vec<usize>,
    amps: Vec<C64>,
}

impl MultiModeState {
    pub fn vacuum(dims: &[usize]) -> Self {
        assert!(dims.iter().all(|&d| d > 0), "mode dimensions must be positive");
        let size = dims.iter().product();
        let mut amps = vec![ZERO; size];
        amps[0] = ONE;
        Self { dims: dims.to_vec(), amps }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        let size = dims.iter().product();
        Self { dims: dims.to_vec(), amps: vec![ZERO; size] }
    }

    pub fn product(modes: &[FockVector]) -> Self {
        let dims: Vec<usize> = modes.iter().map(FockVector::dim).collect();
        let mut amps = vec![ONE];
        for mode in modes {
            amps = amps
                .iter()
                .flat_map(|a| mode.amps.iter().map(move |b| a * b))
                .collect();
        }
        Self { dims, amps }
    }

    pub fn from_amplitudes(dims: &[usize], amps: Vec<C64>) -> Result<Self> {
        let size: usize = dims.iter().product();
        if amps.len() != size {
            return Err(Error::DimensionMismatch { expected: size, found: amps.len() });
        }
        Ok(Self { dims: dims.to_vec(), amps })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn modes(&self) -> usize {
        self.dims.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &MultiModeState) -> Result<C64> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch { expected: self.amps.len(), found: other.amps.len() });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.dims[k + 1];
        }
        s
    }

    pub fn flat_index(&self, occupation: &[usize]) -> usize {
        self.strides().iter().zip(occupation).map(|(s, n)| s * n).sum()
    }

    pub fn amplitude(&self, occupation: &[usize]) -> C64 {
        self.amps[self.flat_index(occupation)]
    }

    pub fn scaled(mut self, factor: C64) -> Self {
        self.amps.iter_mut().for_each(|c| *c *= factor);
        self
    }

    pub fn add_scaled(&mut self, other: &MultiModeState, factor: C64) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch { expected: self.amps.len(), found: other.amps.len() });
        }
        self.amps.iter_mut().zip(&other.amps).for_each(|(a, b)| *a += factor * b);
        Ok(())
    }

    /// Applies a† on `mode`. Weight pushed past the cutoff is dropped.
    pub fn apply_creation(&self, mode: usize) -> Self {
        let strides = self.strides();
        let d = self.dims[mode];
        let s = strides[mode];
        let mut out = vec![ZERO; self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let n = (i / s) % d;
            if n + 1 < d {
                out[i + s] += a * ((n + 1) as f64).sqrt();
            }
        }
        Self { dims: self.dims.clone(), amps: out }
    }

    /// Applies a two-mode operator `u` (indexed n_p·d_q + n_q) on modes p, q.
    pub fn apply_two_mode(&self, u: &DMatrix<C64>, p: usize, q: usize) -> Result<Self> {
        assert_ne!(p, q, "two-mode operator needs distinct modes");
        let (dp, dq) = (self.dims[p], self.dims[q]);
        if u.nrows() != dp * dq || u.ncols() != dp * dq {
            return Err(Error::DimensionMismatch { expected: dp * dq, found: u.nrows() });
        }
        let strides = self.strides();
        let (sp, sq) = (strides[p], strides[q]);
        let mut out = vec![ZERO; self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            let np = (i / sp) % dp;
            let nq = (i / sq) % dq;
            let base = i - np * sp - nq * sq;
            let col = np * dq + nq;
            for jp in 0..dp {
                for jq in 0..dq {
                    let u_el = u[(jp * dq + jq, col)];
                    if u_el != ZERO {
                        out[base + jp * sp + jq * sq] += u_el * a;
                    }
                }
            }
        }
        Ok(Self { dims: self.dims.clone(), amps: out })
    }

    /// Contracts `mode` with the bra ⟨φ|, leaving the remaining modes.
    pub fn contract_mode(&self, mode: usize, bra: &FockVector) -> Result<Self> {
        let d = self.dims[mode];
        let bra = bra.padded(d)?;
        let strides = self.strides();
        let s = strides[mode];
        let mut dims = self.dims.clone();
        dims.remove(mode);
        let size: usize = dims.iter().product();
        let mut out = vec![ZERO; size];
        for (i, a) in self.amps.iter().enumerate() {
            let n = (i / s) % d;
            let outer = i / (s * d);
            let inner = i % s;
            out[outer * s + inner] += bra.amps[n].conj() * a;
        }
        Ok(Self { dims, amps: out })
    }

    /// Single-mode view; requires exactly one mode.
    pub fn to_fock_vector(&self) -> Result<FockVector> {
        if self.dims.len() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, found: self.dims.len() });
        }
        Ok(FockVector { amps: DVector::from_vec(self.amps.clone()) })
    }
}

/// Result of a conditional photon-counting measurement.
#[derive(Debug, Clone)]
pub struct Projection {
    pub state: MultiModeState,
    pub probability: f64,
}

/// Projects the listed modes onto the given Fock outcomes and renormalizes
/// the remaining modes.
pub fn project_and_renormalize(
    state: &MultiModeState,
    outcomes: &[(usize, usize)],
) -> Result<Projection> {
    for &(mode, n) in outcomes {
        if mode >= state.modes() {
            return Err(Error::InvalidParameter(format!("mode {mode} out of range")));
        }
        if n >= state.dims[mode] {
            return Err(Error::DimensionMismatch { expected: state.dims[mode], found: n + 1 });
        }
    }
    let total = state.norm_sqr();
    // contract highest mode index first so earlier indices stay valid
    let mut sorted = outcomes.to_vec();
    sorted.sort_by_key(|o| std::cmp::Reverse(o.0));
    sorted.dedup_by_key(|o| o.0);
    if sorted.len() != outcomes.len() {
        return Err(Error::InvalidParameter("mode listed twice in projection".into()));
    }
    let mut cur = state.clone();
    for (mode, n) in sorted {
        cur = cur.contract_mode(mode, &FockVector::basis(n, state.dims[mode]))?;
    }
    let probability = cur.norm_sqr() / total;
    if probability < MIN_PROBABILITY {
        return Err(Error::ZeroProbability { probability });
    }
    let scale = C64::new(1.0 / cur.norm_sqr().sqrt(), 0.0);
    Ok(Projection { state: cur.scaled(scale), probability })
}

/// Two-mode beam-splitter unitary on (p, q) with dimensions (dim_p, dim_q).
///
/// Built as exp(θK), K = e^{iφ} a_q†a_p − e^{−iφ} a_p†a_q, θ = arccos t and
/// φ = arg r. In the Schrödinger picture a_p† ↦ t a_p† + r a_q† and
/// a_q† ↦ t a_q† − r* a_p†, so U a_p U† = t a_p + r* a_q.
pub fn beam_splitter_unitary(t: f64, r: C64, dim_p: usize, dim_q: usize) -> Result<DMatrix<C64>> {
    let norm_sqr = t * t + r.norm_sqr();
    if !(0.0..=1.0).contains(&t) || (norm_sqr - 1.0).abs() > NORM_TOL {
        return Err(Error::NonUnitary { norm_sqr });
    }
    let theta = t.clamp(-1.0, 1.0).acos();
    let phase = if r.norm() > 0.0 { r / r.norm() } else { ONE };
    let generator = beam_splitter_generator(phase, dim_p, dim_q).scale(theta);
    // K conserves n_p + n_q, so exponentiate each photon-number block on its own
    let d = dim_p * dim_q;
    let mut u = DMatrix::<C64>::zeros(d, d);
    for total in 0..dim_p + dim_q - 1 {
        let block: Vec<usize> = (0..dim_p)
            .filter(|&np| total >= np && total - np < dim_q)
            .map(|np| np * dim_q + (total - np))
            .collect();
        let sub = DMatrix::from_fn(block.len(), block.len(), |i, j| generator[(block[i], block[j])]).exp();
        for (i, &bi) in block.iter().enumerate() {
            for (j, &bj) in block.iter().enumerate() {
                u[(bi, bj)] = sub[(i, j)];
            }
        }
    }
    Ok(u)
}

/// e^{iφ} a_q†a_p − e^{−iφ} a_p†a_q on the truncated two-mode space.
fn beam_splitter_generator(phase: C64, dim_p: usize, dim_q: usize) -> DMatrix<C64> {
    let d = dim_p * dim_q;
    let mut k = DMatrix::<C64>::zeros(d, d);
    // a_q†a_p |n_p, n_q⟩ = √(n_p(n_q+1)) |n_p−1, n_q+1⟩
    for np in 1..dim_p {
        for nq in 0..dim_q - 1 {
            let from = np * dim_q + nq;
            let to = (np - 1) * dim_q + nq + 1;
            let amp = ((np * (nq + 1)) as f64).sqrt();
            k[(to, from)] += phase * amp;
            k[(from, to)] -= phase.conj() * amp;
        }
    }
    k
}

/// max |U†U − I|
pub fn unitarity_error(u: &DMatrix<C64>) -> f64 {
    let prod = u.adjoint() * u;
    max_abs_diff(&prod, &DMatrix::identity(u.nrows(), u.ncols()))
}
