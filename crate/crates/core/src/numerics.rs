//! Dense complex linear algebra used by every other module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Hermitian operators carry a
//! [`Hermitian`] wrapper that certifies (and enforces, by symmetrization) the
//! Hermitian property. All routines are pure and thread-safe.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

const EIGH_MAX_SWEEPS: usize = 10_000;

/// Numerical thresholds shared by validation and the spectral routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Maximum entrywise asymmetry `|M_ij - conj(M_ji)|` accepted as Hermitian.
    pub herm: f64,
    /// Eigenvalues above `-psd` count as nonnegative (and are clipped to 0).
    pub psd: f64,
    /// Reconstruction / completeness residual, Frobenius norm.
    pub recon: f64,
    /// Orthonormality and unitarity residual.
    pub ortho: f64,
    /// Relative threshold (times the largest eigenvalue) below which an
    /// eigenvalue pair sum counts as zero.
    pub zero_eig: f64,
    /// Relative threshold for commutator norms.
    pub commute: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-10,
            psd: 1e-10,
            recon: 1e-9,
            ortho: 1e-9,
            zero_eig: 1e-12,
            commute: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("herm", self.herm),
            ("psd", self.psd),
            ("recon", self.recon),
            ("ortho", self.ortho),
            ("zero_eig", self.zero_eig),
            ("commute", self.commute),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::ConfigInvalid(format!(
                    "tolerance {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A square complex matrix certified Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian(CMatrix);

impl Hermitian {
    /// Checks squareness, finiteness and Hermiticity within `tol.herm`, then
    /// stores the exactly symmetrized matrix `(M + M†)/2`.
    pub fn new(m: CMatrix, tol: &Tolerances) -> Result<Self> {
        check_square(&m)?;
        check_finite(&m)?;
        let residual = asymmetry(&m);
        if residual > tol.herm {
            return Err(Error::NotHermitian { residual });
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without checking. Use for matrices Hermitian by construction.
    pub fn symmetrized(m: CMatrix) -> Self {
        let adj = m.adjoint();
        Self((m + adj).scale(0.5))
    }

    pub fn identity(d: usize) -> Self {
        Self(CMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        Self(CMatrix::zeros(d, d))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        Self(CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                Complex64::new(diag[i], 0.0)
            } else {
                ZERO
            }
        }))
    }

    /// `|v⟩⟨v|` (no normalization applied).
    pub fn outer(v: &CVector) -> Self {
        Self::symmetrized(v * v.adjoint())
    }

    /// `|j⟩⟨j|` in dimension `d`.
    pub fn basis_projector(d: usize, j: usize) -> Self {
        let mut m = CMatrix::zeros(d, d);
        m[(j, j)] = ONE;
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    /// `U M U†`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Self {
        Self::symmetrized(u * &self.0 * u.adjoint())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn trace_re(&self) -> f64 {
        self.0.trace().re
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors
/// (stored as columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, l: usize) -> CVector {
        self.vectors.column(l).into_owned()
    }

    pub fn max_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `Σ_l λ_l |φ_l⟩⟨φ_l|`.
    pub fn reconstruct(&self) -> CMatrix {
        let d = self.vectors.nrows();
        let mut out = CMatrix::zeros(d, d);
        for (l, &lam) in self.values.iter().enumerate() {
            let v = self.vectors.column(l);
            out += (v * v.adjoint()).scale(lam);
        }
        out
    }

    /// Matrix elements `⟨φ_l|A|φ_l'⟩`.
    pub fn in_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * a * &self.vectors
    }

    /// Largest `|⟨φ_l|φ_l'⟩ - δ_ll'|`.
    pub fn orthonormality_residual(&self) -> f64 {
        max_abs(&(self.vectors.adjoint() * &self.vectors - CMatrix::identity(self.dim(), self.dim())))
    }
}

/// Hermitian eigendecomposition, eigenvalues descending.
///
/// Each eigenvector is rotated so its largest-magnitude component (first one
/// on ties) is real and positive. Identical input bytes give identical output.
pub fn eigh(m: &Hermitian) -> Result<Spectrum> {
    let d = m.dim();
    if d == 0 {
        return Err(Error::Empty("matrix"));
    }
    let eig = nalgebra::SymmetricEigen::try_new(m.matrix().clone(), f64::EPSILON, EIGH_MAX_SWEEPS)
        .ok_or_else(|| Error::NumericalFailure("Hermitian eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..d).collect();
    // stable sort keeps solver order on exact ties
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut vectors = CMatrix::zeros(d, d);
    let mut values = Vec::with_capacity(d);
    for (col, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let mut v = eig.eigenvectors.column(src).into_owned();
        fix_phase(&mut v);
        vectors.set_column(col, &v);
    }
    Ok(Spectrum { values, vectors })
}

fn fix_phase(v: &mut CVector) {
    let mut best = 0usize;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let mag = z.norm();
        if mag > best_mag * (1.0 + 1e-12) + 1e-15 {
            best = i;
            best_mag = mag;
        }
    }
    if best_mag > 0.0 {
        let z = v[best];
        let phase = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= phase;
        }
        v[best] = Complex64::new(v[best].norm(), 0.0);
    }
}

/// Positive square root of a PSD operator. Eigenvalues in `[-tol.psd, 0)`
/// are clipped to zero.
pub fn psd_sqrt(m: &Hermitian, tol: &Tolerances) -> Result<Hermitian> {
    let spec = eigh(m)?;
    let min = spec.min_value();
    if min < -tol.psd {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let roots: Vec<f64> = spec.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    Ok(Hermitian::symmetrized(spectral_function(&spec, &roots)))
}

/// `Σ_l f_l |φ_l⟩⟨φ_l|` for given per-eigenvector values.
pub fn spectral_function(spec: &Spectrum, f: &[f64]) -> CMatrix {
    let v = &spec.vectors;
    let mut scaled = v.clone();
    for (l, &fl) in f.iter().enumerate() {
        scaled.column_mut(l).scale_mut(fl);
    }
    scaled * v.adjoint()
}

/// `exp(i t H)` for Hermitian `H`.
pub fn expm_i(h: &Hermitian, t: f64) -> Result<CMatrix> {
    let spec = eigh(h)?;
    let v = &spec.vectors;
    let mut scaled = v.clone();
    for (l, &lam) in spec.values.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, t * lam);
        for x in scaled.column_mut(l).iter_mut() {
            *x *= phase;
        }
    }
    Ok(scaled * v.adjoint())
}

/// Completes a stacked block column `(V_11; …; V_n1)` to a unitary.
///
/// Row index of the output is `register * d' + system`. The first `d`
/// columns are the input; the rest come from Gram–Schmidt over the canonical
/// basis vectors taken in index order.
pub fn complete_to_unitary(first_block_column: &[CMatrix], tol: &Tolerances) -> Result<CMatrix> {
    let first = first_block_column.first().ok_or(Error::Empty("block column"))?;
    let (rows, cols) = first.shape();
    for b in first_block_column {
        if b.shape() != (rows, cols) {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: b.nrows(),
            });
        }
    }
    let n = first_block_column.len();
    let total = n * rows;
    if cols > total {
        return Err(Error::BadDimension(format!(
            "{cols} columns cannot be orthonormal in dimension {total}"
        )));
    }
    let mut stacked = CMatrix::zeros(total, cols);
    for (j, b) in first_block_column.iter().enumerate() {
        stacked.view_mut((j * rows, 0), (rows, cols)).copy_from(b);
    }
    let gram = stacked.adjoint() * &stacked;
    let residual = (gram - CMatrix::identity(cols, cols)).norm();
    if residual > tol.recon {
        return Err(Error::NotIsometry { residual });
    }

    let mut basis: Vec<CVector> = (0..cols).map(|c| stacked.column(c).into_owned()).collect();
    for e in 0..total {
        if basis.len() == total {
            break;
        }
        let mut v = CVector::zeros(total);
        v[e] = ONE;
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let overlap = b.dotc(&v);
                v -= b * overlap;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v.unscale(norm));
        }
    }
    if basis.len() != total {
        return Err(Error::NumericalFailure("unitary completion ran out of basis vectors".into()));
    }
    let u = CMatrix::from_columns(&basis);
    let resid = unitarity_residual(&u);
    if resid > tol.ortho {
        return Err(Error::NumericalFailure(format!(
            "completed matrix is not unitary (residual {resid:e})"
        )));
    }
    Ok(u)
}

/// `‖AB − BA‖_F`.
pub fn comm_norm(a: &Hermitian, b: &Hermitian) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    Ok(commutator(a.matrix(), b.matrix()).norm())
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `max(‖U†U − I‖_F, ‖UU† − I‖_F)`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let id = CMatrix::identity(u.nrows(), u.ncols());
    let a = (u.adjoint() * u - &id).norm();
    let b = (u * u.adjoint() - &id).norm();
    a.max(b)
}

pub fn check_unitary(u: &CMatrix, tol: &Tolerances) -> Result<()> {
    let residual = unitarity_residual(u);
    if residual > tol.ortho {
        return Err(Error::NotUnitary { residual });
    }
    Ok(())
}

/// Largest entrywise `|M_ij − conj(M_ji)|`.
pub fn asymmetry(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn check_square(m: &CMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Err(Error::Empty("matrix"));
    }
    Ok(())
}

pub fn check_finite(m: &CMatrix) -> Result<()> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let z = m[(r, c)];
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFinite { row: r, col: c });
            }
        }
    }
    Ok(())
}

pub(crate) fn same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Real part of `tr(AB)` for Hermitian `A`, `B`, without forming the product.
pub fn trace_product_re(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            s += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    s
}
