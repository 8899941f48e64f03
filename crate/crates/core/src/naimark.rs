//! Canonical Naimark extension of a POVM.
//!
//! The extended space is `H ⊗ H_R` with an `n`-level register. Matrices on
//! it use register-major indexing: row `r·d + i` is system state `i` with
//! register state `r`, so block `(j, k)` of a `nd × nd` matrix is the
//! operator attached to `|j⟩⟨k|` on the register. The ancilla is prepared
//! in the first register state (index 0).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{
    check_square, complete_to_unitary, psd_sqrt, same_dim, unitarity_residual, CMatrix, Hermitian,
    Tolerances,
};
use crate::states::{DensityMatrix, Povm};

/// Factorization `E_j = A_j†A_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausRoots {
    roots: Vec<CMatrix>,
    dim: usize,
}

impl KrausRoots {
    pub fn roots(&self) -> &[CMatrix] {
        &self.roots
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `max_j ‖A_j†A_j − E_j‖_F`.
    pub fn residual(&self, povm: &Povm) -> f64 {
        self.roots
            .iter()
            .zip(povm.elements())
            .map(|(a, e)| (a.adjoint() * a - e.matrix()).norm())
            .fold(0.0, f64::max)
    }
}

/// `A_j = U_j √E_j`, with `U_j = I` when no twists are given.
pub fn kraus_roots(povm: &Povm, twists: Option<&[CMatrix]>, tol: &Tolerances) -> Result<KrausRoots> {
    let d = povm.dim();
    if let Some(ts) = twists {
        same_dim(povm.len(), ts.len())?;
        for (index, u) in ts.iter().enumerate() {
            if u.shape() != (d, d) {
                return Err(Error::NotUnitaryTwist {
                    index,
                    residual: f64::INFINITY,
                });
            }
            let residual = unitarity_residual(u);
            if residual > tol.ortho {
                return Err(Error::NotUnitaryTwist { index, residual });
            }
        }
    }
    let mut roots = Vec::with_capacity(povm.len());
    for (j, e) in povm.elements().iter().enumerate() {
        let r = psd_sqrt(e, tol)?.into_inner();
        roots.push(match twists {
            Some(ts) => &ts[j] * r,
            None => r,
        });
    }
    Ok(KrausRoots { roots, dim: d })
}

/// Unitary `V` with first block column `(A_1; …; A_n)` and the lifted
/// projectors `P̃_j = V† P̄_j V`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaimarkExtension {
    v: CMatrix,
    lifted_projectors: Vec<Hermitian>,
    n: usize,
    d: usize,
}

impl NaimarkExtension {
    pub fn unitary(&self) -> &CMatrix {
        &self.v
    }

    pub fn lifted_projectors(&self) -> &[Hermitian] {
        &self.lifted_projectors
    }

    pub fn extension_dim(&self) -> usize {
        self.n * self.d
    }

    pub fn outcomes(&self) -> usize {
        self.n
    }

    pub fn system_dim(&self) -> usize {
        self.d
    }
}

/// `P̄_j = I_d ⊗ |j⟩⟨j|` in register-major layout.
pub fn register_projector(n: usize, d: usize, j: usize) -> Hermitian {
    let mut m = CMatrix::zeros(n * d, n * d);
    for i in 0..d {
        m[(j * d + i, j * d + i)] = crate::numerics::ONE;
    }
    Hermitian::symmetrized(m)
}

/// `ρ ⊗ |1⟩⟨1|`: `ρ` in the first register block, zeros elsewhere.
pub fn lift_state(rho: &CMatrix, n: usize) -> CMatrix {
    let d = rho.nrows();
    let mut m = CMatrix::zeros(n * d, n * d);
    m.view_mut((0, 0), (d, d)).copy_from(rho);
    m
}

pub fn build_extension(roots: &KrausRoots, tol: &Tolerances) -> Result<NaimarkExtension> {
    let n = roots.len();
    let d = roots.dim();
    let v = complete_to_unitary(roots.roots(), tol)?;
    let vd = v.adjoint();
    let lifted: Vec<Hermitian> = (0..n)
        .map(|j| Hermitian::symmetrized(&vd * register_projector(n, d, j).matrix() * &v))
        .collect();

    let mut sum = CMatrix::zeros(n * d, n * d);
    for p in &lifted {
        sum += p.matrix();
    }
    let completeness = (sum - CMatrix::identity(n * d, n * d)).norm();
    let mut orth: f64 = 0.0;
    for (j, a) in lifted.iter().enumerate() {
        for (k, b) in lifted.iter().enumerate() {
            let mut prod = a.matrix() * b.matrix();
            if j == k {
                prod -= a.matrix();
            }
            orth = orth.max(prod.norm());
        }
    }
    if completeness > tol.recon || orth > tol.recon {
        return Err(Error::NumericalFailure(format!(
            "lifted projectors violate completeness ({completeness:e}) or orthogonality ({orth:e})"
        )));
    }
    Ok(NaimarkExtension {
        v,
        lifted_projectors: lifted,
        n,
        d,
    })
}

/// `ρ_ε = Σ_{jk} A_j ρ A_k† ⊗ |j⟩⟨k|`.
pub fn embed_state(rho: &DensityMatrix, roots: &KrausRoots, tol: &Tolerances) -> Result<DensityMatrix> {
    same_dim(roots.dim(), rho.dim())?;
    let d = rho.dim();
    let n = roots.len();
    let left: Vec<CMatrix> = roots.roots().iter().map(|a| a * rho.matrix()).collect();
    let mut m = CMatrix::zeros(n * d, n * d);
    for (j, lj) in left.iter().enumerate() {
        for (k, ak) in roots.roots().iter().enumerate() {
            m.view_mut((j * d, k * d), (d, d)).copy_from(&(lj * ak.adjoint()));
        }
    }
    DensityMatrix::from_hermitian(Hermitian::symmetrized(m), tol)
}

/// Outcome probabilities of the POVM and of its lifted projectors on `ρ ⊗ |1⟩⟨1|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityReport {
    pub povm_probabilities: Vec<f64>,
    pub lifted_probabilities: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

pub fn probability_check(rho: &DensityMatrix, povm: &Povm, tol: &Tolerances) -> Result<ProbabilityReport> {
    same_dim(povm.dim(), rho.dim())?;
    let roots = kraus_roots(povm, None, tol)?;
    let ext = build_extension(&roots, tol)?;
    probability_check_with(rho, povm, &ext)
}

pub fn probability_check_with(
    rho: &DensityMatrix,
    povm: &Povm,
    ext: &NaimarkExtension,
) -> Result<ProbabilityReport> {
    same_dim(povm.dim(), rho.dim())?;
    same_dim(povm.len(), ext.outcomes())?;
    let lifted = lift_state(rho.matrix(), ext.outcomes());
    let povm_probabilities: Vec<f64> = povm
        .elements()
        .iter()
        .map(|e| crate::numerics::trace_product_re(e.matrix(), rho.matrix()))
        .collect();
    let lifted_probabilities: Vec<f64> = ext
        .lifted_projectors()
        .iter()
        .map(|p| crate::numerics::trace_product_re(p.matrix(), &lifted))
        .collect();
    let residuals: Vec<f64> = povm_probabilities
        .iter()
        .zip(&lifted_probabilities)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(ProbabilityReport {
        povm_probabilities,
        lifted_probabilities,
        residuals,
        max_residual,
    })
}

/// Block-diagonal `⊕_j U_j` acting on the register blocks.
pub fn register_block_diag(blocks: &[CMatrix]) -> Result<CMatrix> {
    let first = blocks.first().ok_or(Error::Empty("blocks"))?;
    check_square(first)?;
    let d = first.nrows();
    let n = blocks.len();
    let mut m = CMatrix::zeros(n * d, n * d);
    for (j, b) in blocks.iter().enumerate() {
        same_dim(d, b.nrows())?;
        m.view_mut((j * d, j * d), (d, d)).copy_from(b);
    }
    Ok(m)
}
