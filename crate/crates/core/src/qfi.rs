//! Quantum Fisher information of `ρ(θ) = e^{-iAθ} ρ e^{iAθ}`.
//!
//! Convention: `F(ρ, A) = 2 Σ_{λ_l+λ_l'>0} (λ_l − λ_l')²/(λ_l + λ_l') |⟨φ_l|A|φ_l'⟩|²`,
//! which gives `4 Var(A)` on pure states. The `Z_A` route evaluates
//! `tr(ρA²) − tr(Z_A²)`, a quarter of `F`, and is rescaled by 4 here so
//! every function in this module returns the same quantity.

use crate::error::{Error, Result};
use crate::numerics::{same_dim, trace_product_re, CMatrix, CVector, Hermitian, Tolerances};
use crate::states::{DensityMatrix, TRACE_TOL};

/// `λ_l + λ_l'` at or below this value (relative to the largest eigenvalue)
/// is treated as a zero pair.
fn pair_threshold(lam: &[f64], tol: &Tolerances) -> f64 {
    tol.zero_eig * lam.iter().copied().fold(0.0, f64::max)
}

/// Eigenvalues of `ρ` with anything at or below `zero_eig·λ_max` set to 0.
/// Coefficients such as `√(λλ')` would otherwise turn round-off in the
/// kernel into errors of order `√ε`.
pub(crate) fn effective_eigenvalues(rho: &DensityMatrix, tol: &Tolerances) -> Vec<f64> {
    let mut lam = rho.clipped_eigenvalues();
    let thresh = pair_threshold(&lam, tol);
    for l in lam.iter_mut() {
        if *l <= thresh {
            *l = 0.0;
        }
    }
    lam
}

/// Spectral formula for the quantum Fisher information.
pub fn qfi(rho: &DensityMatrix, a: &Hermitian, tol: &Tolerances) -> Result<f64> {
    same_dim(rho.dim(), a.dim())?;
    let lam = effective_eigenvalues(rho, tol);
    let elems = rho.spectrum().in_eigenbasis(a.matrix());
    let thresh = pair_threshold(&lam, tol);
    let d = lam.len();
    let mut sum = 0.0;
    for l in 0..d {
        for m in 0..d {
            let s = lam[l] + lam[m];
            if s <= thresh {
                continue;
            }
            let diff = lam[l] - lam[m];
            sum += diff * diff / s * elems[(l, m)].norm_sqr();
        }
    }
    Ok(2.0 * sum)
}

/// `4 (⟨ψ|A²|ψ⟩ − ⟨ψ|A|ψ⟩²)` for a normalized `ψ`.
pub fn pure_qfi(psi: &CVector, a: &Hermitian) -> Result<f64> {
    same_dim(a.dim(), psi.len())?;
    let norm = psi.norm();
    if (norm - 1.0).abs() > TRACE_TOL {
        return Err(Error::NotNormalized { norm });
    }
    Ok(4.0 * variance(psi, a.matrix()))
}

pub(crate) fn variance(psi: &CVector, a: &CMatrix) -> f64 {
    let a_psi = a * psi;
    let mean = psi.dotc(&a_psi).re;
    (a_psi.norm_squared() - mean * mean).max(0.0)
}

/// `Z_A = Σ_{l,l'} √(2λ_lλ_l'/(λ_l+λ_l')) |φ_l⟩⟨φ_l|A|φ_l'⟩⟨φ_l'|`, with the
/// coefficient of zero pairs set to 0. Returned in the original basis.
pub fn z_matrix(rho: &DensityMatrix, a: &Hermitian, tol: &Tolerances) -> Result<Hermitian> {
    same_dim(rho.dim(), a.dim())?;
    let lam = effective_eigenvalues(rho, tol);
    let spec = rho.spectrum();
    let mut elems = spec.in_eigenbasis(a.matrix());
    let thresh = pair_threshold(&lam, tol);
    let d = lam.len();
    for l in 0..d {
        for m in 0..d {
            let s = lam[l] + lam[m];
            let c = if s <= thresh {
                0.0
            } else {
                (2.0 * lam[l] * lam[m] / s).sqrt()
            };
            elems[(l, m)] *= c;
        }
    }
    let z = &spec.vectors * elems * spec.vectors.adjoint();
    Ok(Hermitian::symmetrized(z))
}

/// `4 (tr(ρA²) − tr(Z_A²))`.
pub fn qfi_via_z(rho: &DensityMatrix, a: &Hermitian, tol: &Tolerances) -> Result<f64> {
    let z = z_matrix(rho, a, tol)?;
    let a2 = a.matrix() * a.matrix();
    let first = trace_product_re(rho.matrix(), &a2);
    let second = trace_product_re(z.matrix(), z.matrix());
    Ok(4.0 * (first - second))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{ONE, ZERO};
    use crate::states::random_state;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn plus() -> CVector {
        let r = 0.5f64.sqrt();
        CVector::from_vec(vec![Complex64::new(r, 0.0), Complex64::new(r, 0.0)])
    }

    fn sigma_x() -> Hermitian {
        Hermitian::symmetrized(CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]))
    }

    #[test]
    fn maximally_mixed_has_zero_qfi() {
        let rho = DensityMatrix::maximally_mixed(3);
        let a = Hermitian::from_real_diagonal(&[1.0, -2.0, 0.5]);
        assert_eq!(qfi(&rho, &a, &tol()).unwrap(), 0.0);
        assert_abs_diff_eq!(qfi_via_z(&rho, &a, &tol()).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn plus_state_projector() {
        let rho = DensityMatrix::pure(&plus(), &tol()).unwrap();
        let a = Hermitian::basis_projector(2, 0);
        assert_abs_diff_eq!(qfi(&rho, &a, &tol()).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pure_qfi(&plus(), &a).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(qfi_via_z(&rho, &a, &tol()).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pure_qfi_examples() {
        let a = Hermitian::basis_projector(3, 0);
        let e0 = CVector::from_vec(vec![ONE, ZERO, ZERO]);
        assert_eq!(pure_qfi(&e0, &a).unwrap(), 0.0);
        let r = 1.0 / 3f64.sqrt();
        let psi = CVector::from_element(3, Complex64::new(r, 0.0));
        assert_abs_diff_eq!(pure_qfi(&psi, &a).unwrap(), 8.0 / 9.0, epsilon = 1e-14);
        let unnorm = CVector::from_element(3, ONE);
        assert!(matches!(pure_qfi(&unnorm, &a), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn z_matrix_pure_state() {
        let psi = crate::states::random_vector(3, &mut crate::states::rng_from_seed(4));
        let rho = DensityMatrix::pure(&psi, &tol()).unwrap();
        let a = crate::states::random_hermitian(3, &mut crate::states::rng_from_seed(5));
        let z = z_matrix(&rho, &a, &tol()).unwrap();
        let mean = psi.dotc(&(a.matrix() * &psi)).re;
        let expect = (&psi * psi.adjoint()).scale(mean);
        assert!((z.matrix() - expect).norm() < 1e-12);
    }

    #[test]
    fn z_matrix_maximally_mixed_qubit() {
        let rho = DensityMatrix::maximally_mixed(2);
        let z = z_matrix(&rho, &sigma_x(), &tol()).unwrap();
        let expect = sigma_x().matrix().scale(0.5f64.sqrt());
        assert!((z.matrix() - expect).norm() < 1e-14);
    }

    #[test]
    fn z_matrix_identity_observable() {
        let rho = random_state(4, 3, 12).unwrap();
        let id = Hermitian::identity(4);
        let z = z_matrix(&rho, &id, &tol()).unwrap();
        assert_abs_diff_eq!(trace_product_re(z.matrix(), z.matrix()), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(qfi(&rho, &id, &tol()).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(qfi_via_z(&rho, &id, &tol()).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn counterexample_single_projector() {
        // ρ = (|φ1⟩⟨φ1| + |φ2⟩⟨φ2|)/2 with Fourier vectors; every |⟨φ_l|1⟩|² = 1/3
        let rho = crate::convexroof::counterexample_state().unwrap();
        let a = Hermitian::basis_projector(3, 0);
        assert_abs_diff_eq!(qfi(&rho, &a, &tol()).unwrap(), 4.0 / 9.0, epsilon = 1e-14);
    }

    #[test]
    fn dimension_mismatch() {
        let rho = DensityMatrix::maximally_mixed(2);
        let a = Hermitian::identity(3);
        assert!(matches!(qfi(&rho, &a, &tol()), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(z_matrix(&rho, &a, &tol()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn degenerate_perturbation_is_stable() {
        let u = crate::states::haar_unitary(3, &mut crate::states::rng_from_seed(31));
        let a = crate::states::random_hermitian(3, &mut crate::states::rng_from_seed(32));
        let base = DensityMatrix::from_spectral(&[0.4, 0.4, 0.2], &u, &tol()).unwrap();
        let pert = DensityMatrix::from_spectral(&[0.4 + 1e-13, 0.4 - 1e-13, 0.2], &u, &tol()).unwrap();
        let diff = (qfi(&base, &a, &tol()).unwrap() - qfi(&pert, &a, &tol()).unwrap()).abs();
        assert!(diff <= 1e-8, "{diff}");
        // re-diagonalized matrix picks an arbitrary frame in the degenerate space
        let rediag = DensityMatrix::new(base.matrix().clone(), &tol()).unwrap();
        let diff = (qfi(&base, &a, &tol()).unwrap() - qfi(&rediag, &a, &tol()).unwrap()).abs();
        assert!(diff <= 1e-8, "{diff}");
    }
}
