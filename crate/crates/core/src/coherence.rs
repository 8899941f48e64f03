//! Coherence measures built from the quantum Fisher information.
//!
//! * [`cf_direct`]: `Σ_j F(ρ, E_j)` on the system itself.
//! * [`cf_embedded`]: `Σ_j F(ρ_ε, P̄_j)` on the canonical Naimark embedding.
//! * [`cf_block`], [`cf_standard`]: projective and rank-one specializations.
//!
//! For projective measurements the direct and embedded values agree. For
//! general POVMs they differ by `4 Σ_j tr(ρ(E_j − E_j²))`, which
//! [`naimark_gap`] reports next to the measured difference.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::naimark::{embed_state, kraus_roots, register_projector, KrausRoots};
use crate::numerics::{same_dim, trace_product_re, CMatrix, Hermitian, Tolerances};
use crate::qfi::qfi;
use crate::states::{
    block_dephase, derive_seed, haar_unitary, incoherence_residual, random_block_incoherent_state_with,
    random_povm_with, random_projective_with, random_state_with, rng_from_seed, BasisMeasurement,
    DensityMatrix, Povm, ProjectiveMeasurement,
};

/// `|gap|` at or below this is reported as agreement.
pub const AGREEMENT_TOL: f64 = 1e-8;

/// `F(ρ, E_j)` for each element.
pub fn per_element_values(rho: &DensityMatrix, povm: &Povm, tol: &Tolerances) -> Result<Vec<f64>> {
    same_dim(povm.dim(), rho.dim())?;
    povm.elements().iter().map(|e| qfi(rho, e, tol)).collect()
}

pub fn cf_direct(rho: &DensityMatrix, povm: &Povm, tol: &Tolerances) -> Result<f64> {
    Ok(per_element_values(rho, povm, tol)?.iter().sum())
}

/// Measure evaluated on the Naimark embedding with canonical roots `√E_j`.
pub fn cf_embedded(rho: &DensityMatrix, povm: &Povm, tol: &Tolerances) -> Result<f64> {
    same_dim(povm.dim(), rho.dim())?;
    let roots = kraus_roots(povm, None, tol)?;
    cf_embedded_with(rho, &roots, tol)
}

/// Same as [`cf_embedded`] for an arbitrary root choice `A_j = U_j √E_j`.
pub fn cf_embedded_with(rho: &DensityMatrix, roots: &KrausRoots, tol: &Tolerances) -> Result<f64> {
    let emb = embed_state(rho, roots, tol)?;
    let n = roots.len();
    let d = roots.dim();
    let mut total = 0.0;
    for j in 0..n {
        total += qfi(&emb, &register_projector(n, d, j), tol)?;
    }
    Ok(total)
}

pub fn cf_block(rho: &DensityMatrix, p: &ProjectiveMeasurement, tol: &Tolerances) -> Result<f64> {
    cf_direct(rho, p.as_povm(), tol)
}

pub fn cf_standard(rho: &DensityMatrix, basis: &BasisMeasurement, tol: &Tolerances) -> Result<f64> {
    same_dim(basis.dim(), rho.dim())?;
    let mut total = 0.0;
    for j in 0..basis.dim() {
        total += qfi(rho, &basis.projector(j), tol)?;
    }
    Ok(total)
}

/// `4 Σ_j tr(ρ(E_j − E_j²))`, the contribution of the register sector that
/// the system-only formula does not see.
pub fn conjectured_gap(rho: &DensityMatrix, povm: &Povm) -> Result<f64> {
    same_dim(povm.dim(), rho.dim())?;
    let mut total = 0.0;
    for e in povm.elements() {
        let m = e.matrix();
        let defect = m - m * m;
        total += trace_product_re(rho.matrix(), &defect);
    }
    Ok(4.0 * total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Agreement {
    Agrees,
    Disagrees,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoherenceReport {
    pub direct_value: f64,
    pub embedded_value: f64,
    pub gap: f64,
    pub per_element_values: Vec<f64>,
    pub conjectured_gap: f64,
    pub agreement: Agreement,
}

pub fn naimark_gap(rho: &DensityMatrix, povm: &Povm, tol: &Tolerances) -> Result<CoherenceReport> {
    let per_element_values = per_element_values(rho, povm, tol)?;
    let direct_value: f64 = per_element_values.iter().sum();
    let embedded_value = cf_embedded(rho, povm, tol)?;
    let gap = embedded_value - direct_value;
    let agreement = if gap.abs() <= AGREEMENT_TOL {
        Agreement::Agrees
    } else {
        Agreement::Disagrees
    };
    Ok(CoherenceReport {
        direct_value,
        embedded_value,
        gap,
        per_element_values,
        conjectured_gap: conjectured_gap(rho, povm)?,
        agreement,
    })
}

// ---------------------------------------------------------------------------
// axiom suite

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomConfig {
    pub dims: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub name: &'static str,
    pub max_violation: f64,
    pub threshold: f64,
    pub checks: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub config: AxiomConfig,
    pub properties: Vec<PropertyReport>,
    pub passed: bool,
}

/// Property names with their pass thresholds, in report order.
pub const AXIOM_PROPERTIES: [(&str, f64); 9] = [
    // cf_block of a block-incoherent state
    ("faithfulness_incoherent", 1e-10),
    // shortfall below 1e-8 of cf_block on states with residual >= 1e-3
    ("faithfulness_coherent", 0.0),
    ("convexity_block", 1e-9),
    ("convexity_direct", 1e-9),
    // relative to 1 + value
    ("unitary_covariance_embedded", 1e-9),
    ("block_additivity", 1e-9),
    ("monotonicity_dephasing", 1e-9),
    ("monotonicity_block_unitary", 1e-9),
    ("monotonicity_block_permutation", 1e-9),
];

const COHERENT_FLOOR: f64 = 1e-8;
const COHERENT_RESIDUAL: f64 = 1e-3;

type TrialViolations = [Option<f64>; 9];

/// Runs the property checks for every `(dim, trial)` pair. Trials run in
/// parallel; each trial seeds its own generator from `(seed, dim, trial)`.
pub fn axiom_suite(config: &AxiomConfig, tol: &Tolerances) -> Result<AxiomReport> {
    let jobs: Vec<(usize, usize)> = config
        .dims
        .iter()
        .flat_map(|&d| (0..config.trials).map(move |t| (d, t)))
        .collect();
    let outcomes: Vec<TrialViolations> = jobs
        .par_iter()
        .map(|&(d, t)| axiom_trial(d, derive_seed(config.seed, &[d as u64, t as u64]), tol))
        .collect::<Result<_>>()?;

    let mut properties = Vec::with_capacity(AXIOM_PROPERTIES.len());
    for (i, &(name, threshold)) in AXIOM_PROPERTIES.iter().enumerate() {
        let vals: Vec<f64> = outcomes.iter().filter_map(|o| o[i]).collect();
        let max_violation = vals.iter().copied().fold(0.0, f64::max);
        properties.push(PropertyReport {
            name,
            max_violation,
            threshold,
            checks: vals.len(),
            passed: max_violation <= threshold,
        });
    }
    let passed = properties.iter().all(|p| p.passed);
    Ok(AxiomReport {
        config: config.clone(),
        properties,
        passed,
    })
}

fn axiom_trial(d: usize, seed: u64, tol: &Tolerances) -> Result<TrialViolations> {
    use rand::Rng;
    let mut rng = rng_from_seed(seed);
    let mut out: TrialViolations = [None; 9];
    let p = random_projective_with(d, 2, &mut rng)?;
    let n = p.len();

    // faithfulness
    let inc = random_block_incoherent_state_with(&p, &mut rng)?;
    out[0] = Some(cf_block(&inc, &p, tol)?);
    let coh = random_state_with(d, d, &mut rng)?;
    if incoherence_residual(&coh, p.as_povm())? >= COHERENT_RESIDUAL {
        out[1] = Some((COHERENT_FLOOR - cf_block(&coh, &p, tol)?).max(0.0));
    }

    // convexity
    let r1 = random_state_with(d, rng.random_range(1..=d), &mut rng)?;
    let r2 = random_state_with(d, rng.random_range(1..=d), &mut rng)?;
    let w: f64 = rng.random();
    let mix = DensityMatrix::mix(w, &r1, &r2, tol)?;
    let lhs = cf_block(&mix, &p, tol)?;
    let rhs = w * cf_block(&r1, &p, tol)? + (1.0 - w) * cf_block(&r2, &p, tol)?;
    out[2] = Some((lhs - rhs).max(0.0));
    let e = random_povm_with(d, rng.random_range(2..=4), &mut rng)?;
    let lhs = cf_direct(&mix, &e, tol)?;
    let rhs = w * cf_direct(&r1, &e, tol)? + (1.0 - w) * cf_direct(&r2, &e, tol)?;
    out[3] = Some((lhs - rhs).max(0.0));

    // unitary covariance of the embedded measure
    let roots = kraus_roots(&e, None, tol)?;
    let emb = embed_state(&r1, &roots, tol)?;
    let ne = e.len();
    let u = haar_unitary(ne * d, &mut rng);
    let rotated = emb.conjugate_by(&u, tol)?;
    let mut before = 0.0;
    let mut after = 0.0;
    for j in 0..ne {
        let bar = register_projector(ne, d, j);
        before += qfi(&emb, &bar, tol)?;
        after += qfi(&rotated, &bar.conjugate_by(&u), tol)?;
    }
    out[4] = Some((after - before).abs() / (1.0 + before));

    if n >= 2 {
        // block additivity on a direct sum split across two groups of blocks
        let m = rng.random_range(1..n);
        let group = |range: std::ops::Range<usize>| {
            let mut q = CMatrix::zeros(d, d);
            for j in range {
                q += p.projectors()[j].matrix();
            }
            q
        };
        let q1 = group(0..m);
        let q2 = group(m..n);
        let s1 = random_state_with(d, d, &mut rng)?;
        let s2 = random_state_with(d, d, &mut rng)?;
        let restrict = |q: &CMatrix, s: &DensityMatrix| -> Result<DensityMatrix> {
            let b = q * s.matrix() * q;
            let tr = b.trace().re;
            DensityMatrix::from_hermitian(Hermitian::symmetrized(b.unscale(tr)), tol)
        };
        let rho1 = restrict(&q1, &s1)?;
        let rho2 = restrict(&q2, &s2)?;
        let w: f64 = rng.random();
        let sum = DensityMatrix::mix(w, &rho1, &rho2, tol)?;
        let lhs = cf_block(&sum, &p, tol)?;
        let rhs = w * cf_block(&rho1, &p, tol)? + (1.0 - w) * cf_block(&rho2, &p, tol)?;
        out[5] = Some((lhs - rhs).abs());
    }

    // monotonicity under block-incoherent channels
    let rho = random_state_with(d, d, &mut rng)?;
    let base = cf_block(&rho, &p, tol)?;
    let deph = DensityMatrix::from_hermitian(Hermitian::symmetrized(block_dephase(rho.matrix(), &p)), tol)?;
    out[6] = Some((cf_block(&deph, &p, tol)? - base).max(0.0));

    let isos: Vec<CMatrix> = (0..n).map(|j| p.block_isometry(j)).collect::<Result<_>>()?;
    let mut k = CMatrix::zeros(d, d);
    for q in &isos {
        let uj = haar_unitary(q.ncols(), &mut rng);
        k += q * uj * q.adjoint();
    }
    let rotated = rho.conjugate_by(&k, tol)?;
    out[7] = Some((cf_block(&rotated, &p, tol)? - base).max(0.0));

    let dims = p.block_dims();
    let pair = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).find(|&(a, b)| dims[a] == dims[b]);
    if let Some((a, b)) = pair {
        let mut perm = CMatrix::zeros(d, d);
        for (j, q) in isos.iter().enumerate() {
            if j != a && j != b {
                perm += q * q.adjoint();
            }
        }
        perm += &isos[b] * isos[a].adjoint() + &isos[a] * isos[b].adjoint();
        let swapped = rho.conjugate_by(&perm, tol)?;
        out[8] = Some((cf_block(&swapped, &p, tol)? - base).max(0.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::CVector;
    use crate::states::{random_basis, random_povm, random_projective, random_state};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn plus() -> DensityMatrix {
        let r = 0.5f64.sqrt();
        let v = CVector::from_vec(vec![Complex64::new(r, 0.0), Complex64::new(r, 0.0)]);
        DensityMatrix::pure(&v, &tol()).unwrap()
    }

    fn half_half() -> Povm {
        let h = CMatrix::identity(2, 2).scale(0.5);
        Povm::new(vec![h.clone(), h], &tol()).unwrap()
    }

    #[test]
    fn direct_examples() {
        let comp = ProjectiveMeasurement::computational(2);
        let diag = DensityMatrix::new(Hermitian::from_real_diagonal(&[0.3, 0.7]).into_inner(), &tol()).unwrap();
        assert_eq!(cf_direct(&diag, comp.as_povm(), &tol()).unwrap(), 0.0);
        assert_abs_diff_eq!(cf_direct(&plus(), comp.as_povm(), &tol()).unwrap(), 2.0, epsilon = 1e-12);

        let rho = crate::convexroof::counterexample_state().unwrap();
        let comp3 = ProjectiveMeasurement::computational(3);
        assert_abs_diff_eq!(cf_direct(&rho, comp3.as_povm(), &tol()).unwrap(), 4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn embedded_examples() {
        for seed in 0..10 {
            let p = random_projective(3, seed).unwrap();
            let rho = random_state(3, 3, seed).unwrap();
            let a = cf_direct(&rho, p.as_povm(), &tol()).unwrap();
            let b = cf_embedded(&rho, p.as_povm(), &tol()).unwrap();
            assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
        let rho = random_state(2, 2, 77).unwrap();
        assert_abs_diff_eq!(cf_direct(&rho, &half_half(), &tol()).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cf_embedded(&rho, &half_half(), &tol()).unwrap(), 2.0, epsilon = 1e-9);

        let single = Povm::new(vec![CMatrix::identity(2, 2)], &tol()).unwrap();
        assert_abs_diff_eq!(cf_embedded(&rho, &single, &tol()).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn block_and_standard_examples() {
        let comp = ProjectiveMeasurement::computational(2);
        assert_abs_diff_eq!(cf_block(&plus(), &comp, &tol()).unwrap(), 2.0, epsilon = 1e-12);
        let single = ProjectiveMeasurement::new(vec![CMatrix::identity(2, 2)], &tol()).unwrap();
        assert_abs_diff_eq!(cf_block(&plus(), &single, &tol()).unwrap(), 0.0, epsilon = 1e-12);
        let p = random_projective(4, 3).unwrap();
        let inc = crate::states::random_block_incoherent_state(&p, 3).unwrap();
        assert!(cf_block(&inc, &p, &tol()).unwrap() <= 1e-10);

        let b = BasisMeasurement::computational(2);
        assert_abs_diff_eq!(cf_standard(&plus(), &b, &tol()).unwrap(), 2.0, epsilon = 1e-12);
        let diag = DensityMatrix::new(Hermitian::from_real_diagonal(&[0.1, 0.9]).into_inner(), &tol()).unwrap();
        assert_eq!(cf_standard(&diag, &b, &tol()).unwrap(), 0.0);
        let rho = crate::convexroof::counterexample_state().unwrap();
        assert_abs_diff_eq!(
            cf_standard(&rho, &BasisMeasurement::computational(3), &tol()).unwrap(),
            4.0 / 3.0,
            epsilon = 1e-12
        );

        let b = random_basis(3, 5);
        let rho = random_state(3, 2, 6).unwrap();
        let s = cf_standard(&rho, &b, &tol()).unwrap();
        let k = cf_block(&rho, &b.to_projective(), &tol()).unwrap();
        assert_abs_diff_eq!(s, k, epsilon = 1e-12);
    }

    #[test]
    fn gap_report_examples() {
        let comp = ProjectiveMeasurement::computational(2);
        let r = naimark_gap(&plus(), comp.as_povm(), &tol()).unwrap();
        assert_eq!(r.agreement, Agreement::Agrees);
        assert!(r.gap.abs() <= 1e-8);

        let rho = random_state(2, 2, 4).unwrap();
        let r = naimark_gap(&rho, &half_half(), &tol()).unwrap();
        assert_eq!(r.agreement, Agreement::Disagrees);
        assert_abs_diff_eq!(r.gap, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.conjectured_gap, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.direct_value, r.per_element_values.iter().sum::<f64>(), epsilon = 1e-15);
    }

    #[test]
    fn gap_matches_closed_form() {
        for seed in 0..40 {
            let e = random_povm(3, 2 + (seed % 3) as usize, seed).unwrap();
            let rho = random_state(3, 1 + (seed % 3) as usize, seed + 500).unwrap();
            let r = naimark_gap(&rho, &e, &tol()).unwrap();
            assert!(r.gap >= -1e-9);
            assert!((r.gap - r.conjectured_gap).abs() <= 1e-8, "{} vs {}", r.gap, r.conjectured_gap);
        }
    }

    #[test]
    fn twist_invariance_of_embedded_value() {
        let e = random_povm(2, 3, 40).unwrap();
        let rho = random_state(2, 2, 41).unwrap();
        let base = cf_embedded(&rho, &e, &tol()).unwrap();
        let mut rng = rng_from_seed(42);
        for _ in 0..10 {
            let ts: Vec<CMatrix> = (0..3).map(|_| haar_unitary(2, &mut rng)).collect();
            let roots = kraus_roots(&e, Some(&ts), &tol()).unwrap();
            let v = cf_embedded_with(&rho, &roots, &tol()).unwrap();
            assert!((v - base).abs() <= 1e-9);
        }
    }

    #[test]
    fn axiom_suite_qubit_basis() {
        let cfg = AxiomConfig {
            dims: vec![2],
            trials: 100,
            seed: 9,
        };
        let report = axiom_suite(&cfg, &tol()).unwrap();
        for p in &report.properties {
            assert!(p.max_violation <= 1e-8, "{}: {}", p.name, p.max_violation);
        }
        assert!(report.passed);
        // d = 2 always splits into two rank-one blocks of equal size
        assert_eq!(report.properties[8].checks, 100);
    }

    #[test]
    fn axiom_suite_is_deterministic() {
        let cfg = AxiomConfig {
            dims: vec![3, 4],
            trials: 8,
            seed: 1,
        };
        let a = axiom_suite(&cfg, &tol()).unwrap();
        let b = axiom_suite(&cfg, &tol()).unwrap();
        assert_eq!(a, b);
        assert!(a.passed, "{a:#?}");
    }
}
