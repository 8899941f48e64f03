use num_complex::Complex64;
use povm_coherence::metrology::*;
use povm_coherence::numerics::{CVector, Hermitian, Tolerances};
use povm_coherence::qfi::qfi;
use povm_coherence::states::{random_hermitian, random_povm_with, random_state_with, rng_from_seed, DensityMatrix, Povm};
use proptest::prelude::*;
use rand::Rng;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn saturating() -> (DensityMatrix, Hermitian, Povm) {
    let r = 0.5f64.sqrt();
    let plus = CVector::from_vec(vec![Complex64::new(r, 0.0), Complex64::new(r, 0.0)]);
    let minus = CVector::from_vec(vec![Complex64::new(r, 0.0), Complex64::new(-r, 0.0)]);
    let rho = DensityMatrix::pure(&plus, &tol()).unwrap();
    let m = Povm::from_hermitians(vec![Hermitian::outer(&plus), Hermitian::outer(&minus)], &tol()).unwrap();
    (rho, Hermitian::basis_projector(2, 0), m)
}

#[test]
fn mle_variance_approaches_classical_bound() {
    let (rho, a, m) = saturating();
    let rec = simulate_estimation(&rho, &a, &m, std::f64::consts::FRAC_PI_2, 1000, 2000, 11, &tol()).unwrap();
    assert!((rec.cfi - 1.0).abs() <= 1e-6);
    let ratio = rec.ratio.value().unwrap();
    assert!((0.9..=1.3).contains(&ratio), "ratio {ratio}");
    let var = rec.variance.value().unwrap();
    let q = rec.quantum_bound.value().unwrap();
    assert!(var >= q * 0.9);
    assert!(1.0 / var <= 1.1 * 1000.0 * qfi(&rho, &a, &tol()).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn classical_never_exceeds_quantum(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let d = rng.random_range(2..=4);
        let rho = random_state_with(d, rng.random_range(1..=d), &mut rng).unwrap();
        let a = random_hermitian(d, &mut rng);
        let n = rng.random_range(2..=5);
        let m = random_povm_with(d, n, &mut rng).unwrap();
        let theta = rng.random_range(-3.0..3.0);
        let c = classical_fisher(&rho, &a, &m, theta).unwrap();
        let q = qfi(&rho, &a, &tol()).unwrap();
        prop_assert!(c >= -1e-9);
        prop_assert!(c <= q + 1e-6, "{} > {}", c, q);
    }

    #[test]
    fn budget_reciprocals_sum_exactly(seed in any::<u64>(), n in 1u64..10_000) {
        let mut rng = rng_from_seed(seed);
        let d = rng.random_range(2..=4);
        let rho = random_state_with(d, rng.random_range(1..=d), &mut rng).unwrap();
        let m = random_povm_with(d, rng.random_range(2..=4), &mut rng).unwrap();
        let b = uncertainty_budget(&rho, &m, n, &tol()).unwrap();
        prop_assert_eq!(b.reciprocal_sum(), b.sum_bound);
    }
}
