use povm_coherence::numerics::{Hermitian, Tolerances};
use povm_coherence::qfi::{pure_qfi, qfi, qfi_via_z};
use povm_coherence::states::{haar_unitary, random_hermitian, random_state_with, random_vector, rng_from_seed, DensityMatrix};
use proptest::prelude::*;
use rand::Rng;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn instance(seed: u64) -> (DensityMatrix, Hermitian, rand_chacha::ChaCha8Rng) {
    let mut rng = rng_from_seed(seed);
    let d = rng.random_range(2..=6);
    let rank = rng.random_range(1..=d);
    let rho = random_state_with(d, rank, &mut rng).unwrap();
    let a = random_hermitian(d, &mut rng);
    (rho, a, rng)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn unitary_covariance(seed in any::<u64>()) {
        let (rho, a, mut rng) = instance(seed);
        let u = haar_unitary(rho.dim(), &mut rng);
        let f = qfi(&rho, &a, &tol()).unwrap();
        let g = qfi(&rho.conjugate_by(&u, &tol()).unwrap(), &a.conjugate_by(&u), &tol()).unwrap();
        prop_assert!((f - g).abs() <= 1e-9 * (1.0 + f));
    }

    #[test]
    fn convex_in_the_state(seed in any::<u64>()) {
        let (rho, a, mut rng) = instance(seed);
        let sigma = random_state_with(rho.dim(), rho.dim(), &mut rng).unwrap();
        let p: f64 = rng.random();
        let mix = DensityMatrix::mix(p, &rho, &sigma, &tol()).unwrap();
        let lhs = qfi(&mix, &a, &tol()).unwrap();
        let rhs = p * qfi(&rho, &a, &tol()).unwrap() + (1.0 - p) * qfi(&sigma, &a, &tol()).unwrap();
        prop_assert!(lhs <= rhs + 1e-9 * (1.0 + rhs));
    }

    #[test]
    fn pure_states_give_four_variances(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let d = rng.random_range(2..=6);
        let psi = random_vector(d, &mut rng);
        let a = random_hermitian(d, &mut rng);
        let rho = DensityMatrix::pure(&psi, &tol()).unwrap();
        let f = qfi(&rho, &a, &tol()).unwrap();
        let v = pure_qfi(&psi, &a).unwrap();
        prop_assert!((f - v).abs() <= 1e-10 * (1.0 + v), "{} vs {}", f, v);
    }

    #[test]
    fn spectral_and_z_routes_agree(seed in any::<u64>()) {
        let (rho, a, _) = instance(seed);
        let f = qfi(&rho, &a, &tol()).unwrap();
        let z = qfi_via_z(&rho, &a, &tol()).unwrap();
        prop_assert!((f - z).abs() <= 1e-9 * (1.0 + f), "{} vs {}", f, z);
    }

    #[test]
    fn nonnegative(seed in any::<u64>()) {
        let (rho, a, _) = instance(seed);
        prop_assert!(qfi(&rho, &a, &tol()).unwrap() >= 0.0);
    }
}
