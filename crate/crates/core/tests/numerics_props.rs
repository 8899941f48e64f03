use num_complex::Complex64;
use povm_coherence::numerics::*;
use povm_coherence::states::{haar_unitary, rng_from_seed};
use proptest::prelude::*;

fn hermitian_strategy() -> impl Strategy<Value = Hermitian> {
    (1usize..=8).prop_flat_map(|d| {
        prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), d * d).prop_map(move |xs| {
            let m = CMatrix::from_fn(d, d, |i, j| {
                let (re, im) = xs[i * d + j];
                Complex64::new(re, im)
            });
            Hermitian::symmetrized(m)
        })
    })
}

fn scale_of(h: &Hermitian) -> f64 {
    1.0 + h.matrix().norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn eigh_reconstructs(h in hermitian_strategy()) {
        let s = eigh(&h).unwrap();
        prop_assert!((s.reconstruct() - h.matrix()).norm() <= 1e-10 * scale_of(&h));
        prop_assert!(s.orthonormality_residual() <= 1e-10);
        for w in s.values.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sqrt_of_square(h in hermitian_strategy()) {
        let sq = Hermitian::symmetrized(h.matrix() * h.matrix());
        let r = psd_sqrt(&sq, &Tolerances { psd: 1e-9 * scale_of(&sq), ..Tolerances::default() }).unwrap();
        let back = r.matrix() * r.matrix();
        prop_assert!((back - sq.matrix()).norm() <= 1e-9 * scale_of(&sq));
        prop_assert!(eigh(&r).unwrap().min_value() >= -1e-9 * scale_of(&h));
    }

    #[test]
    fn commutator_norm_symmetry_and_invariance(a in hermitian_strategy(), seed in any::<u64>()) {
        let d = a.dim();
        let mut rng = rng_from_seed(seed);
        let b = povm_coherence::states::random_hermitian(d, &mut rng);
        let ab = comm_norm(&a, &b).unwrap();
        prop_assert_eq!(ab, comm_norm(&b, &a).unwrap());
        prop_assert_eq!(comm_norm(&a, &a).unwrap(), 0.0);
        let u = haar_unitary(d, &mut rng);
        let rot = comm_norm(&a.conjugate_by(&u), &b.conjugate_by(&u)).unwrap();
        prop_assert!((rot - ab).abs() <= 1e-10 * (1.0 + ab) * scale_of(&a));
    }

    #[test]
    fn exponential_is_unitary(h in hermitian_strategy(), t in -3.0f64..3.0) {
        let u = expm_i(&h, t).unwrap();
        prop_assert!(unitarity_residual(&u) <= 1e-10);
        let back = expm_i(&h, -t).unwrap() * &u;
        prop_assert!((back - CMatrix::identity(h.dim(), h.dim())).norm() <= 1e-9);
    }
}
