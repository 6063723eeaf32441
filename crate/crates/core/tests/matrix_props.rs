//! Algebraic invariants of the dense complex kernels.

use proptest::prelude::*;
use repint::matrix::{
    frobenius_norm, kron, mat_exp, partial_trace_bath, spectral_norm, trace_norm, unitary_residual,
};
use repint::{ComplexMatrix, Norm, C64};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), rows * cols).prop_map(move |v| {
        let entries: Vec<C64> = v.into_iter().map(|(re, im)| C64::new(re, im)).collect();
        ComplexMatrix::from_row_major(rows, cols, &entries).unwrap()
    })
}

fn square(max: usize) -> impl Strategy<Value = ComplexMatrix> {
    (1..=max).prop_flat_map(|n| matrix(n, n))
}

fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
    (a - b).max_abs() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kron_is_associative(a in square(3), b in square(2), c in square(2)) {
        let left = kron(&kron(&a, &b), &c);
        let right = kron(&a, &kron(&b, &c));
        prop_assert!(close(&left, &right, 1e-14));
    }

    #[test]
    fn kron_mixed_product(
        (a, c, b, d) in (1usize..4, 1usize..4)
            .prop_flat_map(|(n, m)| (matrix(n, n), matrix(n, n), matrix(m, m), matrix(m, m)))
    ) {
        let lhs = &kron(&a, &b) * &kron(&c, &d);
        let rhs = kron(&(&a * &c), &(&b * &d));
        prop_assert!(close(&lhs, &rhs, 1e-13));
    }

    #[test]
    fn exp_of_negative_is_inverse(a in square(4)) {
        let e = mat_exp(&a).unwrap();
        let f = mat_exp(&(-&a)).unwrap();
        let id = ComplexMatrix::identity(a.rows());
        prop_assert!(close(&(&e * &f), &id, 1e-12));
    }

    #[test]
    fn exp_of_skew_hermitian_is_unitary(a in square(4), t in 0.0f64..20.0) {
        let h = (&a + &a.adjoint()).scale_real(0.5);
        let u = mat_exp(&h.scale(C64::new(0.0, -t))).unwrap();
        prop_assert!(unitary_residual(&u, Norm::Spectral).unwrap() < 1e-12);
    }

    #[test]
    fn partial_trace_of_product(a in square(3), b in square(3)) {
        let reduced = partial_trace_bath(&kron(&a, &b), a.rows(), b.rows()).unwrap();
        prop_assert!(close(&reduced, &a.scale(b.trace()), 1e-13));
    }

    #[test]
    fn trace_norm_triangle(a in matrix(3, 3), b in matrix(3, 3)) {
        let sum = trace_norm(&(&a + &b)).unwrap();
        prop_assert!(sum <= trace_norm(&a).unwrap() + trace_norm(&b).unwrap() + 1e-12);
    }

    #[test]
    fn norms_are_ordered(a in matrix(3, 4)) {
        let s = spectral_norm(&a);
        let f = frobenius_norm(&a);
        prop_assert!(s <= f + 1e-14);
        prop_assert!(f <= 3f64.sqrt() * s + 1e-14);
    }

    #[test]
    fn spectral_norm_is_submultiplicative(a in matrix(3, 3), b in matrix(3, 3)) {
        prop_assert!(spectral_norm(&(&a * &b)) <= spectral_norm(&a) * spectral_norm(&b) + 1e-13);
    }
}
