use std::sync::Arc;

use approx::assert_relative_eq;
use bergman_core::basis::BasisTable;
use bergman_core::{
    adjoint_symbol, assemble_auto, corner_truncate, kernel, mobius, norm_intersection, normalized_kernel,
    opnorm_2to1, opnorm_2to2, tail_truncate, unimodular_gamma, Complex64, DMatrix, Point, ScalarFn, SpaceParams,
    Symbol,
};
use proptest::prelude::*;

fn point(n: usize) -> impl Strategy<Value = Point> {
    (prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n), 0.0f64..0.95).prop_map(move |(v, r)| {
        let c: Vec<Complex64> = v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
        let norm = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-6 {
            return Point::origin(n);
        }
        Point::new(c.into_iter().map(|x| x * (r / norm))).unwrap()
    })
}

fn triple() -> impl Strategy<Value = (usize, Point, Point, Point)> {
    (1usize..=2).prop_flat_map(|n| (Just(n), point(n), point(n), point(n)))
}

fn matrix(d: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d)
        .prop_map(move |v| DMatrix::from_iterator(d, d, v.into_iter().map(|(a, b)| Complex64::new(a, b))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mobius_is_an_involution((n, a, z, _w) in triple(), alpha in 0.0f64..3.0) {
        let p = SpaceParams::new(n, alpha).unwrap();
        let back = mobius(&p, &a, &mobius(&p, &a, &z).unwrap()).unwrap();
        prop_assert!(back.distance(&z) < 1e-10);
        prop_assert!(mobius(&p, &a, &Point::origin(n)).unwrap().distance(&a) < 1e-12);
    }

    #[test]
    fn one_minus_norm_identity((n, a, z, _w) in triple()) {
        let p = SpaceParams::new(n, 0.0).unwrap();
        let pz = mobius(&p, &a, &z).unwrap();
        let q = (Complex64::new(1.0, 0.0) - z.inner(&a)).norm_sqr();
        let rhs = (1.0 - a.norm_sqr()) * (1.0 - z.norm_sqr()) / q;
        prop_assert!(((1.0 - pz.norm_sqr()) - rhs).abs() < 1e-10);
    }

    #[test]
    fn gamma_is_unimodular((_n, a, z, _w) in triple()) {
        prop_assert!((unimodular_gamma(&z, &a).unwrap().norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_is_hermitian_and_transforms((n, a, z, w) in triple(), alpha in 0.0f64..3.0) {
        let p = SpaceParams::new(n, alpha).unwrap();
        let k = kernel(&p, &z, &w).unwrap();
        prop_assert!((k - kernel(&p, &w, &z).unwrap().conj()).norm() <= 1e-12 * k.norm().max(1.0));
        let pz = mobius(&p, &a, &z).unwrap();
        let lhs = normalized_kernel(&p, &pz, &w).unwrap().norm() * normalized_kernel(&p, &z, &a).unwrap().norm();
        let rhs = normalized_kernel(&p, &z, &mobius(&p, &a, &w).unwrap()).unwrap().norm();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0));
    }

    #[test]
    fn norm_sandwich(m in matrix(3)) {
        let n22 = opnorm_2to2(&m);
        let n21 = opnorm_2to1(&m);
        let ni = norm_intersection(&m).value;
        let lo = n22.max(n21.value);
        prop_assert!(lo <= ni);
        prop_assert!(ni <= n22 + n21.value + 1e-9);
    }

    #[test]
    fn entries_bounded_by_operator_norm(m in matrix(4)) {
        let n = opnorm_2to2(&m);
        prop_assert!(m.iter().all(|x| x.norm() <= n + 1e-12));
    }

    #[test]
    fn tail_and_corner_reassemble(m in matrix(4), d0 in 0usize..=4, (_n, _a, z, _w) in triple()) {
        let rows: Vec<Vec<Complex64>> = (0..4).map(|r| (0..4).map(|c| m[(r, c)]).collect()).collect();
        let b = Symbol::ConstantMatrix { rows };
        let v = b.eval(&z);
        let tail = tail_truncate(&b, d0).unwrap().eval(&z);
        prop_assert!(tail.columns(0, d0).iter().all(|x| x.norm() == 0.0));
        prop_assert_eq!(tail.columns(d0, 4 - d0).into_owned(), v.columns(d0, 4 - d0).into_owned());
        if d0 > 0 {
            let corner = corner_truncate(&b, d0).unwrap().eval(&z);
            prop_assert_eq!(corner, v.view((0, 0), (d0, d0)).into_owned());
        }
        prop_assert_eq!(adjoint_symbol(&b).eval(&z), v.adjoint());
    }
}

#[test]
fn identity_intersection_norm_is_sqrt2() {
    let m = DMatrix::<Complex64>::identity(2, 2);
    assert_relative_eq!(norm_intersection(&m).value, 2f64.sqrt(), epsilon = 1e-12);
    assert_eq!(norm_intersection(&DMatrix::zeros(2, 2)).value, 0.0);
}

#[test]
fn indicator_toeplitz_is_diagonal_with_beta_eigenvalues() {
    // For n = 2 the eigenvalue of z^m is I_{r²}(|m|+2, α+1), the regularized
    // incomplete beta function, with multiplicity |m|+1.
    let alpha = 1.0;
    let r: f64 = 0.6;
    let p = SpaceParams::new(2, alpha).unwrap();
    let table = Arc::new(BasisTable::build(&p, 6, 1).unwrap());
    let op = assemble_auto(&Symbol::Scalar { tau: ScalarFn::indicator(r) }, &table).unwrap();
    for i in 0..table.scalar_len() {
        let k = table.indices[i].total_degree as f64;
        let want = statrs::function::beta::beta_reg(k + 2.0, alpha + 1.0, r * r);
        assert_relative_eq!(op.matrix[(i, i)].re, want, epsilon = 1e-10);
        for j in 0..table.scalar_len() {
            if i != j {
                assert!(op.matrix[(i, j)].norm() < 1e-12);
            }
        }
    }
}
