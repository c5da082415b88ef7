use pdflow::linops::{eigen_bounds, min_eigenvalue};
use pdflow::vector::{add, dot, norm, scale};
use pdflow::{operator_norm, seminorm_sq, DenseMatrix, LinearMap, SelfAdjointPsd};
use proptest::prelude::*;

fn matrix(max_dim: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
        prop::collection::vec(-5.0..5.0f64, r * c)
            .prop_map(move |data| DenseMatrix::new(r, c, data).unwrap())
    })
}

fn matrix_with_vectors() -> impl Strategy<Value = (DenseMatrix, Vec<f64>, Vec<f64>)> {
    matrix(6).prop_flat_map(|m| {
        let (r, c) = (m.rows(), m.cols());
        (
            Just(m),
            prop::collection::vec(-10.0..10.0f64, c),
            prop::collection::vec(-10.0..10.0f64, r),
        )
    })
}

/// `Σ wᵢ Mᵢ` with every term of the same square shape, plus a composition.
fn structured_map() -> impl Strategy<Value = LinearMap> {
    (2..=5usize).prop_flat_map(|n| {
        (
            prop::collection::vec(-3.0..3.0f64, n * n),
            prop::collection::vec(-3.0..3.0f64, n * n),
            -2.0..2.0f64,
            0.1..3.0f64,
        )
            .prop_map(move |(a, b, w, s)| {
                let a = LinearMap::dense(DenseMatrix::new(n, n, a).unwrap());
                let b = LinearMap::dense(DenseMatrix::new(n, n, b).unwrap());
                let comp = LinearMap::compose(a.clone(), b.clone()).unwrap();
                LinearMap::sum(vec![
                    (w, comp),
                    (1.0, LinearMap::scaled_identity(n, s)),
                    (0.5, b.gram()),
                ])
                .unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn adjoint_consistency((m, x, y) in matrix_with_vectors()) {
        let a = LinearMap::dense(m);
        let lhs = dot(&a.apply(&x), &y);
        let rhs = dot(&x, &a.apply_adjoint(&y));
        let scale = norm(&a.apply(&x)) * norm(&y) + norm(&x) * norm(&a.apply_adjoint(&y));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1.0), "{lhs} vs {rhs}");
    }
}

proptest! {
    #[test]
    fn structured_adjoint_consistency(
        (map, x, y) in structured_map().prop_flat_map(|m| {
            let n = m.in_dim();
            (Just(m), prop::collection::vec(-10.0..10.0f64, n), prop::collection::vec(-10.0..10.0f64, n))
        })
    ) {
        let lhs = dot(&map.apply(&x), &y);
        let rhs = dot(&x, &map.apply_adjoint(&y));
        let dense = map.to_dense();
        let via_dense = dot(&dense.matvec(&x), &y);
        let scale = norm(&map.apply(&x)) * norm(&y) + 1.0;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        prop_assert!((lhs - via_dense).abs() <= 1e-12 * scale);
    }

    #[test]
    fn apply_is_linear(
        (m, x, _) in matrix_with_vectors(),
        seed in prop::collection::vec(-10.0..10.0f64, 6),
        alpha in -4.0..4.0f64,
    ) {
        let a = LinearMap::dense(m);
        let x2: Vec<f64> = seed.iter().cycle().take(x.len()).cloned().collect();
        let combined = a.apply(&add(&scale(alpha, &x), &x2));
        let separate = add(&scale(alpha, &a.apply(&x)), &a.apply(&x2));
        let tol = 1e-12 * (norm(&combined) + norm(&separate)).max(1.0) * 10.0;
        for (u, v) in combined.iter().zip(&separate) {
            prop_assert!((u - v).abs() <= tol);
        }
    }

    #[test]
    fn gram_is_psd_and_self_adjoint(
        (m, x, _) in matrix_with_vectors(),
        shift in 0.0..2.0f64,
    ) {
        let n = m.cols();
        let u = LinearMap::sum(vec![
            (1.0, LinearMap::dense(m).gram()),
            (1.0, LinearMap::scaled_identity(n, shift)),
        ]).unwrap();
        let psd = SelfAdjointPsd::certify(u.clone(), 1e-12).unwrap();
        let q = seminorm_sq(&psd, &x).unwrap();
        let xx = dot(&x, &x);
        prop_assert!(q >= -1e-10 * xx);
        prop_assert!(q >= psd.alpha_floor() * xx - 1e-10 * xx.max(1.0));
        prop_assert!(psd.alpha_floor() >= shift - 1e-9);

        let y: Vec<f64> = x.iter().rev().cloned().collect();
        let lhs = dot(&u.apply(&x), &y);
        let rhs = dot(&x, &u.apply(&y));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (norm(&u.apply(&x)) * norm(&y)).max(1.0));
    }

    #[test]
    fn spectral_bounds_bracket_rayleigh_quotients(
        (m, x, _) in matrix_with_vectors(),
    ) {
        let g = LinearMap::dense(m).gram();
        let (lo, hi) = eigen_bounds(&g, 1e-12).unwrap();
        prop_assume!(norm(&x) > 1e-6);
        let r = dot(&g.apply(&x), &x) / dot(&x, &x);
        prop_assert!(r >= lo - 1e-9 * hi.max(1.0));
        prop_assert!(r <= hi + 1e-9 * hi.max(1.0));
        prop_assert!(min_eigenvalue(&g, 1e-12).unwrap() >= -1e-9 * hi.max(1.0));
    }

    #[test]
    fn operator_norm_matches_gram_spectrum(m in matrix(5)) {
        let a = LinearMap::dense(m);
        let (_, hi) = eigen_bounds(&a.gram(), 1e-12).unwrap();
        let est = operator_norm(&a, 1e-13, 200_000).unwrap().value;
        prop_assert!((est * est - hi).abs() <= 1e-6 * hi.max(1.0), "{est} vs {}", hi.sqrt());
    }

    #[test]
    fn text_format_round_trip(m in matrix(6)) {
        let parsed = DenseMatrix::from_text(&m.to_text()).unwrap();
        prop_assert_eq!(parsed.rows(), m.rows());
        prop_assert_eq!(parsed.cols(), m.cols());
        prop_assert_eq!(parsed.as_slice(), m.as_slice());
    }
}

#[test]
fn malformed_text_is_rejected() {
    assert!(DenseMatrix::from_text("2 2\n1 2\n3\n").is_err());
    assert!(DenseMatrix::from_text("").is_err());
    assert!(DenseMatrix::from_text("1 2\n1 x\n").is_err());
}

#[test]
fn seminorm_dimension_mismatch() {
    let u = SelfAdjointPsd::identity(3);
    assert!(seminorm_sq(&u, &[1.0, 2.0]).is_err());
}
