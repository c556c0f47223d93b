use nalgebra::DMatrix;
use proptest::prelude::*;

use reachshape::brunovsky::{brunovsky_transform, canonical_pair, controllability_indices, delta_scaling};
use reachshape::convex_bodies::{
    bm_distance, linear_image, make_primitive, ControlSet, DirectionGrid, LinearMap, Primitive, SupportBody,
};
use reachshape::lab::{run_scenario, RouteChoice, Scenario, TGrid};
use reachshape::limit_shape::{analyze, filtration, reduce_to_driftless};
use reachshape::linear_systems::{apply_feedback, apply_gauge, kalman_check, matrix_exponential, LinearSystem, LtiSystem};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-1.0..1.0f64, rows * cols).prop_map(move |v| DMatrix::from_row_slice(rows, cols, &v))
}

fn zonotope(dim: usize) -> impl Strategy<Value = SupportBody> {
    proptest::collection::vec(proptest::collection::vec(-1.0..1.0f64, dim), dim..dim + 3)
        .prop_filter("full-dimensional", move |g| {
            let m = DMatrix::from_fn(dim, g.len(), |i, j| g[j][i]);
            reachshape::linalg::singular_values(&m).last().copied().unwrap_or(0.0) > 1e-3
        })
        .prop_map(|generators| make_primitive(Primitive::Zonotope { generators }).unwrap())
}

fn invertible(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    matrix(n, n).prop_filter("well conditioned", |m| reachshape::linalg::condition_number(m) < 50.0)
}

/// Controllable `(A, B)` with `n <= 4`, `m <= 2`.
fn controllable_pair() -> impl Strategy<Value = (DMatrix<f64>, DMatrix<f64>)> {
    (1usize..=4, 1usize..=2)
        .prop_flat_map(|(n, m)| (matrix(n, n), matrix(n, m.min(n))))
        .prop_filter("controllable", |(a, b)| kalman_check(a, b).unwrap().1)
}

fn lti(a: DMatrix<f64>, b: DMatrix<f64>) -> LtiSystem {
    let m = b.ncols();
    LtiSystem::new(a, b, ControlSet::unit_box(m)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bm_is_a_pseudometric_on_the_grid(a in zonotope(2), b in zonotope(2), c in zonotope(2)) {
        let grid = DirectionGrid::new(2, 180).unwrap();
        let ab = bm_distance(&a, &b, &grid).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, bm_distance(&b, &a, &grid).unwrap());
        prop_assert_eq!(bm_distance(&a, &a, &grid).unwrap(), 0.0);
        let ac = bm_distance(&a, &c, &grid).unwrap();
        let bc = bm_distance(&b, &c, &grid).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn support_is_positively_homogeneous(body in zonotope(3), c in 0.01..100.0f64, x in proptest::collection::vec(-1.0..1.0f64, 3)) {
        let h = body.support(&x).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        prop_assert!((body.support(&scaled).unwrap() - c * h).abs() <= 1e-12 * (1.0 + c * h));
        let image = linear_image(&body, &LinearMap::scalar(3, c)).unwrap();
        prop_assert!((image.support(&x).unwrap() - c * h).abs() <= 1e-12 * (1.0 + c * h));
    }

    #[test]
    fn linear_images_compose(body in zonotope(2), g1 in invertible(2), g2 in invertible(2), x in proptest::collection::vec(-1.0..1.0f64, 2)) {
        let m1 = LinearMap::new(g1.clone()).unwrap();
        let m2 = LinearMap::new(g2.clone()).unwrap();
        let twice = linear_image(&linear_image(&body, &m1).unwrap(), &m2).unwrap();
        let once = linear_image(&body, &LinearMap::new(&g2 * &g1).unwrap()).unwrap();
        let (h1, h2) = (twice.support(&x).unwrap(), once.support(&x).unwrap());
        prop_assert!((h1 - h2).abs() <= 1e-10 * (1.0 + h1.abs()));
    }

    #[test]
    fn transition_cocycle(a in matrix(3, 3), s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let lhs = matrix_exponential(&(&a * s)).unwrap() * matrix_exponential(&(&a * t)).unwrap();
        let rhs = matrix_exponential(&(&a * (s + t))).unwrap();
        prop_assert!((lhs - rhs).amax() < 1e-12);
    }

    #[test]
    fn kalman_rank_invariant_under_feedback_and_gauge(a in matrix(3, 3), b in matrix(3, 1), f in matrix(1, 3), c in invertible(3)) {
        let sys = lti(a.clone(), b.clone());
        let (rank, _) = kalman_check(&a, &b).unwrap();
        let fb = apply_feedback(&sys, &f).unwrap();
        prop_assert_eq!(kalman_check(fb.a(), fb.b()).unwrap().0, rank);
        let gauged = apply_gauge(&sys, &LinearMap::new(c).unwrap()).unwrap();
        prop_assert_eq!(kalman_check(gauged.a(), gauged.b()).unwrap().0, rank);
    }

    #[test]
    fn indices_ignore_input_order((a, b) in controllable_pair()) {
        let k = controllability_indices(&a, &b).unwrap();
        prop_assert_eq!(k.iter().sum::<usize>(), a.nrows());
        let reversed = DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, b.ncols() - 1 - j)]);
        prop_assert_eq!(controllability_indices(&a, &reversed).unwrap(), k);
    }

    #[test]
    fn brunovsky_form_reconstructs((a, b) in controllable_pair()) {
        let form = brunovsky_transform(&a, &b).unwrap();
        let (ra, rb) = form.residuals(&a, &b).unwrap();
        // evaluating P (A + BK) P^-1 loses about cond(P) |K| ulps on nearly
        // uncontrollable pairs
        let tol = 1e-9f64.max(1e-15 * form.condition() * (1.0 + form.k.amax()));
        prop_assert!(ra.max(rb) <= tol, "residual {:e}, tolerance {:e}", ra.max(rb), tol);
        let (a_br, b_br) = canonical_pair(&form.indices, b.ncols());
        prop_assert_eq!(&form.a_br, &a_br);
        prop_assert_eq!(&form.b_br, &b_br);
    }

    #[test]
    fn delta_scaling_identities(indices in proptest::collection::vec(1usize..=3, 1..=3), t in 1e-3..2.0f64) {
        let mut indices = indices;
        indices.sort_unstable_by(|x, y| y.cmp(x));
        let d = delta_scaling(&indices, t).unwrap();
        let (a_br, b_br) = canonical_pair(&indices, indices.len());
        let dinv = d.matrix().clone().try_inverse().unwrap();
        let scale = 1.0 / t;
        prop_assert!((d.matrix() * &a_br * dinv - &a_br * scale).amax() <= 1e-9 * scale);
        prop_assert!((d.matrix() * &b_br - &b_br * scale).amax() <= 1e-9 * scale);
    }

    #[test]
    fn filtration_dims_match_brunovsky_indices((a, b) in controllable_pair()) {
        let k = controllability_indices(&a, &b).unwrap();
        let n = a.nrows();
        let sys: LinearSystem = lti(a, b).into();
        let filt = filtration(&reduce_to_driftless(&sys, n).unwrap()).unwrap();
        for (j, &d) in filt.dims.iter().enumerate() {
            let reached: usize = k.iter().map(|&kappa| kappa.min(j)).sum();
            prop_assert_eq!(d, n - reached, "dims {:?}, indices {:?}", filt.dims, k);
        }
    }

    #[test]
    fn graded_projectors_split_the_space((a, b) in controllable_pair()) {
        let n = a.nrows();
        let sys: LinearSystem = lti(a, b).into();
        let split = analyze(&sys, None).unwrap().splitting;
        let mut sum = DMatrix::zeros(n, n);
        for p in &split.projectors {
            prop_assert!((p * p - p).amax() < 1e-9);
            prop_assert!((p - p.transpose()).amax() < 1e-9);
            sum += p;
        }
        prop_assert!((sum - DMatrix::identity(n, n)).amax() < 1e-9);
    }
}

/// Filtration genericity agrees with the Kalman test on 50 pairs, half of
/// them made uncontrollable by confining `B` to an `A`-invariant subspace.
#[test]
fn filtration_genericity_matches_kalman() {
    use rand::{Rng, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for case in 0..50 {
        let n = r.random_range(2..=4);
        let m = r.random_range(1..=2usize).min(n - 1);
        let mut a = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
        let mut b = DMatrix::from_fn(n, m, |_, _| r.random_range(-1.0..1.0));
        if case % 2 == 1 {
            // block upper-triangular A with B in the leading block
            for i in n - 1..n {
                for j in 0..n - 1 {
                    a[(i, j)] = 0.0;
                }
                for j in 0..m {
                    b[(i, j)] = 0.0;
                }
            }
        }
        let controllable = kalman_check(&a, &b).unwrap().1;
        let sys: LinearSystem = lti(a, b).into();
        assert_eq!(analyze(&sys, None).is_ok(), controllable, "case {case}");
    }
}

#[test]
fn scenario_reports_are_deterministic() {
    let sc = Scenario {
        system: "damped_oscillator".into(),
        t_grid: TGrid { t_max: 0.25, factor: 0.5, steps: 3 },
        grid: 180,
        route: RouteChoice::Brunovsky,
        ..Scenario::default()
    };
    let first = run_scenario(&sc).unwrap();
    let second = run_scenario(&sc).unwrap();
    assert_eq!(first.reports[0].to_csv(), second.reports[0].to_csv());
    let fit = first.reports[0].fit.unwrap();
    assert!(fit.slope > 0.8, "{fit:?}");
}
