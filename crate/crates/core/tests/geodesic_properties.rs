use almiso::chart::{ChartDomain, MetricTensorField, OneFormField};
use almiso::geodesic::{
    distance, t_invariance_check, triangular_report, DistanceOptions, TripleSample, MIN_SOLVER_TOLERANCE,
};
use almiso::metric::{add_one_form, symmetrize, MetricField, RandersData};
use nalgebra::DVector;
use proptest::prelude::*;

const OPTS: DistanceOptions = DistanceOptions { segments: 16, iters: 20 };

fn swirl(c: f64, drift: [f64; 2]) -> MetricField {
    let tau = OneFormField::new(2, move |x| DVector::from_vec(vec![drift[0] - 0.5 * c * x[1], drift[1] + 0.5 * c * x[0]]));
    MetricField::randers(&RandersData::new(MetricTensorField::identity(2), tau).unwrap())
}

fn chart() -> ChartDomain {
    ChartDomain::cube(2, 1.0, 1e-3).unwrap()
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-0.5..0.5f64, 2)
}

fn triple() -> impl Strategy<Value = TripleSample> {
    (point(), point(), point()).prop_map(|(p, q, r)| TripleSample::new(p, q, r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn triangular_function_is_nonnegative(s in triple(), c in -0.6..0.6f64, d0 in -0.2..0.2f64) {
        let report = triangular_report(&swirl(c, [d0, 0.0]), &s, &chart(), OPTS).unwrap();
        let tol = report.cauchy.max(MIN_SOLVER_TOLERANCE);
        prop_assert!(report.value >= -2.0 * tol, "{} vs {}", report.value, tol);
    }

    #[test]
    fn exact_forms_do_not_change_t(s in triple(), c in -0.5..0.5f64, a in 0.0..0.15f64,
                                   k0 in -1.5..1.5f64, k1 in -1.5..1.5f64, phase in 0.0..6.3f64) {
        let f = swirl(c, [0.0, 0.0]);
        let df = OneFormField::new(2, move |x| {
            let v = a * (k0 * x[0] + k1 * x[1] + phase).cos();
            DVector::from_vec(vec![v * k0, v * k1])
        });
        let shifted = add_one_form(&f, &df, &chart().corners_and_center()).unwrap();
        let t0 = triangular_report(&f, &s, &chart(), OPTS).unwrap();
        let t1 = triangular_report(&shifted, &s, &chart(), OPTS).unwrap();
        let tol = t0.cauchy.max(t1.cauchy).max(MIN_SOLVER_TOLERANCE);
        prop_assert!((t1.value - t0.value).abs() < 2.0 * tol, "{} vs {}", (t1.value - t0.value).abs(), tol);
    }

    #[test]
    fn refinement_never_lengthens(p in point(), q in point(), c in -0.6..0.6f64, j in 1usize..4) {
        prop_assume!(p != q);
        let f = swirl(c, [0.1, -0.1]);
        let coarse = distance(&f, &p, &q, &chart(), DistanceOptions { segments: 4 << j, iters: 20 }).unwrap();
        let fine = distance(&f, &p, &q, &chart(), DistanceOptions { segments: 8 << j, iters: 20 }).unwrap();
        prop_assert!(fine <= coarse + 1e-12);
    }

    #[test]
    fn almost_isometries_are_isometries_of_the_symmetrization(angle in -0.6..0.6f64, c in -0.5..0.5f64) {
        let f = swirl(c, [0.0, 0.0]);
        let rotate = move |x: &[f64]| {
            let (s, co) = angle.sin_cos();
            Ok(vec![co * x[0] - s * x[1], s * x[0] + co * x[1]])
        };
        let triples = TripleSample::seeded(&[-0.4, -0.4], &[0.4, 0.4], 4, 9);
        let on_f = t_invariance_check(&f, rotate, &triples, &chart(), OPTS).unwrap();
        prop_assert!(on_f.max_diff < 1e-6);
        let on_sym = t_invariance_check(&symmetrize(&f), rotate, &triples, &chart(), OPTS).unwrap();
        prop_assert!(on_sym.max_diff < 1e-6);
    }
}

#[test]
fn distances_respect_symmetrized_lower_bound() {
    // F >= F_sym - |tau| and F_sym >= (1 - max|tau|)|y| give a crude bracket.
    let f = swirl(0.4, [0.0, 0.0]);
    let c = ChartDomain::cube(2, 0.5, 1e-3).unwrap();
    let d = distance(&f, &[0.0, 0.0], &[0.2, 0.0], &c, DistanceOptions::default()).unwrap();
    assert!(d >= (1.0 - 0.2 * 0.5f64.sqrt()) * 0.2 && d <= 0.2 + 1e-12);
}
