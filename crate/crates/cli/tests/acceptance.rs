//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::{Command, ExitCode};
use std::time::Instant;

use almiso::chart::{flow_map, ChartDomain, MetricTensorField, OneFormField};
use almiso::curvature::{curvature_sweep, PlaneKind};
use almiso::duality::{polar_translation_check, Betterment};
use almiso::gallery::{
    make_constant_curvature_2d, make_flat_kahler_4d, make_fubini_study_4d, make_randers_closed, GalleryEntry,
    Potential, SpaceForm, GALLERY_FD_STEP,
};
use almiso::geodesic::{
    distance_report, pullback_delta, t_invariance_check, triangular_report, DistanceOptions, TripleSample,
    MIN_SOLVER_TOLERANCE,
};
use almiso::grid::DirectionGrid;
use almiso::metric::{add_one_form, MetricField, Norm, RandersData};
use almiso::symmetry::{
    almost_killing_dimension, invariant_two_forms, so_generators, unitary_generators, AlmostKillingConfig,
    DimensionReport,
};
use nalgebra::{DMatrix, DVector};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn run(id: &str, title: &str, budget: Option<f64>, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = body();
    let secs = start.elapsed().as_secs_f64();
    let in_time = budget.is_none_or(|b| secs < b);
    let pass = out.pass && in_time;
    let time = match budget {
        Some(b) => format!("{secs:.2} s (< {b} s)"),
        None => format!("{secs:.2} s"),
    };
    println!("{} {id} {title}: {}; {time}", if pass { "PASS" } else { "FAIL" }, out.detail);
    pass
}

fn randers_norm(g: [f64; 4], tau: [f64; 2]) -> Norm {
    let g = DMatrix::from_row_slice(2, 2, &g);
    let tau = DVector::from_row_slice(&tau);
    let len = (tau.transpose() * g.clone().try_inverse().unwrap() * &tau)[(0, 0)].sqrt();
    assert!(len < 1.0, "inadmissible configuration");
    Norm::randers(g, tau)
}

fn max_relative_gap(a: &dyn Fn(&[f64]) -> f64, b: &dyn Fn(&[f64]) -> f64, grid: &DirectionGrid) -> f64 {
    grid.directions().map(|u| (a(u) - b(u)).abs() / b(u).abs()).fold(0.0, f64::max)
}

/// Strictly convex but not Randers: an `l^4`-type gauge with a drift.
fn quartic_with_drift() -> Norm {
    Norm::from_fn(2, |y| {
        (y[0].powi(4) + 2.0 * y[1].powi(4) + y[0] * y[0] * y[1] * y[1]).powf(0.25) + 0.1 * y[0] - 0.05 * y[1]
    })
}

fn c1() -> Outcome {
    let grid = DirectionGrid::polygon(512).unwrap();
    let configs = [
        ([4.0, 0.0, 0.0, 1.0], [0.1, 0.0]),
        ([1.0, 0.0, 0.0, 1.0], [0.3, 0.0]),
        ([2.0, 0.5, 0.5, 1.0], [-0.2, 0.4]),
        ([1.0, 0.0, 0.0, 9.0], [0.0, 2.1]),
        ([1.5, -0.7, -0.7, 2.0], [0.5, -0.3]),
    ];
    let mut worst: f64 = 0.0;
    for (g, tau) in configs {
        let f = randers_norm(g, tau);
        let better = Betterment::new(&f, &grid).unwrap();
        let riem = Norm::riemannian(DMatrix::from_row_slice(2, 2, &g));
        worst = worst.max(max_relative_gap(&|u| better.eval(u), &|u| riem.eval(u), &grid));
    }
    outcome(worst < 1e-4, format!("max relative deviation {worst:.2e} over 5 configurations (< 1e-4)"))
}

fn c2() -> Outcome {
    let g2 = DirectionGrid::polygon(512).unwrap();
    let g4 = DirectionGrid::default_for(4).unwrap();
    let randers4 = Norm::randers(
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 0.5, 1.5])),
        DVector::from_vec(vec![0.1, 0.0, -0.2, 0.05]),
    );
    let bases: [(Norm, &DirectionGrid, [Vec<f64>; 3]); 3] = [
        (
            quartic_with_drift(),
            &g2,
            [vec![0.1, 0.0], vec![-0.05, 0.15], vec![0.12, -0.1]],
        ),
        (
            randers_norm([2.0, 0.5, 0.5, 1.0], [-0.2, 0.4]),
            &g2,
            [vec![0.2, 0.0], vec![0.0, -0.3], vec![-0.1, 0.1]],
        ),
        (
            randers4,
            &g4,
            [vec![0.05, -0.1, 0.0, 0.1], vec![0.0, 0.0, 0.2, 0.0], vec![-0.1, 0.05, 0.05, -0.05]],
        ),
    ];
    let mut worst: f64 = 0.0;
    for (f, grid, sigmas) in &bases {
        let base = Betterment::new(f, grid).unwrap();
        for s in sigmas {
            let moved = Betterment::new(&f.plus_covector(s), grid).unwrap();
            let d = grid.directions().map(|u| (base.eval(u) - moved.eval(u)).abs()).fold(0.0, f64::max);
            worst = worst.max(d);
        }
    }
    outcome(
        worst < 1e-4,
        format!("max deviation {worst:.2e} over 3 bases x 3 covectors, m = 512 / {} (< 1e-4)", g4.len()),
    )
}

fn c3() -> Outcome {
    let g2 = DirectionGrid::polygon(512).unwrap();
    let g3 = DirectionGrid::default_for(3).unwrap();
    let randers3 = Norm::randers(
        DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 1.5, 0.1, 0.0, 0.1, 0.8]),
        DVector::from_vec(vec![0.2, -0.1, 0.15]),
    );
    let cases = [
        (randers_norm([4.0, 0.0, 0.0, 1.0], [0.1, 0.0]), &g2, vec![0.3, -0.2]),
        (quartic_with_drift(), &g2, vec![-0.1, 0.12]),
        (randers3, &g3, vec![0.1, 0.1, -0.2]),
    ];
    let mut worst: f64 = 0.0;
    for (f, grid, sigma) in &cases {
        worst = worst.max(polar_translation_check(f, sigma, grid).unwrap());
    }
    outcome(worst < 1e-6, format!("max support deviation {worst:.2e} over 3 configurations (< 1e-6)"))
}

fn swirl_chart() -> ChartDomain {
    ChartDomain::cube(2, 1.0, GALLERY_FD_STEP).unwrap()
}

fn c4() -> Outcome {
    let entry = make_constant_curvature_2d(SpaceForm::Flat, 0.4, Some(swirl_chart())).unwrap();
    let chart = entry.chart.clone();
    let f = entry.metric().unwrap();
    let df = Potential::SineOfSum { amplitude: 0.2 }.differential(2);
    let shifted = add_one_form(&f, &df, &chart.corners_and_center()).unwrap();
    let (lo, hi) = chart.shrunk(0.3);
    let triples = TripleSample::seeded(&lo, &hi, 20, 4);
    // the swirl bends geodesics; 64 segments bring the Cauchy bound under the ceiling
    let opts = DistanceOptions { segments: 64, iters: 20 };
    let (mut worst, mut solver): (f64, f64) = (0.0, MIN_SOLVER_TOLERANCE);
    for s in &triples {
        let a = triangular_report(&f, s, &chart, opts).unwrap();
        let b = triangular_report(&shifted, s, &chart, opts).unwrap();
        worst = worst.max((a.value - b.value).abs());
        solver = solver.max(a.cauchy).max(b.cauchy);
    }
    outcome(
        worst < 2.0 * solver && solver <= 1e-5,
        format!("max |T_(F+df) - T_F| {worst:.2e} < 2 x solver tolerance {solver:.2e} (certified <= 1e-5)"),
    )
}

/// Every entry is cross-validated by flowing its basis fields; the Example 2.5
/// report is kept for the next criterion.
fn c5(ex25: &mut Option<(GalleryEntry, DimensionReport)>) -> Outcome {
    let closed = |space, dim, potential| make_randers_closed(space, dim, potential, None).unwrap();
    let cases = [
        (make_constant_curvature_2d(SpaceForm::Flat, 0.4, Some(swirl_chart())).unwrap(), 3),
        (make_flat_kahler_4d(0.2, None).unwrap(), 8),
        (make_fubini_study_4d(0.1, None).unwrap(), 8),
        (make_flat_kahler_4d(0.0, None).unwrap(), 10),
        (closed(SpaceForm::Flat, 2, Potential::Linear { coefficients: vec![0.3, 0.0] }), 3),
        (closed(SpaceForm::Sphere, 2, Potential::Sine { coordinate: 0, amplitude: 0.1 }), 3),
        (closed(SpaceForm::Hyperbolic, 2, Potential::SineOfSum { amplitude: 0.1 }), 3),
        (closed(SpaceForm::Flat, 4, Potential::Linear { coefficients: vec![0.2, 0.0, 0.0, 0.0] }), 10),
    ];
    let config = AlmostKillingConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, (e, want)) in cases.into_iter().enumerate() {
        let r = match almost_killing_dimension(&e.g, &e.tau, &e.chart, &config) {
            Ok(r) => r,
            Err(err) => {
                pass = false;
                parts.push(format!("{}: {err}", e.name));
                continue;
            }
        };
        let gap = r.nullspace.gap.unwrap_or(0.0);
        pass &= r.dimension == want && e.expected_dimension == want && gap > 1e2;
        parts.push(format!("{}={} (gap {gap:.1e})", e.name, r.dimension));
        if k == 0 {
            *ex25 = Some((e, r));
        }
    }
    outcome(pass, parts.join(", "))
}

fn c6() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, gens, n, want) in [
        ("so(2)", so_generators(2), 2, 1),
        ("so(3)", so_generators(3), 3, 0),
        ("so(4)", so_generators(4), 4, 0),
        ("u(2)", unitary_generators(4).unwrap(), 4, 1),
    ] {
        let forms = invariant_two_forms(&gens, n).unwrap();
        pass &= forms.dimension == want;
        parts.push(format!("{name}: {}", forms.dimension));
        if name == "u(2)" && forms.dimension == 1 {
            let mut kahler = DMatrix::zeros(4, 4);
            kahler[(0, 1)] = 1.0;
            kahler[(1, 0)] = -1.0;
            kahler[(2, 3)] = 1.0;
            kahler[(3, 2)] = -1.0;
            let b = &forms.basis[0];
            let cos = b.dot(&kahler).abs() / (b.norm() * kahler.norm());
            pass &= cos > 1.0 - 1e-8;
            parts.push(format!("cosine to dx1^dx2 + dx3^dx4 = 1 - {:.1e}", 1.0 - cos));
        }
    }
    outcome(pass, parts.join(", "))
}

fn conformal(n: usize, sign: f64) -> MetricTensorField {
    MetricTensorField::conformal(n, move |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        4.0 / (1.0 + sign * r2).powi(2)
    })
}

fn c7() -> Outcome {
    const PLANES: usize = 50;
    let mut pass = true;
    let mut parts = Vec::new();
    let mut sweep = |label: &str, g: &MetricTensorField, chart: &ChartDomain, kind: &PlaneKind, target: Option<(f64, f64)>| {
        let s = curvature_sweep(g, chart, kind, PLANES, 11).unwrap();
        match target {
            Some((k, tol)) => {
                let dev = s.samples.iter().map(|p| (p.curvature - k).abs()).fold(0.0, f64::max);
                pass &= dev <= tol;
                parts.push(format!("{label} max |K - {k}| {dev:.1e}"));
            }
            None => {
                pass &= s.std_dev < 1e-3;
                parts.push(format!("{label} std {:.1e} (mean {:.4})", s.std_dev, s.mean));
            }
        }
    };
    let c2 = ChartDomain::cube(2, 0.5, GALLERY_FD_STEP).unwrap();
    let c3 = ChartDomain::cube(3, 0.5, GALLERY_FD_STEP).unwrap();
    let p2 = ChartDomain::cube(2, 0.55, GALLERY_FD_STEP).unwrap();
    let p3 = ChartDomain::cube(3, 0.45, GALLERY_FD_STEP).unwrap();
    sweep("sphere-2d", &conformal(2, 1.0), &c2, &PlaneKind::Generic, Some((1.0, 1e-3)));
    sweep("sphere-3d", &conformal(3, 1.0), &c3, &PlaneKind::Generic, Some((1.0, 1e-3)));
    sweep("poincare-2d", &conformal(2, -1.0), &p2, &PlaneKind::Generic, Some((-1.0, 1e-3)));
    sweep("poincare-3d", &conformal(3, -1.0), &p3, &PlaneKind::Generic, Some((-1.0, 1e-3)));
    sweep("flat-4d", &MetricTensorField::identity(4), &ChartDomain::cube(4, 0.5, GALLERY_FD_STEP).unwrap(), &PlaneKind::Generic, Some((0.0, 1e-4)));
    let fs = make_fubini_study_4d(0.1, None).unwrap();
    let j = fs.complex_structure.clone().unwrap();
    sweep("fubini-study J-planes", &fs.g, &fs.chart, &PlaneKind::Complex(j), None);
    outcome(pass, format!("{} ({PLANES} planes each)", parts.join(", ")))
}

fn c8() -> Outcome {
    let data = RandersData::new(MetricTensorField::identity(2), OneFormField::constant(DVector::from_vec(vec![0.3, 0.0])))
        .unwrap();
    let f = MetricField::randers(&data);
    let chart = ChartDomain::new(vec![-0.5, -1.0], vec![1.5, 1.0], GALLERY_FD_STEP).unwrap();
    let opts = DistanceOptions::default();
    let fwd = distance_report(&f, &[0.0, 0.0], &[1.0, 0.0], &chart, opts).unwrap().distance;
    let back = distance_report(&f, &[1.0, 0.0], &[0.0, 0.0], &chart, opts).unwrap().distance;
    let pass = (fwd - 1.3).abs() < 1e-5 && (back - 0.7).abs() < 1e-5;
    outcome(pass, format!("d(p,q) = {fwd:.9}, d(q,p) = {back:.9} (1.3 / 0.7 +- 1e-5)"))
}

fn c9(ex25: Option<&(GalleryEntry, DimensionReport)>) -> Outcome {
    let Some((entry, report)) = ex25 else {
        return outcome(false, "no dimension report from the previous criterion".into());
    };
    const TIME: f64 = 0.3;
    let chart = entry.chart.clone();
    let f = entry.metric().unwrap();
    let (lo, hi) = chart.shrunk(0.7);
    let triples = TripleSample::seeded(&lo, &hi, 10, 9);
    let grid = DirectionGrid::polygon(512).unwrap();
    let opts = DistanceOptions::default();
    let (mut t_diff, mut lin, mut closed, mut cv): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for check in &report.checks {
        cv = cv.max(check.max_diff);
    }
    for i in 0..report.dimension {
        let field = report.field(i).unwrap();
        let c = chart.clone();
        let phi = move |x: &[f64]| flow_map(&field, TIME, x, 32, &c);
        t_diff = t_diff.max(t_invariance_check(&f, &phi, &triples, &chart, opts).unwrap().max_diff);
        for x in [vec![0.0, 0.0], vec![0.2, -0.15]] {
            let d = pullback_delta(&f, phi.clone(), &x, &chart, &grid).unwrap();
            lin = lin.max(d.linearity_residual);
            closed = closed.max(d.closedness_residual);
        }
    }
    let pass = report.checks.len() == report.dimension && cv < 1e-4 && t_diff < 1e-4 && lin < 1e-4 && closed < 1e-3;
    outcome(
        pass,
        format!(
            "{} fields at t = {TIME}: max T diff {t_diff:.1e} (built-in check {cv:.1e}), linearity {lin:.1e}, closedness {closed:.1e}",
            report.dimension
        ),
    )
}

fn c10() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_almiso");
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let path = dir.path().join(format!("run{k}.json"));
        let status = Command::new(bin)
            .args(["verify", "example-2.5", "--seed", "7", "--out"])
            .arg(&path)
            .status()
            .unwrap();
        outputs.push((status.code(), std::fs::read(&path).unwrap_or_default()));
    }
    let same = outputs[0].1 == outputs[1].1 && !outputs[0].1.is_empty();
    let ok = outputs.iter().all(|(code, _)| *code == Some(0));
    outcome(
        same && ok,
        format!("two runs, {} bytes, identical: {same}, exit codes {:?}", outputs[0].1.len(), outputs.iter().map(|o| o.0).collect::<Vec<_>>()),
    )
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags; only a name filter is honoured.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    if filter.as_deref().is_some_and(|f| !"acceptance".contains(f)) {
        return ExitCode::SUCCESS;
    }
    let mut ex25 = None;
    let results = [
        run("C1", "betterment recovers g", Some(5.0), c1),
        run("C2", "betterment invariance under F + sigma", Some(30.0), c2),
        run("C3", "polar translation", None, c3),
        run("C4", "T invariance under F + df", Some(60.0), c4),
        run("C5", "almost-Killing dimension counts", Some(120.0), || c5(&mut ex25)),
        run("C6", "invariant 2-forms", Some(1.0), c6),
        run("C7", "curvature certificates", None, c7),
        run("C8", "nonsymmetric distance", None, c8),
        run("C9", "cross-validation of the two definitions", None, || c9(ex25.as_ref())),
        run("C10", "deterministic verify reports", None, c10),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
