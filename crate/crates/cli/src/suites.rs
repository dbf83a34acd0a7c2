//! Verification suites behind the subcommands. Each returns a report whose
//! checks appear in a fixed order.

use almiso::chart::{flow_map, OneFormField};
use almiso::curvature::{curvature_sweep, PlaneKind};
use almiso::duality::{polar_translation_check, riemannian_fit, Betterment, FIT_TOLERANCE};
use almiso::gallery::{CurvatureKind, GalleryEntry};
use almiso::geodesic::{
    distance_report, t_invariance_check, triangular_report, DistanceOptions, TripleSample, MIN_SOLVER_TOLERANCE,
};
use almiso::grid::DirectionGrid;
use almiso::metric::{add_one_form, convexity_margin, MetricField, Norm, RandersData};
use almiso::symmetry::{
    almost_killing_dimension, complex_structure, halton_points, invariant_two_forms, so_generators, unitary_generators,
    AlmostKillingConfig, CrossValidation, DimensionReport, Nullspace, DEFAULT_SV_THRESHOLD,
};
use nalgebra::{DMatrix, DVector};
use serde_json::json;

use crate::config::{Config, PlaneChoice, Problem};
use crate::error::{CliError, CliResult};
use crate::report::{Criterion, ReportBuilder, VerificationReport};

pub const BETTERMENT_TOLERANCE: f64 = 1e-4;
pub const POLAR_TOLERANCE: f64 = 1e-6;
pub const MIN_GAP: f64 = 1e2;
pub const SOLVER_CEILING: f64 = 1e-5;
pub const FORM_TOLERANCE: f64 = 1e-6;
pub const CURVATURE_TOLERANCE: f64 = 1e-3;
pub const CROSS_VALIDATION_TOLERANCE: f64 = 1e-4;

/// Settings shared by every command.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub timings: bool,
}

impl RunOptions {
    fn seed(&self, config: &Config) -> u64 {
        self.seed.or(config.seed).unwrap_or(0)
    }
}

pub fn direction_grid(dim: usize, config: &Config) -> CliResult<DirectionGrid> {
    Ok(match config.grids.directions {
        Some(m) => DirectionGrid::with_size(dim, m)?,
        None => DirectionGrid::default_for(dim)?,
    })
}

pub fn distance_options(config: &Config) -> DistanceOptions {
    let d = DistanceOptions::default();
    DistanceOptions {
        segments: config.grids.segments.unwrap_or(d.segments),
        iters: config.grids.iters.unwrap_or(d.iters),
    }
}

fn common_env(b: &mut ReportBuilder, p: &Problem, config: &Config, seed: u64) {
    b.env("metric", &p.name);
    b.env("dim", p.dim());
    b.env("chart_lower", p.chart.lower());
    b.env("chart_upper", p.chart.upper());
    b.env("fd_step", p.chart.fd_step());
    b.env("seed", seed);
    b.env("barycenter", "volume");
    if let Some(e) = &p.entry {
        b.env("recipe", &e.recipe);
    }
    if let Some(m) = &config.metric {
        b.env("metric_spec", m);
        b.env("params", &config.params);
    }
}

fn randers(p: &Problem) -> CliResult<RandersData> {
    Ok(RandersData::new(p.g.clone(), p.tau.clone())?)
}

/// Sample points for admissibility: corners, center and Halton points.
fn admissibility_points(p: &Problem) -> CliResult<Vec<Vec<f64>>> {
    let mut pts = p.chart.corners_and_center();
    pts.extend(halton_points(p.chart.lower(), p.chart.upper(), 256, 0)?);
    Ok(pts)
}

/// Spectral gap as a finite number: an exactly zero dropped singular value, or
/// an empty kept or dropped set, is measured against `EPSILON * largest`.
fn reported_gap(n: &Nullspace) -> f64 {
    if let Some(g) = n.gap.filter(|g| g.is_finite()) {
        return g;
    }
    let sv = &n.singular_values;
    let largest = sv.first().copied().unwrap_or(0.0);
    if largest == 0.0 {
        return 1.0 / f64::EPSILON;
    }
    let kept = sv.len() - n.dimension;
    let smallest_kept = if kept > 0 { sv[kept - 1] } else { largest };
    let largest_dropped = sv.get(kept).copied().unwrap_or(0.0);
    smallest_kept / largest_dropped.max(f64::EPSILON * largest)
}

/// Largest relative gap between the betterment of `F_x` and `sqrt(g_x)`.
fn recovery_deviation(data: &RandersData, x: &[f64], grid: &DirectionGrid) -> CliResult<f64> {
    let better = Betterment::new(&data.norm_at(x), grid)?;
    let riem = Norm::riemannian(data.g.eval(x));
    Ok(grid
        .directions()
        .map(|u| (better.eval(u) - riem.eval(u)).abs() / riem.eval(u))
        .fold(0.0, f64::max))
}

/// A covector `sigma` at `x` with `|tau + sigma|_g` at most halfway to 1.
fn test_covector(data: &RandersData, x: &[f64]) -> CliResult<DVector<f64>> {
    let n = data.dim();
    let e = DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
    let ginv = data
        .g
        .eval(x)
        .try_inverse()
        .ok_or_else(|| CliError::Core(almiso::Error::IndefiniteMetric { point: x.to_vec() }))?;
    let len = (e.transpose() * ginv * &e)[(0, 0)].sqrt();
    let room = 1.0 - data.tau_norm(x)?;
    Ok(e * (0.5 * room / len))
}

fn covector_invariance(data: &RandersData, x: &[f64], sigma: &[f64], grid: &DirectionGrid) -> CliResult<f64> {
    let f = data.norm_at(x);
    let a = Betterment::new(&f, grid)?;
    let b = Betterment::new(&f.plus_covector(sigma), grid)?;
    Ok(grid.directions().map(|u| (a.eval(u) - b.eval(u)).abs() / f.eval(u)).fold(0.0, f64::max))
}

fn certificate_checks(b: &mut ReportBuilder, e: &GalleryEntry) {
    let c = e.certificates.clone();
    let input = json!({ "recipe": e.recipe });
    b.check("gallery.margin", input.clone(), 0.0, Criterion::Above, || Ok(c.margin));
    b.check("gallery.form_deviation", input.clone(), FORM_TOLERANCE, Criterion::Below, || Ok(c.form_deviation));
    b.check("gallery.closedness", input.clone(), FORM_TOLERANCE, Criterion::Below, || Ok(c.closedness));
    b.check("gallery.curvature_std", input.clone(), CURVATURE_TOLERANCE, Criterion::Below, || Ok(c.curvature_std));
    if let CurvatureKind::ConstantSectional { value } = e.curvature_kind {
        b.check("gallery.curvature_mean", input, CURVATURE_TOLERANCE, Criterion::Near(value), || {
            Ok(c.curvature_mean)
        });
    }
}

fn dimension_config(config: &Config, seed: u64, sv_threshold: Option<f64>, cross_validate: bool) -> AlmostKillingConfig {
    let spec = config.dimension.clone().unwrap_or_default();
    let d = AlmostKillingConfig::default();
    let cv = (spec.cross_validate.unwrap_or(cross_validate)).then(|| CrossValidation {
        seed,
        distance: distance_options(config),
        // failures are reported per field rather than raised
        tolerance: f64::INFINITY,
        ..Default::default()
    });
    AlmostKillingConfig {
        degree: spec.degree.unwrap_or(d.degree),
        sv_threshold: sv_threshold.or(spec.sv_threshold).unwrap_or(DEFAULT_SV_THRESHOLD),
        h: None,
        points_per_column: spec.points_per_column.unwrap_or(d.points_per_column),
        seed,
        cross_validation: cv,
    }
}

fn dimension_checks(b: &mut ReportBuilder, p: &Problem, cfg: &AlmostKillingConfig) -> Option<DimensionReport> {
    let inputs = json!({
        "degree": cfg.degree,
        "sv_threshold": cfg.sv_threshold,
        "points_per_column": cfg.points_per_column,
        "cross_validation": cfg.cross_validation.map(|c| json!({
            "time": c.time, "triples": c.triples, "seed": c.seed,
            "segments": c.distance.segments, "iters": c.distance.iters,
        })),
    });
    let mut result: Option<DimensionReport> = None;
    b.check("dimension.gap", inputs.clone(), MIN_GAP, Criterion::Above, || {
        let r = almost_killing_dimension(&p.g, &p.tau, &p.chart, cfg)?;
        let gap = reported_gap(&r.nullspace);
        result = Some(r);
        Ok(gap)
    });
    let r = result?;
    if let Some(expected) = p.expected_dimension {
        b.check("dimension.count", inputs.clone(), 0.0, Criterion::Equals(expected as f64), || {
            Ok(r.dimension as f64)
        });
    }
    for c in &r.checks {
        let id = format!("cross_validation.field_{}", c.field);
        let input = json!({ "dimension": inputs, "field": c.field, "time": c.time });
        b.check(&id, input, CROSS_VALIDATION_TOLERANCE, Criterion::Below, || Ok(c.max_diff));
    }
    b.data("dimension", r.dimension);
    b.data("singular_values", &r.nullspace.singular_values);
    Some(r)
}

/// `verify`: certificates, betterment, polar translation, dimension count with
/// cross-validation, and invariance of `T` under an exact form.
pub fn verify(p: &Problem, config: &Config, opts: RunOptions, sv_threshold: Option<f64>) -> CliResult<VerificationReport> {
    let seed = opts.seed(config);
    let grid = direction_grid(p.dim(), config)?;
    let dopts = distance_options(config);
    let mut b = ReportBuilder::new("verify", opts.timings);
    common_env(&mut b, p, config, seed);
    b.env("directions", grid.len());
    b.env("segments", dopts.segments);
    b.env("iters", dopts.iters);
    let data = randers(p)?;

    match &p.entry {
        Some(e) => certificate_checks(&mut b, e),
        None => {
            let pts = admissibility_points(p)?;
            b.check("metric.margin", json!({ "samples": pts.len() }), 0.0, Criterion::Above, || {
                Ok(convexity_margin(&data, &pts))
            });
        }
    }

    let center = p.chart.center();
    let off = p.chart.shrunk(0.3).1;
    b.check(
        "betterment.recovery",
        json!({ "points": [&center, &off] }),
        BETTERMENT_TOLERANCE,
        Criterion::Below,
        || Ok(recovery_deviation(&data, &center, &grid)?.max(recovery_deviation(&data, &off, &grid)?)),
    );
    let sigma = test_covector(&data, &off)?;
    b.check(
        "betterment.covector_invariance",
        json!({ "point": &off, "sigma": sigma.as_slice() }),
        BETTERMENT_TOLERANCE,
        Criterion::Below,
        || covector_invariance(&data, &off, sigma.as_slice(), &grid),
    );
    b.check(
        "duality.polar_translation",
        json!({ "point": &off, "sigma": sigma.as_slice() }),
        POLAR_TOLERANCE,
        Criterion::Below,
        || Ok(polar_translation_check(&data.norm_at(&off), sigma.as_slice(), &grid)?),
    );

    let cfg = dimension_config(config, seed, sv_threshold, true);
    b.env("sv_threshold", cfg.sv_threshold);
    dimension_checks(&mut b, p, &cfg);

    exact_form_checks(&mut b, p, &data, seed, dopts)?;
    Ok(b.finish())
}

/// `T_{F + df}` against `T_F` for `f = a sin(x1 + ... + xn)` on seeded triples.
fn exact_form_checks(
    b: &mut ReportBuilder,
    p: &Problem,
    data: &RandersData,
    seed: u64,
    dopts: DistanceOptions,
) -> CliResult<()> {
    const AMPLITUDE: f64 = 0.05;
    const TRIPLES: usize = 5;
    let n = p.dim();
    let f = MetricField::randers(data);
    let df = OneFormField::new(n, move |x| DVector::from_element(n, AMPLITUDE * x.iter().sum::<f64>().cos()));
    let (lo, hi) = p.chart.shrunk(0.4);
    let triples = TripleSample::seeded(&lo, &hi, TRIPLES, seed);
    let inputs = json!({ "amplitude": AMPLITUDE, "triples": TRIPLES, "seed": seed });
    let mut solver = f64::NAN;
    b.check("triangle.exact_form_invariance", inputs.clone(), 2.0 * SOLVER_CEILING, Criterion::Below, || {
        let shifted = add_one_form(&f, &df, &p.chart.corners_and_center())?;
        let mut worst: f64 = 0.0;
        let mut tol: f64 = 0.0;
        for s in &triples {
            let a = triangular_report(&f, s, &p.chart, dopts)?;
            let c = triangular_report(&shifted, s, &p.chart, dopts)?;
            worst = worst.max((a.value - c.value).abs());
            tol = tol.max(a.cauchy).max(c.cauchy);
        }
        solver = tol.max(MIN_SOLVER_TOLERANCE);
        Ok(worst)
    });
    b.check("triangle.solver_tolerance", inputs, SOLVER_CEILING, Criterion::Below, || Ok(solver));
    Ok(())
}

/// `betterment`: `F_better` samples at a point and the quadratic-fit verdict.
pub fn betterment(p: &Problem, config: &Config, opts: RunOptions) -> CliResult<VerificationReport> {
    let seed = opts.seed(config);
    let grid = direction_grid(p.dim(), config)?;
    let x = config
        .betterment
        .as_ref()
        .and_then(|s| s.point.clone())
        .unwrap_or_else(|| p.chart.center());
    if x.len() != p.dim() || !p.chart.contains(&x) {
        return Err(CliError::Usage("betterment point must lie in the chart box".into()));
    }
    let mut b = ReportBuilder::new("betterment", opts.timings);
    common_env(&mut b, p, config, seed);
    b.env("directions", grid.len());
    b.env("point", &x);
    let data = randers(p)?;
    let norm = data.norm_at(&x);
    let better = Betterment::new(&norm, &grid)?;
    let values: Vec<f64> = grid.directions().map(|u| better.eval(u)).collect();
    let fit = riemannian_fit(&values, &grid, FIT_TOLERANCE)?;
    b.check("betterment.riemannian_fit", json!({ "point": &x }), FIT_TOLERANCE, Criterion::Below, || {
        Ok(fit.residual)
    });
    b.check("betterment.recovery", json!({ "point": &x }), BETTERMENT_TOLERANCE, Criterion::Below, || {
        recovery_deviation(&data, &x, &grid)
    });
    b.data("barycenter", better.barycenter().as_slice());
    b.data("is_quadratic", fit.is_quadratic);
    b.data("fitted_g", matrix_rows(&fit.g));
    let samples: Vec<_> = grid
        .directions()
        .zip(&values)
        .map(|(u, v)| json!({ "u": u, "F": norm.eval(u), "F_better": v }))
        .collect();
    b.data("samples", samples);
    Ok(b.finish())
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `dimension`: almost-Killing dimension with its singular-value spectrum.
pub fn dimension(p: &Problem, config: &Config, opts: RunOptions, sv_threshold: Option<f64>) -> CliResult<VerificationReport> {
    let seed = opts.seed(config);
    let mut b = ReportBuilder::new("dimension", opts.timings);
    common_env(&mut b, p, config, seed);
    let cfg = dimension_config(config, seed, sv_threshold, false);
    b.env("sv_threshold", cfg.sv_threshold);
    if let Some(r) = dimension_checks(&mut b, p, &cfg) {
        b.data("monomials", r.ansatz.monomials());
        let basis: Vec<&[f64]> = r.nullspace.basis.iter().map(|v| v.as_slice()).collect();
        b.data("basis", basis);
        b.data("ambiguous", r.nullspace.ambiguous);
    }
    Ok(b.finish())
}

/// `distance`: point-to-point distance with its k-doubling record.
pub fn distance(p: &Problem, config: &Config, opts: RunOptions, from: &[f64], to: &[f64]) -> CliResult<VerificationReport> {
    let seed = opts.seed(config);
    let dopts = distance_options(config);
    let tol = config.distance.as_ref().and_then(|d| d.tolerance).unwrap_or(SOLVER_CEILING);
    let mut b = ReportBuilder::new("distance", opts.timings);
    common_env(&mut b, p, config, seed);
    b.env("segments", dopts.segments);
    b.env("iters", dopts.iters);
    let f = MetricField::randers(&randers(p)?);
    let r = distance_report(&f, from, to, &p.chart, dopts)?;
    b.check("distance.cauchy", json!({ "from": from, "to": to }), tol, Criterion::Below, || Ok(r.cauchy));
    b.data("distance", r.distance);
    b.data("segments", r.segments);
    b.data("iters", r.iters);
    b.data("trace", &r.trace);
    Ok(b.finish())
}

/// `curvature`: sectional curvature sweep over seeded planes.
pub fn curvature(p: &Problem, config: &Config, opts: RunOptions) -> CliResult<VerificationReport> {
    let seed = opts.seed(config);
    let spec = config.curvature.clone().unwrap_or_default();
    let planes = spec.planes.unwrap_or(50);
    let choice = spec.kind.unwrap_or_default();
    let tol = spec.tolerance.unwrap_or(CURVATURE_TOLERANCE);
    let kind = match choice {
        PlaneChoice::Generic => PlaneKind::Generic,
        PlaneChoice::Complex => PlaneKind::Complex(match p.entry.as_ref().and_then(|e| e.complex_structure.clone()) {
            Some(j) => j,
            None => complex_structure(p.dim())?,
        }),
    };
    let mut b = ReportBuilder::new("curvature", opts.timings);
    common_env(&mut b, p, config, seed);
    b.env("planes", planes);
    b.env("plane_kind", choice);
    let sweep = curvature_sweep(&p.g, &p.chart, &kind, planes, seed)?;
    let inputs = json!({ "planes": planes, "kind": choice });
    b.check("curvature.std", inputs.clone(), tol, Criterion::Below, || Ok(sweep.std_dev));
    if let Some(CurvatureKind::ConstantSectional { value }) = p.entry.as_ref().map(|e| e.curvature_kind) {
        if choice == PlaneChoice::Generic {
            b.check("curvature.mean", inputs, tol, Criterion::Near(value), || Ok(sweep.mean));
        }
    }
    b.data("mean", sweep.mean);
    b.data("std_dev", sweep.std_dev);
    b.data("min", sweep.min);
    b.data("max", sweep.max);
    let samples: Vec<_> = sweep
        .samples
        .iter()
        .map(|s| json!({ "x": s.point, "plane_seed": s.plane_seed, "K": s.curvature }))
        .collect();
    b.data("samples", samples);
    Ok(b.finish())
}

/// Subalgebras understood by `invariant-forms`.
pub fn algebra_generators(name: &str) -> CliResult<(Vec<DMatrix<f64>>, usize, usize)> {
    // (generators, n, expected invariant dimension)
    let lower = name.to_ascii_lowercase().replace(['(', ')'], "");
    if lower == "u2" {
        return Ok((unitary_generators(4)?, 4, 1));
    }
    if let Some(n) = lower.strip_prefix("so").and_then(|d| d.parse::<usize>().ok()) {
        if n >= 2 {
            return Ok((so_generators(n), n, usize::from(n == 2)));
        }
    }
    Err(CliError::Usage(format!("unknown algebra '{name}'; use so(n) with n >= 2 or u(2)")))
}

/// `invariant-forms`: dimension of the invariant 2-forms of a subalgebra.
pub fn invariant_forms(algebra: &str, opts: RunOptions) -> CliResult<VerificationReport> {
    let (gens, n, expected) = algebra_generators(algebra)?;
    let mut b = ReportBuilder::new("invariant-forms", opts.timings);
    b.env("algebra", algebra);
    b.env("n", n);
    let forms = invariant_two_forms(&gens, n)?;
    b.check("invariant_forms.dimension", json!({ "algebra": algebra }), 0.0, Criterion::Equals(expected as f64), || {
        Ok(forms.dimension as f64)
    });
    let basis: Vec<_> = forms.basis.iter().map(matrix_rows).collect();
    b.data("basis", basis);
    Ok(b.finish())
}

/// `triangle`: `T` on triples, optionally compared with its value after a flow.
pub fn triangle(p: &Problem, config: &Config, opts: RunOptions) -> CliResult<VerificationReport> {
    let seed = opts.seed(config);
    let dopts = distance_options(config);
    let spec = config.triangle.clone().unwrap_or_default();
    let n = p.dim();
    let triples: Vec<TripleSample> = match &spec.triples {
        Some(list) => list
            .iter()
            .map(|[a, b, c]| {
                if a.len() != n || b.len() != n || c.len() != n {
                    Err(CliError::Usage(format!("triple points must have {n} coordinates")))
                } else {
                    Ok(TripleSample::new(a.clone(), b.clone(), c.clone()))
                }
            })
            .collect::<CliResult<_>>()?,
        None => {
            let (lo, hi) = p.chart.shrunk(0.4);
            TripleSample::seeded(&lo, &hi, spec.count.unwrap_or(10), seed)
        }
    };
    let mut b = ReportBuilder::new("triangle", opts.timings);
    common_env(&mut b, p, config, seed);
    b.env("segments", dopts.segments);
    b.env("iters", dopts.iters);
    b.env("triples", triples.len());
    let f = MetricField::randers(&randers(p)?);
    let reports = triples
        .iter()
        .map(|s| triangular_report(&f, s, &p.chart, dopts))
        .collect::<almiso::Result<Vec<_>>>()?;
    let solver = reports.iter().map(|r| r.cauchy).fold(MIN_SOLVER_TOLERANCE, f64::max);
    let min_t = reports.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    b.check("triangle.solver_tolerance", json!({}), SOLVER_CEILING, Criterion::Below, || Ok(solver));
    // T >= 0 up to the solver tolerance
    b.check("triangle.nonnegativity", json!({}), -2.0 * solver, Criterion::Above, || Ok(min_t));
    let rows: Vec<_> = triples
        .iter()
        .zip(&reports)
        .map(|(s, r)| json!({ "p": s.p, "q": s.q, "r": s.r, "T": r.value, "cauchy": r.cauchy }))
        .collect();
    b.data("rows", rows);
    if let Some(exprs) = &spec.flow {
        let field = config.vector_field(exprs, n)?;
        let time = spec.time.unwrap_or(0.3);
        let tol = spec.tolerance.unwrap_or(CROSS_VALIDATION_TOLERANCE);
        b.env("flow", exprs);
        b.env("time", time);
        let chart = p.chart.clone();
        let phi = move |x: &[f64]| flow_map(&field, time, x, 32, &chart);
        let mut mapped = None;
        b.check("triangle.flow_invariance", json!({ "flow": exprs, "time": time }), tol, Criterion::Below, || {
            let r = t_invariance_check(&f, &phi, &triples, &p.chart, dopts)?;
            let d = r.max_diff;
            mapped = Some(r);
            Ok(d)
        });
        if let Some(r) = mapped {
            let diffs: Vec<_> = r.rows.iter().map(|row| json!({ "T_phi": row.t_mapped, "diff": row.diff })).collect();
            b.data("flow_rows", diffs);
        }
    }
    Ok(b.finish())
}
