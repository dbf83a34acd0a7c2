//! Certified example metrics.
//!
//! Every constructor returns an entry only after checking admissibility
//! (`|tau|_g < 1` on the box), `d tau = c * omega`, and the curvature
//! property of its Riemannian part.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chart::{central4, ChartDomain, MetricTensorField, OneFormField, ScalarField, TwoFormField};
use crate::curvature::{curvature_sweep, PlaneKind};
use crate::error::{Error, Result};
use crate::grid::gauss_legendre;
use crate::metric::{convexity_margin, MetricField, RandersData};
use crate::symmetry::{complex_structure, exterior_derivative_accurate, halton_points};

/// Finite-difference step of gallery charts.
pub const GALLERY_FD_STEP: f64 = 1e-3;
const DEFAULT_HALF_WIDTH: f64 = 0.5;
const FORM_TOLERANCE: f64 = 1e-6;
const CURVATURE_TOLERANCE: f64 = 1e-3;
const CURVATURE_PLANES: usize = 50;
const ADMISSIBILITY_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpaceForm {
    Flat,
    Sphere,
    Hyperbolic,
}

impl SpaceForm {
    pub fn curvature(self) -> f64 {
        match self {
            SpaceForm::Flat => 0.0,
            SpaceForm::Sphere => 1.0,
            SpaceForm::Hyperbolic => -1.0,
        }
    }

    /// Conformal factor `lambda` of `g = lambda * delta`: `4 / (1 +- r^2)^2`.
    fn factor(self, r2: f64) -> f64 {
        match self {
            SpaceForm::Flat => 1.0,
            SpaceForm::Sphere => 4.0 / (1.0 + r2).powi(2),
            SpaceForm::Hyperbolic => 4.0 / (1.0 - r2).powi(2),
        }
    }

    fn metric(self, dim: usize) -> MetricTensorField {
        match self {
            SpaceForm::Flat => MetricTensorField::identity(dim),
            _ => MetricTensorField::conformal(dim, move |x| self.factor(x.iter().map(|v| v * v).sum())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CurvatureKind {
    /// Constant sectional curvature with the given value.
    ConstantSectional { value: f64 },
    /// Constant sectional curvature on `J`-invariant planes; the constant is measured.
    ConstantHolomorphic,
}

/// A potential `f` for closed forms `tau = df`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Potential {
    /// `f = sum a_i x_i`.
    Linear { coefficients: Vec<f64> },
    /// `f = amplitude * sin(x_coordinate)`.
    Sine { coordinate: usize, amplitude: f64 },
    /// `f = amplitude * sin(sum_i x_i)`.
    SineOfSum { amplitude: f64 },
}

impl Potential {
    pub fn scalar(&self, dim: usize) -> ScalarField {
        match self.clone() {
            Potential::Linear { coefficients } => {
                ScalarField::new(dim, move |x| coefficients.iter().zip(x).map(|(a, v)| a * v).sum())
            }
            Potential::Sine { coordinate, amplitude } => ScalarField::new(dim, move |x| amplitude * x[coordinate].sin()),
            Potential::SineOfSum { amplitude } => ScalarField::new(dim, move |x| amplitude * x.iter().sum::<f64>().sin()),
        }
    }

    /// `df`, in closed form.
    pub fn differential(&self, dim: usize) -> OneFormField {
        match self.clone() {
            Potential::Linear { mut coefficients } => {
                coefficients.resize(dim, 0.0);
                OneFormField::constant(DVector::from_vec(coefficients))
            }
            Potential::Sine { coordinate, amplitude } => OneFormField::new(dim, move |x| {
                let mut d = DVector::zeros(x.len());
                d[coordinate] = amplitude * x[coordinate].cos();
                d
            }),
            Potential::SineOfSum { amplitude } => OneFormField::new(dim, move |x| {
                DVector::from_element(x.len(), amplitude * x.iter().sum::<f64>().cos())
            }),
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        match self {
            Potential::Linear { coefficients } if coefficients.len() != dim => Err(Error::DimensionMismatch {
                expected: dim,
                found: coefficients.len(),
            }),
            Potential::Sine { coordinate, .. } if *coordinate >= dim => {
                Err(Error::InvalidArgument(format!("coordinate {coordinate} out of range")))
            }
            _ => Ok(()),
        }
    }
}

/// Constructor inputs, enough to rebuild an entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Recipe {
    ConstantCurvature2d { space: SpaceForm, c: f64 },
    FlatKahler4d { c: f64 },
    FubiniStudy4d { c: f64 },
    RandersClosed { space: SpaceForm, dim: usize, potential: Potential },
}

/// Measured certificate values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    /// Smallest `1 - |tau|_g` over the admissibility samples.
    pub margin: f64,
    /// Largest `|d tau - c * omega|` component over the samples.
    pub form_deviation: f64,
    /// Largest `|d omega|` component; zero for constant forms.
    pub closedness: f64,
    pub curvature_mean: f64,
    pub curvature_std: f64,
}

#[derive(Debug, Clone)]
pub struct GalleryEntry {
    pub name: String,
    pub recipe: Recipe,
    pub chart: ChartDomain,
    pub g: MetricTensorField,
    pub tau: OneFormField,
    /// The 2-form `omega` with `d tau = c * omega`.
    pub omega: TwoFormField,
    pub c: f64,
    pub complex_structure: Option<DMatrix<f64>>,
    pub expected_dimension: usize,
    pub curvature_kind: CurvatureKind,
    /// Polynomial degree of the Killing fields of `g` in this chart.
    pub killing_degree: usize,
    pub certificates: Certificates,
}

impl GalleryEntry {
    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn randers_data(&self) -> Result<RandersData> {
        RandersData::new(self.g.clone(), self.tau.clone())
    }

    pub fn metric(&self) -> Result<MetricField> {
        Ok(MetricField::randers(&self.randers_data()?))
    }
}

/// Ingredients before certification.
struct Draft {
    name: String,
    recipe: Recipe,
    g: MetricTensorField,
    tau: OneFormField,
    omega: TwoFormField,
    c: f64,
    complex_structure: Option<DMatrix<f64>>,
    expected_dimension: usize,
    curvature_kind: CurvatureKind,
}

fn sample_points(chart: &ChartDomain) -> Result<Vec<Vec<f64>>> {
    let mut points = chart.corners_and_center();
    points.extend(halton_points(chart.lower(), chart.upper(), ADMISSIBILITY_SAMPLES, 0)?);
    Ok(points)
}

fn admissible(draft: &Draft, chart: &ChartDomain) -> Result<f64> {
    let data = RandersData::new(draft.g.clone(), draft.tau.clone())?;
    Ok(convexity_margin(&data, &sample_points(chart)?))
}

/// Pick the box: the requested one (checked), or the default cube shrunk by
/// 20% steps until the metric is admissible.
fn choose_chart(draft: &Draft, dim: usize, requested: Option<ChartDomain>) -> Result<(ChartDomain, f64)> {
    if let Some(chart) = requested {
        if chart.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: chart.dim(),
            });
        }
        let margin = admissible(draft, &chart)?;
        if !(margin > 0.0) {
            return Err(Error::ConvexityViolation {
                point: chart.upper().to_vec(),
                margin,
            });
        }
        return Ok((chart, margin));
    }
    let mut half = DEFAULT_HALF_WIDTH;
    let mut last = f64::NEG_INFINITY;
    for _ in 0..20 {
        let chart = ChartDomain::cube(dim, half, GALLERY_FD_STEP.min(1e-3 * half))?;
        let margin = admissible(draft, &chart)?;
        if margin > 0.0 {
            return Ok((chart, margin));
        }
        last = margin;
        half *= 0.8;
    }
    Err(Error::ConvexityViolation {
        point: vec![half; dim],
        margin: last,
    })
}

/// `(d beta)_{ijk}` with fourth-order differences; largest component.
fn max_d_two_form(beta: &TwoFormField, x: &[f64], h: f64) -> f64 {
    let n = x.len();
    let grads: Vec<DMatrix<f64>> = (0..n).map(|i| central4(|y| beta.eval(y), x, i, h)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                worst = worst.max((grads[i][(j, k)] + grads[j][(k, i)] + grads[k][(i, j)]).abs());
            }
        }
    }
    worst
}

fn certify(draft: Draft, requested: Option<ChartDomain>) -> Result<GalleryEntry> {
    let dim = draft.g.dim();
    let (chart, margin) = choose_chart(&draft, dim, requested)?;
    let h = chart.fd_step();
    let (lo, hi) = chart.shrunk(0.1);
    let points = halton_points(&lo, &hi, 64, 1)?;
    let dtau = exterior_derivative_accurate(&draft.tau, h);
    let mut form_deviation: f64 = 0.0;
    let mut closedness: f64 = 0.0;
    for x in &points {
        chart.require_stencil(x, 2.0 * h)?;
        let diff = dtau.eval(x) - draft.omega.eval(x) * draft.c;
        form_deviation = form_deviation.max(diff.amax());
        closedness = closedness.max(max_d_two_form(&draft.omega, x, h));
    }
    if !(form_deviation < FORM_TOLERANCE) {
        return Err(Error::ConstructionInvalid(format!(
            "{}: d tau deviates from c * omega by {form_deviation:e}",
            draft.name
        )));
    }
    if !(closedness < FORM_TOLERANCE) {
        return Err(Error::ConstructionInvalid(format!("{}: omega is not closed ({closedness:e})", draft.name)));
    }
    let kind = match (&draft.curvature_kind, &draft.complex_structure) {
        (CurvatureKind::ConstantHolomorphic, Some(j)) => PlaneKind::Complex(j.clone()),
        (CurvatureKind::ConstantHolomorphic, None) => {
            return Err(Error::ConstructionInvalid("holomorphic curvature needs J".into()))
        }
        _ => PlaneKind::Generic,
    };
    let sweep = curvature_sweep(&draft.g, &chart, &kind, CURVATURE_PLANES, 0)?;
    let ok = sweep.std_dev < CURVATURE_TOLERANCE
        && match draft.curvature_kind {
            CurvatureKind::ConstantSectional { value } => (sweep.mean - value).abs() < CURVATURE_TOLERANCE,
            CurvatureKind::ConstantHolomorphic => true,
        };
    if !ok {
        return Err(Error::ConstructionInvalid(format!(
            "{}: curvature certificate failed (mean {}, std {})",
            draft.name, sweep.mean, sweep.std_dev
        )));
    }
    Ok(GalleryEntry {
        name: draft.name,
        recipe: draft.recipe,
        chart,
        g: draft.g,
        tau: draft.tau,
        omega: draft.omega,
        c: draft.c,
        complex_structure: draft.complex_structure,
        expected_dimension: draft.expected_dimension,
        curvature_kind: draft.curvature_kind,
        killing_degree: 2,
        certificates: Certificates {
            margin,
            form_deviation,
            closedness,
            curvature_mean: sweep.mean,
            curvature_std: sweep.std_dev,
        },
    })
}

/// `A(r) = (1 / r^2) int_0^r s sqrt(det g)(s) ds` by Gauss–Legendre, so that
/// `tau = c A(r) (x dy - y dx)` has `d tau = c vol_g`. In 2D `sqrt(det g)` is
/// the conformal factor itself.
fn radial_primitive(space: SpaceForm, r2: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    if r2 < 1e-24 {
        return 0.5 * space.factor(0.0);
    }
    let r = r2.sqrt();
    let (t, w) = rule;
    let integral: f64 = t
        .iter()
        .zip(w)
        .map(|(t, w)| {
            let s = 0.5 * r * (t + 1.0);
            0.5 * r * w * s * space.factor(s * s)
        })
        .sum();
    integral / r2
}

/// Two-dimensional space forms with `tau = c A(r) (x dy - y dx)`.
pub fn make_constant_curvature_2d(space: SpaceForm, c: f64, chart: Option<ChartDomain>) -> Result<GalleryEntry> {
    let rule = gauss_legendre(24)?;
    let tau = OneFormField::new(2, move |x| {
        let a = c * radial_primitive(space, x[0] * x[0] + x[1] * x[1], &rule);
        DVector::from_vec(vec![-a * x[1], a * x[0]])
    });
    let omega = TwoFormField::new(2, move |x| {
        let v = space.factor(x[0] * x[0] + x[1] * x[1]);
        DMatrix::from_row_slice(2, 2, &[0.0, v, -v, 0.0])
    });
    let name = match space {
        SpaceForm::Flat => "flat-2d",
        SpaceForm::Sphere => "sphere-2d",
        SpaceForm::Hyperbolic => "hyperbolic-2d",
    };
    certify(
        Draft {
            name: format!("{name}(c={c})"),
            recipe: Recipe::ConstantCurvature2d { space, c },
            g: space.metric(2),
            tau,
            omega,
            c,
            complex_structure: None,
            expected_dimension: 3,
            curvature_kind: CurvatureKind::ConstantSectional {
                value: space.curvature(),
            },
        },
        chart,
    )
}

fn kahler_form() -> DMatrix<f64> {
    // omega(u, v) = <J u, v>  =>  matrix J^T
    complex_structure(4).expect("4 is even").transpose()
}

/// `g = I`, `omega = dx1^dx2 + dx3^dx4`, `tau = (c/2)(x1 dx2 - x2 dx1 + x3 dx4 - x4 dx3)`.
pub fn make_flat_kahler_4d(c: f64, chart: Option<ChartDomain>) -> Result<GalleryEntry> {
    let j = complex_structure(4)?;
    let jj = j.clone();
    let tau = OneFormField::new(4, move |x| (&jj * DVector::from_column_slice(x)) * (0.5 * c));
    certify(
        Draft {
            name: format!("flat-kahler-4d(c={c})"),
            recipe: Recipe::FlatKahler4d { c },
            g: MetricTensorField::identity(4),
            tau,
            omega: TwoFormField::constant(kahler_form()),
            c,
            complex_structure: Some(j),
            expected_dimension: if c == 0.0 { 10 } else { 8 },
            curvature_kind: CurvatureKind::ConstantSectional { value: 0.0 },
        },
        chart,
    )
}

/// Fubini–Study metric of the affine chart `C^2` of `CP^2`:
/// `g = ((1 + r^2) I - x x^T - (Jx)(Jx)^T) / (1 + r^2)^2`, the real part of
/// the Hessian of `log(1 + |z|^2)` with `z = (x1 + i x2, x3 + i x4)`.
/// Holomorphic sectional curvature 4. `tau = (c/2) Jx / (1 + r^2)` has
/// `d tau = c * omega` with `omega = g(J., .)`.
pub fn make_fubini_study_4d(c: f64, chart: Option<ChartDomain>) -> Result<GalleryEntry> {
    let j = complex_structure(4)?;
    let metric = {
        let j = j.clone();
        move |x: &[f64]| -> DMatrix<f64> {
            let v = DVector::from_column_slice(x);
            let jv = &j * &v;
            let s = 1.0 + v.norm_squared();
            (DMatrix::identity(4, 4) * s - &v * v.transpose() - &jv * jv.transpose()) / (s * s)
        }
    };
    let g = MetricTensorField::new(4, metric.clone());
    let omega = {
        let j = j.clone();
        TwoFormField::new(4, move |x| j.transpose() * metric(x))
    };
    let tau = {
        let j = j.clone();
        OneFormField::new(4, move |x| {
            let v = DVector::from_column_slice(x);
            (&j * &v) * (0.5 * c / (1.0 + v.norm_squared()))
        })
    };
    certify(
        Draft {
            name: format!("fubini-study-4d(c={c})"),
            recipe: Recipe::FubiniStudy4d { c },
            g,
            tau,
            omega,
            c,
            complex_structure: Some(j),
            expected_dimension: 8,
            curvature_kind: CurvatureKind::ConstantHolomorphic,
        },
        chart,
    )
}

/// `tau = df` over a space form of dimension `dim` (2 unless flat).
pub fn make_randers_closed(space: SpaceForm, dim: usize, potential: Potential, chart: Option<ChartDomain>) -> Result<GalleryEntry> {
    if space != SpaceForm::Flat && dim != 2 {
        return Err(Error::InvalidArgument("curved closed-form entries are two-dimensional".into()));
    }
    if dim < 2 {
        return Err(Error::InvalidArgument("dimension must be at least 2".into()));
    }
    potential.check(dim)?;
    let tau = potential.differential(dim);
    let name = match space {
        SpaceForm::Flat => format!("flat-{dim}d"),
        SpaceForm::Sphere => "sphere-2d".into(),
        SpaceForm::Hyperbolic => "hyperbolic-2d".into(),
    };
    certify(
        Draft {
            name: format!("{name}+df"),
            recipe: Recipe::RandersClosed {
                space,
                dim,
                potential,
            },
            g: space.metric(dim),
            tau,
            omega: TwoFormField::zero(dim),
            c: 0.0,
            complex_structure: None,
            expected_dimension: dim * (dim + 1) / 2,
            curvature_kind: CurvatureKind::ConstantSectional {
                value: space.curvature(),
            },
        },
        chart,
    )
}

/// Rebuild an entry from its recipe.
pub fn build(recipe: &Recipe, chart: Option<ChartDomain>) -> Result<GalleryEntry> {
    match recipe.clone() {
        Recipe::ConstantCurvature2d { space, c } => make_constant_curvature_2d(space, c, chart),
        Recipe::FlatKahler4d { c } => make_flat_kahler_4d(c, chart),
        Recipe::FubiniStudy4d { c } => make_fubini_study_4d(c, chart),
        Recipe::RandersClosed { space, dim, potential } => make_randers_closed(space, dim, potential, chart),
    }
}
