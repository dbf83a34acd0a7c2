//! TOML configuration: a metric (gallery recipe or explicit expressions), the
//! chart box, grid sizes, seeds and per-command settings.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use almiso::chart::{ChartDomain, MetricTensorField, OneFormField, VectorField};
use almiso::gallery::{self, GalleryEntry, Potential, Recipe, SpaceForm, GALLERY_FD_STEP};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::expr::Expr;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Named constants usable in expressions.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gallery: Option<Recipe>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartSpec>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub grids: GridSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub betterment: Option<BettermentSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<DistanceSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<DimensionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curvature: Option<CurvatureSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triangle: Option<TriangleSpec>,
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// Explicit Randers data `sqrt(g(y, y)) + tau(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub dim: usize,
    pub g: TensorSpec,
    /// Component expressions of `tau`; omitted means `tau = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_dimension: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TensorSpec {
    Flat,
    /// `4 delta / (1 + |x|^2)^2`.
    Sphere,
    /// `4 delta / (1 - |x|^2)^2`.
    Hyperbolic,
    /// Row-major component expressions.
    Expressions { components: Vec<Vec<String>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

fn default_fd_step() -> f64 {
    GALLERY_FD_STEP
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Number of directions for duality computations (about this many in 3D and up).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BettermentSpec {
    pub point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceSpec {
    pub from: Option<Vec<f64>>,
    pub to: Option<Vec<f64>>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionSpec {
    pub degree: Option<usize>,
    pub sv_threshold: Option<f64>,
    pub points_per_column: Option<usize>,
    pub cross_validate: Option<bool>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaneChoice {
    #[default]
    Generic,
    /// `J`-invariant planes.
    Complex,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureSpec {
    pub planes: Option<usize>,
    pub kind: Option<PlaneChoice>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriangleSpec {
    /// Explicit triples `[p, q, r]`; otherwise `count` seeded ones.
    pub triples: Option<Vec<[Vec<f64>; 3]>>,
    pub count: Option<usize>,
    /// Components of a vector field whose time-`time` flow is the map to test.
    pub flow: Option<Vec<String>>,
    pub time: Option<f64>,
    pub tolerance: Option<f64>,
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Self> {
        let c: Config = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Usage(format!("cannot serialize configuration: {e}")))
    }

    /// A configuration that rebuilds a gallery entry.
    pub fn for_entry(entry: &GalleryEntry) -> Self {
        Self {
            gallery: Some(entry.recipe.clone()),
            chart: Some(ChartSpec {
                lower: entry.chart.lower().to_vec(),
                upper: entry.chart.upper().to_vec(),
                fd_step: entry.chart.fd_step(),
            }),
            ..Default::default()
        }
    }

    fn validate(&self) -> CliResult<()> {
        match (&self.gallery, &self.metric) {
            (Some(_), Some(_)) => Err(CliError::Usage("give either [gallery] or [metric], not both".into())),
            _ => Ok(()),
        }
    }

    pub fn has_metric(&self) -> bool {
        self.gallery.is_some() || self.metric.is_some()
    }

    fn chart_domain(&self, dim: usize) -> CliResult<Option<ChartDomain>> {
        let Some(spec) = &self.chart else { return Ok(None) };
        if spec.lower.len() != dim || spec.upper.len() != dim {
            return Err(CliError::Usage(format!("chart box must have {dim} coordinates")));
        }
        Ok(Some(ChartDomain::new(spec.lower.clone(), spec.upper.clone(), spec.fd_step)?))
    }

    /// Builds the metric described by this configuration.
    pub fn problem(&self) -> CliResult<Problem> {
        if let Some(recipe) = &self.gallery {
            let dim = match recipe {
                Recipe::ConstantCurvature2d { .. } => 2,
                Recipe::FlatKahler4d { .. } | Recipe::FubiniStudy4d { .. } => 4,
                Recipe::RandersClosed { dim, .. } => *dim,
            };
            let entry = gallery::build(recipe, self.chart_domain(dim)?)?;
            return Ok(Problem::from_entry(entry));
        }
        let Some(m) = &self.metric else {
            return Err(CliError::Usage("configuration has neither [gallery] nor [metric]".into()));
        };
        let n = m.dim;
        if n < 2 {
            return Err(CliError::Usage("metric dimension must be at least 2".into()));
        }
        let chart = match self.chart_domain(n)? {
            Some(c) => c,
            None => ChartDomain::cube(n, 0.5, GALLERY_FD_STEP)?,
        };
        let g = tensor_field(&m.g, n, &self.params)?;
        let tau = match &m.tau {
            Some(exprs) => one_form_field(exprs, n, &self.params)?,
            None => OneFormField::zero(n),
        };
        Ok(Problem {
            name: "configured".into(),
            chart,
            g,
            tau,
            expected_dimension: m.expected_dimension,
            entry: None,
        })
    }

    pub fn vector_field(&self, exprs: &[String], dim: usize) -> CliResult<VectorField> {
        let comps = compile_all(exprs, dim, &self.params)?;
        Ok(VectorField::new(dim, move |x| DVector::from_iterator(dim, comps.iter().map(|e| e.eval(x)))))
    }
}

fn compile_all(exprs: &[String], dim: usize, params: &BTreeMap<String, f64>) -> CliResult<Arc<Vec<Expr>>> {
    if exprs.len() != dim {
        return Err(CliError::Usage(format!("expected {dim} component expressions, got {}", exprs.len())));
    }
    compile(exprs, dim, params)
}

fn compile(exprs: &[String], dim: usize, params: &BTreeMap<String, f64>) -> CliResult<Arc<Vec<Expr>>> {
    Ok(Arc::new(exprs.iter().map(|s| Expr::parse(s, dim, params)).collect::<CliResult<_>>()?))
}

fn one_form_field(exprs: &[String], n: usize, params: &BTreeMap<String, f64>) -> CliResult<OneFormField> {
    let comps = compile_all(exprs, n, params)?;
    Ok(OneFormField::new(n, move |x| DVector::from_iterator(n, comps.iter().map(|e| e.eval(x)))))
}

fn tensor_field(spec: &TensorSpec, n: usize, params: &BTreeMap<String, f64>) -> CliResult<MetricTensorField> {
    let r2 = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    Ok(match spec {
        TensorSpec::Flat => MetricTensorField::identity(n),
        TensorSpec::Sphere => MetricTensorField::conformal(n, move |x| 4.0 / (1.0 + r2(x)).powi(2)),
        TensorSpec::Hyperbolic => MetricTensorField::conformal(n, move |x| 4.0 / (1.0 - r2(x)).powi(2)),
        TensorSpec::Expressions { components } => {
            if components.len() != n || components.iter().any(|row| row.len() != n) {
                return Err(CliError::Usage(format!("metric components must be a {n}x{n} array")));
            }
            let flat: Vec<String> = components.iter().flatten().cloned().collect();
            let comps = compile(&flat, n, params)?;
            MetricTensorField::new(n, move |x| {
                let m = DMatrix::from_row_iterator(n, n, comps.iter().map(|e| e.eval(x)));
                // symmetrize so that sloppy input still gives a symmetric tensor
                (&m + m.transpose()) * 0.5
            })
        }
    })
}

/// A metric ready for the suites.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub chart: ChartDomain,
    pub g: MetricTensorField,
    pub tau: OneFormField,
    pub expected_dimension: Option<usize>,
    pub entry: Option<GalleryEntry>,
}

impl Problem {
    pub fn from_entry(entry: GalleryEntry) -> Self {
        Self {
            name: entry.name.clone(),
            chart: entry.chart.clone(),
            g: entry.g.clone(),
            tau: entry.tau.clone(),
            expected_dimension: Some(entry.expected_dimension),
            entry: Some(entry),
        }
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }
}

/// Names accepted by `verify` and `--example`.
pub const EXAMPLE_NAMES: &[&str] = &[
    "example-2",
    "example-2-sphere",
    "example-2-4d",
    "example-2.5",
    "example-2.5-sphere",
    "example-2.5-hyperbolic",
    "example-3",
    "fubini-study",
];

/// Recipe for a named example; `c` overrides the default constant where the family has one.
pub fn example_recipe(name: &str, c: Option<f64>) -> CliResult<Recipe> {
    let no_c = |r: Recipe| match c {
        Some(_) => Err(CliError::Usage(format!("{name} has no c parameter"))),
        None => Ok(r),
    };
    match name {
        "example-2" => no_c(Recipe::RandersClosed {
            space: SpaceForm::Flat,
            dim: 2,
            potential: Potential::Linear { coefficients: vec![0.3, 0.0] },
        }),
        "example-2-sphere" => no_c(Recipe::RandersClosed {
            space: SpaceForm::Sphere,
            dim: 2,
            potential: Potential::Sine { coordinate: 0, amplitude: 0.1 },
        }),
        "example-2-4d" => no_c(Recipe::RandersClosed {
            space: SpaceForm::Flat,
            dim: 4,
            potential: Potential::Linear { coefficients: vec![0.2, 0.0, 0.0, 0.0] },
        }),
        "example-2.5" => Ok(Recipe::ConstantCurvature2d { space: SpaceForm::Flat, c: c.unwrap_or(0.4) }),
        "example-2.5-sphere" => Ok(Recipe::ConstantCurvature2d { space: SpaceForm::Sphere, c: c.unwrap_or(0.3) }),
        "example-2.5-hyperbolic" => {
            Ok(Recipe::ConstantCurvature2d { space: SpaceForm::Hyperbolic, c: c.unwrap_or(0.3) })
        }
        "example-3" => Ok(Recipe::FlatKahler4d { c: c.unwrap_or(0.2) }),
        "fubini-study" => Ok(Recipe::FubiniStudy4d { c: c.unwrap_or(0.1) }),
        other => Err(CliError::Usage(format!(
            "unknown example '{other}'; known: {}",
            EXAMPLE_NAMES.join(", ")
        ))),
    }
}
