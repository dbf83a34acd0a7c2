//! Finsler norms and metrics.
//!
//! A [`Norm`] is a Minkowski norm on a single tangent space; a
//! [`MetricField`] assigns one to every chart point. Randers metrics
//! `F(x, y) = sqrt(g_x(y, y)) + tau_x(y)` are the concrete family; arbitrary
//! norms enter through closures.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::chart::{MetricTensorField, OneFormField};
use crate::error::{Error, Result};
use crate::grid::DirectionGrid;

/// A positively 1-homogeneous length function on one tangent space.
#[derive(Clone)]
pub struct Norm {
    dim: usize,
    eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl Norm {
    pub fn from_fn(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            dim,
            eval: Arc::new(f),
        }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::from_fn(dim, |y| y.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// `sqrt(y^T g y) + tau . y` with constant `g` and `tau`.
    pub fn randers(g: DMatrix<f64>, tau: DVector<f64>) -> Self {
        let n = tau.len();
        Self::from_fn(n, move |y| quadratic_form(&g, y).sqrt() + dot(tau.as_slice(), y))
    }

    /// `sqrt(y^T g y)`.
    pub fn riemannian(g: DMatrix<f64>) -> Self {
        let n = g.nrows();
        Self::from_fn(n, move |y| quadratic_form(&g, y).sqrt())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eval(&self, y: &[f64]) -> f64 {
        (self.eval)(y)
    }

    /// The norm `y -> F(y) + sigma(y)`; no positivity check.
    pub fn plus_covector(&self, sigma: &[f64]) -> Self {
        let base = self.clone();
        let sigma = sigma.to_vec();
        Self::from_fn(self.dim, move |y| base.eval(y) + dot(&sigma, y))
    }

    /// `y -> F(A y)`.
    pub fn pulled_back(&self, a: &DMatrix<f64>) -> Self {
        let base = self.clone();
        let a = a.clone();
        Self::from_fn(self.dim, move |y| {
            let ay = &a * DVector::from_column_slice(y);
            base.eval(ay.as_slice())
        })
    }
}

impl fmt::Debug for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Norm").field("dim", &self.dim).finish_non_exhaustive()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn quadratic_form(g: &DMatrix<f64>, y: &[f64]) -> f64 {
    let n = y.len();
    let mut s = 0.0;
    for j in 0..n {
        let mut row = 0.0;
        for i in 0..n {
            row += g[(i, j)] * y[i];
        }
        s += row * y[j];
    }
    s
}

/// Riemannian part `g` and drift form `tau` of a Randers metric.
#[derive(Debug, Clone)]
pub struct RandersData {
    pub g: MetricTensorField,
    pub tau: OneFormField,
}

impl RandersData {
    pub fn new(g: MetricTensorField, tau: OneFormField) -> Result<Self> {
        if g.dim() != tau.dim() {
            return Err(Error::DimensionMismatch {
                expected: g.dim(),
                found: tau.dim(),
            });
        }
        Ok(Self { g, tau })
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    /// Dual norm `|tau|_g = sqrt(tau^T g^{-1} tau)` at `x`.
    pub fn tau_norm(&self, x: &[f64]) -> Result<f64> {
        let g = self.g.eval(x);
        let chol = g.cholesky().ok_or_else(|| Error::IndefiniteMetric { point: x.to_vec() })?;
        let tau = self.tau.eval(x);
        Ok(tau.dot(&chol.solve(&tau)).max(0.0).sqrt())
    }

    /// The norm `F(x, .)` with `g(x)` and `tau(x)` frozen.
    pub fn norm_at(&self, x: &[f64]) -> Norm {
        Norm::randers(self.g.eval(x), self.tau.eval(x))
    }
}

/// `F(x, y) = sqrt(y^T g(x) y) + tau_x(y)`, checking `y != 0` and `|tau|_g < 1`.
pub fn randers_eval(data: &RandersData, x: &[f64], y: &[f64]) -> Result<f64> {
    check_vector(data.dim(), y)?;
    let margin = 1.0 - data.tau_norm(x)?;
    if !(margin > 0.0) {
        return Err(Error::ConvexityViolation {
            point: x.to_vec(),
            margin,
        });
    }
    Ok(data.norm_at(x).eval(y))
}

/// `min over samples of 1 - |tau|_g`; negative when the data are not admissible.
/// A sample where `g` is not positive-definite contributes `-inf`.
pub fn convexity_margin<P: AsRef<[f64]>>(data: &RandersData, sample_points: &[P]) -> f64 {
    sample_points
        .iter()
        .map(|x| data.tau_norm(x.as_ref()).map_or(f64::NEG_INFINITY, |t| 1.0 - t))
        .fold(f64::INFINITY, f64::min)
}

fn check_vector(dim: usize, y: &[f64]) -> Result<()> {
    if y.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: y.len(),
        });
    }
    if y.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateInput("zero tangent vector".into()));
    }
    Ok(())
}

/// A Finsler metric on a chart: an evaluator `(x, y) -> F(x, y)`.
#[derive(Clone)]
pub struct MetricField {
    dim: usize,
    reversible: bool,
    eval: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>,
    freeze: Arc<dyn Fn(&[f64]) -> Norm + Send + Sync>,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("dim", &self.dim)
            .field("reversible", &self.reversible)
            .finish_non_exhaustive()
    }
}

impl MetricField {
    pub fn from_fn(
        dim: usize,
        reversible: bool,
        f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let eval: Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync> = Arc::new(f);
        let inner = eval.clone();
        Self {
            dim,
            reversible,
            eval,
            freeze: Arc::new(move |x: &[f64]| {
                let (inner, x) = (inner.clone(), x.to_vec());
                Norm::from_fn(x.len(), move |y| inner(&x, y))
            }),
        }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::riemannian(MetricTensorField::identity(dim))
    }

    pub fn riemannian(g: MetricTensorField) -> Self {
        let dim = g.dim();
        let frozen = g.clone();
        Self {
            dim,
            reversible: true,
            eval: Arc::new(move |x, y| quadratic_form(&g.eval(x), y).sqrt()),
            freeze: Arc::new(move |x| Norm::riemannian(frozen.eval(x))),
        }
    }

    /// The Randers metric of `data`. Admissibility is not checked here; see
    /// [`convexity_margin`] and [`randers_eval`].
    pub fn randers(data: &RandersData) -> Self {
        let d = data.clone();
        let frozen = data.clone();
        Self {
            dim: data.dim(),
            reversible: false,
            eval: Arc::new(move |x, y| {
                quadratic_form(&d.g.eval(x), y).sqrt() + dot(d.tau.eval(x).as_slice(), y)
            }),
            freeze: Arc::new(move |x| frozen.norm_at(x)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    /// Unchecked evaluation.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.eval)(x, y)
    }

    /// Checked evaluation: `y` must be nonzero.
    pub fn length_rate(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_vector(self.dim, y)?;
        Ok(self.eval(x, y))
    }

    /// The norm `F(x, .)` on the tangent space at `x`.
    pub fn at(&self, x: &[f64]) -> Norm {
        (self.freeze)(x)
    }
}

/// `F_sym(x, y) = (F(x, y) + F(x, -y)) / 2`.
pub fn symmetrize(f: &MetricField) -> MetricField {
    if f.is_reversible() {
        return f.clone();
    }
    let base = f.clone();
    let frozen = f.clone();
    MetricField {
        dim: f.dim(),
        reversible: true,
        eval: Arc::new(move |x, y| {
            let neg: Vec<f64> = y.iter().map(|v| -v).collect();
            0.5 * (base.eval(x, y) + base.eval(x, &neg))
        }),
        freeze: Arc::new(move |x| {
            let norm = frozen.at(x);
            Norm::from_fn(norm.dim(), move |y| {
                let neg: Vec<f64> = y.iter().map(|v| -v).collect();
                0.5 * (norm.eval(y) + norm.eval(&neg))
            })
        }),
    }
}

pub fn symmetrize_eval(f: &MetricField, x: &[f64], y: &[f64]) -> Result<f64> {
    check_vector(f.dim(), y)?;
    Ok(symmetrize(f).eval(x, y))
}

/// Smallest `1 + sigma(u) / F(u)` over the grid: the value of `F + sigma` on
/// the unit `F`-sphere.
fn shifted_sphere_margin(norm: &Norm, sigma: &[f64], grid: &DirectionGrid) -> f64 {
    grid.directions()
        .map(|u| 1.0 + dot(sigma, u) / norm.eval(u))
        .fold(f64::INFINITY, f64::min)
}

/// `F + sigma`, after checking that `F + sigma > 0` on the unit `F`-sphere at
/// every sample point.
pub fn add_one_form<P: AsRef<[f64]>>(
    f: &MetricField,
    sigma: &OneFormField,
    sample_points: &[P],
) -> Result<MetricField> {
    if sigma.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: sigma.dim(),
        });
    }
    let grid = match f.dim() {
        2 => DirectionGrid::polygon(360)?,
        d => DirectionGrid::with_size(d, 2000)?,
    };
    for x in sample_points {
        let x = x.as_ref();
        let margin = shifted_sphere_margin(&f.at(x), sigma.eval(x).as_slice(), &grid);
        if !(margin > 1e-12) {
            return Err(Error::ConvexityViolation {
                point: x.to_vec(),
                margin,
            });
        }
    }
    let base = f.clone();
    let s = sigma.clone();
    let frozen = (f.clone(), sigma.clone());
    Ok(MetricField {
        dim: f.dim(),
        reversible: false,
        eval: Arc::new(move |x, y| base.eval(x, y) + dot(s.eval(x).as_slice(), y)),
        freeze: Arc::new(move |x| frozen.0.at(x).plus_covector(frozen.1.eval(x).as_slice())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn constant_randers(g: &[f64], tau: &[f64]) -> RandersData {
        let n = tau.len();
        RandersData::new(
            MetricTensorField::constant(DMatrix::from_row_slice(n, n, g)),
            OneFormField::constant(DVector::from_column_slice(tau)),
        )
        .unwrap()
    }

    #[test]
    fn randers_eval_examples() {
        let x = [0.0, 0.0];
        let euclid = constant_randers(&[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0]);
        assert_eq!(randers_eval(&euclid, &x, &[3.0, 4.0]).unwrap(), 5.0);
        let drift = constant_randers(&[1.0, 0.0, 0.0, 1.0], &[0.5, 0.0]);
        assert_eq!(randers_eval(&drift, &x, &[1.0, 0.0]).unwrap(), 1.5);
        let aniso = constant_randers(&[4.0, 0.0, 0.0, 1.0], &[0.1, 0.0]);
        let v = randers_eval(&aniso, &x, &[1.0, 1.0]).unwrap();
        assert!((v - (5f64.sqrt() + 0.1)).abs() < 1e-14);
        assert!((v - 2.33607).abs() < 1e-5);
    }

    #[test]
    fn randers_eval_errors() {
        let bad = constant_randers(&[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0]);
        assert!(matches!(
            randers_eval(&bad, &[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ConvexityViolation { .. })
        ));
        let good = constant_randers(&[1.0, 0.0, 0.0, 1.0], &[0.2, 0.0]);
        assert!(matches!(
            randers_eval(&good, &[0.0, 0.0], &[0.0, 0.0]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn symmetrization_examples() {
        let x = [0.1, 0.2];
        let f = MetricField::randers(&constant_randers(&[1.0, 0.0, 0.0, 1.0], &[0.5, 0.0]));
        assert_eq!(symmetrize_eval(&f, &x, &[1.0, 0.0]).unwrap(), 1.0);
        let riem = MetricField::riemannian(MetricTensorField::constant(DMatrix::from_row_slice(
            2,
            2,
            &[2.0, 0.3, 0.3, 1.0],
        )));
        let y = [0.4, -1.3];
        assert_eq!(symmetrize_eval(&riem, &x, &y).unwrap(), riem.eval(&x, &y));
        let f = MetricField::randers(&constant_randers(&[4.0, 0.0, 0.0, 1.0], &[0.0, 0.3]));
        assert!((symmetrize_eval(&f, &x, &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(symmetrize_eval(&f, &x, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn add_one_form_examples() {
        let pts = [[0.0, 0.0], [0.5, -0.5]];
        let e = MetricField::euclidean(2);
        let same = add_one_form(&e, &OneFormField::zero(2), &pts).unwrap();
        assert_eq!(same.eval(&[0.3, 0.1], &[1.0, 2.0]), e.eval(&[0.3, 0.1], &[1.0, 2.0]));

        let sigma = OneFormField::constant(DVector::from_vec(vec![0.5, 0.0]));
        let shifted = add_one_form(&e, &sigma, &pts).unwrap();
        let data = constant_randers(&[1.0, 0.0, 0.0, 1.0], &[0.5, 0.0]);
        for y in [[1.0, 0.0], [-0.3, 0.7], [-2.0, -1.0]] {
            let a = shifted.eval(&[0.2, 0.2], &y);
            let b = randers_eval(&data, &[0.2, 0.2], &y).unwrap();
            assert!((a - b).abs() < 1e-15);
        }

        let unit = OneFormField::constant(DVector::from_vec(vec![1.0, 0.0]));
        assert!(matches!(
            add_one_form(&e, &unit, &pts),
            Err(Error::ConvexityViolation { .. })
        ));
    }

    #[test]
    fn convexity_margin_examples() {
        let pts = [[0.0, 0.0], [0.3, 0.3]];
        assert_eq!(convexity_margin(&constant_randers(&[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0]), &pts), 1.0);
        let m = convexity_margin(&constant_randers(&[1.0, 0.0, 0.0, 1.0], &[0.5, 0.0]), &pts);
        assert!((m - 0.5).abs() < 1e-15);
        let m = convexity_margin(&constant_randers(&[4.0, 0.0, 0.0, 1.0], &[0.8, 0.0]), &pts);
        assert!((m - 0.6).abs() < 1e-15);
        let m = convexity_margin(&constant_randers(&[1.0, 0.0, 0.0, 1.0], &[1.5, 0.0]), &pts);
        assert!(m < 0.0);
    }

    fn varying_randers() -> MetricField {
        let g = MetricTensorField::new(2, |x| {
            DMatrix::from_row_slice(2, 2, &[2.0 + x[0].sin(), 0.3 * x[1], 0.3 * x[1], 1.0 + x[0] * x[0]])
        });
        let tau = OneFormField::new(2, |x| DVector::from_vec(vec![0.3 * x[1].cos(), 0.2 * x[0]]));
        MetricField::randers(&RandersData::new(g, tau).unwrap())
    }

    proptest! {
        #[test]
        fn homogeneity(x0 in -1.0..1.0f64, x1 in -1.0..1.0f64, y0 in -2.0..2.0f64, y1 in -2.0..2.0f64) {
            prop_assume!(y0.abs() + y1.abs() > 1e-3);
            let f = varying_randers();
            let x = [x0, x1];
            let base = f.eval(&x, &[y0, y1]);
            for lambda in [0.5, 2.0, 10.0] {
                let scaled = f.eval(&x, &[lambda * y0, lambda * y1]);
                prop_assert!((scaled - lambda * base).abs() <= 1e-12 * scaled.abs().max(1.0));
            }
        }

        #[test]
        fn triangle_inequality(x0 in -1.0..1.0f64, x1 in -1.0..1.0f64,
                               a in proptest::array::uniform2(-2.0..2.0f64),
                               b in proptest::array::uniform2(-2.0..2.0f64)) {
            let f = varying_randers();
            let x = [x0, x1];
            let sum = [a[0] + b[0], a[1] + b[1]];
            prop_assert!(f.eval(&x, &sum) <= f.eval(&x, &a) + f.eval(&x, &b) + 1e-12);
        }

        #[test]
        fn symmetrization_is_even_and_forgets_one_forms(x0 in -1.0..1.0f64, x1 in -1.0..1.0f64,
                                                        y in proptest::array::uniform2(-2.0..2.0f64),
                                                        s in proptest::array::uniform2(-0.1..0.1f64)) {
            prop_assume!(y[0].abs() + y[1].abs() > 1e-3);
            let f = varying_randers();
            let x = [x0, x1];
            let sym = symmetrize(&f);
            prop_assert_eq!(sym.eval(&x, &y), sym.eval(&x, &[-y[0], -y[1]]));
            let sigma = OneFormField::new(2, move |p| DVector::from_vec(vec![s[0] * p[1], s[1]]));
            let shifted = add_one_form(&f, &sigma, &[x]).unwrap();
            let diff = symmetrize(&shifted).eval(&x, &y) - sym.eval(&x, &y);
            prop_assert!(diff.abs() < 1e-12);
        }
    }
}
