//! Polar duality of unit balls and the betterment map.
//!
//! For a norm `F` on a tangent space, `K_F = {F <= 1}` and its polar
//! `K*_F = {xi : xi(y) <= 1 on K_F}` has gauge `F*(xi) = max_u xi(u) / F(u)`.
//! Recentering `K*_F` at its volume barycenter `b_F` and dualizing back gives
//! the norm `F_better(y) = F(y) - b_F(y)`; adding a covector to `F` translates
//! `K*_F` by that covector and leaves `F_better` unchanged. For Randers norms
//! `F_better` is the Riemannian part.
//!
//! Maximizations start from a brute-force scan over the direction grid and
//! are then polished by a local search on the sphere, so the discretization
//! error left in the pipeline is that of the sphere quadrature.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::DirectionGrid;
use crate::metric::{dot, Norm};

/// Default relative residual below which [`riemannian_fit`] accepts a quadratic form.
pub const FIT_TOLERANCE: f64 = 1e-6;

/// Step at which local refinement stops.
const REFINE_MIN_STEP: f64 = 1e-9;
const REFINE_MAX_SWEEPS: usize = 200;

/// Local maximization of a 0-homogeneous function near the unit vector `start`:
/// coordinate sweeps in a tangent frame with parabolic steps and a trust
/// radius that shrinks with the size of the accepted moves. Returns the best value found (never below `f(start)`).
fn refine_on_sphere(f: impl Fn(&[f64]) -> f64, start: &[f64], step: f64) -> f64 {
    let n = start.len();
    let frame = tangent_frame(start);
    let mut t = vec![0.0; n - 1];
    let point = |t: &[f64]| -> Vec<f64> {
        let mut y = start.to_vec();
        for (tk, e) in t.iter().zip(&frame) {
            for i in 0..n {
                y[i] += tk * e[i];
            }
        }
        y
    };
    let mut best = f(start);
    let mut s = step;
    for _ in 0..REFINE_MAX_SWEEPS {
        if s < REFINE_MIN_STEP {
            break;
        }
        let mut hit_edge = false;
        let mut moved: f64 = 0.0;
        for k in 0..n - 1 {
            let t0 = t[k];
            t[k] = t0 + s;
            let fp = f(&point(&t));
            t[k] = t0 - s;
            let fm = f(&point(&t));
            let mut cand = (best, t0);
            if fp > cand.0 {
                cand = (fp, t0 + s);
            }
            if fm > cand.0 {
                cand = (fm, t0 - s);
            }
            let curv = 2.0 * best - fp - fm;
            if curv > 0.0 {
                let delta = (0.5 * s * (fp - fm) / curv).clamp(-s, s);
                t[k] = t0 + delta;
                let fv = f(&point(&t));
                if fv > cand.0 {
                    cand = (fv, t0 + delta);
                }
            }
            t[k] = cand.1;
            moved = moved.max((cand.1 - t0).abs());
            if (cand.1 - t0).abs() >= s * (1.0 - 1e-12) {
                hit_edge = true;
            }
            best = cand.0;
        }
        if !hit_edge {
            // shrink towards the size of the last moves, at most 16x per sweep
            s = (0.5 * s).min((4.0 * moved).max(s / 16.0));
        }
    }
    best
}

/// Orthonormal basis of `u`-perp by Gram–Schmidt on the coordinate axes,
/// skipping the axis most aligned with `u`.
fn tangent_frame(u: &[f64]) -> Vec<Vec<f64>> {
    let n = u.len();
    let skip = (0..n)
        .max_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()))
        .unwrap_or(0);
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for axis in (0..n).filter(|&a| a != skip) {
        let mut e = vec![0.0; n];
        e[axis] = 1.0;
        for b in std::iter::once(u).chain(frame.iter().map(|v| v.as_slice())) {
            let p = dot(&e, b) / dot(b, b);
            for i in 0..n {
                e[i] -= p * b[i];
            }
        }
        let norm = dot(&e, &e).sqrt();
        e.iter_mut().for_each(|v| *v /= norm);
        frame.push(e);
    }
    frame
}

/// Radial samples of a star body around the origin: the body is
/// `{r u : 0 <= r <= values[k]}` for grid direction `u = grid.direction(k)`.
#[derive(Debug, Clone)]
pub struct SupportSamples {
    pub grid: DirectionGrid,
    pub values: Vec<f64>,
}

impl SupportSamples {
    pub fn new(grid: DirectionGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidBody(format!("radial value {v} is not positive and finite")));
        }
        Ok(Self { grid, values })
    }

    /// The unit ball `K_F`: radius `1 / F(u)`.
    pub fn unit_ball(norm: &Norm, grid: &DirectionGrid) -> Result<Self> {
        let values = grid.directions().map(|u| 1.0 / norm.eval(u)).collect();
        Self::new(grid.clone(), values)
    }

    /// The polar body `K*_F`: radius `1 / F*(u)`.
    pub fn polar(norm: &Norm, grid: &DirectionGrid) -> Result<Self> {
        let dual = DualNorm::new(norm, grid)?;
        let values = dual.grid_values().into_iter().map(|v| 1.0 / v).collect();
        Self::new(grid.clone(), values)
    }

    /// Largest radius inscribed around the origin.
    pub fn inradius(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// CSV with columns `u0..u{n-1},value`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.grid.dim()).map(|i| format!("u{i}")).collect();
        header.push("value".into());
        w.write_record(&header)?;
        for (u, v) in self.grid.directions().zip(&self.values) {
            let mut row: Vec<String> = u.iter().map(|c| format!("{c:.17e}")).collect();
            row.push(format!("{v:.17e}"));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

/// The dual norm `F*` of a norm, with the unit sphere of `F` cached on a grid.
pub struct DualNorm<'a> {
    norm: &'a Norm,
    grid: &'a DirectionGrid,
    /// Row-major boundary points `u / F(u)` of `K_F`.
    boundary: Vec<f64>,
}

impl<'a> DualNorm<'a> {
    pub fn new(norm: &'a Norm, grid: &'a DirectionGrid) -> Result<Self> {
        if norm.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                found: norm.dim(),
            });
        }
        let mut boundary = Vec::with_capacity(grid.len() * grid.dim());
        for u in grid.directions() {
            let f = norm.eval(u);
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::InvalidBody(format!("norm value {f} at direction {u:?}")));
            }
            boundary.extend(u.iter().map(|c| c / f));
        }
        Ok(Self {
            norm,
            grid,
            boundary,
        })
    }

    /// `F*(xi) = max_u xi(u) / F(u)`.
    pub fn eval(&self, xi: &[f64]) -> f64 {
        self.eval_with_argmax(xi).0
    }

    /// The value and the grid index where the scan found the maximum.
    fn eval_with_argmax(&self, xi: &[f64]) -> (f64, usize) {
        let n = self.grid.dim();
        if xi.iter().all(|v| *v == 0.0) {
            return (0.0, 0);
        }
        let (k, coarse) = self
            .boundary
            .chunks_exact(n)
            .map(|p| dot(p, xi))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
        (self.eval_near(xi, k).max(coarse), k)
    }

    /// Local maximization started at grid direction `k`, without the scan.
    /// Valid when the maximizer for `xi` lies within a grid spacing or so of `k`.
    fn eval_near(&self, xi: &[f64], k: usize) -> f64 {
        let norm = self.norm;
        refine_on_sphere(|y| dot(xi, y) / norm.eval(y), self.grid.direction(k), self.grid.spacing())
    }

    /// `F*` at every grid direction, in grid order.
    pub fn grid_values(&self) -> Vec<f64> {
        self.grid_values_with_argmax().into_iter().map(|(v, _)| v).collect()
    }

    fn grid_values_with_argmax(&self) -> Vec<(f64, usize)> {
        (0..self.grid.len())
            .into_par_iter()
            .map(|k| self.eval_with_argmax(self.grid.direction(k)))
            .collect()
    }
}

/// `F*(xi)` for a single covector.
pub fn dual_norm_eval(norm: &Norm, xi: &[f64], grid: &DirectionGrid) -> Result<f64> {
    Ok(DualNorm::new(norm, grid)?.eval(xi))
}

/// Volume barycenter of the body whose gauge on the grid is `fstar`:
/// `b = int_S u R^{n+1}/(n+1) / int_S R^n/n` with `R = 1 / fstar`.
pub fn polar_barycenter(fstar: &[f64], grid: &DirectionGrid) -> Result<DVector<f64>> {
    if fstar.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: fstar.len(),
        });
    }
    let n = grid.dim();
    let nf = n as f64;
    let mut moment = DVector::zeros(n);
    let mut volume = 0.0;
    for ((u, w), g) in grid.directions().zip(grid.weights()).zip(fstar) {
        if !(*g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidBody(format!("gauge value {g} is not positive")));
        }
        let r = 1.0 / g;
        let rn = r.powi(n as i32);
        volume += w * rn / nf;
        let radial = w * rn * r / (nf + 1.0);
        for i in 0..n {
            moment[i] += radial * u[i];
        }
    }
    Ok(moment / volume)
}

/// The betterment of one norm: `F_better(y) = F(y) - b_F(y)`.
#[derive(Debug, Clone)]
pub struct Betterment {
    norm: Norm,
    dual_values: Vec<f64>,
    barycenter: DVector<f64>,
}

impl Betterment {
    pub fn new(norm: &Norm, grid: &DirectionGrid) -> Result<Self> {
        let dual_values = DualNorm::new(norm, grid)?.grid_values();
        let barycenter = polar_barycenter(&dual_values, grid)?;
        let b = barycenter.as_slice();
        let min_gauge = grid
            .directions()
            .map(|u| norm.eval(u) - dot(b, u))
            .fold(f64::INFINITY, f64::min);
        if !(min_gauge > 0.0) {
            return Err(Error::DegenerateBetterment { min_gauge });
        }
        Ok(Self {
            norm: norm.clone(),
            dual_values,
            barycenter,
        })
    }

    pub fn barycenter(&self) -> &DVector<f64> {
        &self.barycenter
    }

    /// `F*` of the original norm on the grid.
    pub fn dual_values(&self) -> &[f64] {
        &self.dual_values
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.norm.eval(y) - dot(self.barycenter.as_slice(), y)
    }

    pub fn better_norm(&self) -> Norm {
        let minus_b: Vec<f64> = self.barycenter.iter().map(|v| -v).collect();
        self.norm.plus_covector(&minus_b)
    }
}

/// `F_better(y)`.
pub fn betterment_eval(norm: &Norm, y: &[f64], grid: &DirectionGrid) -> Result<f64> {
    if y.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateInput("zero tangent vector".into()));
    }
    Ok(Betterment::new(norm, grid)?.eval(y))
}

/// Least-squares quadratic form fitted to `F(u)^2` on the grid.
#[derive(Debug, Clone)]
pub struct RiemannianFit {
    pub is_quadratic: bool,
    pub g: DMatrix<f64>,
    /// `max_u |F(u)^2 - u^T g u| / F(u)^2`.
    pub residual: f64,
}

pub fn riemannian_fit(values: &[f64], grid: &DirectionGrid, tolerance: f64) -> Result<RiemannianFit> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: values.len(),
        });
    }
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidBody("norm samples must be positive".into()));
    }
    let n = grid.dim();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let mut design = DMatrix::zeros(grid.len(), pairs.len());
    let mut rhs = DVector::zeros(grid.len());
    for (row, (u, f)) in grid.directions().zip(values).enumerate() {
        for (col, &(i, j)) in pairs.iter().enumerate() {
            design[(row, col)] = if i == j { u[i] * u[i] } else { 2.0 * u[i] * u[j] };
        }
        rhs[row] = f * f;
    }
    let coeffs = design
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut g = DMatrix::zeros(n, n);
    for (c, &(i, j)) in coeffs.iter().zip(&pairs) {
        g[(i, j)] = *c;
        g[(j, i)] = *c;
    }
    let residual = grid
        .directions()
        .zip(values)
        .map(|(u, f)| (f * f - crate::metric::quadratic_form(&g, u)).abs() / (f * f))
        .fold(0.0, f64::max);
    let positive = g.clone().cholesky().is_some();
    Ok(RiemannianFit {
        is_quadratic: positive && residual < tolerance,
        g,
        residual,
    })
}

/// Support function `h_{K*_F}(u)` on the grid, reconstructed from the radial
/// samples of the polar body and refined with the continuous dual norm.
fn polar_support(norm: &Norm, grid: &DirectionGrid) -> Result<Vec<f64>> {
    let dual = DualNorm::new(norm, grid)?;
    let n = grid.dim();
    let radial = dual.grid_values_with_argmax();
    let points: Vec<f64> = grid
        .directions()
        .zip(&radial)
        .flat_map(|(v, (g, _))| v.iter().map(move |c| c / g))
        .collect();
    Ok((0..grid.len())
        .into_par_iter()
        .map(|k| {
            let u = grid.direction(k);
            let (best, coarse) = points
                .chunks_exact(n)
                .map(|p| dot(p, u))
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
            // the polar maximizer moves little as y leaves direction `best`,
            // so the inner search starts where the scan for `best` ended
            let inner = radial[best].1;
            let refined = refine_on_sphere(|y| dot(u, y) / dual.eval_near(y, inner), grid.direction(best), grid.spacing());
            refined.max(coarse)
        })
        .collect())
}

/// `max_u |h_{K*_{F+sigma}}(u) - h_{K*_F}(u) - sigma(u)|`: the deviation of
/// the polar body of `F + sigma` from the `sigma`-translate of `K*_F`, both
/// bodies rebuilt from their gauge samples.
pub fn polar_translation_check(norm: &Norm, sigma: &[f64], grid: &DirectionGrid) -> Result<f64> {
    if sigma.len() != norm.dim() {
        return Err(Error::DimensionMismatch {
            expected: norm.dim(),
            found: sigma.len(),
        });
    }
    for u in grid.directions() {
        let margin = 1.0 + dot(sigma, u) / norm.eval(u);
        if !(margin > 0.0) {
            return Err(Error::ConvexityViolation {
                point: u.to_vec(),
                margin,
            });
        }
    }
    let shifted = norm.plus_covector(sigma);
    let base = polar_support(norm, grid)?;
    let moved = polar_support(&shifted, grid)?;
    Ok(grid
        .directions()
        .zip(base.iter().zip(&moved))
        .map(|(u, (h0, h1))| (h1 - h0 - dot(sigma, u)).abs())
        .fold(0.0, f64::max))
}
