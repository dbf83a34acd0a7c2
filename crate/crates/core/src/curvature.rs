//! Levi-Civita connection and sectional curvature by finite differences.
//!
//! Conventions: `Gamma^k_ij = 1/2 g^{ka} (d_i g_aj + d_j g_ai - d_a g_ij)`,
//! `R^l_{kij} = d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik`
//! (so `R(X, Y) = [nabla_X, nabla_Y]` on coordinate fields), and
//! `K(u, v) = <R(u, v) v, u> / (|u|^2 |v|^2 - <u, v>^2)`, which is `+1` on the
//! unit sphere.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::{central, ChartDomain, MetricTensorField};
use crate::error::{Error, Result};
use crate::metric::quadratic_form;

/// `Gamma^k_ij`, stored at `(k * n + i) * n + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffels {
    n: usize,
    data: Vec<f64>,
}

impl Christoffels {
    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn christoffels(g: &MetricTensorField, x: &[f64], h: f64) -> Result<Christoffels> {
    let n = g.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len() });
    }
    let inverse = g
        .eval(x)
        .cholesky()
        .ok_or_else(|| Error::IndefiniteMetric { point: x.to_vec() })?
        .inverse();
    let dg: Vec<DMatrix<f64>> = (0..n).map(|i| central(|y| g.eval(y), x, i, h)).collect();
    let mut data = vec![0.0; n * n * n];
    for i in 0..n {
        for j in i..n {
            for k in 0..n {
                let mut s = 0.0;
                for a in 0..n {
                    s += inverse[(k, a)] * (dg[i][(a, j)] + dg[j][(a, i)] - dg[a][(i, j)]);
                }
                data[(k * n + i) * n + j] = 0.5 * s;
                data[(k * n + j) * n + i] = 0.5 * s;
            }
        }
    }
    Ok(Christoffels { n, data })
}

/// A 2-plane `span(u, v)` in `T_x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneAtPoint {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl PlaneAtPoint {
    pub fn new(x: Vec<f64>, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != x.len() || v.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: if u.len() != x.len() { u.len() } else { v.len() },
            });
        }
        Ok(Self { x, u, v })
    }
}

/// Smallest accepted `gram / (|u|^2 |v|^2)`.
pub const MIN_RELATIVE_GRAM: f64 = 1e-6;

/// `<R(u, v) v, u>` with `R` from central differences (step `h`) of the
/// Christoffel symbols, which themselves use step `h`; the stencil reaches `2h`.
pub fn sectional_curvature(g: &MetricTensorField, plane: &PlaneAtPoint, h: f64) -> Result<f64> {
    let n = g.dim();
    let PlaneAtPoint { x, u, v } = plane;
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x.len() });
    }
    let metric = g.eval(x);
    let (uu, vv) = (quadratic_form(&metric, u), quadratic_form(&metric, v));
    let uv: f64 = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| metric[(a, b)] * u[a] * v[b]).sum();
    let gram = uu * vv - uv * uv;
    if !(gram >= MIN_RELATIVE_GRAM * uu * vv) || !(uu > 0.0 && vv > 0.0) {
        return Err(Error::DegeneratePlane {
            gram: gram / (uu * vv),
        });
    }
    let gamma = christoffels(g, x, h)?;
    let mut shifted = x.clone();
    let mut d_gamma = Vec::with_capacity(n);
    for i in 0..n {
        shifted[i] = x[i] + h;
        let plus = christoffels(g, &shifted, h)?;
        shifted[i] = x[i] - h;
        let minus = christoffels(g, &shifted, h)?;
        shifted[i] = x[i];
        let d: Vec<f64> = plus.data.iter().zip(&minus.data).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        d_gamma.push(d);
    }
    let dg = |i: usize, l: usize, a: usize, b: usize| d_gamma[i][(l * n + a) * n + b];
    // w^l = R^l_{kij} u^i v^j v^k
    let mut w = vec![0.0; n];
    for (l, wl) in w.iter_mut().enumerate() {
        let mut s = 0.0;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let coeff = u[i] * v[j] * v[k];
                    if coeff == 0.0 {
                        continue;
                    }
                    let mut r = dg(i, l, j, k) - dg(j, l, i, k);
                    for m in 0..n {
                        r += gamma.get(l, i, m) * gamma.get(m, j, k) - gamma.get(l, j, m) * gamma.get(m, i, k);
                    }
                    s += r * coeff;
                }
            }
        }
        *wl = s;
    }
    let mut num = 0.0;
    for a in 0..n {
        for b in 0..n {
            num += metric[(a, b)] * w[a] * u[b];
        }
    }
    Ok(num / gram)
}

/// Which planes a sweep samples.
#[derive(Debug, Clone, PartialEq)]
pub enum PlaneKind {
    Generic,
    /// Planes `span(u, J u)` for a constant complex structure `J`.
    Complex(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSample {
    pub point: Vec<f64>,
    /// Index of the plane within the sweep.
    pub plane_seed: u64,
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSweep {
    pub samples: Vec<CurvatureSample>,
    pub mean: f64,
    /// Sample standard deviation.
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
}

impl CurvatureSweep {
    /// CSV with columns `x0..x{n-1},plane_seed,K`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let n = self.samples.first().map_or(0, |s| s.point.len());
        let mut header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        header.push("plane_seed".into());
        header.push("K".into());
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row: Vec<String> = s.point.iter().map(|v| format!("{v:.17e}")).collect();
            row.push(s.plane_seed.to_string());
            row.push(format!("{:.17e}", s.curvature));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

/// Sectional curvature at `count` seeded random planes. Points are uniform
/// in the box shrunk by 20%; `u` and `v` have uniform components in `[-1, 1]`.
pub fn curvature_sweep(
    g: &MetricTensorField,
    chart: &ChartDomain,
    kind: &PlaneKind,
    count: usize,
    seed: u64,
) -> Result<CurvatureSweep> {
    let n = chart.dim();
    let h = chart.fd_step();
    let (lo, hi) = chart.shrunk(0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count);
    let mut drawn = 0u64;
    while samples.len() < count {
        drawn += 1;
        if drawn > 100 * count as u64 + 100 {
            return Err(Error::DegenerateInput("could not draw nondegenerate planes".into()));
        }
        let x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * rng.gen::<f64>()).collect();
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = match kind {
            PlaneKind::Generic => (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            PlaneKind::Complex(j) => (j * nalgebra::DVector::from_column_slice(&u)).as_slice().to_vec(),
        };
        chart.require_stencil(&x, 2.0 * h)?;
        let plane = PlaneAtPoint::new(x.clone(), u, v)?;
        match sectional_curvature(g, &plane, h) {
            Ok(curvature) => samples.push(CurvatureSample {
                point: x,
                plane_seed: drawn - 1,
                curvature,
            }),
            Err(Error::DegeneratePlane { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let m = samples.len() as f64;
    let mean = samples.iter().map(|s| s.curvature).sum::<f64>() / m;
    let var = samples.iter().map(|s| (s.curvature - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    let (min, max) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.curvature), b.max(s.curvature)));
    Ok(CurvatureSweep {
        samples,
        mean,
        std_dev: var.sqrt(),
        min,
        max,
    })
}
