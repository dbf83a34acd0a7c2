//! Nonsymmetric distances by polyline minimization, the triangular function
//! `T(p, q, r) = d(p, q) + d(q, r) - d(p, r)` and almost-isometry checks.
//!
//! A path is a polyline; each segment is integrated with Simpson's rule. The
//! distance minimizes the discrete energy `sum l_i^2` over interior vertices
//! by damped Newton steps, first on 2 or 3 segments and then on successive
//! refinements up to the requested count. The energy fixes the parametrization
//! (its minimizers have segments of equal `F`-length), so the Hessian is
//! regular even where the length functional is flat along the path.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chart::{ChartDomain, OneFormField};
use crate::error::{Error, Result};
use crate::grid::DirectionGrid;
use crate::metric::{dot, MetricField};

/// Polyline from `points[0]` to `points[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPolyline {
    points: Vec<Vec<f64>>,
}

impl PathPolyline {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument("a path needs at least two points".into()));
        }
        let n = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.len(),
            });
        }
        for w in points.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DegenerateInput(format!("zero-length segment at {:?}", w[0])));
            }
        }
        Ok(Self { points })
    }

    /// Straight path with `k` equal segments.
    pub fn straight(p: &[f64], q: &[f64], k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        let points = (0..=k)
            .map(|i| {
                let t = i as f64 / k as f64;
                p.iter().zip(q).map(|(a, b)| a + t * (b - a)).collect()
            })
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self { points }
    }
}

/// Simpson approximation of `int_0^1 F(a + t(b - a), b - a) dt`.
fn segment_length(f: &MetricField, a: &[f64], b: &[f64]) -> f64 {
    let delta: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
    (f.eval(a, &delta) + 4.0 * f.eval(&mid, &delta) + f.eval(b, &delta)) / 6.0
}

/// Length of a polyline: per-segment Simpson rule. Order matters for
/// nonreversible metrics.
pub fn path_length(f: &MetricField, path: &PathPolyline) -> Result<f64> {
    if path.points[0].len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: path.points[0].len(),
        });
    }
    Ok(path
        .points
        .windows(2)
        .map(|w| segment_length(f, &w[0], &w[1]))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistanceOptions {
    /// Segments of the finest polyline.
    pub segments: usize,
    /// Newton iterations allowed per refinement level.
    pub iters: usize,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            segments: 32,
            iters: 20,
        }
    }
}

impl DistanceOptions {
    pub fn doubled(self) -> Self {
        Self {
            segments: 2 * self.segments,
            iters: 2 * self.iters,
        }
    }
}

/// Polyline stored flat, endpoints included.
struct Chain<'a> {
    f: &'a MetricField,
    n: usize,
    pts: Vec<f64>,
}

impl Chain<'_> {
    fn k(&self) -> usize {
        self.pts.len() / self.n - 1
    }

    fn vertex(&self, i: usize) -> &[f64] {
        &self.pts[i * self.n..(i + 1) * self.n]
    }

    fn seg(&self, i: usize) -> f64 {
        segment_length(self.f, self.vertex(i), self.vertex(i + 1))
    }

    fn length(&self) -> f64 {
        (0..self.k()).map(|i| self.seg(i)).sum()
    }

    fn energy(&self) -> f64 {
        (0..self.k()).map(|i| self.seg(i).powi(2)).sum()
    }

    /// Energy terms that touch vertex `j`.
    fn local(&self, j: usize) -> f64 {
        self.seg(j - 1).powi(2) + self.seg(j).powi(2)
    }

    fn shifted<T>(&mut self, idx: &[(usize, f64)], eval: impl FnOnce(&Self) -> T) -> T {
        for &(i, d) in idx {
            self.pts[i] += d;
        }
        let out = eval(self);
        for &(i, d) in idx {
            self.pts[i] -= d;
        }
        out
    }

    fn gradient(&mut self, eps: f64) -> DVector<f64> {
        let n = self.n;
        let m = (self.k() - 1) * n;
        let mut g = DVector::zeros(m);
        for j in 1..self.k() {
            for a in 0..n {
                let i = j * n + a;
                let plus = self.shifted(&[(i, eps)], |c| c.local(j));
                let minus = self.shifted(&[(i, -eps)], |c| c.local(j));
                g[(j - 1) * n + a] = (plus - minus) / (2.0 * eps);
            }
        }
        g
    }

    /// Block-tridiagonal Hessian of the energy, assembled densely.
    fn hessian(&mut self, eps: f64) -> DMatrix<f64> {
        let n = self.n;
        let k = self.k();
        let m = (k - 1) * n;
        let mut h = DMatrix::zeros(m, m);
        let four = |c: &mut Self, i: usize, j: usize, e: &dyn Fn(&Self) -> f64| -> f64 {
            let pp = c.shifted(&[(i, eps), (j, eps)], e);
            let pm = c.shifted(&[(i, eps), (j, -eps)], e);
            let mp = c.shifted(&[(i, -eps), (j, eps)], e);
            let mm = c.shifted(&[(i, -eps), (j, -eps)], e);
            (pp - pm - mp + mm) / (4.0 * eps * eps)
        };
        for v in 1..k {
            let local = move |c: &Self| c.local(v);
            let e0 = local(self);
            for a in 0..n {
                let ia = v * n + a;
                let plus = self.shifted(&[(ia, eps)], local);
                let minus = self.shifted(&[(ia, -eps)], local);
                let r = (v - 1) * n + a;
                h[(r, r)] = (plus - 2.0 * e0 + minus) / (eps * eps);
                for b in a + 1..n {
                    let val = four(self, ia, v * n + b, &local);
                    let c = (v - 1) * n + b;
                    h[(r, c)] = val;
                    h[(c, r)] = val;
                }
            }
            if v + 1 < k {
                let coupling = move |c: &Self| c.seg(v).powi(2);
                for a in 0..n {
                    for b in 0..n {
                        let val = four(self, v * n + a, (v + 1) * n + b, &coupling);
                        let (r, c) = ((v - 1) * n + a, v * n + b);
                        h[(r, c)] = val;
                        h[(c, r)] = val;
                    }
                }
            }
        }
        h
    }

    /// Damped Newton on the energy. Returns an error if an accepted iterate
    /// leaves the chart box.
    fn minimize(&mut self, iters: usize, chart: &ChartDomain) -> Result<()> {
        let n = self.n;
        let k = self.k();
        if k < 2 {
            return Ok(());
        }
        let chord: f64 = {
            let (p, q) = (self.vertex(0), self.vertex(k));
            p.iter().zip(q).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
        };
        let scale = chord / k as f64;
        let (eps_g, eps_h) = (1e-6 * scale, 1e-4 * scale);
        let mut energy = self.energy();
        // The Hessian is reused while full steps are accepted (chord iteration).
        let mut hessian: Option<DMatrix<f64>> = None;
        for _ in 0..iters {
            let g = self.gradient(eps_g);
            let fresh = hessian.is_none();
            let h = match hessian.take() {
                Some(h) => h,
                None => self.hessian(eps_h),
            };
            let step = newton_direction(h.clone(), &g);
            let slope = g.dot(&step);
            if !(slope < 0.0) || -slope < 1e-15 * energy {
                if fresh {
                    break;
                }
                continue;
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let trial = self.shifted_by(&step, t);
                let e = trial.energy();
                if e <= energy + 1e-4 * t * slope {
                    accepted = Some((trial.pts, e));
                    break;
                }
                t *= 0.5;
            }
            let Some((pts, e)) = accepted else {
                if fresh {
                    break;
                }
                continue;
            };
            if let Some(v) = pts.chunks_exact(n).find(|v| !chart.contains(v)) {
                return Err(Error::PathEscape { point: v.to_vec() });
            }
            let gain = energy - e;
            self.pts = pts;
            energy = e;
            if gain <= 1e-15 * energy {
                break;
            }
            if t == 1.0 {
                hessian = Some(h);
            }
        }
        Ok(())
    }

    fn shifted_by(&self, step: &DVector<f64>, t: f64) -> Self {
        let mut pts = self.pts.clone();
        for (p, s) in pts[self.n..].iter_mut().zip(step.iter()) {
            *p += t * s;
        }
        Self {
            f: self.f,
            n: self.n,
            pts,
        }
    }

    /// Insert segment midpoints.
    fn refined(&self) -> Self {
        let n = self.n;
        let k = self.k();
        let mut pts = Vec::with_capacity((2 * k + 1) * n);
        for i in 0..k {
            let (a, b) = (self.vertex(i), self.vertex(i + 1));
            pts.extend_from_slice(a);
            pts.extend(a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)));
        }
        pts.extend_from_slice(self.vertex(k));
        Self { f: self.f, n, pts }
    }
}

/// Solve `(H + mu I) d = -g`, raising `mu` until the matrix is positive-definite.
fn newton_direction(h: DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let scale = h.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut mu = 0.0;
    loop {
        let mut damped = h.clone();
        for i in 0..damped.nrows() {
            damped[(i, i)] += mu;
        }
        if let Some(ch) = damped.cholesky() {
            return -ch.solve(g);
        }
        mu = if mu == 0.0 { 1e-8 * scale } else { 10.0 * mu };
        if mu > 1e8 * scale {
            return -g / scale;
        }
    }
}

/// Lengths found at each refinement level, coarsest first.
fn solve_levels(
    f: &MetricField,
    p: &[f64],
    q: &[f64],
    chart: &ChartDomain,
    opts: DistanceOptions,
) -> Result<Vec<(usize, f64)>> {
    if opts.segments < 2 {
        return Err(Error::InvalidArgument("at least two segments are required".into()));
    }
    let mut k0 = opts.segments;
    while k0 % 2 == 0 && k0 > 3 {
        k0 /= 2;
    }
    let straight = |k: usize| -> Chain<'_> {
        let mut pts = Vec::with_capacity((k + 1) * p.len());
        for i in 0..=k {
            let t = i as f64 / k as f64;
            pts.extend(p.iter().zip(q).map(|(a, b)| a + t * (b - a)));
        }
        Chain { f, n: p.len(), pts }
    };
    let mut chain = straight(k0);
    let mut levels = Vec::new();
    loop {
        let k = chain.k();
        let line = straight(k).length();
        chain.minimize(opts.iters, chart)?;
        levels.push((k, chain.length().min(line)));
        if k >= opts.segments {
            break;
        }
        chain = chain.refined();
    }
    Ok(levels)
}

fn check_endpoints(f: &MetricField, p: &[f64], q: &[f64], chart: &ChartDomain) -> Result<()> {
    for x in [p, q] {
        if x.len() != f.dim() || chart.dim() != f.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.dim(),
                found: x.len(),
            });
        }
        if !chart.contains(x) {
            return Err(Error::PathEscape { point: x.to_vec() });
        }
    }
    Ok(())
}

/// `d(p, q)`: the smallest polyline length found on the refinement hierarchy
/// ending at `opts.segments`, never above the straight segment. `d(p, p) = 0`.
pub fn distance(f: &MetricField, p: &[f64], q: &[f64], chart: &ChartDomain, opts: DistanceOptions) -> Result<f64> {
    check_endpoints(f, p, q, chart)?;
    if p == q {
        return Ok(0.0);
    }
    let levels = solve_levels(f, p, q, chart, opts)?;
    Ok(levels.iter().map(|l| l.1).fold(f64::INFINITY, f64::min))
}

/// A distance with its k-doubling convergence record.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceReport {
    /// Value at the doubled resolution.
    pub distance: f64,
    pub segments: usize,
    pub iters: usize,
    /// `d(k, iters) - d(2k, 2 iters)`.
    pub cauchy: f64,
    /// `(k, length)` per refinement level of the doubled run.
    pub trace: Vec<(usize, f64)>,
}

pub fn distance_report(
    f: &MetricField,
    p: &[f64],
    q: &[f64],
    chart: &ChartDomain,
    opts: DistanceOptions,
) -> Result<DistanceReport> {
    check_endpoints(f, p, q, chart)?;
    let fine_opts = opts.doubled();
    if p == q {
        return Ok(DistanceReport {
            distance: 0.0,
            segments: fine_opts.segments,
            iters: fine_opts.iters,
            cauchy: 0.0,
            trace: Vec::new(),
        });
    }
    let coarse = distance(f, p, q, chart, opts)?;
    let trace = solve_levels(f, p, q, chart, fine_opts)?;
    let fine = trace.iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
    Ok(DistanceReport {
        distance: fine,
        segments: fine_opts.segments,
        iters: fine_opts.iters,
        cauchy: (coarse - fine).abs(),
        trace,
    })
}

/// Floor of the operational solver tolerance.
pub const MIN_SOLVER_TOLERANCE: f64 = 1e-6;

/// Three chart points.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleSample {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub r: Vec<f64>,
}

impl TripleSample {
    pub fn new(p: Vec<f64>, q: Vec<f64>, r: Vec<f64>) -> Self {
        Self { p, q, r }
    }

    /// `count` triples uniform in the box `[lower, upper]`, from a ChaCha8 stream.
    pub fn seeded(lower: &[f64], upper: &[f64], count: usize, seed: u64) -> Vec<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut point = || -> Vec<f64> {
            lower
                .iter()
                .zip(upper)
                .map(|(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
                .collect()
        };
        (0..count)
            .map(|_| {
                let (p, q, r) = (point(), point(), point());
                Self { p, q, r }
            })
            .collect()
    }

    pub fn mapped(&self, phi: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<Self> {
        Ok(Self {
            p: phi(&self.p)?,
            q: phi(&self.q)?,
            r: phi(&self.r)?,
        })
    }
}

pub fn triangular(f: &MetricField, s: &TripleSample, chart: &ChartDomain, opts: DistanceOptions) -> Result<f64> {
    let d = |a: &[f64], b: &[f64]| distance(f, a, b, chart, opts);
    Ok(d(&s.p, &s.q)? + d(&s.q, &s.r)? - d(&s.p, &s.r)?)
}

/// `T` at the doubled resolution with the largest Cauchy difference of its
/// three distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangularReport {
    pub value: f64,
    pub cauchy: f64,
}

pub fn triangular_report(
    f: &MetricField,
    s: &TripleSample,
    chart: &ChartDomain,
    opts: DistanceOptions,
) -> Result<TriangularReport> {
    let d = |a: &[f64], b: &[f64]| distance_report(f, a, b, chart, opts);
    let (pq, qr, pr) = (d(&s.p, &s.q)?, d(&s.q, &s.r)?, d(&s.p, &s.r)?);
    Ok(TriangularReport {
        value: pq.distance + qr.distance - pr.distance,
        cauchy: pq.cauchy.max(qr.cauchy).max(pr.cauchy),
    })
}

/// One row of a T-invariance sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleRow {
    pub triple: TripleSample,
    pub t: f64,
    pub t_mapped: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub rows: Vec<TripleRow>,
    pub max_diff: f64,
}

impl InvarianceReport {
    /// CSV with columns `p0.., q0.., r0.., T, T_phi, diff`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let n = self.rows.first().map_or(0, |r| r.triple.p.len());
        let mut header = Vec::new();
        for name in ["p", "q", "r"] {
            header.extend((0..n).map(|i| format!("{name}{i}")));
        }
        header.extend(["T".to_string(), "T_phi".to_string(), "diff".to_string()]);
        w.write_record(&header)?;
        for row in &self.rows {
            let s = &row.triple;
            let rec: Vec<String> = s
                .p
                .iter()
                .chain(&s.q)
                .chain(&s.r)
                .chain([&row.t, &row.t_mapped, &row.diff])
                .map(|v| format!("{v:.17e}"))
                .collect();
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

/// `max |T(phi(p), phi(q), phi(r)) - T(p, q, r)|` over the triples.
pub fn t_invariance_check(
    f: &MetricField,
    phi: impl Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    triples: &[TripleSample],
    chart: &ChartDomain,
    opts: DistanceOptions,
) -> Result<InvarianceReport> {
    let rows = triples
        .par_iter()
        .map(|s| {
            let image = s.mapped(&phi)?;
            let t = triangular(f, s, chart, opts)?;
            let t_mapped = triangular(f, &image, chart, opts)?;
            Ok(TripleRow {
                triple: s.clone(),
                t,
                t_mapped,
                diff: (t_mapped - t).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_diff = rows.iter().map(|r| r.diff).fold(0.0, f64::max);
    Ok(InvarianceReport { rows, max_diff })
}

/// How far a map is from satisfying `phi_* F = F + df` near a point.
#[derive(Debug, Clone, PartialEq)]
pub struct PullbackDelta {
    /// `max_u |delta(x, u) - l(u)|` for the least-squares covector `l`.
    pub linearity_residual: f64,
    /// Largest component of the exterior derivative of the fitted covector field at `x`.
    pub closedness_residual: f64,
    /// The fitted covector `l`, the candidate `df(x)`.
    pub covector: DVector<f64>,
}

/// Jacobian of `phi` at `x` by central differences.
fn map_jacobian(phi: &impl Fn(&[f64]) -> Result<Vec<f64>>, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut y = x.to_vec();
    for j in 0..n {
        y[j] = x[j] + h;
        let plus = phi(&y)?;
        y[j] = x[j] - h;
        let minus = phi(&y)?;
        y[j] = x[j];
        for i in 0..n {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Least-squares covector fitted to `delta(x, u) = F(phi(x), Dphi(x) u) - F(x, u)`
/// on the grid, and the worst fit residual.
fn fit_delta(
    f: &MetricField,
    phi: &impl Fn(&[f64]) -> Result<Vec<f64>>,
    x: &[f64],
    h: f64,
    grid: &DirectionGrid,
) -> Result<(DVector<f64>, f64)> {
    let n = x.len();
    let jac = map_jacobian(phi, x, h)?;
    if jac.determinant().abs() < 1e-12 {
        return Err(Error::InvalidMap { point: x.to_vec() });
    }
    let image = phi(x)?;
    let deltas: Vec<f64> = grid
        .directions()
        .map(|u| {
            let pushed = &jac * DVector::from_column_slice(u);
            f.eval(&image, pushed.as_slice()) - f.eval(x, u)
        })
        .collect();
    let mut normal = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for ((u, w), d) in grid.directions().zip(grid.weights()).zip(&deltas) {
        let u = DVector::from_column_slice(u);
        normal += &u * u.transpose() * *w;
        rhs += &u * (w * d);
    }
    let covector = normal
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("direction grid does not span".into()))?
        .solve(&rhs);
    let residual = grid
        .directions()
        .zip(&deltas)
        .map(|(u, d)| (d - dot(covector.as_slice(), u)).abs())
        .fold(0.0, f64::max);
    Ok((covector, residual))
}

/// Measures `delta(x, u) = F(phi(x), Dphi(x) u) - F(x, u)` against the form
/// `df(x)(u)` that an almost isometry must produce. Jacobians use central
/// differences with the chart step; the closedness residual needs a stencil
/// of twice that step around `x`.
pub fn pullback_delta(
    f: &MetricField,
    phi: impl Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + Clone + 'static,
    x: &[f64],
    chart: &ChartDomain,
    grid: &DirectionGrid,
) -> Result<PullbackDelta> {
    let h = chart.fd_step();
    chart.require_stencil(x, 2.0 * h)?;
    let (covector, linearity_residual) = fit_delta(f, &phi, x, h, grid)?;
    let field = {
        let (f, grid) = (f.clone(), grid.clone());
        let n = x.len();
        OneFormField::new(n, move |y| {
            fit_delta(&f, &phi, y, h, &grid)
                .map(|(c, _)| c)
                .unwrap_or_else(|_| DVector::from_element(n, f64::NAN))
        })
    };
    let d = crate::chart::exterior_derivative(&field, x, chart)?;
    let closedness_residual = d.amax();
    if !closedness_residual.is_finite() {
        return Err(Error::InvalidMap { point: x.to_vec() });
    }
    Ok(PullbackDelta {
        linearity_residual,
        closedness_residual,
        covector,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::MetricTensorField;
    use crate::metric::RandersData;

    fn constant_drift(a: f64) -> MetricField {
        let data = RandersData::new(
            MetricTensorField::identity(2),
            OneFormField::constant(DVector::from_vec(vec![a, 0.0])),
        )
        .unwrap();
        MetricField::randers(&data)
    }

    fn swirl(c: f64) -> MetricField {
        let tau = OneFormField::new(2, move |x| DVector::from_vec(vec![-0.5 * c * x[1], 0.5 * c * x[0]]));
        MetricField::randers(&RandersData::new(MetricTensorField::identity(2), tau).unwrap())
    }

    fn chart(half: f64) -> ChartDomain {
        ChartDomain::cube(2, half, 1e-3).unwrap()
    }

    #[test]
    fn path_length_examples() {
        let e = MetricField::euclidean(2);
        let p = PathPolyline::new(vec![vec![0.0, 0.0], vec![1.5, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!((path_length(&e, &p).unwrap() - 5.0).abs() < 1e-14);

        let f = constant_drift(0.3);
        let p = PathPolyline::straight(&[0.0, 0.0], &[1.0, 0.0], 1).unwrap();
        assert!((path_length(&f, &p).unwrap() - 1.3).abs() < 1e-14);
        assert!((path_length(&f, &p.reversed()).unwrap() - 0.7).abs() < 1e-14);

        let p = PathPolyline::new(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 0.0]]).unwrap();
        assert!((path_length(&e, &p).unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-14);

        assert!(matches!(
            PathPolyline::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn distance_examples() {
        let opts = DistanceOptions::default();
        let d = distance(&MetricField::euclidean(2), &[0.0, 0.0], &[3.0, 4.0], &chart(5.0), opts).unwrap();
        assert!((d - 5.0).abs() < 1e-6);

        let f = constant_drift(0.3);
        let c = chart(2.0);
        assert!((distance(&f, &[0.0, 0.0], &[1.0, 0.0], &c, opts).unwrap() - 1.3).abs() < 1e-6);
        assert!((distance(&f, &[1.0, 0.0], &[0.0, 0.0], &c, opts).unwrap() - 0.7).abs() < 1e-6);
    }

    #[test]
    fn swirl_distance_is_bracketed() {
        // (1 - max|tau|) |p - q| <= F_sym-length <= d <= straight line
        let f = swirl(0.4);
        let c = chart(0.5);
        let (p, q) = ([0.0, 0.0], [0.2, 0.0]);
        let d = distance(&f, &p, &q, &c, DistanceOptions::default()).unwrap();
        let straight = path_length(&f, &PathPolyline::straight(&p, &q, 32).unwrap()).unwrap();
        let max_tau = 0.2 * 0.5 * 2f64.sqrt();
        assert!(d <= straight + 1e-12);
        assert!(d >= (1.0 - max_tau) * 0.2);
    }

    #[test]
    fn constant_form_asymmetry() {
        // d(p, q) - d(q, p) = 2 tau(q - p) for constant tau on flat g
        let f = constant_drift(0.3);
        let c = chart(2.0);
        let (p, q) = ([0.1, -0.2], [0.7, 0.5]);
        let opts = DistanceOptions::default();
        let forward = distance(&f, &p, &q, &c, opts).unwrap();
        let back = distance(&f, &q, &p, &c, opts).unwrap();
        assert!((forward - back - 2.0 * 0.3 * 0.6).abs() < 1e-9);
    }

    #[test]
    fn escaping_endpoints_are_rejected() {
        let r = distance(&MetricField::euclidean(2), &[0.0, 0.0], &[3.0, 0.0], &chart(1.0), DistanceOptions::default());
        assert!(matches!(r, Err(Error::PathEscape { .. })));
    }

    #[test]
    fn triangular_examples() {
        let c = chart(2.0);
        let opts = DistanceOptions::default();
        let s = TripleSample::new(vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]);
        let e = MetricField::euclidean(2);
        assert!((triangular(&e, &s, &c, opts).unwrap() - (2.0 - 2f64.sqrt())).abs() < 1e-5);
        assert!((triangular(&constant_drift(0.3), &s, &c, opts).unwrap() - (2.0 - 2f64.sqrt())).abs() < 1e-5);
        let same = TripleSample::new(vec![0.3, 0.3], vec![0.3, 0.3], vec![0.3, 0.3]);
        assert_eq!(triangular(&e, &same, &c, opts).unwrap(), 0.0);
    }

    fn rotation(angle: f64) -> impl Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + Clone + 'static {
        move |x: &[f64]| {
            let (s, c) = angle.sin_cos();
            Ok(vec![c * x[0] - s * x[1], s * x[0] + c * x[1]])
        }
    }

    #[test]
    fn euclidean_rotation_is_an_almost_isometry() {
        let c = chart(1.0);
        let triples = TripleSample::seeded(&[-0.6, -0.6], &[0.6, 0.6], 20, 7);
        let report = t_invariance_check(&MetricField::euclidean(2), rotation(0.5), &triples, &c, DistanceOptions::default()).unwrap();
        assert_eq!(report.rows.len(), 20);
        assert!(report.max_diff < 1e-5, "{}", report.max_diff);
    }

    #[test]
    fn quadratic_stretch_is_not_an_almost_isometry() {
        let c = chart(1.0);
        let triples = TripleSample::seeded(&[-0.9, -0.9], &[0.9, 0.9], 10, 3);
        let phi = |x: &[f64]| Ok(vec![x[0] + 0.1 * x[0] * x[0], x[1]]);
        let report = t_invariance_check(&MetricField::euclidean(2), phi, &triples, &c, DistanceOptions::default()).unwrap();
        assert!(report.max_diff > 1e-3, "{}", report.max_diff);
    }

    #[test]
    fn seeded_triples_are_reproducible() {
        let a = TripleSample::seeded(&[-1.0, -1.0], &[1.0, 1.0], 5, 42);
        let b = TripleSample::seeded(&[-1.0, -1.0], &[1.0, 1.0], 5, 42);
        assert_eq!(a, b);
        assert!(a.iter().all(|s| s.p.iter().all(|v| v.abs() <= 1.0)));
    }

    #[test]
    fn pullback_delta_examples() {
        let c = chart(1.0);
        let grid = DirectionGrid::polygon(64).unwrap();
        let x = [0.2, -0.1];
        let id = |x: &[f64]| Ok(x.to_vec());
        let r = pullback_delta(&swirl(0.4), id, &x, &c, &grid).unwrap();
        // exact up to the rounding of the difference quotient
        assert!(r.linearity_residual < 1e-12);
        assert!(r.closedness_residual < 1e-9);
        assert!(r.covector.amax() < 1e-12);

        let r = pullback_delta(&MetricField::euclidean(2), rotation(0.3), &x, &c, &grid).unwrap();
        assert!(r.linearity_residual < 1e-8 && r.covector.amax() < 1e-8);

        // the rotation preserves d tau, so phi^* tau - tau is exact
        let r = pullback_delta(&swirl(0.4), rotation(0.2), &x, &c, &grid).unwrap();
        assert!(r.linearity_residual < 1e-4 && r.closedness_residual < 1e-3);

        // translation: phi^* tau - tau = (c/2)(a0 dy - a1 dx), a constant covector
        let shift = |x: &[f64]| Ok(vec![x[0] + 0.1, x[1]]);
        let r = pullback_delta(&swirl(0.4), shift, &x, &c, &grid).unwrap();
        assert!((r.covector[1] - 0.2 * 0.1).abs() < 1e-8);

        let squash = |x: &[f64]| Ok(vec![x[0], 0.0 * x[1]]);
        assert!(matches!(
            pullback_delta(&swirl(0.4), squash, &x, &c, &grid),
            Err(Error::InvalidMap { .. })
        ));
    }

    #[test]
    fn pullback_of_non_isometry_is_not_linear() {
        let c = chart(1.0);
        let grid = DirectionGrid::polygon(64).unwrap();
        let phi = |x: &[f64]| Ok(vec![x[0] + 0.1 * x[0] * x[0], x[1]]);
        let r = pullback_delta(&MetricField::euclidean(2), phi, &[0.5, 0.0], &c, &grid).unwrap();
        assert!(r.linearity_residual > 1e-3);
    }

    #[test]
    fn csv_export() {
        let c = chart(1.0);
        let triples = TripleSample::seeded(&[-0.5, -0.5], &[0.5, 0.5], 2, 1);
        let report = t_invariance_check(&MetricField::euclidean(2), rotation(0.1), &triples, &c, DistanceOptions::default()).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("p0,p1,q0,q1,r0,r1,T,T_phi,diff\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn distance_report_records_convergence() {
        let r = distance_report(&swirl(0.4), &[-0.4, 0.1], &[0.5, 0.3], &chart(1.0), DistanceOptions::default()).unwrap();
        assert_eq!(r.segments, 64);
        assert!(r.cauchy < 1e-5, "{}", r.cauchy);
        assert!(r.trace.windows(2).all(|w| w[1].0 == 2 * w[0].0));
    }
}
