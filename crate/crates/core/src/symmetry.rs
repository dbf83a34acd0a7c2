//! Killing and almost-Killing fields.
//!
//! A field `K` is almost Killing for `F = sqrt(g) + tau` on a convex chart iff
//! `L_K g = 0` and `L_K d tau = 0`. Both conditions are linear in `K`, so with
//! a polynomial ansatz they become a linear system sampled at points; the
//! almost-Killing algebra is its numerical nullspace.
//!
//! Metric and 2-form derivatives in the residual use fourth-order central
//! differences, which keeps the residual of true Killing fields near rounding
//! level and the singular-value gap wide.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::chart::{central4, flow_map, ChartDomain, MetricTensorField, OneFormField, TwoFormField, VectorField};
use crate::error::{Error, Result};
use crate::geodesic::{t_invariance_check, DistanceOptions, TripleSample};
use crate::metric::{MetricField, RandersData};

/// Monomial vector fields `x^alpha d_i`, `|alpha| <= degree`.
///
/// Monomials are ordered by total degree, then lexicographically with the
/// exponent of `x_1` decreasing (`1, x1, x2, .., x1^2, x1 x2, ..`); the
/// coefficient of `x^alpha d_i` sits at `monomial_index * n + i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorFieldAnsatz {
    dim: usize,
    degree: usize,
    monomials: Vec<Vec<u32>>,
}

impl VectorFieldAnsatz {
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("ansatz dimension must be positive".into()));
        }
        let mut monomials = Vec::new();
        for d in 0..=degree {
            exponents(dim, d as u32, &mut Vec::new(), &mut monomials);
        }
        Ok(Self {
            dim,
            degree,
            monomials,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn monomials(&self) -> &[Vec<u32>] {
        &self.monomials
    }

    /// `n * C(n + D, D)`.
    pub fn len(&self) -> usize {
        self.dim * self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    /// Values of all monomials at `x`, and their gradients (`grads[m][j]`).
    fn monomial_jet(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let values = self.monomials.iter().map(|a| monomial(a, x)).collect();
        let grads = self
            .monomials
            .iter()
            .map(|a| {
                (0..self.dim)
                    .map(|j| {
                        if a[j] == 0 {
                            return 0.0;
                        }
                        let mut lower = a.clone();
                        lower[j] -= 1;
                        a[j] as f64 * monomial(&lower, x)
                    })
                    .collect()
            })
            .collect();
        (values, grads)
    }

    /// The field `sum_c coeffs[c] * basis_c`.
    pub fn field(&self, coeffs: &[f64]) -> Result<VectorField> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: coeffs.len(),
            });
        }
        let (ansatz, coeffs) = (self.clone(), coeffs.to_vec());
        Ok(VectorField::new(self.dim, move |x| {
            let n = ansatz.dim;
            let mut out = DVector::zeros(n);
            for (m, a) in ansatz.monomials.iter().enumerate() {
                let p = monomial(a, x);
                for i in 0..n {
                    out[i] += coeffs[m * n + i] * p;
                }
            }
            out
        }))
    }

    /// Coefficients of a field given by `(exponents, component, coefficient)` terms.
    pub fn coefficients(&self, terms: &[(&[u32], usize, f64)]) -> Result<DVector<f64>> {
        let mut c = DVector::zeros(self.len());
        for (alpha, i, v) in terms {
            let m = self
                .monomials
                .iter()
                .position(|a| a.as_slice() == *alpha)
                .ok_or_else(|| Error::InvalidArgument(format!("monomial {alpha:?} not in the ansatz")))?;
            c[m * self.dim + i] += v;
        }
        Ok(c)
    }
}

fn exponents(n: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() == n - 1 {
        let mut a = prefix.clone();
        a.push(remaining);
        out.push(a);
        return;
    }
    for e in (0..=remaining).rev() {
        prefix.push(e);
        exponents(n, remaining - e, prefix, out);
        prefix.pop();
    }
}

fn monomial(alpha: &[u32], x: &[f64]) -> f64 {
    alpha.iter().zip(x).map(|(a, v)| v.powi(*a as i32)).product()
}

/// `d tau` with fourth-order differences (stencil reach `2h`).
pub fn exterior_derivative_accurate(tau: &OneFormField, h: f64) -> TwoFormField {
    let tau = tau.clone();
    TwoFormField::new(tau.dim(), move |x| {
        let n = x.len();
        let grads: Vec<DVector<f64>> = (0..n).map(|i| central4(|y| tau.eval(y), x, i, h)).collect();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = grads[i][j] - grads[j][i];
                d[(i, j)] = v;
                d[(j, i)] = -v;
            }
        }
        d
    })
}

/// Sampled constraint rows `L_K g = 0` (and `L_K dtau = 0`) against ansatz coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    pub matrix: DMatrix<f64>,
    pub points: Vec<Vec<f64>>,
    pub h: f64,
    pub rows_per_point: usize,
}

/// Assemble the residual. Each point contributes the `n(n+1)/2` independent
/// components of `L_K g` and, with `dtau`, the `n(n-1)/2` components of
/// `L_K dtau`. Derivatives of `g` and `dtau` use step `h` (reach `2h`).
pub fn build_residual(
    g: &MetricTensorField,
    dtau: Option<&TwoFormField>,
    ansatz: &VectorFieldAnsatz,
    points: &[Vec<f64>],
    h: f64,
) -> Result<ResidualMatrix> {
    let n = ansatz.dim();
    if g.dim() != n || dtau.is_some_and(|b| b.dim() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: g.dim(),
        });
    }
    let columns = ansatz.len();
    if points.len() < 3 * columns {
        return Err(Error::Underdetermined {
            points: points.len(),
            columns,
        });
    }
    let sym_rows = n * (n + 1) / 2;
    let rows_per_point = sym_rows + if dtau.is_some() { n * (n - 1) / 2 } else { 0 };
    let blocks: Vec<DMatrix<f64>> = points
        .par_iter()
        .map(|x| {
            let mut block = DMatrix::zeros(rows_per_point, columns);
            let (p, dp) = ansatz.monomial_jet(x);
            let gx = g.eval(x);
            let dg: Vec<DMatrix<f64>> = (0..n).map(|a| central4(|y| g.eval(y), x, a, h)).collect();
            let beta = dtau.map(|b| (b.eval(x), (0..n).map(|a| central4(|y| b.eval(y), x, a, h)).collect::<Vec<_>>()));
            for (m, (pm, dpm)) in p.iter().zip(&dp).enumerate() {
                for c in 0..n {
                    let col = m * n + c;
                    let mut row = 0;
                    // (L_K g)_jk = p d_c g_jk + d_j p g_ck + g_jc d_k p   for K = p d_c
                    for j in 0..n {
                        for k in j..n {
                            block[(row, col)] = pm * dg[c][(j, k)] + dpm[j] * gx[(c, k)] + gx[(j, c)] * dpm[k];
                            row += 1;
                        }
                    }
                    if let Some((b, db)) = &beta {
                        for j in 0..n {
                            for k in j + 1..n {
                                block[(row, col)] = pm * db[c][(j, k)] + dpm[j] * b[(c, k)] + b[(j, c)] * dpm[k];
                                row += 1;
                            }
                        }
                    }
                }
            }
            block
        })
        .collect();
    let mut matrix = DMatrix::zeros(points.len() * rows_per_point, columns);
    for (i, b) in blocks.iter().enumerate() {
        matrix.view_mut((i * rows_per_point, 0), (rows_per_point, columns)).copy_from(b);
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite residual entry".into()));
    }
    Ok(ResidualMatrix {
        matrix,
        points: points.to_vec(),
        h,
        rows_per_point,
    })
}

/// Below this gap the rank decision is flagged as ambiguous.
pub const AMBIGUOUS_GAP: f64 = 10.0;
pub const DEFAULT_SV_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Nullspace {
    pub dimension: usize,
    /// Orthonormal coefficient vectors spanning the nullspace.
    pub basis: Vec<DVector<f64>>,
    /// Smallest kept over largest dropped singular value; `None` when either set is empty.
    pub gap: Option<f64>,
    /// Singular values, descending.
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    pub ambiguous: bool,
}

/// Numerical nullspace of a tall matrix: Householder QR, then the SVD of the
/// square factor. Singular values below `sv_threshold * max` are dropped.
pub fn nullspace(matrix: &DMatrix<f64>, sv_threshold: f64) -> Result<Nullspace> {
    if !(sv_threshold > 0.0 && sv_threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("sv_threshold must lie in (0, 1), got {sv_threshold}")));
    }
    let cols = matrix.ncols();
    let square = if matrix.nrows() > cols {
        matrix.clone().qr().r()
    } else {
        let mut padded = DMatrix::zeros(cols, cols);
        padded.view_mut((0, 0), (matrix.nrows(), cols)).copy_from(matrix);
        padded
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::InvalidArgument("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let largest = singular_values.first().copied().unwrap_or(0.0);
    let kept = singular_values.iter().take_while(|s| **s >= sv_threshold * largest && largest > 0.0).count();
    let dimension = cols - kept;
    let basis = order[kept..].iter().map(|&i| v_t.row(i).transpose()).collect();
    let gap = (kept > 0 && dimension > 0).then(|| {
        let dropped = singular_values[kept];
        if dropped > 0.0 {
            singular_values[kept - 1] / dropped
        } else {
            f64::INFINITY
        }
    });
    Ok(Nullspace {
        dimension,
        basis,
        gap,
        singular_values,
        threshold: sv_threshold,
        ambiguous: gap.is_some_and(|g| g < AMBIGUOUS_GAP),
    })
}

pub fn nullspace_dimension(residual: &ResidualMatrix, sv_threshold: f64) -> Result<Nullspace> {
    nullspace(&residual.matrix, sv_threshold)
}

/// Standard complex structure `J e_{2k} = e_{2k+1}` on `R^n`, `n` even.
pub fn complex_structure(n: usize) -> Result<DMatrix<f64>> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!("complex structure needs even dimension, got {n}")));
    }
    let mut j = DMatrix::zeros(n, n);
    for k in (0..n).step_by(2) {
        j[(k + 1, k)] = 1.0;
        j[(k, k + 1)] = -1.0;
    }
    Ok(j)
}

/// Basis `E_ij - E_ji` (`i < j`) of `so(n)`.
pub fn so_generators(n: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut a = DMatrix::zeros(n, n);
            a[(i, j)] = 1.0;
            a[(j, i)] = -1.0;
            out.push(a);
        }
    }
    out
}

/// A basis of `u(n/2) = {A in so(n) : AJ = JA}`, obtained by projecting the
/// `so(n)` basis with `A -> (A - JAJ)/2` and keeping an independent subset.
pub fn unitary_generators(n: usize) -> Result<Vec<DMatrix<f64>>> {
    let j = complex_structure(n)?;
    let mut out: Vec<DMatrix<f64>> = Vec::new();
    for a in so_generators(n) {
        let mut p = (&a - &j * &a * &j) * 0.5;
        for b in &out {
            let c = p.dot(b) / b.dot(b);
            p -= b * c;
        }
        if p.norm() > 1e-10 {
            out.push(p);
        }
    }
    Ok(out)
}

/// Coordinates of an antisymmetric matrix in the basis `e_i ^ e_j`, `i < j`.
fn wedge_coordinates(beta: &DMatrix<f64>) -> DVector<f64> {
    let n = beta.nrows();
    DVector::from_iterator(
        n * (n - 1) / 2,
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| beta[(i, j)]),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantForms {
    pub dimension: usize,
    /// Orthonormal (in wedge coordinates) antisymmetric matrices.
    pub basis: Vec<DMatrix<f64>>,
}

/// 2-forms annihilated by every generator under `(A . beta) = A^T beta + beta A`.
pub fn invariant_two_forms(generators: &[DMatrix<f64>], n: usize) -> Result<InvariantForms> {
    for a in generators {
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: a.nrows(),
            });
        }
        if (a + a.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidArgument("generators must be antisymmetric".into()));
        }
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let m = pairs.len();
    let mut stacked = DMatrix::zeros(generators.len().max(1) * m, m);
    for (g, a) in generators.iter().enumerate() {
        for (col, &(i, j)) in pairs.iter().enumerate() {
            let mut beta = DMatrix::zeros(n, n);
            beta[(i, j)] = 1.0;
            beta[(j, i)] = -1.0;
            let image = a.transpose() * &beta + &beta * a;
            stacked.view_mut((g * m, col), (m, 1)).copy_from(&wedge_coordinates(&image));
        }
    }
    let basis: Vec<DMatrix<f64>> = if stacked.amax() == 0.0 {
        (0..m).map(|k| DVector::from_fn(m, |i, _| if i == k { 1.0 } else { 0.0 })).collect()
    } else {
        nullspace(&stacked, 1e-10)?.basis
    }
    .into_iter()
    .map(|c| {
        let mut beta = DMatrix::zeros(n, n);
        for (v, &(i, j)) in c.iter().zip(&pairs) {
            beta[(i, j)] = *v;
            beta[(j, i)] = -*v;
        }
        beta
    })
    .collect();
    Ok(InvariantForms {
        dimension: basis.len(),
        basis,
    })
}

/// Finite check that each basis field's flow preserves `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossValidation {
    /// Requested flow time; shortened so that no flowed point moves more than
    /// a fifth of the smallest box edge.
    pub time: f64,
    pub triples: usize,
    pub seed: u64,
    /// Fraction of the box (around its center) the triples are drawn from.
    pub sample_fraction: f64,
    pub distance: DistanceOptions,
    pub tolerance: f64,
}

impl Default for CrossValidation {
    fn default() -> Self {
        Self {
            time: 0.3,
            triples: 10,
            seed: 0,
            sample_fraction: 0.3,
            distance: DistanceOptions::default(),
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmostKillingConfig {
    pub degree: usize,
    pub sv_threshold: f64,
    /// Finite-difference step; `None` uses the chart step.
    pub h: Option<f64>,
    /// Sample points per ansatz coefficient.
    pub points_per_column: usize,
    /// Offset into the Halton sequence.
    pub seed: u64,
    pub cross_validation: Option<CrossValidation>,
}

impl Default for AlmostKillingConfig {
    fn default() -> Self {
        Self {
            degree: 2,
            sv_threshold: DEFAULT_SV_THRESHOLD,
            h: None,
            points_per_column: 5,
            seed: 0,
            cross_validation: Some(CrossValidation::default()),
        }
    }
}

/// Flow-based check of one basis field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldCheck {
    pub field: usize,
    pub time: f64,
    pub max_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionReport {
    pub dimension: usize,
    pub nullspace: Nullspace,
    pub ansatz: VectorFieldAnsatz,
    pub rows: usize,
    pub columns: usize,
    pub points: usize,
    pub h: f64,
    pub checks: Vec<FieldCheck>,
}

impl DimensionReport {
    pub fn field(&self, index: usize) -> Result<VectorField> {
        let c = self
            .nullspace
            .basis
            .get(index)
            .ok_or_else(|| Error::InvalidArgument(format!("no basis field {index}")))?;
        self.ansatz.field(c.as_slice())
    }

    /// Distance from `coeffs` to the computed nullspace, relative to `|coeffs|`.
    pub fn projection_residual(&self, coeffs: &DVector<f64>) -> f64 {
        let mut rest = coeffs.clone();
        for b in &self.nullspace.basis {
            rest -= b * b.dot(coeffs);
        }
        rest.norm() / coeffs.norm()
    }
}

const PRIMES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let (mut inv, mut f) = (0.0, 1.0 / base as f64);
    while i > 0 {
        inv += (i % b) as f64 * f;
        i /= b;
        f /= base as f64;
    }
    inv
}

/// `count` Halton points in `[lower, upper]`, starting at index `seed + 1`.
pub fn halton_points(lower: &[f64], upper: &[f64], count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if lower.len() > PRIMES.len() {
        return Err(Error::InvalidArgument("Halton sequence supports at most 12 dimensions".into()));
    }
    Ok((0..count as u64)
        .map(|k| {
            lower
                .iter()
                .zip(upper)
                .zip(PRIMES)
                .map(|((lo, hi), p)| lo + (hi - lo) * radical_inverse(seed + k + 1, p))
                .collect()
        })
        .collect())
}

/// Dimension of the almost-Killing algebra of `sqrt(g) + tau` on the chart.
///
/// `dtau` is differentiated with fourth-order stencils; sample points are
/// Halton points in the box shrunk by 10%. With cross-validation enabled,
/// every basis field is flowed and its `T`-invariance checked; a failure is an
/// [`Error::Inconsistency`].
pub fn almost_killing_dimension(
    g: &MetricTensorField,
    tau: &OneFormField,
    chart: &ChartDomain,
    config: &AlmostKillingConfig,
) -> Result<DimensionReport> {
    let n = chart.dim();
    let h = config.h.unwrap_or(chart.fd_step());
    let ansatz = VectorFieldAnsatz::new(n, config.degree)?;
    let (lo, hi) = chart.shrunk(0.1);
    let count = config.points_per_column * ansatz.len();
    let points = halton_points(&lo, &hi, count, config.seed)?;
    for x in &points {
        chart.require_stencil(x, 4.0 * h)?;
    }
    let dtau = exterior_derivative_accurate(tau, h);
    let residual = build_residual(g, Some(&dtau), &ansatz, &points, h)?;
    let null = nullspace_dimension(&residual, config.sv_threshold)?;
    let mut report = DimensionReport {
        dimension: null.dimension,
        rows: residual.matrix.nrows(),
        columns: residual.matrix.ncols(),
        points: points.len(),
        h,
        nullspace: null,
        ansatz,
        checks: Vec::new(),
    };
    if let Some(cv) = &config.cross_validation {
        let metric = MetricField::randers(&RandersData::new(g.clone(), tau.clone())?);
        report.checks = cross_validate(&report, &metric, chart, cv)?;
    }
    Ok(report)
}

fn cross_validate(
    report: &DimensionReport,
    metric: &MetricField,
    chart: &ChartDomain,
    cv: &CrossValidation,
) -> Result<Vec<FieldCheck>> {
    let (lo, hi) = chart.shrunk(1.0 - cv.sample_fraction);
    let triples = TripleSample::seeded(&lo, &hi, cv.triples, cv.seed);
    let mut probe = chart.corners_and_center();
    probe.extend(halton_points(chart.lower(), chart.upper(), 256, 0)?);
    let mut checks = Vec::new();
    for index in 0..report.dimension {
        let field = report.field(index)?;
        let speed = probe.iter().map(|x| field.eval(x).norm()).fold(0.0, f64::max);
        let time = if speed > 0.0 {
            cv.time.min(0.2 * chart.min_edge() / speed)
        } else {
            cv.time
        };
        let phi = |x: &[f64]| flow_map(&field, time, x, 32, chart);
        let result = t_invariance_check(metric, phi, &triples, chart, cv.distance)?;
        if !(result.max_diff < cv.tolerance) {
            return Err(Error::Inconsistency {
                field: index,
                diff: result.max_diff,
                tolerance: cv.tolerance,
            });
        }
        checks.push(FieldCheck {
            field: index,
            time,
            max_diff: result.max_diff,
        });
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_points(n: usize, count: usize) -> Vec<Vec<f64>> {
        halton_points(&vec![-0.4; n], &vec![0.4; n], count, 0).unwrap()
    }

    fn flat_dimension(n: usize, degree: usize, dtau: Option<&TwoFormField>) -> Nullspace {
        let ansatz = VectorFieldAnsatz::new(n, degree).unwrap();
        let points = flat_points(n, 5 * ansatz.len());
        let r = build_residual(&MetricTensorField::identity(n), dtau, &ansatz, &points, 1e-3).unwrap();
        nullspace_dimension(&r, DEFAULT_SV_THRESHOLD).unwrap()
    }

    #[test]
    fn ansatz_layout() {
        let a = VectorFieldAnsatz::new(2, 2).unwrap();
        assert_eq!(a.len(), 12);
        assert_eq!(
            a.monomials(),
            &[vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(VectorFieldAnsatz::new(4, 2).unwrap().len(), 60);
        // rotation -y d_x + x d_y
        let c = a.coefficients(&[(&[0, 1], 0, -1.0), (&[1, 0], 1, 1.0)]).unwrap();
        let k = a.field(c.as_slice()).unwrap().eval(&[0.3, 0.5]);
        assert!((k[0] + 0.5).abs() < 1e-15 && (k[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn residual_examples() {
        assert_eq!(flat_dimension(2, 1, None).dimension, 3);
        assert_eq!(flat_dimension(4, 1, None).dimension, 10);
        let beta = TwoFormField::new(2, |x| DMatrix::from_row_slice(2, 2, &[0.0, x[0], -x[0], 0.0]));
        let null = flat_dimension(2, 1, Some(&beta));
        assert_eq!(null.dimension, 1);
        let b = &null.basis[0];
        // only d_2 (constant monomial, component 1) survives
        assert!((b[1].abs() - 1.0).abs() < 1e-8, "{b}");
    }

    #[test]
    fn degree_two_flat_algebra_is_still_euclidean() {
        let null = flat_dimension(2, 2, None);
        assert_eq!(null.dimension, 3);
        assert!(null.gap.unwrap() > 1e2);
    }

    #[test]
    fn too_few_points_is_underdetermined() {
        let ansatz = VectorFieldAnsatz::new(2, 2).unwrap();
        let r = build_residual(&MetricTensorField::identity(2), None, &ansatz, &flat_points(2, 10), 1e-3);
        assert!(matches!(r, Err(Error::Underdetermined { points: 10, columns: 12 })));
    }

    #[test]
    fn invariant_form_examples() {
        assert_eq!(invariant_two_forms(&so_generators(3), 3).unwrap().dimension, 0);
        assert_eq!(invariant_two_forms(&so_generators(4), 4).unwrap().dimension, 0);
        assert_eq!(invariant_two_forms(&so_generators(2), 2).unwrap().dimension, 1);
        let u2 = unitary_generators(4).unwrap();
        assert_eq!(u2.len(), 4);
        let forms = invariant_two_forms(&u2, 4).unwrap();
        assert_eq!(forms.dimension, 1);
        let mut kahler = DMatrix::zeros(4, 4);
        kahler[(0, 1)] = 1.0;
        kahler[(1, 0)] = -1.0;
        kahler[(2, 3)] = 1.0;
        kahler[(3, 2)] = -1.0;
        let b = &forms.basis[0];
        let cosine = b.dot(&kahler) / (b.norm() * kahler.norm());
        assert!(cosine.abs() > 1.0 - 1e-8);
        assert!(invariant_two_forms(&[DMatrix::identity(2, 2)], 2).is_err());
    }

    #[test]
    fn unitary_generators_commute_with_j() {
        let j = complex_structure(4).unwrap();
        for a in unitary_generators(4).unwrap() {
            assert!((&a * &j - &j * &a).amax() < 1e-14);
            assert!((&a + a.transpose()).amax() < 1e-14);
        }
        assert!((&j * &j + DMatrix::<f64>::identity(4, 4)).amax() == 0.0);
    }

    #[test]
    fn halton_is_deterministic_and_in_box() {
        let a = halton_points(&[-1.0, 0.0], &[1.0, 2.0], 50, 3).unwrap();
        assert_eq!(a, halton_points(&[-1.0, 0.0], &[1.0, 2.0], 50, 3).unwrap());
        assert!(a.iter().all(|p| (-1.0..=1.0).contains(&p[0]) && (0.0..=2.0).contains(&p[1])));
        assert!((radical_inverse(1, 2) - 0.5).abs() < 1e-15);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn swirl_pipeline_with_cross_validation() {
        let chart = ChartDomain::cube(2, 1.0, 1e-3).unwrap();
        let tau = OneFormField::new(2, |x| DVector::from_vec(vec![-0.2 * x[1], 0.2 * x[0]]));
        let report = almost_killing_dimension(&MetricTensorField::identity(2), &tau, &chart, &AlmostKillingConfig::default()).unwrap();
        assert_eq!(report.dimension, 3);
        assert!(report.nullspace.gap.unwrap() > 1e2);
        assert_eq!(report.checks.len(), 3);
        assert!(report.checks.iter().all(|c| c.max_diff < 1e-4));
        let rotation = report.ansatz.coefficients(&[(&[0, 1], 0, -1.0), (&[1, 0], 1, 1.0)]).unwrap();
        assert!(report.projection_residual(&rotation) < 1e-4);
    }

    #[test]
    fn sphere_chart_killing_algebra_is_quadratic() {
        let g = MetricTensorField::conformal(2, |x| 4.0 / (1.0 + x[0] * x[0] + x[1] * x[1]).powi(2));
        let chart = ChartDomain::cube(2, 0.5, 1e-3).unwrap();
        let config = AlmostKillingConfig {
            cross_validation: None,
            ..Default::default()
        };
        let report = almost_killing_dimension(&g, &OneFormField::zero(2), &chart, &config).unwrap();
        assert_eq!(report.dimension, 3);
        assert!(report.nullspace.gap.unwrap() > 1e2, "{:?}", report.nullspace.singular_values);
        // z -> 1 + z^2 is the infinitesimal su(2) action: (1 + x^2 - y^2, 2xy)
        let k = report
            .ansatz
            .coefficients(&[(&[0, 0], 0, 1.0), (&[2, 0], 0, 1.0), (&[0, 2], 0, -1.0), (&[1, 1], 1, 2.0)])
            .unwrap();
        assert!(report.projection_residual(&k) < 1e-4);
    }
}
