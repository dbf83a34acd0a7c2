//! Coordinate charts and tensor fields on them.
//!
//! Fields are evaluators (closures over chart coordinates), never stored
//! grids. All derivatives are second-order central differences with the
//! chart's fixed step; a stencil that would leave the chart box is an error
//! rather than a silent switch to one-sided differences.

use std::fmt;
use std::ops::{Mul, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// An axis-aligned coordinate box with a finite-difference step.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    fd_step: f64,
}

impl ChartDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, fd_step: f64) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "chart dimension must be at least 2, got {}",
                lower.len()
            )));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(b > a)) {
            return Err(Error::InvalidArgument("chart box has an empty edge".into()));
        }
        let chart = Self {
            lower,
            upper,
            fd_step,
        };
        let min_edge = chart.min_edge();
        if !(fd_step > 0.0) || fd_step >= 1e-2 * min_edge {
            return Err(Error::InvalidArgument(format!(
                "fd_step {fd_step} must be positive and below 1e-2 x smallest edge ({min_edge})"
            )));
        }
        Ok(chart)
    }

    /// The cube `[-half_width, half_width]^n`.
    pub fn cube(n: usize, half_width: f64, fd_step: f64) -> Result<Self> {
        Self::new(vec![-half_width; n], vec![half_width; n], fd_step)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn with_fd_step(&self, fd_step: f64) -> Result<Self> {
        Self::new(self.lower.clone(), self.upper.clone(), fd_step)
    }

    pub fn min_edge(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_with_margin(x, 0.0)
    }

    pub fn contains_with_margin(&self, x: &[f64], margin: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (a, b))| *v >= a + margin && *v <= b - margin)
    }

    /// Box shrunk toward its center by `fraction` of each half-edge.
    pub fn shrunk(&self, fraction: f64) -> (Vec<f64>, Vec<f64>) {
        let c = self.center();
        let lo = self
            .lower
            .iter()
            .zip(&c)
            .map(|(a, m)| m + (a - m) * (1.0 - fraction))
            .collect();
        let hi = self
            .upper
            .iter()
            .zip(&c)
            .map(|(b, m)| m + (b - m) * (1.0 - fraction))
            .collect();
        (lo, hi)
    }

    /// Corners of the box followed by its center.
    pub fn corners_and_center(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = Vec::with_capacity((1 << n) + 1);
        for mask in 0..(1usize << n) {
            out.push(
                (0..n)
                    .map(|i| {
                        if mask >> i & 1 == 1 {
                            self.upper[i]
                        } else {
                            self.lower[i]
                        }
                    })
                    .collect(),
            );
        }
        out.push(self.center());
        out
    }

    /// Fails unless the cube of radius `reach` around `x` lies in the box.
    pub fn require_stencil(&self, x: &[f64], reach: f64) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        if self.contains_with_margin(x, reach) {
            Ok(())
        } else {
            Err(Error::Boundary {
                point: x.to_vec(),
                reach,
            })
        }
    }
}

macro_rules! evaluator_field {
    ($(#[$meta:meta])* $name:ident => $out:ty) => {
        $(#[$meta])*
        #[derive(Clone)]
        pub struct $name {
            dim: usize,
            eval: Arc<dyn Fn(&[f64]) -> $out + Send + Sync>,
        }

        impl $name {
            pub fn new(dim: usize, f: impl Fn(&[f64]) -> $out + Send + Sync + 'static) -> Self {
                Self { dim, eval: Arc::new(f) }
            }

            pub fn dim(&self) -> usize {
                self.dim
            }

            #[inline]
            pub fn eval(&self, x: &[f64]) -> $out {
                (self.eval)(x)
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.debug_struct(stringify!($name)).field("dim", &self.dim).finish_non_exhaustive()
            }
        }
    };
}

evaluator_field!(
    /// A smooth function on the chart.
    ScalarField => f64
);
evaluator_field!(
    /// Covector components `tau_i(x)`.
    OneFormField => DVector<f64>
);
evaluator_field!(
    /// Antisymmetric component matrix `beta_ij(x)`.
    TwoFormField => DMatrix<f64>
);
evaluator_field!(
    /// Vector components `K^i(x)`.
    VectorField => DVector<f64>
);
evaluator_field!(
    /// Components `g_ij(x)` of a Riemannian metric (symmetric positive-definite).
    MetricTensorField => DMatrix<f64>
);

impl ScalarField {
    /// The differential `df`, by central differences with step `h`.
    pub fn differential(&self, h: f64) -> OneFormField {
        let f = self.clone();
        OneFormField::new(self.dim, move |x| {
            DVector::from_fn(f.dim, |i, _| central(|y| f.eval(y), x, i, h))
        })
    }
}

impl OneFormField {
    pub fn zero(dim: usize) -> Self {
        Self::new(dim, move |_| DVector::zeros(dim))
    }

    pub fn constant(coeffs: DVector<f64>) -> Self {
        Self::new(coeffs.len(), move |_| coeffs.clone())
    }

    pub fn scaled(&self, s: f64) -> Self {
        let f = self.clone();
        Self::new(self.dim, move |x| f.eval(x) * s)
    }

    pub fn sum(&self, other: &OneFormField) -> Self {
        let (a, b) = (self.clone(), other.clone());
        Self::new(self.dim, move |x| a.eval(x) + b.eval(x))
    }

    /// The exterior derivative as a field (unchecked: no boundary test).
    pub fn differential(&self, h: f64) -> TwoFormField {
        let tau = self.clone();
        TwoFormField::new(self.dim, move |x| d_one_form(&tau, x, h))
    }
}

impl TwoFormField {
    pub fn zero(dim: usize) -> Self {
        Self::new(dim, move |_| DMatrix::zeros(dim, dim))
    }

    pub fn constant(components: DMatrix<f64>) -> Self {
        Self::new(components.nrows(), move |_| components.clone())
    }

    pub fn scaled(&self, s: f64) -> Self {
        let f = self.clone();
        Self::new(self.dim, move |x| f.eval(x) * s)
    }
}

impl VectorField {
    pub fn zero(dim: usize) -> Self {
        Self::new(dim, move |_| DVector::zeros(dim))
    }

    pub fn constant(components: DVector<f64>) -> Self {
        Self::new(components.len(), move |_| components.clone())
    }

    /// The linear field `x -> A x`.
    pub fn linear(a: DMatrix<f64>) -> Self {
        Self::new(a.nrows(), move |x| &a * DVector::from_column_slice(x))
    }
}

impl MetricTensorField {
    pub fn identity(dim: usize) -> Self {
        Self::new(dim, move |_| DMatrix::identity(dim, dim))
    }

    pub fn constant(components: DMatrix<f64>) -> Self {
        Self::new(components.nrows(), move |_| components.clone())
    }

    /// `lambda(x) * I`.
    pub fn conformal(dim: usize, lambda: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(dim, move |x| DMatrix::identity(dim, dim) * lambda(x))
    }
}

/// `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub(crate) fn central<T>(f: impl Fn(&[f64]) -> T, x: &[f64], i: usize, h: f64) -> T
where
    T: Sub<Output = T> + Mul<f64, Output = T>,
{
    let mut y = x.to_vec();
    y[i] = x[i] + h;
    let plus = f(&y);
    y[i] = x[i] - h;
    let minus = f(&y);
    (plus - minus) * (0.5 / h)
}

/// Fourth-order central difference of `f` along coordinate `i`.
pub(crate) fn central4<T>(f: impl Fn(&[f64]) -> T, x: &[f64], i: usize, h: f64) -> T
where
    T: std::ops::Sub<Output = T> + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let mut y = x.to_vec();
    let mut at = |d: f64| {
        y[i] = x[i] + d;
        f(&y)
    };
    let (p2, p1, m1, m2) = (at(2.0 * h), at(h), at(-h), at(-2.0 * h));
    ((p1 - m1) * 8.0 - (p2 - m2)) * (1.0 / (12.0 * h))
}

fn shifted(x: &[f64], i: usize, delta: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[i] += delta;
    y
}

fn d_one_form(tau: &OneFormField, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = tau.dim();
    // grads[i][j] = d_i tau_j
    let grads: Vec<DVector<f64>> = (0..n).map(|i| central(|y| tau.eval(y), x, i, h)).collect();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = grads[i][j] - grads[j][i];
            d[(i, j)] = v;
            d[(j, i)] = -v;
        }
    }
    d
}

/// `(d tau)_ij = d_i tau_j - d_j tau_i` at `x`.
pub fn exterior_derivative(tau: &OneFormField, x: &[f64], chart: &ChartDomain) -> Result<DMatrix<f64>> {
    check_dim(tau.dim(), chart)?;
    let h = chart.fd_step();
    chart.require_stencil(x, h)?;
    Ok(d_one_form(tau, x, h))
}

/// Components `(d beta)_{ijk}` of the 3-form `d beta`, stored row-major.
pub(crate) fn d_two_form(beta: &TwoFormField, x: &[f64], h: f64) -> Vec<f64> {
    let n = beta.dim();
    let grads: Vec<DMatrix<f64>> = (0..n).map(|i| central(|y| beta.eval(y), x, i, h)).collect();
    let mut out = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out[(i * n + j) * n + k] =
                    grads[i][(j, k)] + grads[j][(k, i)] + grads[k][(i, j)];
            }
        }
    }
    out
}

/// Values of a vector field on the central-difference stencil around a point.
pub(crate) struct VectorJet {
    pub value: DVector<f64>,
    /// `plus[i] = K(x + h e_i)`, `minus[i] = K(x - h e_i)`.
    pub plus: Vec<DVector<f64>>,
    pub minus: Vec<DVector<f64>>,
    pub h: f64,
}

impl VectorJet {
    pub fn at(k: &VectorField, x: &[f64], h: f64) -> Self {
        let n = k.dim();
        Self {
            value: k.eval(x),
            plus: (0..n).map(|i| k.eval(&shifted(x, i, h))).collect(),
            minus: (0..n).map(|i| k.eval(&shifted(x, i, -h))).collect(),
            h,
        }
    }

    /// `D[(a, i)] = d_i K^a`.
    pub fn jacobian(&self) -> DMatrix<f64> {
        let n = self.value.len();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            let col = (&self.plus[i] - &self.minus[i]) * (0.5 / self.h);
            d.set_column(i, &col);
        }
        d
    }
}

/// Metric components and their first derivatives at a point.
pub(crate) struct MetricJet {
    pub g: DMatrix<f64>,
    /// `dg[a] = d_a g`.
    pub dg: Vec<DMatrix<f64>>,
}

impl MetricJet {
    pub fn at(g: &MetricTensorField, x: &[f64], h: f64) -> Self {
        Self {
            g: g.eval(x),
            dg: (0..g.dim()).map(|a| central(|y| g.eval(y), x, a, h)).collect(),
        }
    }

    /// `(L_K g)_ij = K^a d_a g_ij + g_aj d_i K^a + g_ia d_j K^a`.
    pub fn lie_derivative(&self, k: &VectorJet) -> DMatrix<f64> {
        let n = self.g.nrows();
        let d = k.jacobian();
        let transport = d.transpose() * &self.g + &self.g * &d;
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut v = transport[(i, j)];
                for a in 0..n {
                    v += k.value[a] * self.dg[a][(i, j)];
                }
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }
}

/// A 2-form on the stencil around a point, plus its exterior derivative there.
pub(crate) struct TwoFormJet {
    pub plus: Vec<DMatrix<f64>>,
    pub minus: Vec<DMatrix<f64>>,
    pub d_beta: Vec<f64>,
    pub h: f64,
}

impl TwoFormJet {
    pub fn at(beta: &TwoFormField, x: &[f64], h: f64) -> Self {
        let n = beta.dim();
        Self {
            plus: (0..n).map(|i| beta.eval(&shifted(x, i, h))).collect(),
            minus: (0..n).map(|i| beta.eval(&shifted(x, i, -h))).collect(),
            d_beta: d_two_form(beta, x, h),
            h,
        }
    }

    /// Cartan's formula `L_K beta = d(i_K beta) + i_K d beta`.
    pub fn lie_derivative(&self, k: &VectorJet) -> DMatrix<f64> {
        let n = k.value.len();
        // alpha_j = K^a beta_aj on the stencil
        let contract = |kv: &DVector<f64>, b: &DMatrix<f64>| b.tr_mul(kv);
        // grad[i][j] = d_i alpha_j
        let grad: Vec<DVector<f64>> = (0..n)
            .map(|i| {
                (contract(&k.plus[i], &self.plus[i]) - contract(&k.minus[i], &self.minus[i]))
                    * (0.5 / self.h)
            })
            .collect();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let mut v = grad[i][j] - grad[j][i];
                for a in 0..n {
                    v += k.value[a] * self.d_beta[(a * n + i) * n + j];
                }
                out[(i, j)] = v;
                out[(j, i)] = -v;
            }
        }
        out
    }
}

fn check_dim(found: usize, chart: &ChartDomain) -> Result<()> {
    if found == chart.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: chart.dim(),
            found,
        })
    }
}

/// Killing operator `L_K g` at `x`; symmetric by construction.
pub fn lie_derivative_metric(
    k: &VectorField,
    g: &MetricTensorField,
    x: &[f64],
    chart: &ChartDomain,
) -> Result<DMatrix<f64>> {
    check_dim(k.dim(), chart)?;
    check_dim(g.dim(), chart)?;
    let h = chart.fd_step();
    chart.require_stencil(x, h)?;
    Ok(MetricJet::at(g, x, h).lie_derivative(&VectorJet::at(k, x, h)))
}

/// `L_K beta` at `x` via Cartan's formula; antisymmetric by construction.
///
/// The boundary margin is `2h` so that `beta` may itself be a
/// finite-difference field such as `d tau`.
pub fn lie_derivative_two_form(
    k: &VectorField,
    beta: &TwoFormField,
    x: &[f64],
    chart: &ChartDomain,
) -> Result<DMatrix<f64>> {
    check_dim(k.dim(), chart)?;
    check_dim(beta.dim(), chart)?;
    let h = chart.fd_step();
    chart.require_stencil(x, 2.0 * h)?;
    Ok(TwoFormJet::at(beta, x, h).lie_derivative(&VectorJet::at(k, x, h)))
}

/// Minimum number of RK4 steps accepted by [`flow_map`].
pub const MIN_FLOW_STEPS: usize = 16;

/// Classical fourth-order Runge–Kutta approximation of the flow `phi_t(x)`.
///
/// Every intermediate point (stages included) must stay inside the chart box.
pub fn flow_map(
    k: &VectorField,
    t: f64,
    x: &[f64],
    n_steps: usize,
    chart: &ChartDomain,
) -> Result<Vec<f64>> {
    check_dim(k.dim(), chart)?;
    if n_steps < MIN_FLOW_STEPS {
        return Err(Error::InvalidArgument(format!(
            "flow_map needs at least {MIN_FLOW_STEPS} steps, got {n_steps}"
        )));
    }
    if !chart.contains(x) {
        return Err(Error::FlowEscape { time: 0.0 });
    }
    let dt = t / n_steps as f64;
    let mut y = DVector::from_column_slice(x);
    let eval = |p: &DVector<f64>, time: f64| -> Result<DVector<f64>> {
        if chart.contains(p.as_slice()) {
            Ok(k.eval(p.as_slice()))
        } else {
            Err(Error::FlowEscape { time })
        }
    };
    for step in 0..n_steps {
        let t0 = step as f64 * dt;
        let k1 = eval(&y, t0)?;
        let k2 = eval(&(&y + &k1 * (0.5 * dt)), t0 + 0.5 * dt)?;
        let k3 = eval(&(&y + &k2 * (0.5 * dt)), t0 + 0.5 * dt)?;
        let k4 = eval(&(&y + &k3 * dt), t0 + dt)?;
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        if !chart.contains(y.as_slice()) {
            return Err(Error::FlowEscape { time: t0 + dt });
        }
    }
    Ok(y.as_slice().to_vec())
}
