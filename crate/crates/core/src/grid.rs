//! Direction grids on the unit sphere `S^{n-1}` with quadrature weights.
//!
//! In two dimensions the grid is the uniform `m`-gon. In higher dimensions it
//! is a product rule in hyperspherical coordinates: `u = (cos psi, sin psi v)`
//! with `v` on `S^{n-2}`, Gauss–Gegenbauer nodes in `cos psi` and the uniform
//! polygon at the bottom of the recursion. Product rules integrate spherical
//! polynomials exactly up to a degree that grows linearly with the resolution,
//! so smooth integrands converge spectrally.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionGrid {
    dim: usize,
    /// Row-major `m x dim` unit vectors.
    dirs: Vec<f64>,
    weights: Vec<f64>,
    /// Largest angular gap between neighbouring nodes (radians, approximate).
    spacing: f64,
}

/// Default `m` for the 2D polygon.
pub const DEFAULT_POLYGON_SIZE: usize = 512;

impl DirectionGrid {
    /// Uniform `m`-gon with weights `2 pi / m`.
    pub fn polygon(m: usize) -> Result<Self> {
        if m < 8 {
            return Err(Error::InvalidArgument(format!("polygon grid needs m >= 8, got {m}")));
        }
        let mut dirs = Vec::with_capacity(2 * m);
        for k in 0..m {
            let a = 2.0 * PI * k as f64 / m as f64;
            dirs.push(a.cos());
            dirs.push(a.sin());
        }
        Ok(Self {
            dim: 2,
            dirs,
            weights: vec![2.0 * PI / m as f64; m],
            spacing: 2.0 * PI / m as f64,
        })
    }

    /// Product grid on `S^{n-1}` with `nodes` Gauss nodes per polar angle and a
    /// base polygon of `4 * ceil(nodes / 2)` points (a multiple of four, so the
    /// grid is invariant under quarter turns of the last coordinate plane).
    pub fn product(dim: usize, nodes: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!("sphere dimension must be >= 2, got {dim}")));
        }
        if nodes < 2 {
            return Err(Error::InvalidArgument("product grid needs at least 2 nodes".into()));
        }
        let base = Self::polygon(4 * nodes.div_ceil(2).max(2))?;
        let mut grid = base;
        for d in 3..=dim {
            let (t, w) = gegenbauer_rule(d, nodes)?;
            let m_prev = grid.len();
            let mut dirs = Vec::with_capacity(t.len() * m_prev * d);
            let mut weights = Vec::with_capacity(t.len() * m_prev);
            for (tk, wk) in t.iter().zip(&w) {
                let s = (1.0 - tk * tk).max(0.0).sqrt();
                for j in 0..m_prev {
                    dirs.push(*tk);
                    dirs.extend(grid.direction(j).iter().map(|v| s * v));
                    weights.push(wk * grid.weights[j]);
                }
            }
            grid = Self {
                dim: d,
                dirs,
                weights,
                spacing: grid.spacing.max(PI / (nodes as f64 + 1.0)),
            };
        }
        Ok(grid)
    }

    /// Grid with roughly `m` directions: the polygon in 2D, a product grid otherwise.
    pub fn with_size(dim: usize, m: usize) -> Result<Self> {
        match dim {
            2 => Self::polygon(m),
            d if d >= 3 => {
                // m ~ 2 N^{d-1} for the product rule
                let nodes = ((m as f64 / 2.0).powf(1.0 / (d as f64 - 1.0))).round().max(2.0) as usize;
                Self::product(d, nodes)
            }
            _ => Err(Error::InvalidArgument(format!("sphere dimension must be >= 2, got {dim}"))),
        }
    }

    /// 512 directions in 2D, about 2600 in 3D and 10^4 in 4D.
    pub fn default_for(dim: usize) -> Result<Self> {
        match dim {
            2 => Self::polygon(DEFAULT_POLYGON_SIZE),
            3 => Self::product(3, 36),
            4 => Self::product(4, 17),
            d => Self::with_size(d, 10_000),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn direction(&self, k: usize) -> &[f64] {
        &self.dirs[k * self.dim..(k + 1) * self.dim]
    }

    pub fn directions(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.dirs.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Sum of weights; equals the area of `S^{n-1}`.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Area of the unit sphere `S^{n-1}` (the Wallis recursion, no gamma function).
pub fn sphere_area(dim: usize) -> f64 {
    // |S^{n-1}| = |S^{n-2}| * int_0^pi sin^{n-2}
    let mut area = 2.0 * PI;
    for d in 3..=dim {
        area *= sine_power_integral(d - 2);
    }
    area
}

/// `int_0^pi sin^k(psi) d psi`.
fn sine_power_integral(k: usize) -> f64 {
    let (mut even, mut odd) = (PI, 2.0);
    if k == 0 {
        return even;
    }
    if k == 1 {
        return odd;
    }
    for j in 2..=k {
        let f = (j as f64 - 1.0) / j as f64;
        if j % 2 == 0 {
            even *= f;
        } else {
            odd *= f;
        }
    }
    if k % 2 == 0 {
        even
    } else {
        odd
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if nodes == 0 {
        return Err(Error::InvalidArgument("Gauss rule needs at least one node".into()));
    }
    gegenbauer_rule(3, nodes)
}

/// Gauss rule for `int_{-1}^{1} f(t) (1 - t^2)^{(d-3)/2} dt` (the `cos psi`
/// marginal of the measure on `S^{d-1}`), by Golub–Welsch.
fn gegenbauer_rule(d: usize, nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let lambda = (d as f64 - 2.0) / 2.0;
    let mut jacobi = DMatrix::zeros(nodes, nodes);
    for k in 1..nodes {
        let kf = k as f64;
        let b = (kf * (kf + 2.0 * lambda - 1.0) / (4.0 * (kf + lambda) * (kf + lambda - 1.0))).sqrt();
        jacobi[(k, k - 1)] = b;
        jacobi[(k - 1, k)] = b;
    }
    let mu0 = sine_power_integral(d - 2);
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..nodes)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], mu0 * v0 * v0)
        })
        .collect();
    if pairs.iter().any(|(t, w)| !t.is_finite() || !(*w > 0.0)) {
        return Err(Error::InvalidArgument("Gauss rule construction failed".into()));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}
