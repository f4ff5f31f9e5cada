//! Periodic spatial grid on the unit torus, gridded scalar fields, and the
//! discrete differential operators, norms and mollifiers used everywhere else.
//!
//! The torus has side length 1 in every axis, so the cell measure is Δx^N and
//! the total measure is exactly 1. Indexing is periodic: index `i` and `i + n`
//! address the same point along every axis.

mod io;
mod mollifier;
mod seminorms;
mod spectral;

pub use io::{read_field, write_field};
pub use mollifier::{KernelKind, MollifierKernel, SpatialKernel};
pub use seminorms::{mollified_seminorm, w_seminorm, TAU_LADDER_RUNGS};
pub use spectral::{h_negative_norm, spectral_l2, spectral_mode_energies};

use crate::error::{Error, Result};
use crate::par;

/// Uniform periodic grid on the unit torus `T^N`, `N ∈ {1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    dim: usize,
    points_per_axis: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, points_per_axis: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Dimension {
                what: "torus dimension (supported: 1 or 2)",
                expected: 1,
                got: dim,
            });
        }
        if points_per_axis < 4 {
            return Err(Error::InvalidParameter {
                name: "points_per_axis",
                value: points_per_axis as f64,
                constraint: "must be at least 4",
            });
        }
        Ok(Self {
            dim,
            points_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Grid spacing Δx = 1/n (unit side length).
    pub fn spacing(&self) -> f64 {
        1.0 / self.points_per_axis as f64
    }

    /// Total cell count n^N.
    pub fn cells(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    /// Measure of one cell, Δx^N.
    pub fn cell_measure(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Diameter of the unit cube `[0,1]^N`, i.e. √N.
    pub fn cube_diameter(&self) -> f64 {
        (self.dim as f64).sqrt()
    }

    /// Coordinates of the cell center for a flat row-major index.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let n = self.points_per_axis;
        let dx = self.spacing();
        match self.dim {
            1 => [(idx as f64 + 0.5) * dx, 0.0],
            _ => {
                let ix = idx / n;
                let iy = idx % n;
                [(ix as f64 + 0.5) * dx, (iy as f64 + 0.5) * dx]
            }
        }
    }

    /// Flat index translated by `offset` cells along `axis`, wrapping
    /// periodically.
    pub fn shift(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let n = self.points_per_axis as isize;
        let wrap = |i: isize| -> usize { (i.rem_euclid(n)) as usize };
        match self.dim {
            1 => wrap(idx as isize + offset),
            _ => {
                let ix = (idx / self.points_per_axis) as isize;
                let iy = (idx % self.points_per_axis) as isize;
                if axis == 0 {
                    wrap(ix + offset) * self.points_per_axis + iy as usize
                } else {
                    ix as usize * self.points_per_axis + wrap(iy + offset)
                }
            }
        }
    }

    /// Shortest wrap-around distance between two points of `[0,1)` per axis.
    pub fn axis_distance(a: f64, b: f64) -> f64 {
        let d = (a - b).abs() % 1.0;
        d.min(1.0 - d)
    }

    /// Periodic Euclidean distance between two cell centers.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let a = self.coords(i);
        let b = self.coords(j);
        let mut s = 0.0;
        for axis in 0..self.dim {
            let d = Self::axis_distance(a[axis], b[axis]);
            s += d * d;
        }
        s.sqrt()
    }

    fn describe(&self) -> String {
        format!("T^{} with n = {}", self.dim, self.points_per_axis)
    }
}

/// A scalar function sampled at cell centers, one value per cell, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

/// A vector field is one scalar component per axis.
pub type VectorField = Vec<ScalarField>;

impl ScalarField {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.cells()],
        }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.cells()],
        }
    }

    pub fn from_values(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::Dimension {
                what: "field values",
                expected: grid.cells(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Samples a closure at cell centers.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.cells())
            .map(|i| f(&grid.coords(i)[..grid.dim()]))
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }

    /// Spatial mean, i.e. the integral over the unit torus.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_measure()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn axpy(&mut self, a: f64, other: &ScalarField) {
        debug_assert_eq!(self.grid, other.grid);
        for (v, w) in self.values.iter_mut().zip(&other.values) {
            *v += a * w;
        }
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        check_same_grid(self, other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// L^2 inner product `Δx^N Σ u·v`.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_measure()
    }

    /// Total variation `Σ_axes Σ_i |u_{i+1} - u_i| Δx^{N-1}`.
    pub fn total_variation(&self) -> f64 {
        let grid = self.grid;
        let face_measure = grid.spacing().powi(grid.dim() as i32 - 1);
        let mut tv = 0.0;
        for axis in 0..grid.dim() {
            for i in 0..grid.cells() {
                let j = grid.shift(i, axis, 1);
                tv += (self.values[j] - self.values[i]).abs();
            }
        }
        tv * face_measure
    }
}

pub(crate) fn check_same_grid(a: &ScalarField, b: &ScalarField) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch {
            left: a.grid.describe(),
            right: b.grid.describe(),
        });
    }
    Ok(())
}

/// `L^p(T^N)` norm, `(Δx^N Σ |u_i|^p)^{1/p}`.
pub fn lp_norm(field: &ScalarField, p: f64) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::InvalidExponent {
            value: p,
            constraint: "L^p norm requires p >= 1",
        });
    }
    let sum: f64 = field.values.iter().map(|v| v.abs().powf(p)).sum();
    Ok((sum * field.grid.cell_measure()).powf(1.0 / p))
}

/// Central-difference gradient, component `i = (u(x+Δx e_i) − u(x−Δx e_i)) / 2Δx`.
pub fn gradient(field: &ScalarField) -> VectorField {
    let grid = field.grid;
    let inv2dx = 1.0 / (2.0 * grid.spacing());
    (0..grid.dim())
        .map(|axis| {
            let values = par::map_ordered(grid.cells(), |i| {
                let fwd = field.values[grid.shift(i, axis, 1)];
                let bwd = field.values[grid.shift(i, axis, -1)];
                (fwd - bwd) * inv2dx
            });
            ScalarField { grid, values }
        })
        .collect()
}

/// Central-difference divergence summed over axes. Its discrete integral over
/// the torus telescopes to zero.
pub fn divergence(vfield: &[ScalarField]) -> Result<ScalarField> {
    let grid = vfield
        .first()
        .ok_or_else(|| Error::Config("divergence of empty vector field".into()))?
        .grid;
    if vfield.len() != grid.dim() {
        return Err(Error::Dimension {
            what: "vector field components",
            expected: grid.dim(),
            got: vfield.len(),
        });
    }
    for c in vfield.iter().skip(1) {
        check_same_grid(&vfield[0], c)?;
    }
    let inv2dx = 1.0 / (2.0 * grid.spacing());
    let values = par::map_ordered(grid.cells(), |i| {
        let mut d = 0.0;
        for (axis, comp) in vfield.iter().enumerate() {
            let fwd = comp.values[grid.shift(i, axis, 1)];
            let bwd = comp.values[grid.shift(i, axis, -1)];
            d += (fwd - bwd) * inv2dx;
        }
        d
    });
    Ok(ScalarField { grid, values })
}
