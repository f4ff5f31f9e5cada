//! Approximations to the identity: the compactly supported bump profile
//! `exp(−1/(1−(r/width)²))`, realized either on the spatial grid (ϱ_τ) or on
//! the real line (ψ_δ). Both are normalized *discretely* to unit mass, are
//! symmetric, and have support radius equal to their width.

use super::{ScalarField, TorusGrid};
use crate::error::{Error, Result};

/// Which space the kernel mollifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// ϱ_τ on the torus.
    Spatial,
    /// ψ_δ on the real line (scalar/velocity variable).
    Scalar,
}

#[derive(Debug, Clone, Copy)]
pub struct MollifierKernel {
    kind: KernelKind,
    width: f64,
}

/// The standard bump on (−1, 1), un-normalized.
pub(crate) fn bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (-1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

impl MollifierKernel {
    pub fn spatial(width: f64) -> Self {
        Self {
            kind: KernelKind::Spatial,
            width,
        }
    }

    pub fn scalar(width: f64) -> Self {
        Self {
            kind: KernelKind::Scalar,
            width,
        }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Quadrature nodes and normalized weights for a scalar kernel:
    /// `Σ w_q · spacing = 1`, nodes symmetric about 0.
    pub fn scalar_samples(&self, spacing: f64) -> Result<Vec<(f64, f64)>> {
        if self.width <= 0.0 || spacing <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "kernel width/spacing",
                value: self.width.min(spacing),
                constraint: "must be positive",
            });
        }
        let q_max = (self.width / spacing).floor() as i64;
        let mut nodes = Vec::with_capacity((2 * q_max + 1) as usize);
        let mut mass = 0.0;
        for q in -q_max..=q_max {
            let s = q as f64 * spacing;
            let w = bump(s / self.width);
            mass += w * spacing;
            nodes.push((s, w));
        }
        for (_, w) in nodes.iter_mut() {
            *w /= mass;
        }
        Ok(nodes)
    }

    /// Realizes a spatial kernel on a grid as sparse cell offsets with
    /// weights normalized so `Σ w · Δx^N = 1`.
    pub fn on_grid(&self, grid: TorusGrid) -> Result<SpatialKernel> {
        if self.kind != KernelKind::Spatial {
            return Err(Error::Config(
                "scalar kernel cannot be realized on the spatial grid".into(),
            ));
        }
        if self.width <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "kernel width",
                value: self.width,
                constraint: "must be positive",
            });
        }
        let n = grid.points_per_axis() as isize;
        let dx = grid.spacing();
        // minimum-image displacement per axis offset
        let min_image = |d: isize| -> isize {
            if d > n / 2 {
                d - n
            } else {
                d
            }
        };
        let mut offsets = Vec::new();
        let mut mass = 0.0;
        match grid.dim() {
            1 => {
                for d in 0..n {
                    let m = min_image(d);
                    let r = (m as f64 * dx).abs();
                    let w = bump(r / self.width);
                    if w > 0.0 {
                        offsets.push(([d, 0], w));
                        mass += w;
                    }
                }
            }
            _ => {
                for d0 in 0..n {
                    let m0 = min_image(d0) as f64 * dx;
                    for d1 in 0..n {
                        let m1 = min_image(d1) as f64 * dx;
                        let r = (m0 * m0 + m1 * m1).sqrt();
                        let w = bump(r / self.width);
                        if w > 0.0 {
                            offsets.push(([d0, d1], w));
                            mass += w;
                        }
                    }
                }
            }
        }
        mass *= grid.cell_measure();
        for (_, w) in offsets.iter_mut() {
            *w /= mass;
        }
        Ok(SpatialKernel { grid, offsets })
    }
}

/// A spatial mollifier sampled on a grid: sparse periodic offsets with unit
/// total mass.
#[derive(Debug, Clone)]
pub struct SpatialKernel {
    grid: TorusGrid,
    offsets: Vec<([isize; 2], f64)>,
}

impl SpatialKernel {
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    /// `(offset per axis, weight)` pairs; offsets are cell counts in `[0, n)`.
    pub fn offsets(&self) -> &[([isize; 2], f64)] {
        &self.offsets
    }

    /// Discrete mass `Σ w · Δx^N`; equals 1 up to rounding.
    pub fn mass(&self) -> f64 {
        self.offsets.iter().map(|(_, w)| w).sum::<f64>() * self.grid.cell_measure()
    }

    /// Weight at the offset `-d` (periodic complement). Symmetry means this
    /// equals the weight at `d`.
    pub fn weight_at(&self, d: [isize; 2]) -> f64 {
        let n = self.grid.points_per_axis() as isize;
        let key = [d[0].rem_euclid(n), d[1].rem_euclid(n)];
        self.offsets
            .iter()
            .find(|(o, _)| *o == key)
            .map(|(_, w)| *w)
            .unwrap_or(0.0)
    }

    /// Circular convolution `(u * ϱ)(x) = Δx^N Σ_d u(x ⊕ d) ϱ(d)`.
    ///
    /// With nonnegative unit-mass weights this is a convex combination of
    /// translates, hence non-expansive in every `L^p`.
    pub fn convolve(&self, field: &ScalarField) -> Result<ScalarField> {
        if field.grid() != self.grid {
            return Err(Error::GridMismatch {
                left: format!("kernel on n = {}", self.grid.points_per_axis()),
                right: format!("field on n = {}", field.grid().points_per_axis()),
            });
        }
        let grid = self.grid;
        let measure = grid.cell_measure();
        let values = crate::par::map_ordered(grid.cells(), |i| {
            let mut acc = 0.0;
            for (d, w) in &self.offsets {
                let mut j = grid.shift(i, 0, d[0]);
                if grid.dim() == 2 {
                    j = grid.shift(j, 1, d[1]);
                }
                acc += field.values()[j] * w;
            }
            acc * measure
        });
        ScalarField::from_values(grid, values)
    }
}
