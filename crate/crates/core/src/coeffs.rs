//! Flux `B` with derivative `b`, diffusion matrix `A(x)` with its square
//! root `σ(x)`, the smooth truncation `χ_ε`, and the ε-regularizations used
//! by the nondegenerate approximation: `B^ε = (B * ψ_ε) χ_ε` and
//! `A^ε = A + εI`.

use crate::error::{Error, Result};
use crate::torus::{MollifierKernel, TorusGrid};
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Eigenvalues below this magnitude are treated as floating-point dust and
/// clamped to zero; anything more negative is a modeling error.
pub const PSD_CLAMP: f64 = 1e-10;

// ---------------------------------------------------------------------------
// flux
// ---------------------------------------------------------------------------

/// Flux `B : R -> R^N` with derivative `b = B'` of polynomial growth:
/// `|b(ξ)| ≤ C (1 + |ξ|^{p-1})`.
#[derive(Clone)]
pub struct FluxSpec {
    components: Vec<ScalarFn>,
    derivatives: Vec<ScalarFn>,
    growth_exponent: f64,
    growth_constant: f64,
    name: String,
}

impl std::fmt::Debug for FluxSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FluxSpec")
            .field("name", &self.name)
            .field("dim", &self.components.len())
            .field("growth_exponent", &self.growth_exponent)
            .field("growth_constant", &self.growth_constant)
            .finish()
    }
}

impl FluxSpec {
    pub fn new(
        name: impl Into<String>,
        components: Vec<ScalarFn>,
        derivatives: Vec<ScalarFn>,
        growth_exponent: f64,
        growth_constant: f64,
    ) -> Result<Self> {
        if components.len() != derivatives.len() || components.is_empty() {
            return Err(Error::Dimension {
                what: "flux components vs derivatives",
                expected: components.len(),
                got: derivatives.len(),
            });
        }
        if growth_exponent <= 1.0 {
            return Err(Error::InvalidParameter {
                name: "growth_exponent",
                value: growth_exponent,
                constraint: "polynomial growth requires p > 1",
            });
        }
        Ok(Self {
            components,
            derivatives,
            growth_exponent,
            growth_constant,
            name: name.into(),
        })
    }

    /// Burgers flux `B_1(ξ) = ξ²/2` on the first axis, zero on the others.
    pub fn burgers(dim: usize) -> Self {
        let mut components: Vec<ScalarFn> = vec![Arc::new(|xi: f64| 0.5 * xi * xi)];
        let mut derivatives: Vec<ScalarFn> = vec![Arc::new(|xi: f64| xi)];
        for _ in 1..dim {
            components.push(Arc::new(|_| 0.0));
            derivatives.push(Arc::new(|_| 0.0));
        }
        Self::new("burgers", components, derivatives, 2.0, 1.0).unwrap()
    }

    /// Linear transport `B_1(ξ) = cξ` on the first axis.
    pub fn linear(dim: usize, c: f64) -> Self {
        let mut components: Vec<ScalarFn> = vec![Arc::new(move |xi: f64| c * xi)];
        let mut derivatives: Vec<ScalarFn> = vec![Arc::new(move |_| c)];
        for _ in 1..dim {
            components.push(Arc::new(|_| 0.0));
            derivatives.push(Arc::new(|_| 0.0));
        }
        Self::new("linear", components, derivatives, 2.0, c.abs().max(1e-12)).unwrap()
    }

    pub fn zero(dim: usize) -> Self {
        let components: Vec<ScalarFn> = (0..dim).map(|_| Arc::new(|_: f64| 0.0) as ScalarFn).collect();
        let derivatives: Vec<ScalarFn> = (0..dim).map(|_| Arc::new(|_: f64| 0.0) as ScalarFn).collect();
        Self::new("zero", components, derivatives, 2.0, 1e-12).unwrap()
    }

    pub fn by_name(name: &str, dim: usize, param: f64) -> Result<Self> {
        match name {
            "burgers" => Ok(Self::burgers(dim)),
            "linear" => Ok(Self::linear(dim, param)),
            "zero" => Ok(Self::zero(dim)),
            other => Err(Error::Config(format!("unknown flux '{other}'"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn growth_exponent(&self) -> f64 {
        self.growth_exponent
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth_constant
    }

    pub fn component(&self, i: usize, xi: f64) -> f64 {
        (self.components[i])(xi)
    }

    pub fn derivative(&self, i: usize, xi: f64) -> f64 {
        (self.derivatives[i])(xi)
    }

    /// Euclidean norm of `b(ξ)` over the components.
    pub fn deriv_norm(&self, xi: f64) -> f64 {
        self.derivatives
            .iter()
            .map(|d| d(xi).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest `|b|` over a sampled range, used for CFL and upwind splitting.
    pub fn max_abs_deriv(&self, lo: f64, hi: f64, samples: usize) -> f64 {
        let mut m = 0.0f64;
        for q in 0..=samples {
            let xi = lo + (hi - lo) * q as f64 / samples as f64;
            m = m.max(self.deriv_norm(xi));
        }
        m
    }

    /// Fitted growth constant `max |b(ξ)| / (1 + |ξ|^{p-1})` over a range.
    pub fn fitted_growth_constant(&self, lo: f64, hi: f64, samples: usize) -> f64 {
        let mut m = 0.0f64;
        for q in 0..=samples {
            let xi = lo + (hi - lo) * q as f64 / samples as f64;
            m = m.max(self.deriv_norm(xi) / (1.0 + xi.abs().powf(self.growth_exponent - 1.0)));
        }
        m
    }

    /// Worst deviation of the stored derivative from a centered finite
    /// difference of the stored component, over a sampled range.
    pub fn derivative_consistency(&self, lo: f64, hi: f64, samples: usize, h: f64) -> f64 {
        let mut worst = 0.0f64;
        for q in 0..=samples {
            let xi = lo + (hi - lo) * q as f64 / samples as f64;
            for i in 0..self.dim() {
                let fd = (self.component(i, xi + h) - self.component(i, xi - h)) / (2.0 * h);
                worst = worst.max((fd - self.derivative(i, xi)).abs());
            }
        }
        worst
    }
}

// ---------------------------------------------------------------------------
// truncation
// ---------------------------------------------------------------------------

fn exp_ramp(r: f64) -> f64 {
    if r > 0.0 {
        (-1.0 / r).exp()
    } else {
        0.0
    }
}

fn exp_ramp_deriv(r: f64) -> f64 {
    if r > 0.0 {
        (-1.0 / r).exp() / (r * r)
    } else {
        0.0
    }
}

/// Smooth transition: 0 at t ≤ 0, 1 at t ≥ 1.
fn smoothstep(t: f64) -> f64 {
    let a = exp_ramp(t);
    let b = exp_ramp(1.0 - t);
    a / (a + b)
}

fn smoothstep_deriv(t: f64) -> f64 {
    let a = exp_ramp(t);
    let b = exp_ramp(1.0 - t);
    let da = exp_ramp_deriv(t);
    let db = -exp_ramp_deriv(1.0 - t);
    let denom = (a + b) * (a + b);
    (da * (a + b) - a * (da + db)) / denom
}

/// The base cutoff χ: smooth, `χ = 1` on `|t| ≤ 1/2`, `χ = 0` on `|t| ≥ 1`.
pub fn chi(t: f64) -> f64 {
    smoothstep(2.0 * (1.0 - t.abs()))
}

pub fn chi_deriv(t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    -2.0 * t.signum() * smoothstep_deriv(2.0 * (1.0 - t.abs()))
}

/// Scaled cutoff `χ_ε(ξ) = χ(εξ)`: 1 on `|ξ| ≤ 1/(2ε)`, 0 on `|ξ| ≥ 1/ε`.
#[derive(Debug, Clone, Copy)]
pub struct Truncation {
    epsilon: f64,
}

impl Truncation {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0 < epsilon && epsilon < 1.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                value: epsilon,
                constraint: "truncation scale must lie in (0, 1)",
            });
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn cutoff(&self, xi: f64) -> f64 {
        chi(self.epsilon * xi)
    }

    pub fn cutoff_deriv(&self, xi: f64) -> f64 {
        self.epsilon * chi_deriv(self.epsilon * xi)
    }

    /// Inner plateau radius `1/(2ε)`.
    pub fn plateau(&self) -> f64 {
        0.5 / self.epsilon
    }

    /// Outer support radius `1/ε`.
    pub fn support(&self) -> f64 {
        1.0 / self.epsilon
    }
}

// ---------------------------------------------------------------------------
// flux regularization
// ---------------------------------------------------------------------------

struct Table {
    lo: f64,
    step: f64,
    /// hard zero beyond this radius (the cutoff support), where the exact
    /// regularization vanishes identically
    cut_radius: f64,
    values: Vec<f64>,
}

impl Table {
    fn eval(&self, xi: f64) -> f64 {
        if xi.abs() >= self.cut_radius {
            return 0.0;
        }
        let t = (xi - self.lo) / self.step;
        if t <= 0.0 || t >= (self.values.len() - 1) as f64 {
            return 0.0;
        }
        let k = t.floor() as usize;
        let frac = t - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }
}

fn table_fn(table: Table) -> ScalarFn {
    let table = Arc::new(table);
    Arc::new(move |xi| table.eval(xi))
}

/// `B^ε_i = ((B_i * ψ_ε) χ_ε)` with consistently recomputed derivatives
/// `b^ε_i = (b_i * ψ_ε) χ_ε + (B_i * ψ_ε) χ_ε'`.
///
/// The convolution is evaluated by quadrature on a ξ-grid with spacing
/// `≤ ε/8` and the result is interpolated linearly. Outside `|ξ| ≥ 1/ε`
/// all components vanish identically.
pub fn regularize_flux(flux: &FluxSpec, epsilon: f64) -> Result<FluxSpec> {
    let trunc = Truncation::new(epsilon)?;
    let kernel = MollifierKernel::scalar(epsilon);
    let quad_h = epsilon / 8.0;
    let nodes = kernel.scalar_samples(quad_h)?;

    let support = trunc.support();
    let step = quad_h;
    let lo = -(support + 2.0 * step);
    let hi = support + 2.0 * step;
    let len = ((hi - lo) / step).ceil() as usize + 1;

    let mollify = |f: &ScalarFn, xi: f64| -> f64 {
        nodes
            .iter()
            .map(|(s, w)| f(xi - s) * w * quad_h)
            .sum::<f64>()
    };

    let mut components = Vec::with_capacity(flux.dim());
    let mut derivatives = Vec::with_capacity(flux.dim());
    for i in 0..flux.dim() {
        let b_raw = flux.components[i].clone();
        let db_raw = flux.derivatives[i].clone();
        let mut vals = Vec::with_capacity(len);
        let mut dvals = Vec::with_capacity(len);
        for k in 0..len {
            let xi = lo + k as f64 * step;
            let smooth = mollify(&b_raw, xi);
            let smooth_deriv = mollify(&db_raw, xi);
            vals.push(smooth * trunc.cutoff(xi));
            dvals.push(smooth_deriv * trunc.cutoff(xi) + smooth * trunc.cutoff_deriv(xi));
        }
        components.push(table_fn(Table {
            lo,
            step,
            cut_radius: support,
            values: vals,
        }));
        derivatives.push(table_fn(Table {
            lo,
            step,
            cut_radius: support,
            values: dvals,
        }));
    }
    FluxSpec::new(
        format!("{}^eps", flux.name),
        components,
        derivatives,
        flux.growth_exponent,
        flux.growth_constant,
    )
}

// ---------------------------------------------------------------------------
// symmetric matrices
// ---------------------------------------------------------------------------

/// Symmetric matrix of order 1 or 2, stored as `[a00, a01, a11]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat {
    dim: usize,
    m: [f64; 3],
}

impl SymMat {
    pub fn zero(dim: usize) -> Self {
        Self { dim, m: [0.0; 3] }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            m: [1.0, 0.0, if dim == 2 { 1.0 } else { 0.0 }],
        }
    }

    pub fn scalar_1d(a: f64) -> Self {
        Self {
            dim: 1,
            m: [a, 0.0, 0.0],
        }
    }

    pub fn new_2d(a00: f64, a01: f64, a11: f64) -> Self {
        Self {
            dim: 2,
            m: [a00, a01, a11],
        }
    }

    pub fn diag(dim: usize, d: f64) -> Self {
        Self {
            dim,
            m: [d, 0.0, if dim == 2 { d } else { 0.0 }],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match (i, j) {
            (0, 0) => self.m[0],
            (0, 1) | (1, 0) => self.m[1],
            (1, 1) => self.m[2],
            _ => 0.0,
        }
    }

    pub fn add_diag(&self, e: f64) -> Self {
        Self {
            dim: self.dim,
            m: [
                self.m[0] + e,
                self.m[1],
                if self.dim == 2 { self.m[2] + e } else { 0.0 },
            ],
        }
    }

    /// Quadratic form `gᵀ M g`.
    pub fn quad_form(&self, g: &[f64]) -> f64 {
        match self.dim {
            1 => self.m[0] * g[0] * g[0],
            _ => self.m[0] * g[0] * g[0] + 2.0 * self.m[1] * g[0] * g[1] + self.m[2] * g[1] * g[1],
        }
    }

    /// Matrix product with itself.
    pub fn square(&self) -> Self {
        match self.dim {
            1 => Self::scalar_1d(self.m[0] * self.m[0]),
            _ => {
                let [a, c, b] = self.m;
                Self::new_2d(a * a + c * c, c * (a + b), b * b + c * c)
            }
        }
    }

    /// Eigenvalues in ascending order (1D: the single entry twice).
    pub fn eigenvalues(&self) -> (f64, f64) {
        match self.dim {
            1 => (self.m[0], self.m[0]),
            _ => {
                let [a, c, b] = self.m;
                let mid = 0.5 * (a + b);
                let disc = (0.25 * (a - b) * (a - b) + c * c).sqrt();
                (mid - disc, mid + disc)
            }
        }
    }

    /// Frobenius distance to another symmetric matrix.
    pub fn frobenius_distance(&self, other: &SymMat) -> f64 {
        let d0 = self.m[0] - other.m[0];
        let d1 = self.m[1] - other.m[1];
        let d2 = self.m[2] - other.m[2];
        (d0 * d0 + 2.0 * d1 * d1 + d2 * d2).sqrt()
    }
}

/// Symmetric PSD square root, clamping eigenvalues in `[-1e-10, 0)` to zero
/// and rejecting anything more negative.
pub fn sqrt_matrix(a: &SymMat) -> Result<SymMat> {
    let (lo, hi) = a.eigenvalues();
    if lo < -PSD_CLAMP {
        return Err(Error::NotPsd { eigenvalue: lo });
    }
    let lo_c = lo.max(0.0);
    let hi_c = hi.max(0.0);
    match a.dim {
        1 => Ok(SymMat::scalar_1d(lo_c.sqrt())),
        _ => {
            let [a00, a01, a11] = a.m;
            if a01.abs() <= f64::EPSILON * (a00.abs() + a11.abs()).max(1.0) {
                return Ok(SymMat::new_2d(a00.max(0.0).sqrt(), 0.0, a11.max(0.0).sqrt()));
            }
            // eigenvector for the larger eigenvalue
            let (vx, vy) = {
                let cand1 = (a01, hi_c - a00);
                let cand2 = (hi_c - a11, a01);
                if cand1.0.hypot(cand1.1) >= cand2.0.hypot(cand2.1) {
                    cand1
                } else {
                    cand2
                }
            };
            let norm = vx.hypot(vy);
            let (vx, vy) = (vx / norm, vy / norm);
            let (s_lo, s_hi) = (lo_c.sqrt(), hi_c.sqrt());
            // σ = s_hi v vᵀ + s_lo (I − v vᵀ)
            Ok(SymMat::new_2d(
                s_hi * vx * vx + s_lo * vy * vy,
                (s_hi - s_lo) * vx * vy,
                s_hi * vy * vy + s_lo * vx * vx,
            ))
        }
    }
}

// ---------------------------------------------------------------------------
// diffusion
// ---------------------------------------------------------------------------

/// Diffusion matrix `A(x)` sampled at grid points together with its square
/// root field and the current viscosity perturbation.
#[derive(Debug, Clone)]
pub struct DiffusionSpec {
    grid: TorusGrid,
    matrices: Vec<SymMat>,
    sqrts: Vec<SymMat>,
    epsilon: f64,
    name: String,
}

impl DiffusionSpec {
    pub fn from_fn(
        grid: TorusGrid,
        name: impl Into<String>,
        f: impl Fn(&[f64]) -> SymMat,
    ) -> Result<Self> {
        let matrices: Vec<SymMat> = (0..grid.cells())
            .map(|i| f(&grid.coords(i)[..grid.dim()]))
            .collect();
        let sqrts = matrices
            .iter()
            .map(sqrt_matrix)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            matrices,
            sqrts,
            epsilon: 0.0,
            name: name.into(),
        })
    }

    /// Heat catalog entry: `A = I`.
    pub fn identity(grid: TorusGrid) -> Self {
        Self::from_fn(grid, "identity", |_| SymMat::identity(grid.dim())).unwrap()
    }

    /// Hyperbolic catalog entry: `A = 0`.
    pub fn zero(grid: TorusGrid) -> Self {
        Self::from_fn(grid, "zero", |_| SymMat::zero(grid.dim())).unwrap()
    }

    /// Degeneracy-zone catalog entry: `A(x) = diag(a(x))` with
    /// `a(x) = max(0, sin 2πx₁)²`, degenerate on half the torus.
    pub fn degenerate_sine(grid: TorusGrid) -> Self {
        Self::from_fn(grid, "degenerate_sine", |x| {
            let s = (2.0 * std::f64::consts::PI * x[0]).sin().max(0.0);
            SymMat::diag(grid.dim(), s * s)
        })
        .unwrap()
    }

    /// Constant anisotropic PSD catalog entry (2D).
    pub fn anisotropic(grid: TorusGrid, a00: f64, a01: f64, a11: f64) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(Error::Dimension {
                what: "anisotropic diffusion requires a 2D grid",
                expected: 2,
                got: grid.dim(),
            });
        }
        let m = SymMat::new_2d(a00, a01, a11);
        let (lo, _) = m.eigenvalues();
        if lo < -PSD_CLAMP {
            return Err(Error::NotPsd { eigenvalue: lo });
        }
        Self::from_fn(grid, "anisotropic", |_| m)
    }

    /// Constant scalar diffusion `A = aI`.
    pub fn constant(grid: TorusGrid, a: f64) -> Result<Self> {
        if a < 0.0 {
            return Err(Error::NotPsd { eigenvalue: a });
        }
        Self::from_fn(grid, "constant", |_| SymMat::diag(grid.dim(), a))
    }

    pub fn by_name(name: &str, grid: TorusGrid, param: f64) -> Result<Self> {
        match name {
            "identity" | "heat" => Ok(Self::identity(grid)),
            "zero" | "hyperbolic" => Ok(Self::zero(grid)),
            "degenerate_sine" => Ok(Self::degenerate_sine(grid)),
            "constant" => Self::constant(grid, param),
            "anisotropic" => Self::anisotropic(grid, 1.0, param, 0.5),
            other => Err(Error::Config(format!("unknown diffusion '{other}'"))),
        }
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn matrix(&self, cell: usize) -> &SymMat {
        &self.matrices[cell]
    }

    pub fn sqrt(&self, cell: usize) -> &SymMat {
        &self.sqrts[cell]
    }

    /// Largest eigenvalue over the grid.
    pub fn lambda_max(&self) -> f64 {
        self.matrices
            .iter()
            .map(|m| m.eigenvalues().1)
            .fold(0.0, f64::max)
    }

    /// `A + εI` with the square-root field recomputed.
    pub fn perturbed(&self, epsilon: f64) -> Result<Self> {
        if epsilon < 0.0 {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                value: epsilon,
                constraint: "viscosity perturbation must be nonnegative",
            });
        }
        let matrices: Vec<SymMat> = self.matrices.iter().map(|m| m.add_diag(epsilon)).collect();
        let sqrts = matrices
            .iter()
            .map(sqrt_matrix)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid: self.grid,
            matrices,
            sqrts,
            epsilon: self.epsilon + epsilon,
            name: self.name.clone(),
        })
    }

    /// Largest `‖σ(x) − σ(y)‖_F / |x−y|` over nearest-neighbor pairs.
    pub fn sqrt_lipschitz_constant(&self) -> f64 {
        let dx = self.grid.spacing();
        let mut worst = 0.0f64;
        for i in 0..self.grid.cells() {
            for axis in 0..self.grid.dim() {
                let j = self.grid.shift(i, axis, 1);
                worst = worst.max(self.sqrts[i].frobenius_distance(&self.sqrts[j]) / dx);
            }
        }
        worst
    }

    /// Checks the structural invariants: PSD within the clamp threshold and
    /// `σσ = A` within `1e-8`. Returns the worst reconstruction error.
    pub fn validate(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for (m, s) in self.matrices.iter().zip(&self.sqrts) {
            let (lo, _) = m.eigenvalues();
            if lo < -PSD_CLAMP {
                return Err(Error::NotPsd { eigenvalue: lo });
            }
            worst = worst.max(s.square().frobenius_distance(m));
        }
        if worst > 1e-8 {
            return Err(Error::Config(format!(
                "square-root reconstruction error {worst:.3e} exceeds 1e-8"
            )));
        }
        Ok(worst)
    }
}

/// `A^ε = A + εI` (free-function form of [`DiffusionSpec::perturbed`]).
pub fn perturb_diffusion(spec: &DiffusionSpec, epsilon: f64) -> Result<DiffusionSpec> {
    spec.perturbed(epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadrature_mollified_burgers(xi: f64, eps: f64) -> f64 {
        // independent fine quadrature of (B * ψ_ε)(ξ) for B = ξ²/2
        let kernel = MollifierKernel::scalar(eps);
        let h = eps / 1024.0;
        let nodes = kernel.scalar_samples(h).unwrap();
        nodes
            .iter()
            .map(|(s, w)| 0.5 * (xi - s) * (xi - s) * w * h)
            .sum()
    }

    #[test]
    fn flux_catalog_satisfies_growth_and_derivative_checks() {
        for flux in [FluxSpec::burgers(1), FluxSpec::linear(1, 0.7), FluxSpec::zero(1)] {
            let fitted = flux.fitted_growth_constant(-10.0, 10.0, 400);
            assert!(fitted <= flux.growth_constant() + 1e-9, "{}", flux.name());
            let dev = flux.derivative_consistency(-5.0, 5.0, 200, 1e-5);
            assert!(dev < 1e-8, "{}: derivative deviates by {dev}", flux.name());
        }
    }

    #[test]
    fn regularized_burgers_matches_quadrature_oracle() {
        let eps = 0.1;
        let reg = regularize_flux(&FluxSpec::burgers(1), eps).unwrap();
        // χ_{0.1}(1) = 1 because |ξ| = 1 ≤ 5 = 1/(2ε)
        let got = reg.component(0, 1.0);
        let oracle = quadrature_mollified_burgers(1.0, eps);
        assert!((got - oracle).abs() < 1e-4, "got {got}, oracle {oracle}");
        // (B * ψ_ε)(1) = 1/2 + m₂(ψ_ε)/2 = 1/2 + O(ε²)
        assert!((got - 0.5).abs() < eps * eps, "got {got}");
    }

    #[test]
    fn regularized_flux_vanishes_outside_truncation() {
        let eps = 0.2;
        let reg = regularize_flux(&FluxSpec::burgers(1), eps).unwrap();
        assert_eq!(reg.component(0, 2.0 / eps), 0.0);
        assert_eq!(reg.component(0, -2.0 / eps), 0.0);
        assert_eq!(reg.derivative(0, 2.0 / eps), 0.0);
    }

    #[test]
    fn regularized_zero_flux_stays_zero() {
        let reg = regularize_flux(&FluxSpec::zero(1), 0.1).unwrap();
        for q in -20..=20 {
            assert_eq!(reg.component(0, q as f64 * 0.5), 0.0);
        }
    }

    #[test]
    fn rejects_epsilon_outside_unit_interval() {
        assert!(regularize_flux(&FluxSpec::burgers(1), 0.0).is_err());
        assert!(regularize_flux(&FluxSpec::burgers(1), 1.0).is_err());
    }

    #[test]
    fn truncation_sandwich() {
        let eps = 0.1;
        let reg = regularize_flux(&FluxSpec::burgers(1), eps).unwrap();
        let trunc = Truncation::new(eps).unwrap();
        // on the plateau the cutoff is exactly 1: B^ε = B * ψ_ε
        for xi in [-4.0f64, -1.0, 0.0, 2.5, 4.9] {
            assert!(xi.abs() <= trunc.plateau());
            let oracle = quadrature_mollified_burgers(xi, eps);
            assert!(
                (reg.component(0, xi) - oracle).abs() < 2e-3 * oracle.abs().max(1.0),
                "xi = {xi}"
            );
        }
        // beyond the support everything is zero
        for xi in [10.0f64, 12.5, -11.0] {
            assert!(xi.abs() >= trunc.support());
            assert_eq!(reg.component(0, xi), 0.0);
        }
    }

    #[test]
    fn uniform_growth_across_epsilon() {
        let flux = FluxSpec::burgers(1);
        let base = flux.fitted_growth_constant(-8.0, 8.0, 400);
        for eps in [0.5, 0.1, 0.02] {
            let reg = regularize_flux(&flux, eps).unwrap();
            let fitted = reg.fitted_growth_constant(-8.0, 8.0, 400);
            assert!(
                fitted <= 1.5 * base,
                "eps = {eps}: fitted {fitted} vs base {base}"
            );
        }
    }

    #[test]
    fn cutoff_plateau_and_support() {
        let trunc = Truncation::new(0.25).unwrap();
        assert_eq!(trunc.cutoff(0.0), 1.0);
        assert_eq!(trunc.cutoff(1.9), 1.0); // |ξ| ≤ 2 = 1/(2ε)
        assert_eq!(trunc.cutoff(4.0), 0.0); // |ξ| ≥ 4 = 1/ε
        assert_eq!(trunc.cutoff(-4.5), 0.0);
        for q in 0..100 {
            let xi = -6.0 + q as f64 * 0.12;
            let v = trunc.cutoff(xi);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn sqrt_matrix_cases() {
        let id = SymMat::identity(2);
        assert_eq!(sqrt_matrix(&id).unwrap(), id);

        let d = SymMat::new_2d(4.0, 0.0, 0.0);
        let s = sqrt_matrix(&d).unwrap();
        assert_eq!(s, SymMat::new_2d(2.0, 0.0, 0.0));

        let bad = SymMat::new_2d(1.0, 2.0, 1.0); // eigenvalues -1, 3
        assert!(matches!(sqrt_matrix(&bad), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn sqrt_matrix_reconstructs_random_psd() {
        let mut state = 0x853c49e6748fea9bu64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..200 {
            let (m00, m01, m10, m11) = (next(), next(), next(), next());
            // MᵀM is PSD
            let a = SymMat::new_2d(
                m00 * m00 + m10 * m10,
                m00 * m01 + m10 * m11,
                m01 * m01 + m11 * m11,
            );
            let s = sqrt_matrix(&a).unwrap();
            let err = s.square().frobenius_distance(&a);
            assert!(err < 1e-8, "reconstruction error {err}");
            let (lo, _) = s.eigenvalues();
            assert!(lo >= -1e-12);
        }
    }

    #[test]
    fn perturbation_shifts_spectrum() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let degenerate = DiffusionSpec::zero(grid);
        let p = degenerate.perturbed(0.01).unwrap();
        for i in 0..grid.cells() {
            assert_eq!(p.matrix(i).entry(0, 0), 0.01);
        }
        assert_eq!(p.epsilon(), 0.01);

        let grid2 = TorusGrid::new(2, 8).unwrap();
        let diag = DiffusionSpec::from_fn(grid2, "diag", |_| SymMat::new_2d(1.0, 0.0, 0.0)).unwrap();
        let pd = diag.perturbed(0.04).unwrap();
        let (lo, hi) = pd.matrix(0).eigenvalues();
        assert!((lo - 0.04).abs() < 1e-15 && (hi - 1.04).abs() < 1e-15);
        // σ^ε of diag(1, 0) + 0.04 I is diag(√1.04, 0.2)
        let s = pd.sqrt(0);
        assert!((s.entry(0, 0) - 1.04f64.sqrt()).abs() < 1e-12);
        assert!((s.entry(1, 1) - 0.2).abs() < 1e-12);
        assert_eq!(s.entry(0, 1), 0.0);
    }

    #[test]
    fn diffusion_catalog_validates() {
        let grid = TorusGrid::new(2, 16).unwrap();
        for spec in [
            DiffusionSpec::identity(grid),
            DiffusionSpec::zero(grid),
            DiffusionSpec::degenerate_sine(grid),
            DiffusionSpec::anisotropic(grid, 1.0, 0.3, 0.5).unwrap(),
        ] {
            spec.validate().unwrap();
            assert!(spec.sqrt_lipschitz_constant().is_finite());
        }
    }

    #[test]
    fn sigma_lipschitz_bounded_as_epsilon_vanishes() {
        // the square root of A + εI stays uniformly Lipschitz for the smooth
        // catalog entries as ε ↓ 0
        let grid = TorusGrid::new(1, 64).unwrap();
        let spec = DiffusionSpec::degenerate_sine(grid);
        let base = spec.sqrt_lipschitz_constant();
        let mut prev = f64::INFINITY;
        for eps in [0.1, 0.01, 0.001, 0.0] {
            let l = spec.perturbed(eps).unwrap().sqrt_lipschitz_constant();
            assert!(l <= base.max(prev) * 1.5 + 1e-9);
            prev = l;
        }
    }
}
