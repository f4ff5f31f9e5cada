//! Time integration of the nondegenerate approximation
//!
//! ```text
//! du + div(B^ε(u)) dt = div(A^ε(x) ∇u) dt + Φ^ε(u) dW,   A^ε = A + εI,
//! ```
//!
//! by explicit or diffusion-implicit Euler–Maruyama. The flux divergence is
//! either central or monotone upwind (Engquist–Osher splitting); diffusion
//! uses face-averaged compact stencils for the diagonal of `A` and central
//! differences for the off-diagonal part, so both divergence terms telescope
//! to zero mean and summation by parts holds exactly for the recorded
//! dissipation. Noise is evaluated at the step's start state (Itô).

use crate::coeffs::{regularize_flux, DiffusionSpec, FluxSpec};
use crate::error::{Error, Result};
use crate::noise::{NoiseModel, WienerPath};
use crate::torus::{lp_norm, ScalarField, TorusGrid};

/// Hard ceiling on `max|u|`; beyond it the step reports blow-up instead of
/// propagating NaNs.
pub const BLOWUP_THRESHOLD: f64 = 1e8;

/// Relative residual demanded from the implicit diffusion solve.
pub const CG_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    Explicit,
    SemiImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxScheme {
    Central,
    Upwind,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Viscosity ε ∈ [0, 1); 0 runs the raw coefficients.
    pub epsilon: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: TimeScheme,
    pub flux_scheme: FluxScheme,
    /// Snapshot stride in steps.
    pub save_every: usize,
    pub cfl_safety: f64,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                value: self.epsilon,
                constraint: "viscosity must lie in [0, 1)",
            });
        }
        if self.dt <= 0.0 || self.t_end <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "dt/t_end",
                value: self.dt.min(self.t_end),
                constraint: "time step and horizon must be positive",
            });
        }
        if !(0.0 < self.cfl_safety && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "cfl_safety",
                value: self.cfl_safety,
                constraint: "safety factor must lie in (0, 1]",
            });
        }
        if self.save_every == 0 {
            return Err(Error::Config("save_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt).round() as usize).max(1)
    }
}

/// Raw problem data prior to regularization.
#[derive(Debug, Clone)]
pub struct Problem {
    pub flux: FluxSpec,
    pub diffusion: DiffusionSpec,
    pub noise: NoiseModel,
}

/// The system after regularization at a fixed ε: tabulated flux, perturbed
/// diffusion, truncated grid-bound noise, upwind splittings.
pub struct Regularized {
    grid: TorusGrid,
    epsilon: f64,
    flux: FluxSpec,
    upwind: Vec<EoSplit>,
    diffusion: DiffusionSpec,
    noise: crate::noise::BoundNoise,
}

impl Regularized {
    pub fn flux(&self) -> &FluxSpec {
        &self.flux
    }

    pub fn diffusion(&self) -> &DiffusionSpec {
        &self.diffusion
    }

    pub fn noise(&self) -> &crate::noise::BoundNoise {
        &self.noise
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Problem {
    /// Regularizes at ε over the expected solution range: `B^ε`, `A + εI`,
    /// truncated noise. At ε = 0 the raw coefficients are used.
    pub fn regularize(
        &self,
        grid: TorusGrid,
        epsilon: f64,
        range: (f64, f64),
    ) -> Result<Regularized> {
        if self.diffusion.grid() != grid {
            return Err(Error::GridMismatch {
                left: format!(
                    "diffusion on n = {}",
                    self.diffusion.grid().points_per_axis()
                ),
                right: format!("state on n = {}", grid.points_per_axis()),
            });
        }
        let flux = if epsilon > 0.0 {
            regularize_flux(&self.flux, epsilon)?
        } else {
            self.flux.clone()
        };
        let diffusion = self.diffusion.perturbed(epsilon)?;
        let noise_model = if epsilon > 0.0 {
            self.noise.truncate(epsilon)?
        } else {
            self.noise.clone()
        };
        let noise = noise_model.bind(grid);
        let upwind = (0..grid.dim())
            .map(|axis| EoSplit::build(&flux, axis, range))
            .collect();
        Ok(Regularized {
            grid,
            epsilon,
            flux,
            upwind,
            diffusion,
            noise,
        })
    }
}

/// Engquist–Osher splitting of one flux component:
/// `B⁺(v) = B(0) + ∫₀^v max(b, 0)`, `B⁻(v) = ∫₀^v min(b, 0)`.
/// The monotone face flux is `F(a, b) = B⁺(a) + B⁻(b)`.
struct EoSplit {
    lo: f64,
    step: f64,
    plus: Vec<f64>,
    minus: Vec<f64>,
}

impl EoSplit {
    const TABLE_POINTS: usize = 4096;

    fn build(flux: &FluxSpec, axis: usize, range: (f64, f64)) -> Self {
        let lo = range.0.min(0.0) - 1.0;
        let hi = range.1.max(0.0) + 1.0;
        let m = Self::TABLE_POINTS;
        let step = (hi - lo) / (m - 1) as f64;
        let mut plus = vec![0.0; m];
        let mut minus = vec![0.0; m];
        let mut prev = flux.derivative(axis, lo);
        for k in 1..m {
            let xi = lo + k as f64 * step;
            let cur = flux.derivative(axis, xi);
            plus[k] = plus[k - 1] + 0.5 * (prev.max(0.0) + cur.max(0.0)) * step;
            minus[k] = minus[k - 1] + 0.5 * (prev.min(0.0) + cur.min(0.0)) * step;
            prev = cur;
        }
        // shift so both cumulative integrals are anchored at v = 0
        let interp = |table: &[f64], v: f64| -> f64 {
            let t = ((v - lo) / step).clamp(0.0, (m - 1) as f64);
            let k = (t.floor() as usize).min(m - 2);
            let frac = t - k as f64;
            table[k] * (1.0 - frac) + table[k + 1] * frac
        };
        let p0 = interp(&plus, 0.0);
        let m0 = interp(&minus, 0.0);
        let b0 = flux.component(axis, 0.0);
        for v in plus.iter_mut() {
            *v += b0 - p0;
        }
        for v in minus.iter_mut() {
            *v -= m0;
        }
        Self {
            lo,
            step,
            plus,
            minus,
        }
    }

    fn eval(&self, table: &[f64], v: f64) -> f64 {
        let m = table.len();
        let hi = self.lo + (m - 1) as f64 * self.step;
        if v <= self.lo {
            let slope = (table[1] - table[0]) / self.step;
            return table[0] + slope * (v - self.lo);
        }
        if v >= hi {
            let slope = (table[m - 1] - table[m - 2]) / self.step;
            return table[m - 1] + slope * (v - hi);
        }
        let t = (v - self.lo) / self.step;
        let k = (t.floor() as usize).min(m - 2);
        let frac = t - k as f64;
        table[k] * (1.0 - frac) + table[k + 1] * frac
    }

    fn positive_part(&self, v: f64) -> f64 {
        self.eval(&self.plus, v)
    }

    fn negative_part(&self, v: f64) -> f64 {
        self.eval(&self.minus, v)
    }
}

// ---------------------------------------------------------------------------
// spatial kernels
// ---------------------------------------------------------------------------

fn flux_divergence(sys: &Regularized, scheme: FluxScheme, u: &[f64], out: &mut [f64]) {
    let grid = sys.grid;
    let dx = grid.spacing();
    out.fill(0.0);
    match scheme {
        FluxScheme::Central => {
            let inv2dx = 1.0 / (2.0 * dx);
            for axis in 0..grid.dim() {
                for (i, o) in out.iter_mut().enumerate() {
                    let fwd = sys.flux.component(axis, u[grid.shift(i, axis, 1)]);
                    let bwd = sys.flux.component(axis, u[grid.shift(i, axis, -1)]);
                    *o += (fwd - bwd) * inv2dx;
                }
            }
        }
        FluxScheme::Upwind => {
            let invdx = 1.0 / dx;
            for axis in 0..grid.dim() {
                let split = &sys.upwind[axis];
                for (i, o) in out.iter_mut().enumerate() {
                    let up = grid.shift(i, axis, 1);
                    let dn = grid.shift(i, axis, -1);
                    let face_fwd = split.positive_part(u[i]) + split.negative_part(u[up]);
                    let face_bwd = split.positive_part(u[dn]) + split.negative_part(u[i]);
                    *o += (face_fwd - face_bwd) * invdx;
                }
            }
        }
    }
}

/// `div(A ∇u)`: face-averaged compact stencil per diagonal entry plus
/// central differences for the off-diagonal part. Mean-free by telescoping.
pub fn apply_diffusion(diff: &DiffusionSpec, grid: TorusGrid, u: &[f64], out: &mut [f64]) {
    let dx = grid.spacing();
    let inv_dx2 = 1.0 / (dx * dx);
    out.fill(0.0);
    for axis in 0..grid.dim() {
        for (i, o) in out.iter_mut().enumerate() {
            let up = grid.shift(i, axis, 1);
            let dn = grid.shift(i, axis, -1);
            let a_here = diff.matrix(i).entry(axis, axis);
            let a_up = 0.5 * (a_here + diff.matrix(up).entry(axis, axis));
            let a_dn = 0.5 * (a_here + diff.matrix(dn).entry(axis, axis));
            *o += (a_up * (u[up] - u[i]) - a_dn * (u[i] - u[dn])) * inv_dx2;
        }
    }
    if grid.dim() == 2 {
        // ∂_x(A01 ∂_y u) + ∂_y(A01 ∂_x u), both central
        let inv2dx = 1.0 / (2.0 * dx);
        let cells = grid.cells();
        let mut gx = vec![0.0; cells];
        let mut gy = vec![0.0; cells];
        for i in 0..cells {
            gx[i] = (u[grid.shift(i, 0, 1)] - u[grid.shift(i, 0, -1)]) * inv2dx;
            gy[i] = (u[grid.shift(i, 1, 1)] - u[grid.shift(i, 1, -1)]) * inv2dx;
        }
        let a01 = |j: usize| diff.matrix(j).entry(0, 1);
        for (i, o) in out.iter_mut().enumerate() {
            let fx_fwd = a01(grid.shift(i, 0, 1)) * gy[grid.shift(i, 0, 1)];
            let fx_bwd = a01(grid.shift(i, 0, -1)) * gy[grid.shift(i, 0, -1)];
            let fy_fwd = a01(grid.shift(i, 1, 1)) * gx[grid.shift(i, 1, 1)];
            let fy_bwd = a01(grid.shift(i, 1, -1)) * gx[grid.shift(i, 1, -1)];
            *o += (fx_fwd - fx_bwd) * inv2dx + (fy_fwd - fy_bwd) * inv2dx;
        }
    }
}

/// The dissipation functional matched to [`apply_diffusion`] by exact
/// summation by parts: `−⟨u, div(A∇u)⟩ = diss(u)` up to rounding.
pub fn dissipation(diff: &DiffusionSpec, grid: TorusGrid, u: &[f64]) -> f64 {
    let dx = grid.spacing();
    let inv_dx2 = 1.0 / (dx * dx);
    let mut total = 0.0;
    for axis in 0..grid.dim() {
        for i in 0..grid.cells() {
            let up = grid.shift(i, axis, 1);
            let a_face =
                0.5 * (diff.matrix(i).entry(axis, axis) + diff.matrix(up).entry(axis, axis));
            let du = u[up] - u[i];
            total += a_face * du * du * inv_dx2;
        }
    }
    if grid.dim() == 2 {
        let inv2dx = 1.0 / (2.0 * dx);
        for i in 0..grid.cells() {
            let gx = (u[grid.shift(i, 0, 1)] - u[grid.shift(i, 0, -1)]) * inv2dx;
            let gy = (u[grid.shift(i, 1, 1)] - u[grid.shift(i, 1, -1)]) * inv2dx;
            total += 2.0 * diff.matrix(i).entry(0, 1) * gx * gy;
        }
    }
    total * grid.cell_measure()
}

// ---------------------------------------------------------------------------
// stepping
// ---------------------------------------------------------------------------

/// Per-step scalars: state statistics and the discrete energy ledger terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    /// time after the step
    pub time: f64,
    pub max_abs_u: f64,
    pub l2: f64,
    pub mean: f64,
    /// `∫ (∇u°)ᵀ A^ε ∇u°` for the state the diffusion acted on
    pub dissipation: f64,
    /// `2 ∫ u · Φ^ε ΔW` against the pre-step state
    pub noise_inner: f64,
    /// `∫ |Φ^ε ΔW|²`
    pub noise_quad: f64,
}

/// Hook for quantities that must be accumulated stepwise during a run (Itô
/// sums cannot be reconstructed from snapshots).
pub trait StepObserver {
    /// Called once per step with the pre-step state and the sampled noise
    /// field `Φ^ε ΔW` about to be added.
    fn on_step(&mut self, step: usize, time: f64, u: &[f64], noise_field: &[f64]);
    /// Called whenever a snapshot is recorded (including the initial one).
    fn on_snapshot(&mut self, time: f64);
}

struct NoOpObserver;

impl StepObserver for NoOpObserver {
    fn on_step(&mut self, _: usize, _: f64, _: &[f64], _: &[f64]) {}
    fn on_snapshot(&mut self, _: f64) {}
}

struct StepBuffers {
    flux_div: Vec<f64>,
    diffusion: Vec<f64>,
    noise: Vec<f64>,
    next: Vec<f64>,
    cg: Option<CgBuffers>,
}

struct CgBuffers {
    r: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
    scratch: Vec<f64>,
}

impl StepBuffers {
    fn new(cells: usize, implicit: bool) -> Self {
        Self {
            flux_div: vec![0.0; cells],
            diffusion: vec![0.0; cells],
            noise: vec![0.0; cells],
            next: vec![0.0; cells],
            cg: implicit.then(|| CgBuffers {
                r: vec![0.0; cells],
                p: vec![0.0; cells],
                ap: vec![0.0; cells],
                scratch: vec![0.0; cells],
            }),
        }
    }
}

fn step_in_place(
    sys: &Regularized,
    config: &SolverConfig,
    u: &[f64],
    increments: &[f64],
    buf: &mut StepBuffers,
    step_index: usize,
) -> Result<StepDiagnostics> {
    let grid = sys.grid;
    let cells = grid.cells();
    let dt = config.dt;
    let measure = grid.cell_measure();

    flux_divergence(sys, config.flux_scheme, u, &mut buf.flux_div);

    let active = sys.noise.active_modes();
    if active > 0 {
        if increments.len() < active {
            return Err(Error::Dimension {
                what: "noise increments vs active modes",
                expected: active,
                got: increments.len(),
            });
        }
        sys.noise.apply_into(u, &increments[..active], &mut buf.noise);
    } else {
        buf.noise.fill(0.0);
    }

    let dissipation_value;
    match config.scheme {
        TimeScheme::Explicit => {
            apply_diffusion(&sys.diffusion, grid, u, &mut buf.diffusion);
            dissipation_value = dissipation(&sys.diffusion, grid, u);
            for i in 0..cells {
                buf.next[i] = u[i] + dt * (buf.diffusion[i] - buf.flux_div[i]) + buf.noise[i];
            }
        }
        TimeScheme::SemiImplicit => {
            // (I − dt L_A) u⁺ = u − dt div B(u) + Φ ΔW
            for i in 0..cells {
                buf.next[i] = u[i] - dt * buf.flux_div[i] + buf.noise[i];
            }
            solve_semi_implicit(sys, grid, dt, buf)?;
            dissipation_value = dissipation(&sys.diffusion, grid, &buf.next);
        }
    }

    let mut max_abs = 0.0f64;
    let mut l2sq = 0.0;
    let mut mean = 0.0;
    let mut noise_inner = 0.0;
    let mut noise_quad = 0.0;
    for i in 0..cells {
        let v = buf.next[i];
        if !v.is_finite() {
            return Err(Error::BlowUp {
                step: step_index,
                time: (step_index + 1) as f64 * dt,
                max_abs: f64::INFINITY,
            });
        }
        max_abs = max_abs.max(v.abs());
        l2sq += v * v;
        mean += v;
        noise_inner += u[i] * buf.noise[i];
        noise_quad += buf.noise[i] * buf.noise[i];
    }
    if max_abs > BLOWUP_THRESHOLD {
        return Err(Error::BlowUp {
            step: step_index,
            time: (step_index + 1) as f64 * dt,
            max_abs,
        });
    }
    Ok(StepDiagnostics {
        step: step_index,
        time: (step_index + 1) as f64 * dt,
        max_abs_u: max_abs,
        l2: (l2sq * measure).sqrt(),
        mean: mean * measure,
        dissipation: dissipation_value,
        noise_inner: 2.0 * noise_inner * measure,
        noise_quad: noise_quad * measure,
    })
}

/// Conjugate gradients on `(I − dt L_A) x = rhs`; symmetric positive
/// definite for PSD `A`. `buf.next` holds rhs on entry, the solution on
/// exit.
fn solve_semi_implicit(
    sys: &Regularized,
    grid: TorusGrid,
    dt: f64,
    buf: &mut StepBuffers,
) -> Result<()> {
    let cells = grid.cells();
    let cg = buf.cg.as_mut().expect("semi-implicit buffers allocated");
    let rhs = std::mem::take(&mut buf.next);
    let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rhs_norm == 0.0 {
        buf.next = rhs;
        return Ok(());
    }
    let mut x = rhs.clone();
    let apply = |v: &[f64], out: &mut [f64], scratch: &mut [f64]| {
        apply_diffusion(&sys.diffusion, grid, v, scratch);
        for i in 0..cells {
            out[i] = v[i] - dt * scratch[i];
        }
    };
    apply(&x, &mut cg.ap, &mut cg.scratch);
    for i in 0..cells {
        cg.r[i] = rhs[i] - cg.ap[i];
    }
    cg.p.copy_from_slice(&cg.r);
    let mut rs: f64 = cg.r.iter().map(|v| v * v).sum();
    let max_iter = 20 * cells;
    let mut iters = 0;
    while rs.sqrt() > CG_TOLERANCE * rhs_norm {
        if iters >= max_iter {
            return Err(Error::LinearSolve {
                residual: rs.sqrt() / rhs_norm,
                iterations: iters,
            });
        }
        apply(&cg.p, &mut cg.ap, &mut cg.scratch);
        let pap: f64 = cg.p.iter().zip(&cg.ap).map(|(a, b)| a * b).sum();
        let alpha = rs / pap;
        for i in 0..cells {
            x[i] += alpha * cg.p[i];
            cg.r[i] -= alpha * cg.ap[i];
        }
        let rs_new: f64 = cg.r.iter().map(|v| v * v).sum();
        let beta = rs_new / rs;
        for i in 0..cells {
            cg.p[i] = cg.r[i] + beta * cg.p[i];
        }
        rs = rs_new;
        iters += 1;
    }
    buf.next = x;
    Ok(())
}

/// One Euler–Maruyama step on an owned state. The system must already be
/// regularized at `config.epsilon`.
pub fn step(
    u: &ScalarField,
    sys: &Regularized,
    increments: &[f64],
    config: &SolverConfig,
) -> Result<ScalarField> {
    config.validate()?;
    let mut buf = StepBuffers::new(u.grid().cells(), config.scheme == TimeScheme::SemiImplicit);
    step_in_place(sys, config, u.values(), increments, &mut buf, 0)?;
    ScalarField::from_values(u.grid(), buf.next)
}

// ---------------------------------------------------------------------------
// trajectories
// ---------------------------------------------------------------------------

/// A realized solution path: snapshots, the generating configuration, and
/// per-step diagnostics.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    fields: Vec<ScalarField>,
    config: SolverConfig,
    path_seed: u64,
    diagnostics: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn field(&self, snapshot: usize) -> &ScalarField {
        &self.fields[snapshot]
    }

    pub fn time(&self, snapshot: usize) -> f64 {
        self.times[snapshot]
    }

    pub fn last_field(&self) -> &ScalarField {
        self.fields.last().expect("non-empty trajectory")
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn path_seed(&self) -> u64 {
        self.path_seed
    }

    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        &self.diagnostics
    }

    pub fn grid(&self) -> TorusGrid {
        self.fields[0].grid()
    }

    /// `‖u_self(t_s) − u_other(t_s)‖_{L¹}` per snapshot.
    pub fn l1_distance_curve(&self, other: &Trajectory) -> Result<Vec<f64>> {
        if self.len() != other.len() {
            return Err(Error::Dimension {
                what: "snapshot counts",
                expected: self.len(),
                got: other.len(),
            });
        }
        (0..self.len())
            .map(|s| lp_norm(&self.fields[s].sub(&other.fields[s])?, 1.0))
            .collect()
    }

    /// `L¹(0,T; L¹)` distance by trapezoid over snapshot times.
    pub fn l1l1_distance(&self, other: &Trajectory) -> Result<f64> {
        let curve = self.l1_distance_curve(other)?;
        Ok(trapezoid(&self.times, &curve))
    }
}

pub(crate) fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for s in 1..times.len() {
        acc += 0.5 * (values[s] + values[s - 1]) * (times[s] - times[s - 1]);
    }
    acc
}

/// Solution range the tabulated coefficients must cover, estimated from the
/// initial datum, the noise growth constant and the horizon.
pub fn expected_range(u0: &ScalarField, noise: &NoiseModel, t_end: f64) -> (f64, f64) {
    let margin = 2.0 + 2.0 * (noise.growth_constant() * t_end).sqrt() * (1.0 + u0.max_abs());
    (u0.min() - margin, u0.max() + margin)
}

fn cfl_check(
    config: &SolverConfig,
    grid: TorusGrid,
    sys: &Regularized,
    range: (f64, f64),
) -> Result<()> {
    let dx = grid.spacing();
    let max_b = sys.flux.max_abs_deriv(range.0, range.1, 512);
    if max_b > 0.0 {
        let dt_adv = config.cfl_safety * dx / max_b;
        if config.dt > dt_adv {
            return Err(Error::Config(format!(
                "advective CFL violated: dt = {:.3e} exceeds {:.3e} (max|b| = {:.3})",
                config.dt, dt_adv, max_b
            )));
        }
    }
    if config.scheme == TimeScheme::Explicit {
        let lam = sys.diffusion.lambda_max();
        if lam > 0.0 {
            let dt_diff = config.cfl_safety * dx * dx / (2.0 * grid.dim() as f64 * lam);
            if config.dt > dt_diff {
                return Err(Error::Config(format!(
                    "diffusive CFL violated: dt = {:.3e} exceeds {:.3e} (lambda_max = {:.3})",
                    config.dt, dt_diff, lam
                )));
            }
        }
    }
    Ok(())
}

/// Integrates the regularized system along a Wiener path, recording
/// snapshots every `save_every` steps (plus the initial and final states)
/// and per-step diagnostics. Deterministic in `(u0, path, config)`.
pub fn run(
    u0: &ScalarField,
    problem: &Problem,
    path: &WienerPath,
    config: &SolverConfig,
) -> Result<Trajectory> {
    run_observed(u0, problem, path, config, &mut NoOpObserver)
}

/// [`run`] with a step observer for Itô-sum accumulation.
pub fn run_observed(
    u0: &ScalarField,
    problem: &Problem,
    path: &WienerPath,
    config: &SolverConfig,
    observer: &mut dyn StepObserver,
) -> Result<Trajectory> {
    config.validate()?;
    if !u0.is_finite() {
        return Err(Error::NonFinite {
            context: "initial datum",
        });
    }
    let grid = u0.grid();
    let steps = config.steps();
    let range = expected_range(u0, &problem.noise, config.t_end);
    let sys = problem.regularize(grid, config.epsilon, range)?;
    cfl_check(config, grid, &sys, range)?;

    let active = sys.noise.active_modes();
    if path.steps() < steps {
        return Err(Error::Dimension {
            what: "Wiener path steps vs run steps",
            expected: steps,
            got: path.steps(),
        });
    }
    if active > 0 {
        if path.mode_count() < active {
            return Err(Error::Dimension {
                what: "Wiener path modes vs active noise modes",
                expected: active,
                got: path.mode_count(),
            });
        }
        if (path.dt() - config.dt).abs() > 1e-12 * config.dt {
            return Err(Error::Config(format!(
                "path dt = {} does not match solver dt = {}",
                path.dt(),
                config.dt
            )));
        }
    }

    let mut buf = StepBuffers::new(grid.cells(), config.scheme == TimeScheme::SemiImplicit);
    let mut u: Vec<f64> = u0.values().to_vec();
    let mut times = vec![0.0];
    let mut fields = vec![u0.clone()];
    let mut diagnostics = Vec::with_capacity(steps);
    observer.on_snapshot(0.0);

    let empty: [f64; 0] = [];
    for s in 0..steps {
        let incr: &[f64] = if active > 0 {
            &path.step_increments(s)[..active]
        } else {
            &empty
        };
        let diag = step_in_place(&sys, config, &u, incr, &mut buf, s)?;
        observer.on_step(s, s as f64 * config.dt, &u, &buf.noise);
        std::mem::swap(&mut u, &mut buf.next);
        diagnostics.push(diag);
        if (s + 1) % config.save_every == 0 || s + 1 == steps {
            let t = (s + 1) as f64 * config.dt;
            times.push(t);
            fields.push(ScalarField::from_values(grid, u.clone())?);
            observer.on_snapshot(t);
        }
    }

    Ok(Trajectory {
        times,
        fields,
        config: *config,
        path_seed: path.seed(),
        diagnostics,
    })
}

// ---------------------------------------------------------------------------
// experiment drivers
// ---------------------------------------------------------------------------

/// Pairwise distances of a vanishing-viscosity ladder driven by one path.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub epsilons: Vec<f64>,
    /// `L¹(0,T;L¹)` distance between consecutive runs
    pub pair_distances: Vec<f64>,
    /// per pair, the per-snapshot `L¹` distance curve as `(t, value)`
    pub pair_curves: Vec<Vec<(f64, f64)>>,
    /// true when the distances decrease along the ladder
    pub monotone_decreasing: bool,
}

/// Runs the viscous approximation for every ε on the *same* Wiener path and
/// reports `L¹(0,T;L¹)` distances between consecutive trajectories.
/// Increments are counter-based, so branches with different active mode
/// counts automatically share the common modes. Optional per-ε mollification
/// widths realize the smoothed-initial-data pipeline.
pub fn viscosity_sweep(
    u0: &ScalarField,
    problem: &Problem,
    path: &WienerPath,
    epsilons: &[f64],
    base_config: &SolverConfig,
    mollify_widths: Option<&[f64]>,
) -> Result<SweepReport> {
    if epsilons.len() < 2 {
        return Err(Error::Config(
            "viscosity sweep needs at least two epsilon values".into(),
        ));
    }
    for w in epsilons.windows(2) {
        if w[1] > w[0] {
            return Err(Error::Config(
                "viscosity ladder must be non-increasing".into(),
            ));
        }
    }
    for &eps in epsilons {
        if !(0.0 < eps && eps < 1.0) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                value: eps,
                constraint: "ladder entries must lie in (0, 1)",
            });
        }
    }
    if let Some(widths) = mollify_widths {
        if widths.len() != epsilons.len() {
            return Err(Error::Dimension {
                what: "mollify widths vs epsilons",
                expected: epsilons.len(),
                got: widths.len(),
            });
        }
    }
    let trajectories: Vec<Trajectory> = epsilons
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let mut config = *base_config;
            config.epsilon = eps;
            let initial = match mollify_widths {
                Some(widths) => crate::verify::mollify_initial(u0, widths[i])?,
                None => u0.clone(),
            };
            run(&initial, problem, path, &config)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pair_distances = Vec::new();
    let mut pair_curves = Vec::new();
    for pair in trajectories.windows(2) {
        let curve = pair[0].l1_distance_curve(&pair[1])?;
        pair_distances.push(trapezoid(pair[0].times(), &curve));
        pair_curves.push(
            pair[0]
                .times()
                .iter()
                .copied()
                .zip(curve)
                .collect::<Vec<_>>(),
        );
    }
    let monotone_decreasing = pair_distances.windows(2).all(|w| w[1] <= w[0]);
    Ok(SweepReport {
        epsilons: epsilons.to_vec(),
        pair_distances,
        pair_curves,
        monotone_decreasing,
    })
}

/// Contraction data for two initial data evolved under the same path.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    /// `‖u_a(t) − u_b(t)‖_{L¹}` per snapshot
    pub distances: Vec<f64>,
    pub trajectory_a: Trajectory,
    pub trajectory_b: Trajectory,
}

/// Evolves two initial data under the same Wiener path and reports the `L¹`
/// distance at every snapshot. Single-path distances may fluctuate;
/// expectation-level testing lives in the verification harness.
pub fn comparison_run(
    u0_a: &ScalarField,
    u0_b: &ScalarField,
    problem: &Problem,
    path: &WienerPath,
    config: &SolverConfig,
) -> Result<ComparisonReport> {
    crate::torus::check_same_grid(u0_a, u0_b)?;
    let ta = run(u0_a, problem, path, config)?;
    let tb = run(u0_b, problem, path, config)?;
    let distances = ta.l1_distance_curve(&tb)?;
    Ok(ComparisonReport {
        times: ta.times().to_vec(),
        distances,
        trajectory_a: ta,
        trajectory_b: tb,
    })
}
