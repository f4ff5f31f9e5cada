//! The kinetic layer: kinetic function `f = 1_{u>ξ}`, ξ-binned estimates of
//! the dissipative measures
//!
//! ```text
//! n₁ = (∇u)ᵀ A(x) (∇u) δ_{u=ξ},      n₂ = ε |∇u|² δ_{u=ξ},
//! ```
//!
//! and the weak-form residual of the kinetic identity satisfied by the
//! viscous approximation: for every test function φ(x, ξ),
//!
//! ```text
//! ⟨f(t),φ⟩ − ⟨f₀,φ⟩ − ∫⟨f, b^ε·∇φ⟩ − ∫⟨f, Σ ∂_{x_j}(A_ij ∂_{x_i}φ)⟩
//!   − ε∫⟨f, Δφ⟩ − ∫⟨δ_{u=ξ} Φ^ε dW, φ⟩ − ½∫⟨δ_{u=ξ} G²_ε, ∂_ξφ⟩
//!   + ⟨n₁+n₂, ∂_ξφ⟩ ≈ 0.
//! ```
//!
//! The Itô stochastic term is accumulated step-by-step during the run (it
//! cannot be reconstructed from snapshots); the time integrals use left
//! rectangles over snapshot slabs, matching the measure accumulation.

use crate::error::{Error, Result};
use crate::par;
use crate::solver::{Problem, StepObserver, Trajectory};
use crate::torus::{divergence, gradient, ScalarField, TorusGrid};
use std::io::Write;

/// Discretization of the velocity variable ξ into uniform bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiGrid {
    xi_min: f64,
    xi_max: f64,
    bins: usize,
}

impl XiGrid {
    pub fn new(xi_min: f64, xi_max: f64, bins: usize) -> Result<Self> {
        if bins < 8 {
            return Err(Error::InvalidParameter {
                name: "bins",
                value: bins as f64,
                constraint: "xi grid needs at least 8 bins",
            });
        }
        if xi_max <= xi_min {
            return Err(Error::InvalidParameter {
                name: "xi_max",
                value: xi_max,
                constraint: "xi range must be nonempty",
            });
        }
        Ok(Self {
            xi_min,
            xi_max,
            bins,
        })
    }

    /// Builds the grid from the observed solution range, padded by five bin
    /// widths on each side.
    pub fn auto_from_trajectory(traj: &Trajectory, bins: usize) -> Result<Self> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..traj.len() {
            lo = lo.min(traj.field(s).min());
            hi = hi.max(traj.field(s).max());
        }
        let pad = 5.min(bins.saturating_sub(1) / 2).max(1);
        let interior = bins.saturating_sub(2 * pad).max(1);
        let mut range = hi - lo;
        if range <= 0.0 {
            range = 1.0;
        }
        let width = range / interior as f64;
        Self::new(lo - pad as f64 * width, hi + pad as f64 * width, bins)
    }

    pub fn xi_min(&self) -> f64 {
        self.xi_min
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_max
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn width(&self) -> f64 {
        (self.xi_max - self.xi_min) / self.bins as f64
    }

    pub fn center(&self, j: usize) -> f64 {
        self.xi_min + (j as f64 + 0.5) * self.width()
    }

    /// Index of the bin containing `v`.
    pub fn bin_index(&self, v: f64) -> Result<usize> {
        if v < self.xi_min || v > self.xi_max {
            return Err(Error::XiRange {
                value: v,
                lo: self.xi_min,
                hi: self.xi_max,
            });
        }
        Ok((((v - self.xi_min) / self.width()) as usize).min(self.bins - 1))
    }

    /// Number of bin centers strictly below `v` (clamped to `[0, bins]`).
    pub fn centers_below(&self, v: f64) -> usize {
        let t = (v - self.xi_min) / self.width() + 0.5;
        if t <= 0.0 {
            0
        } else {
            (t.floor() as usize).min(self.bins)
        }
    }
}

/// The kinetic function on the grid: entry `(i, j) = 1` iff `u_i > ξ_j`.
/// Rows are non-increasing in `j`.
pub fn kinetic_function(u: &ScalarField, xi: &XiGrid) -> Vec<u8> {
    let cells = u.grid().cells();
    let mut f = vec![0u8; cells * xi.bins];
    for (i, &ui) in u.values().iter().enumerate() {
        let count = xi.centers_below(ui);
        for j in 0..count {
            f[i * xi.bins + j] = 1;
        }
    }
    f
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    N1,
    N2,
    Total,
}

/// ξ-binned estimate of a kinetic measure over `T^N × [0,T] × R`. Mass is
/// stored per `(slab, cell, bin)`; the density normalization of the spec is
/// `mass = density · Δx^N · Δt_slab · Δξ`.
#[derive(Debug, Clone)]
pub struct KineticMeasureEstimate {
    grid: TorusGrid,
    xi: XiGrid,
    /// snapshot times bounding the slabs (`slabs + 1` entries)
    times: Vec<f64>,
    mass: Vec<f64>,
    kind: MeasureKind,
}

impl KineticMeasureEstimate {
    fn idx(&self, slab: usize, cell: usize, bin: usize) -> usize {
        (slab * self.grid.cells() + cell) * self.xi.bins + bin
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn xi(&self) -> &XiGrid {
        &self.xi
    }

    pub fn slabs(&self) -> usize {
        self.times.len() - 1
    }

    pub fn slab_duration(&self, slab: usize) -> f64 {
        self.times[slab + 1] - self.times[slab]
    }

    pub fn mass_at(&self, slab: usize, cell: usize, bin: usize) -> f64 {
        self.mass[self.idx(slab, cell, bin)]
    }

    /// Density in the normalization `mass = density · Δx^N · Δt_slab · Δξ`.
    pub fn density_at(&self, slab: usize, cell: usize, bin: usize) -> f64 {
        self.mass_at(slab, cell, bin)
            / (self.grid.cell_measure() * self.slab_duration(slab) * self.xi.width())
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Mass deposited at levels `|ξ_j| ≥ R`; non-increasing in `R`.
    pub fn tail_mass(&self, r: f64) -> f64 {
        let per_bin = self.xi_marginal();
        per_bin
            .iter()
            .enumerate()
            .filter(|(bin, _)| self.xi.center(*bin).abs() >= r)
            .map(|(_, m)| m)
            .sum()
    }

    /// Mass per ξ-bin, summed over space and time.
    pub fn xi_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.xi.bins];
        for slab in 0..self.slabs() {
            for cell in 0..self.grid.cells() {
                for (bin, acc) in out.iter_mut().enumerate() {
                    *acc += self.mass_at(slab, cell, bin);
                }
            }
        }
        out
    }

    /// Sparse text dump: header with the grids, then one
    /// `x_index time_slab xi_index mass` line per nonzero entry.
    pub fn dump(&self, w: &mut impl Write) -> Result<()> {
        writeln!(
            w,
            "# kinetic measure {:?}: N {} n {} slabs {} bins {} xi_range {} {}",
            self.kind,
            self.grid.dim(),
            self.grid.points_per_axis(),
            self.slabs(),
            self.xi.bins,
            self.xi.xi_min,
            self.xi.xi_max
        )?;
        for slab in 0..self.slabs() {
            for cell in 0..self.grid.cells() {
                for bin in 0..self.xi.bins {
                    let m = self.mass_at(slab, cell, bin);
                    if m != 0.0 {
                        writeln!(w, "{cell} {slab} {bin} {m}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Bins the dissipation densities of a trajectory into `(n₁, n₂)` estimates:
/// snapshot `r` deposits `(∇u)ᵀA(x)(∇u) · Δx^N · Δt_r` (resp. `ε|∇u|² ...`)
/// into the ξ-bin containing `u(x)`, one nearest bin per sample.
///
/// `diffusion` is the *unperturbed* matrix `A(x)`; the ε part is what `n₂`
/// accounts for. `epsilon` must match the trajectory's configuration.
pub fn accumulate_measures(
    traj: &Trajectory,
    diffusion: &crate::coeffs::DiffusionSpec,
    epsilon: f64,
    xi: &XiGrid,
) -> Result<(KineticMeasureEstimate, KineticMeasureEstimate)> {
    if (epsilon - traj.config().epsilon).abs() > 1e-15 {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            value: epsilon,
            constraint: "must match the trajectory's viscosity",
        });
    }
    let grid = traj.grid();
    if diffusion.grid() != grid {
        return Err(Error::GridMismatch {
            left: format!("diffusion n = {}", diffusion.grid().points_per_axis()),
            right: format!("trajectory n = {}", grid.points_per_axis()),
        });
    }
    let slabs = traj.len() - 1;
    let cells = grid.cells();
    let bins = xi.bins();
    let per_slab: Vec<(Vec<f64>, Vec<f64>)> = par::try_map_ordered(slabs, |r| -> Result<(Vec<f64>, Vec<f64>)> {
        let field = traj.field(r);
        let dt = traj.time(r + 1) - traj.time(r);
        let grad = gradient(field);
        let mut m1 = vec![0.0; cells * bins];
        let mut m2 = vec![0.0; cells * bins];
        let scale = grid.cell_measure() * dt;
        let mut g = [0.0f64; 2];
        for cell in 0..cells {
            for (axis, comp) in grad.iter().enumerate() {
                g[axis] = comp.values()[cell];
            }
            let w1 = diffusion.matrix(cell).quad_form(&g[..grid.dim()]) * scale;
            let w2 = epsilon * g[..grid.dim()].iter().map(|v| v * v).sum::<f64>() * scale;
            let bin = xi.bin_index(field.values()[cell])?;
            m1[cell * bins + bin] += w1;
            m2[cell * bins + bin] += w2;
        }
        Ok((m1, m2))
    })?;
    let mut mass1 = Vec::with_capacity(slabs * cells * bins);
    let mut mass2 = Vec::with_capacity(slabs * cells * bins);
    for (m1, m2) in per_slab {
        mass1.extend(m1);
        mass2.extend(m2);
    }
    let times = traj.times().to_vec();
    Ok((
        KineticMeasureEstimate {
            grid,
            xi: *xi,
            times: times.clone(),
            mass: mass1,
            kind: MeasureKind::N1,
        },
        KineticMeasureEstimate {
            grid,
            xi: *xi,
            times,
            mass: mass2,
            kind: MeasureKind::N2,
        },
    ))
}

/// `tail_mass` as a free function matching the operation vocabulary.
pub fn tail_mass(measure: &KineticMeasureEstimate, r: f64) -> f64 {
    measure.tail_mass(r)
}

// ---------------------------------------------------------------------------
// test battery
// ---------------------------------------------------------------------------

/// Low-frequency x-profile of a test function (varies along the first axis).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XWave {
    One,
    /// `cos(2π m x₁)`
    Cos(usize),
    /// `sin(2π m x₁)`
    Sin(usize),
}

impl XWave {
    pub fn eval(&self, x1: f64) -> f64 {
        let tau = 2.0 * std::f64::consts::PI;
        match self {
            XWave::One => 1.0,
            XWave::Cos(m) => (tau * *m as f64 * x1).cos(),
            XWave::Sin(m) => (tau * *m as f64 * x1).sin(),
        }
    }

    pub fn deriv(&self, x1: f64) -> f64 {
        let tau = 2.0 * std::f64::consts::PI;
        match self {
            XWave::One => 0.0,
            XWave::Cos(m) => -tau * *m as f64 * (tau * *m as f64 * x1).sin(),
            XWave::Sin(m) => tau * *m as f64 * (tau * *m as f64 * x1).cos(),
        }
    }

    pub fn second_deriv(&self, x1: f64) -> f64 {
        let tau = 2.0 * std::f64::consts::PI;
        let w = tau
            * match self {
                XWave::One => 0.0,
                XWave::Cos(m) | XWave::Sin(m) => *m as f64,
            };
        -w * w * self.eval(x1)
    }

    fn id(&self) -> String {
        match self {
            XWave::One => "one".into(),
            XWave::Cos(m) => format!("cos{m}"),
            XWave::Sin(m) => format!("sin{m}"),
        }
    }
}

/// Smooth compactly supported ξ-profile `exp(−1/(1−s²))`, `s = (ξ−c)/w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiBump {
    pub center: f64,
    pub width: f64,
}

impl XiBump {
    pub fn eval(&self, xi: f64) -> f64 {
        let s = (xi - self.center) / self.width;
        if s.abs() < 1.0 {
            (-1.0 / (1.0 - s * s)).exp()
        } else {
            0.0
        }
    }

    pub fn deriv(&self, xi: f64) -> f64 {
        let s = (xi - self.center) / self.width;
        if s.abs() < 1.0 {
            let q = 1.0 - s * s;
            (-1.0 / q).exp() * (-2.0 * s / (q * q)) / self.width
        } else {
            0.0
        }
    }
}

/// One test function `φ(x, ξ) = X(x₁) Ψ(ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub id: String,
    pub wave: XWave,
    pub bump: XiBump,
}

/// A finite battery of smooth test functions with compact ξ-support.
#[derive(Debug, Clone, PartialEq)]
pub struct TestBattery {
    functions: Vec<TestFunction>,
}

impl TestBattery {
    pub fn new(functions: Vec<TestFunction>) -> Self {
        Self { functions }
    }

    /// Default battery: tensor products of `{1, cos 2πx, sin 2πx, cos 4πx}`
    /// with a centered and an offset ξ-bump spanning `[lo, hi]`.
    pub fn default_for_range(lo: f64, hi: f64) -> Self {
        let mid = 0.5 * (lo + hi);
        let half = (0.5 * (hi - lo)).max(1e-6);
        let bumps = [
            (
                "c",
                XiBump {
                    center: mid,
                    width: 0.95 * half,
                },
            ),
            (
                "o",
                XiBump {
                    center: mid + 0.3 * half,
                    width: 0.6 * half,
                },
            ),
        ];
        let waves = [XWave::One, XWave::Cos(1), XWave::Sin(1), XWave::Cos(2)];
        let mut functions = Vec::new();
        for wave in waves {
            for (tag, bump) in &bumps {
                functions.push(TestFunction {
                    id: format!("{}_{}", wave.id(), tag),
                    wave,
                    bump: *bump,
                });
            }
        }
        Self { functions }
    }

    pub fn functions(&self) -> &[TestFunction] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.functions.iter().map(|f| f.id.clone()).collect()
    }
}

// ---------------------------------------------------------------------------
// Itô accumulation during a run
// ---------------------------------------------------------------------------

/// Cumulative Itô sums `Σ_k ∫⟨g_k^ε(·,u) φ(·,u)⟩ dβ_k` per test function,
/// recorded at snapshot times.
#[derive(Debug, Clone, PartialEq)]
pub struct BatterySeries {
    pub phi_ids: Vec<String>,
    pub times: Vec<f64>,
    /// `values[snapshot][phi]`
    pub values: Vec<Vec<f64>>,
}

/// Step observer accumulating the stochastic integral of the kinetic weak
/// form for every battery member.
pub struct ItoAccumulator<'a> {
    battery: &'a TestBattery,
    grid: TorusGrid,
    x_values: Vec<Vec<f64>>,
    running: Vec<f64>,
    series: BatterySeries,
}

impl<'a> ItoAccumulator<'a> {
    pub fn new(battery: &'a TestBattery, grid: TorusGrid) -> Self {
        let x_values = battery
            .functions()
            .iter()
            .map(|f| {
                (0..grid.cells())
                    .map(|i| f.wave.eval(grid.coords(i)[0]))
                    .collect()
            })
            .collect();
        Self {
            battery,
            grid,
            x_values,
            running: vec![0.0; battery.len()],
            series: BatterySeries {
                phi_ids: battery.ids(),
                times: Vec::new(),
                values: Vec::new(),
            },
        }
    }

    pub fn into_series(self) -> BatterySeries {
        self.series
    }
}

impl StepObserver for ItoAccumulator<'_> {
    fn on_step(&mut self, _step: usize, _time: f64, u: &[f64], noise_field: &[f64]) {
        let measure = self.grid.cell_measure();
        for (p, f) in self.battery.functions().iter().enumerate() {
            let xs = &self.x_values[p];
            let mut acc = 0.0;
            for ((ui, nf), x) in u.iter().zip(noise_field).zip(xs) {
                if *nf != 0.0 {
                    acc += nf * x * f.bump.eval(*ui);
                }
            }
            self.running[p] += acc * measure;
        }
    }

    fn on_snapshot(&mut self, time: f64) {
        self.series.times.push(time);
        self.series.values.push(self.running.clone());
    }
}

// ---------------------------------------------------------------------------
// weak-form residual
// ---------------------------------------------------------------------------

/// Residuals of the kinetic identity per test function and snapshot time.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub phi_ids: Vec<String>,
    pub times: Vec<f64>,
    /// `residuals[phi][snapshot]`
    pub residuals: Vec<Vec<f64>>,
    pub max_abs: f64,
    pub l2: f64,
}

/// Prefix sums `P[c] = Δξ Σ_{j<c} vals(ξ_j)` enabling O(cells) contractions
/// `⟨f, X ⊗ Ψ⟩ = Δx^N Σ_i X_i P[#bins below u_i]`.
fn prefix_over_bins(xi: &XiGrid, vals: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut p = vec![0.0; xi.bins() + 1];
    for j in 0..xi.bins() {
        p[j + 1] = p[j] + vals(xi.center(j)) * xi.width();
    }
    p
}

fn f_pair(grid: TorusGrid, xi: &XiGrid, u: &ScalarField, x_part: &[f64], prefix: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (ui, x) in u.values().iter().zip(x_part) {
        acc += x * prefix[xi.centers_below(*ui)];
    }
    acc * grid.cell_measure()
}

/// Evaluates the defect of the kinetic identity for each battery member at
/// every snapshot time. `measures` must come from this trajectory; `ito`
/// carries the run-accumulated stochastic integrals and is required whenever
/// the noise is active.
pub fn kinetic_residual(
    traj: &Trajectory,
    problem: &Problem,
    measures: (&KineticMeasureEstimate, &KineticMeasureEstimate),
    battery: &TestBattery,
    ito: Option<&BatterySeries>,
) -> Result<ResidualReport> {
    if battery.is_empty() {
        return Err(Error::Config("empty test battery".into()));
    }
    let grid = traj.grid();
    let xi = *measures.0.xi();
    let epsilon = traj.config().epsilon;
    if measures.0.slabs() != traj.len() - 1 || measures.1.slabs() != traj.len() - 1 {
        return Err(Error::Config(
            "measures were not accumulated from this trajectory".into(),
        ));
    }

    // regularized coefficients consistent with the run
    let range = crate::solver::expected_range(traj.field(0), &problem.noise, traj.config().t_end);
    let sys = problem.regularize(grid, epsilon, range)?;
    let noise_active = sys.noise().active_modes() > 0;
    if noise_active {
        match ito {
            None => {
                return Err(Error::Config(
                    "stochastic integrals must be accumulated during the run for noisy residuals"
                        .into(),
                ))
            }
            Some(series) => {
                if series.phi_ids != battery.ids() || series.times.len() != traj.len() {
                    return Err(Error::Config(
                        "stochastic integral series does not match the battery/trajectory".into(),
                    ));
                }
            }
        }
    }

    let cells = grid.cells();
    let snapshots = traj.len();
    let phis = battery.len();

    struct PhiData {
        x: Vec<f64>,
        dx: Vec<f64>,
        lap: Vec<f64>,
        a_apply: Vec<f64>,
        p_psi: Vec<f64>,
        p_bpsi: Vec<f64>,
        psi_deriv_bins: Vec<f64>,
    }
    let phi_data: Vec<PhiData> = battery
        .functions()
        .iter()
        .map(|f| {
            let x: Vec<f64> = (0..cells).map(|i| f.wave.eval(grid.coords(i)[0])).collect();
            let dx: Vec<f64> = (0..cells)
                .map(|i| f.wave.deriv(grid.coords(i)[0]))
                .collect();
            let lap: Vec<f64> = (0..cells)
                .map(|i| f.wave.second_deriv(grid.coords(i)[0]))
                .collect();
            // Σ_j ∂_{x_j}(A_{0j}(x) X'(x₁)): central divergence of the
            // gridded vector field A_{0j} X' (φ varies along axis 0 only)
            let comps: Vec<ScalarField> = (0..grid.dim())
                .map(|j| {
                    ScalarField::from_values(
                        grid,
                        (0..cells)
                            .map(|i| problem.diffusion.matrix(i).entry(0, j) * dx[i])
                            .collect(),
                    )
                    .expect("sized by construction")
                })
                .collect();
            let a_apply = divergence(&comps)
                .expect("components share the grid")
                .into_values();
            let p_psi = prefix_over_bins(&xi, |s| f.bump.eval(s));
            let p_bpsi = prefix_over_bins(&xi, |s| sys.flux().derivative(0, s) * f.bump.eval(s));
            let psi_deriv_bins: Vec<f64> =
                (0..xi.bins()).map(|j| f.bump.deriv(xi.center(j))).collect();
            PhiData {
                x,
                dx,
                lap,
                a_apply,
                p_psi,
                p_bpsi,
                psi_deriv_bins,
            }
        })
        .collect();

    let f0_terms: Vec<f64> = phi_data
        .iter()
        .map(|d| f_pair(grid, &xi, traj.field(0), &d.x, &d.p_psi))
        .collect();

    let mut flux_int = vec![0.0; phis];
    let mut a_int = vec![0.0; phis];
    let mut lap_int = vec![0.0; phis];
    let mut g2_int = vec![0.0; phis];
    let mut m_sum = vec![0.0; phis];

    let mut residuals = vec![vec![0.0; snapshots]; phis];
    let mut max_abs = 0.0f64;
    let mut l2 = 0.0f64;

    for s in 0..snapshots {
        let u_s = traj.field(s);
        for (p, d) in phi_data.iter().enumerate() {
            let sto = if noise_active {
                ito.expect("checked above").values[s][p]
            } else {
                0.0
            };
            let r = f_pair(grid, &xi, u_s, &d.x, &d.p_psi)
                - f0_terms[p]
                - flux_int[p]
                - a_int[p]
                - epsilon * lap_int[p]
                - sto
                - 0.5 * g2_int[p]
                + m_sum[p];
            residuals[p][s] = r;
            max_abs = max_abs.max(r.abs());
            l2 += r * r;
        }
        // accumulate slab s → s+1 with the left-endpoint field
        if s + 1 < snapshots {
            let dt = traj.time(s + 1) - traj.time(s);
            for (p, d) in phi_data.iter().enumerate() {
                flux_int[p] += dt * f_pair(grid, &xi, u_s, &d.dx, &d.p_bpsi);
                a_int[p] += dt * f_pair(grid, &xi, u_s, &d.a_apply, &d.p_psi);
                lap_int[p] += dt * f_pair(grid, &xi, u_s, &d.lap, &d.p_psi);
                let f = &battery.functions()[p];
                let mut g2 = 0.0;
                for (cell, ui) in u_s.values().iter().enumerate() {
                    g2 += sys.noise().g_squared_at(cell, *ui) * d.x[cell] * f.bump.deriv(*ui);
                }
                g2_int[p] += dt * g2 * grid.cell_measure();
                let mut dm = 0.0;
                for cell in 0..cells {
                    for bin in 0..xi.bins() {
                        let m =
                            measures.0.mass_at(s, cell, bin) + measures.1.mass_at(s, cell, bin);
                        if m != 0.0 {
                            dm += m * d.x[cell] * d.psi_deriv_bins[bin];
                        }
                    }
                }
                m_sum[p] += dm;
            }
        }
    }

    Ok(ResidualReport {
        phi_ids: battery.ids(),
        times: traj.times().to_vec(),
        residuals,
        max_abs,
        l2: l2.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xi_grid_bins_and_centers() {
        let xi = XiGrid::new(-1.0, 1.0, 16).unwrap();
        assert!((xi.width() - 0.125).abs() < 1e-15);
        assert_eq!(xi.bin_index(-1.0).unwrap(), 0);
        assert_eq!(xi.bin_index(1.0).unwrap(), 15);
        assert!(xi.bin_index(1.01).is_err());
        assert!(XiGrid::new(-1.0, 1.0, 4).is_err());
        assert!(XiGrid::new(1.0, 1.0, 16).is_err());
    }

    #[test]
    fn kinetic_function_of_zero_field_is_sign_split() {
        let grid = TorusGrid::new(1, 8).unwrap();
        let u = ScalarField::zeros(grid);
        let xi = XiGrid::new(-1.0, 1.0, 16).unwrap();
        let f = kinetic_function(&u, &xi);
        for i in 0..8 {
            for j in 0..16 {
                let expect = if xi.center(j) < 0.0 { 1 } else { 0 };
                assert_eq!(f[i * 16 + j], expect, "cell {i} bin {j}");
            }
        }
    }

    #[test]
    fn kinetic_function_rows_monotone_and_layer_cake() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let u = ScalarField::from_fn(grid, |x| (2.0 * std::f64::consts::PI * x[0]).sin());
        let xi = XiGrid::new(-1.5, 1.5, 128).unwrap();
        let f = kinetic_function(&u, &xi);
        for i in 0..32 {
            let row = &f[i * 128..(i + 1) * 128];
            for j in 1..128 {
                assert!(row[j] <= row[j - 1]);
            }
            // layer cake: Δξ Σ_{ξ_j > 0} f(i,j) recovers the positive part
            let pos: f64 = (0..128)
                .filter(|j| xi.center(*j) > 0.0)
                .map(|j| row[j] as f64 * xi.width())
                .sum();
            assert!((pos - u.values()[i].max(0.0)).abs() <= xi.width());
        }
    }

    #[test]
    fn conjugate_function_algebra() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let xi = XiGrid::new(-2.0, 2.0, 64).unwrap();
        // exact grid values: f · (1 − f) = 0 entrywise
        let u = ScalarField::from_fn(grid, |x| if x[0] < 0.5 { 1.0 } else { -1.0 });
        let f = kinetic_function(&u, &xi);
        for v in &f {
            assert_eq!(v * (1 - v), 0);
        }
    }

    #[test]
    fn default_battery_spans_the_range() {
        let battery = TestBattery::default_for_range(-1.0, 1.0);
        assert_eq!(battery.len(), 8);
        for f in battery.functions() {
            assert!(f.bump.center - f.bump.width >= -1.0 - 1e-12);
            assert!(f.bump.center + f.bump.width <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn bump_derivative_matches_finite_difference() {
        let bump = XiBump {
            center: 0.3,
            width: 0.8,
        };
        let h = 1e-6;
        for q in -40..=40 {
            let xi = 0.3 + q as f64 * 0.02;
            let fd = (bump.eval(xi + h) - bump.eval(xi - h)) / (2.0 * h);
            assert!(
                (fd - bump.deriv(xi)).abs() < 1e-6,
                "xi = {xi}: fd {fd} vs {}",
                bump.deriv(xi)
            );
        }
    }
}
