//! Cylindrical Wiener process `W = Σ_k β_k e_k` and the diffusion coefficient
//! families `g_k(x, ξ)`, together with the ε-truncation of §-style
//! regularization (mollify in `(x, ξ)`, multiply by `χ_ε`, keep modes
//! `k ≤ ⌊1/ε⌋`) and numerical verification of the structural conditions
//!
//! ```text
//! (growth)      Σ_k |g_k(x,ξ)|²              ≤ L (1 + |ξ|²)
//! (continuity)  Σ_k |g_k(x,ξ) − g_k(y,ζ)|²   ≤ L (|x−y|² + |ξ−ζ| h(|ξ−ζ|)),
//! ```
//!
//! with `h(δ) = C δ^α`.
//!
//! Wiener increments are counter-based: the increment of mode `k` at step `s`
//! depends only on `(seed, s, k)`, never on how many modes or steps the path
//! was sampled with. Shared-path coupling across different truncation levels
//! is therefore automatic, and parallel workers agree with serial runs bit
//! for bit.

use crate::coeffs::Truncation;
use crate::error::{Error, Result};
use crate::torus::{MollifierKernel, ScalarField, TorusGrid};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use std::sync::LazyLock;

/// Default cap on the number of simulated modes of the cylindrical sum.
pub const DEFAULT_MODE_CAP: usize = 64;

static STD_NORMAL: LazyLock<Normal> = LazyLock::new(|| Normal::new(0.0, 1.0).unwrap());

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn chacha_key(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Standard normal draw addressed purely by `(seed, step, mode)`, via the
/// inverse CDF over a counter-based stream.
pub fn gaussian_at(seed: u64, step: u64, mode: u64) -> f64 {
    let mut rng = ChaCha12Rng::from_seed(chacha_key(seed));
    rng.set_stream(step);
    rng.set_word_pos(mode as u128 * 2);
    let u = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    STD_NORMAL.inverse_cdf(u)
}

/// Sampled Wiener increments `Δβ_k(s) ~ Normal(0, dt)`, step-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    seed: u64,
    dt: f64,
    steps: usize,
    mode_count: usize,
    increments: Vec<f64>,
}

impl WienerPath {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    /// Increments of every mode at one step.
    pub fn step_increments(&self, step: usize) -> &[f64] {
        let k = self.mode_count;
        &self.increments[step * k..(step + 1) * k]
    }

    pub fn increment(&self, step: usize, mode: usize) -> f64 {
        self.increments[step * self.mode_count + mode]
    }

    /// `β_k` accumulated over the first `step_index` steps.
    pub fn beta(&self, step_index: usize, mode: usize) -> f64 {
        (0..step_index).map(|s| self.increment(s, mode)).sum()
    }
}

/// Samples a Wiener path. Increment `(s, k)` depends only on `(seed, s, k)`,
/// so restricting a path to fewer modes equals sampling with fewer modes.
pub fn sample_path(seed: u64, steps: usize, dt: f64, mode_count: usize) -> WienerPath {
    assert!(steps >= 1 && dt > 0.0 && mode_count >= 1);
    let sqrt_dt = dt.sqrt();
    let mut increments = Vec::with_capacity(steps * mode_count);
    for step in 0..steps {
        let mut rng = ChaCha12Rng::from_seed(chacha_key(seed));
        rng.set_stream(step as u64);
        for mode in 0..mode_count {
            rng.set_word_pos(mode as u128 * 2);
            let u = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
            increments.push(sqrt_dt * STD_NORMAL.inverse_cdf(u));
        }
    }
    WienerPath {
        seed,
        dt,
        steps,
        mode_count,
        increments,
    }
}

/// `‖W(t)‖²` in the auxiliary space: `Σ_k β_k(t)² / k²`.
pub fn u0_norm_squared(path: &WienerPath, step_index: usize) -> Result<f64> {
    if step_index > path.steps {
        return Err(Error::IndexOutOfRange {
            index: step_index,
            len: path.steps,
        });
    }
    let mut betas = vec![0.0; path.mode_count];
    for s in 0..step_index {
        for (k, b) in betas.iter_mut().enumerate() {
            *b += path.increment(s, k);
        }
    }
    Ok(betas
        .iter()
        .enumerate()
        .map(|(k, b)| b * b / ((k + 1) as f64).powi(2))
        .sum())
}

/// Derives the per-path seed for worker `path_index` from the root seed.
pub fn path_seed(root_seed: u64, path_index: usize) -> u64 {
    root_seed ^ path_index as u64
}

// ---------------------------------------------------------------------------
// coefficient families
// ---------------------------------------------------------------------------

/// Catalog of coefficient families. All built-in entries satisfy the growth
/// and continuity conditions with `α = 1` and the recorded constants;
/// `QuadraticViolator` deliberately breaks the growth bound (test fodder for
/// the condition checker).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Zero,
    /// `g_k(x, ξ) = a_k φ_k(x)`
    Additive,
    /// `g_k(x, ξ) = a_k ξ`
    LinearMultiplicative,
    /// `g_k(x, ξ) = a_k sin(ξ) φ_k(x)`
    BoundedNonlinear,
    /// `g_1(x, ξ) = ξ²` — violates the growth condition
    QuadraticViolator,
}

/// Trigonometric basis on the torus: `φ_1 ≡ 1`, then alternating
/// `cos(2πm x₁)`, `sin(2πm x₁)` with `m = ⌊k/2⌋`.
fn basis(k: usize, x1: f64) -> f64 {
    if k == 1 {
        return 1.0;
    }
    let m = (k / 2) as f64;
    if k % 2 == 0 {
        (2.0 * std::f64::consts::PI * m * x1).cos()
    } else {
        (2.0 * std::f64::consts::PI * m * x1).sin()
    }
}

/// Lipschitz constant of the basis mode.
fn basis_lipschitz(k: usize) -> f64 {
    if k == 1 {
        0.0
    } else {
        2.0 * std::f64::consts::PI * (k / 2) as f64
    }
}

fn amplitude(k: usize) -> f64 {
    1.0 / k as f64
}

/// Largest slope of the base cutoff χ, found by a dense scan (used when
/// recording continuity constants that must also cover every truncation).
fn max_chi_slope() -> f64 {
    let mut m: f64 = 0.0;
    for q in 0..4000 {
        let t = -1.2 + 2.4 * q as f64 / 4000.0;
        m = m.max(crate::coeffs::chi_deriv(t).abs());
    }
    m
}

#[derive(Debug, Clone)]
pub struct NoiseModel {
    kind: NoiseKind,
    mode_cap: usize,
    /// per-mode spatial mollification factor (1.0 when untruncated)
    mode_damping: Vec<f64>,
    /// mollification factor of the ξ-profile (1.0 when untruncated)
    xi_damping: f64,
    truncation: Option<Truncation>,
    growth_constant: f64,
    continuity_constant: f64,
    alpha: f64,
    h_constant: f64,
}

impl NoiseModel {
    fn catalog(kind: NoiseKind, mode_cap: usize, alpha: f64) -> Result<Self> {
        if alpha <= 0.0 {
            return Err(Error::InvalidNoiseModel(format!(
                "continuity exponent alpha = {alpha} must be positive"
            )));
        }
        if mode_cap == 0 {
            return Err(Error::InvalidNoiseModel("mode cap must be at least 1".into()));
        }
        let sum_a2: f64 = (1..=mode_cap).map(|k| amplitude(k).powi(2)).sum();
        let sum_a2_l2: f64 = (1..=mode_cap)
            .map(|k| (amplitude(k) * basis_lipschitz(k)).powi(2))
            .sum();
        let m_chi = max_chi_slope();
        let (growth, continuity) = match kind {
            NoiseKind::Zero => (1.0, 1.0),
            NoiseKind::QuadraticViolator => (1.0, 1.0), // deliberately wrong
            _ => (
                sum_a2,
                2.0 * (sum_a2 * (1.0 + m_chi * m_chi) + sum_a2_l2),
            ),
        };
        Ok(Self {
            kind,
            mode_cap,
            mode_damping: vec![1.0; mode_cap],
            xi_damping: 1.0,
            truncation: None,
            growth_constant: growth,
            continuity_constant: continuity,
            alpha,
            h_constant: 1.0,
        })
    }

    pub fn zero() -> Self {
        Self::catalog(NoiseKind::Zero, 1, 1.0).unwrap()
    }

    pub fn additive(mode_cap: usize) -> Self {
        Self::catalog(NoiseKind::Additive, mode_cap, 1.0).unwrap()
    }

    pub fn linear_multiplicative(mode_cap: usize) -> Self {
        Self::catalog(NoiseKind::LinearMultiplicative, mode_cap, 1.0).unwrap()
    }

    pub fn bounded_nonlinear(mode_cap: usize) -> Self {
        Self::catalog(NoiseKind::BoundedNonlinear, mode_cap, 1.0).unwrap()
    }

    pub fn quadratic_violator() -> Self {
        Self::catalog(NoiseKind::QuadraticViolator, 1, 1.0).unwrap()
    }

    pub fn by_name(name: &str, mode_cap: usize, alpha: f64) -> Result<Self> {
        match name {
            "zero" => Ok(Self::zero()),
            "additive" => Self::catalog(NoiseKind::Additive, mode_cap, alpha),
            "linear" => Self::catalog(NoiseKind::LinearMultiplicative, mode_cap, alpha),
            "bounded" => Self::catalog(NoiseKind::BoundedNonlinear, mode_cap, alpha),
            other => Err(Error::Config(format!("unknown noise family '{other}'"))),
        }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn mode_cap(&self) -> usize {
        self.mode_cap
    }

    /// Number of modes that actually enter sums: `min(⌊1/ε⌋, cap)` once
    /// truncated, the cap otherwise.
    pub fn active_modes(&self) -> usize {
        match (self.kind, &self.truncation) {
            (NoiseKind::Zero, _) => 0,
            (_, Some(t)) => ((1.0 / t.epsilon()).floor() as usize).min(self.mode_cap),
            (_, None) => self.mode_cap,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth_constant
    }

    pub fn continuity_constant(&self) -> f64 {
        self.continuity_constant
    }

    pub fn h_constant(&self) -> f64 {
        self.h_constant
    }

    pub fn is_truncated(&self) -> bool {
        self.truncation.is_some()
    }

    /// The ξ profile common to all modes (cutoff included).
    fn xi_factor(&self, xi: f64) -> f64 {
        let cut = self.truncation.as_ref().map_or(1.0, |t| t.cutoff(xi));
        match self.kind {
            NoiseKind::Zero => 0.0,
            NoiseKind::Additive => cut,
            NoiseKind::LinearMultiplicative => xi * cut,
            NoiseKind::BoundedNonlinear => self.xi_damping * xi.sin() * cut,
            NoiseKind::QuadraticViolator => xi * xi * cut,
        }
    }

    /// Spatial profile of mode `k` (1-based), damping and amplitude included.
    fn x_factor(&self, k: usize, x1: f64) -> f64 {
        let shape = match self.kind {
            NoiseKind::LinearMultiplicative | NoiseKind::QuadraticViolator => 1.0,
            _ => basis(k, x1),
        };
        amplitude(k) * self.mode_damping[k - 1] * shape
    }

    /// `g_k(x, ξ)`, `k` 1-based and at most [`Self::active_modes`].
    pub fn coefficient(&self, k: usize, x1: f64, xi: f64) -> f64 {
        if k > self.active_modes() {
            return 0.0;
        }
        self.x_factor(k, x1) * self.xi_factor(xi)
    }

    /// `G²(x, ξ) = Σ_k g_k(x, ξ)²`.
    pub fn g_squared(&self, x1: f64, xi: f64) -> f64 {
        let f = self.xi_factor(xi);
        (1..=self.active_modes())
            .map(|k| (self.x_factor(k, x1) * f).powi(2))
            .sum()
    }

    /// Mollifies in `(x, ξ)`, multiplies by `χ_ε` and drops modes beyond
    /// `⌊1/ε⌋` (capped). Growth and continuity hold with the parent's
    /// constants; the ξ-Lipschitz constant becomes finite and is exposed by
    /// [`Self::lipschitz_xi_constant`].
    pub fn truncate(&self, epsilon: f64) -> Result<NoiseModel> {
        let trunc = Truncation::new(epsilon)?;
        let kernel = MollifierKernel::scalar(epsilon);
        let nodes = kernel.scalar_samples(epsilon / 16.0)?;
        let h = epsilon / 16.0;
        // spatial мollification damps mode m by ∫ϱ_ε(z) cos(2π m z) dz;
        // ξ-mollification damps sin(ξ) by ∫ψ_ε(s) cos(s) ds and leaves
        // constants and linear profiles untouched (symmetric kernel).
        let mode_damping: Vec<f64> = (1..=self.mode_cap)
            .map(|k| match self.kind {
                NoiseKind::LinearMultiplicative | NoiseKind::QuadraticViolator => 1.0,
                _ => {
                    let m = if k == 1 { 0.0 } else { (k / 2) as f64 };
                    nodes
                        .iter()
                        .map(|(s, w)| (2.0 * std::f64::consts::PI * m * s).cos() * w * h)
                        .sum()
                }
            })
            .collect();
        let xi_damping = match self.kind {
            NoiseKind::BoundedNonlinear => nodes.iter().map(|(s, w)| s.cos() * w * h).sum(),
            _ => 1.0,
        };
        Ok(NoiseModel {
            kind: self.kind,
            mode_cap: self.mode_cap,
            mode_damping,
            xi_damping,
            truncation: Some(trunc),
            growth_constant: self.growth_constant,
            continuity_constant: self.continuity_constant,
            alpha: self.alpha,
            h_constant: self.h_constant,
        })
    }

    /// Fitted constant of the global ξ-Lipschitz bound
    /// `Σ_k |g_k(x,ξ) − g_k(x,ζ)|² ≤ L_ε |ξ−ζ|²`, by dense slope scan.
    pub fn lipschitz_xi_constant(&self) -> f64 {
        let r = self
            .truncation
            .as_ref()
            .map_or(20.0, |t| t.support() * 1.2);
        let samples = 4000;
        let mut max_slope: f64 = 0.0;
        let step = 2.0 * r / samples as f64;
        for q in 0..samples {
            let xi = -r + q as f64 * step;
            let slope = (self.xi_factor(xi + step) - self.xi_factor(xi)) / step;
            max_slope = max_slope.max(slope.abs());
        }
        let sum_x2: f64 = (1..=self.active_modes())
            .map(|k| (amplitude(k) * self.mode_damping[k - 1]).powi(2))
            .sum();
        sum_x2 * max_slope * max_slope
    }

    /// Binds the model to a grid, precomputing per-cell mode tables so the
    /// solver can evaluate `Φ ΔW` without trigonometry in the hot loop.
    pub fn bind(&self, grid: TorusGrid) -> BoundNoise {
        let active = self.active_modes();
        let cells = grid.cells();
        let mut table = vec![0.0; active * cells];
        let mut sq = vec![0.0; cells];
        for cell in 0..cells {
            let x1 = grid.coords(cell)[0];
            let mut s2 = 0.0;
            for k in 1..=active {
                let v = self.x_factor(k, x1);
                table[(k - 1) * cells + cell] = v;
                s2 += v * v;
            }
            sq[cell] = s2;
        }
        BoundNoise {
            model: self.clone(),
            grid,
            table,
            sq,
            active,
        }
    }
}

/// `Φ(u) ΔW` pointwise: `Σ_k g_k(x, u(x)) Δβ_k`.
pub fn apply_noise(
    model: &NoiseModel,
    u: &ScalarField,
    increments: &[f64],
) -> Result<ScalarField> {
    if increments.len() != model.active_modes() {
        return Err(Error::Dimension {
            what: "noise increments vs active modes",
            expected: model.active_modes(),
            got: increments.len(),
        });
    }
    Ok(model.bind(u.grid()).apply(u, increments))
}

/// A noise model with grid-bound mode tables.
pub struct BoundNoise {
    model: NoiseModel,
    grid: TorusGrid,
    /// `x_factor(k, x_i)`, mode-major: `table[(k-1)*cells + i]`
    table: Vec<f64>,
    /// `Σ_k x_factor(k, x_i)²`
    sq: Vec<f64>,
    active: usize,
}

impl BoundNoise {
    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    pub fn active_modes(&self) -> usize {
        self.active
    }

    /// `η(x) = Σ_k x_factor_k(x) Δβ_k`, the spatial part of `Φ ΔW`.
    pub fn increment_field(&self, increments: &[f64]) -> Vec<f64> {
        let cells = self.grid.cells();
        let mut eta = vec![0.0; cells];
        for (k, &db) in increments.iter().enumerate().take(self.active) {
            if db == 0.0 {
                continue;
            }
            let row = &self.table[k * cells..(k + 1) * cells];
            for (e, t) in eta.iter_mut().zip(row) {
                *e += t * db;
            }
        }
        eta
    }

    pub fn apply(&self, u: &ScalarField, increments: &[f64]) -> ScalarField {
        let mut out = vec![0.0; self.grid.cells()];
        self.apply_into(u.values(), increments, &mut out);
        ScalarField::from_values(self.grid, out).expect("grid-consistent by construction")
    }

    /// `Φ ΔW` written into a caller-owned buffer (solver hot loop).
    pub fn apply_into(&self, u: &[f64], increments: &[f64], out: &mut [f64]) {
        let cells = self.grid.cells();
        out.fill(0.0);
        for (k, &db) in increments.iter().enumerate().take(self.active) {
            if db == 0.0 {
                continue;
            }
            let row = &self.table[k * cells..(k + 1) * cells];
            for (o, t) in out.iter_mut().zip(row) {
                *o += t * db;
            }
        }
        for (o, ui) in out.iter_mut().zip(u) {
            *o *= self.model.xi_factor(*ui);
        }
    }

    /// `G²(x_i, ξ)`.
    pub fn g_squared_at(&self, cell: usize, xi: f64) -> f64 {
        let f = self.model.xi_factor(xi);
        self.sq[cell] * f * f
    }
}

// ---------------------------------------------------------------------------
// condition verification
// ---------------------------------------------------------------------------

/// Outcome of sampling the growth/continuity conditions. Ratios are
/// `lhs / rhs`; a model passes when both stay `≤ 1 + 1e-9`.
#[derive(Debug, Clone)]
pub struct ConditionsReport {
    pub growth_ratio_max: f64,
    pub continuity_ratio_max: f64,
    pub growth_worst_xi: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Samples the two conditions over a deterministic lattice of points and
/// pairs. Failures are reported, never raised.
pub fn verify_conditions(model: &NoiseModel, sample_size: usize) -> ConditionsReport {
    let n = sample_size.max(8);
    let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    let xi_range = model
        .truncation
        .as_ref()
        .map_or(12.0, |t| t.support() * 1.2);
    let xis: Vec<f64> = (0..n)
        .map(|i| -xi_range + 2.0 * xi_range * i as f64 / (n - 1) as f64)
        .collect();

    let mut growth_max = 0.0f64;
    let mut growth_worst_xi = 0.0;
    for &x in &xs {
        for &xi in &xis {
            let lhs = model.g_squared(x, xi);
            let rhs = model.growth_constant * (1.0 + xi * xi);
            let ratio = lhs / rhs;
            if ratio > growth_max {
                growth_max = ratio;
                growth_worst_xi = xi;
            }
        }
    }

    // golden-ratio strides decorrelate the pair lattice from the point lattice
    let mut continuity_max = 0.0f64;
    let stride = 0.618_033_988_749_894_8;
    for i in 0..n {
        let x = xs[i];
        let y = (x + stride * (i as f64 + 1.0) / n as f64).fract();
        for j in 0..n {
            let xi = xis[j];
            let zeta = xis[(j * 7 + i) % n];
            let mut lhs = 0.0;
            for k in 1..=model.active_modes() {
                lhs += (model.coefficient(k, x, xi) - model.coefficient(k, y, zeta)).powi(2);
            }
            let dxy = crate::torus::TorusGrid::axis_distance(x, y);
            let dxz = (xi - zeta).abs();
            let rhs = model.continuity_constant
                * (dxy * dxy + dxz * model.h_constant * dxz.powf(model.alpha));
            if rhs > 0.0 {
                continuity_max = continuity_max.max(lhs / rhs);
            } else if lhs > 0.0 {
                continuity_max = f64::INFINITY;
            }
        }
    }

    ConditionsReport {
        growth_ratio_max: growth_max,
        continuity_ratio_max: continuity_max,
        growth_worst_xi,
        samples: n * n,
        pass: growth_max <= 1.0 + 1e-9 && continuity_max <= 1.0 + 1e-9,
    }
}

/// `truncate` as a free function matching the operation name used elsewhere.
pub fn truncate_coefficients(model: &NoiseModel, epsilon: f64) -> Result<NoiseModel> {
    model.truncate(epsilon)
}
