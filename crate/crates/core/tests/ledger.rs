//! Discrete energy bookkeeping of the time stepper and long-horizon
//! stability regression.

use kspde_core::coeffs::{DiffusionSpec, FluxSpec};
use kspde_core::noise::{path_seed, sample_path, NoiseModel};
use kspde_core::solver::{run, FluxScheme, Problem, SolverConfig, TimeScheme};
use kspde_core::torus::{lp_norm, ScalarField, TorusGrid};
use std::f64::consts::PI;

#[test]
fn stochastic_ledger_balances_in_expectation() {
    // per step: Δ‖u‖² = −2dt·diss + 2⟨u, ΦΔW⟩ + ‖ΦΔW‖² + r with
    // E[r] = dt²‖D‖² + flux defect; the Monte-Carlo mean of the first-step
    // residual must sit inside its own confidence band around that size.
    let n = 64;
    let grid = TorusGrid::new(1, n).unwrap();
    let u0 = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
    let problem = Problem {
        flux: FluxSpec::zero(1),
        diffusion: DiffusionSpec::identity(grid),
        noise: NoiseModel::bounded_nonlinear(8),
    };
    let dx = grid.spacing();
    let dt = 0.4 * dx * dx / 2.0;
    let config = SolverConfig {
        epsilon: 0.0,
        dt,
        t_end: dt, // single step
        scheme: TimeScheme::Explicit,
        flux_scheme: FluxScheme::Upwind,
        save_every: 1,
        cfl_safety: 0.9,
    };
    let e0 = lp_norm(&u0, 2.0).unwrap().powi(2);
    let m = 512;
    let mut residuals = Vec::with_capacity(m);
    for path_index in 0..m {
        let path = sample_path(path_seed(99, path_index), 1, dt, 8);
        let traj = run(&u0, &problem, &path, &config).unwrap();
        let d = traj.diagnostics()[0];
        let e1 = d.l2 * d.l2;
        let ledger = -2.0 * dt * d.dissipation + d.noise_inner + d.noise_quad;
        residuals.push(e1 - e0 - ledger);
    }
    let mean = residuals.iter().sum::<f64>() / m as f64;
    let var = residuals
        .iter()
        .map(|r| (r - mean).powi(2))
        .sum::<f64>()
        / (m as f64 - 1.0);
    let se = (var / m as f64).sqrt();
    // deterministic part of the residual: dt²‖L u₀‖², here L = Δ on sin
    // (no flux), so ‖L u₀‖² ≈ (4π²)² / 2 at this resolution
    let det = dt * dt * (4.0 * PI * PI).powi(2) / 2.0;
    assert!(
        (mean - det).abs() <= 4.0 * se + 0.05 * det,
        "ledger mean {mean:.3e} vs deterministic part {det:.3e} (se {se:.3e})"
    );
}

#[test]
fn bounded_noise_runs_stay_bounded_over_many_steps() {
    // desk-scale regression over 1e5 steps: bounded-nonlinear noise plus
    // ε-viscosity must not blow up, and the running max stays modest
    let n = 32;
    let grid = TorusGrid::new(1, n).unwrap();
    let u0 = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
    let problem = Problem {
        flux: FluxSpec::burgers(1),
        diffusion: DiffusionSpec::zero(grid),
        noise: NoiseModel::bounded_nonlinear(8),
    };
    let dt = 2.0e-3;
    let steps = 100_000;
    let config = SolverConfig {
        epsilon: 0.1,
        dt,
        t_end: steps as f64 * dt,
        scheme: TimeScheme::Explicit,
        flux_scheme: FluxScheme::Upwind,
        save_every: 10_000,
        cfl_safety: 0.95,
    };
    let path = sample_path(31_337, steps, dt, 10);
    let traj = run(&u0, &problem, &path, &config).unwrap();
    let worst = traj
        .diagnostics()
        .iter()
        .fold(0.0f64, |acc, d| acc.max(d.max_abs_u));
    assert!(worst.is_finite());
    assert!(worst < 1e4, "running max |u| = {worst} is out of family");
}
