//! Kinetic measure bookkeeping and weak-form residual behavior on
//! deterministic catalog cases.

use kspde_core::coeffs::{DiffusionSpec, FluxSpec};
use kspde_core::kinetic::{
    accumulate_measures, kinetic_residual, tail_mass, ItoAccumulator, TestBattery, XiGrid,
};
use kspde_core::noise::{sample_path, NoiseModel};
use kspde_core::solver::{
    run, run_observed, FluxScheme, Problem, SolverConfig, TimeScheme, Trajectory,
};
use kspde_core::torus::{gradient, ScalarField, TorusGrid};
use kspde_core::Error;
use std::f64::consts::PI;

fn base_config(epsilon: f64, dt: f64, t_end: f64, save_every: usize) -> SolverConfig {
    SolverConfig {
        epsilon,
        dt,
        t_end,
        scheme: TimeScheme::Explicit,
        flux_scheme: FluxScheme::Upwind,
        save_every,
        cfl_safety: 0.9,
    }
}

fn heat_trajectory(n: usize, epsilon: f64, t_end: f64, save_every: usize) -> (Problem, Trajectory) {
    let grid = TorusGrid::new(1, n).unwrap();
    let u0 = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
    let problem = Problem {
        flux: FluxSpec::zero(1),
        diffusion: DiffusionSpec::identity(grid),
        noise: NoiseModel::zero(),
    };
    let dx = grid.spacing();
    let dt = 0.45 * dx * dx / (1.0 + epsilon);
    let config = base_config(epsilon, dt, t_end, save_every);
    let path = sample_path(1, config.steps(), dt, 1);
    let traj = run(&u0, &problem, &path, &config).unwrap();
    (problem, traj)
}

#[test]
fn constant_trajectory_has_zero_measures() {
    let grid = TorusGrid::new(1, 32).unwrap();
    let u0 = ScalarField::constant(grid, 0.4);
    let problem = Problem {
        flux: FluxSpec::burgers(1),
        diffusion: DiffusionSpec::identity(grid),
        noise: NoiseModel::zero(),
    };
    let config = base_config(0.0, 1e-4, 1e-2, 10);
    let path = sample_path(1, config.steps(), 1e-4, 1);
    let traj = run(&u0, &problem, &path, &config).unwrap();
    let xi = XiGrid::new(-1.0, 1.0, 32).unwrap();
    let (n1, n2) = accumulate_measures(&traj, &problem.diffusion, 0.0, &xi).unwrap();
    assert_eq!(n1.total_mass(), 0.0);
    assert_eq!(n2.total_mass(), 0.0);
}

#[test]
fn hyperbolic_case_has_no_n1_mass() {
    let grid = TorusGrid::new(1, 64).unwrap();
    let u0 = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
    let problem = Problem {
        flux: FluxSpec::burgers(1),
        diffusion: DiffusionSpec::zero(grid),
        noise: NoiseModel::zero(),
    };
    let config = base_config(0.05, 2e-4, 0.05, 25);
    let path = sample_path(2, config.steps(), config.dt, 1);
    let traj = run(&u0, &problem, &path, &config).unwrap();
    let xi = XiGrid::auto_from_trajectory(&traj, 64).unwrap();
    let (n1, n2) = accumulate_measures(&traj, &problem.diffusion, 0.05, &xi).unwrap();
    assert_eq!(n1.total_mass(), 0.0);
    assert!(n2.total_mass() > 0.0);
}

#[test]
fn heat_n1_mass_matches_dirichlet_energy_integral() {
    // analytic oracle: ∫₀ᵀ ‖∇u‖²₂ dt = (1 − e^{−8π²T}) / 4 for u₀ = sin(2πx)
    let t_end = 0.01;
    let (problem, traj) = heat_trajectory(128, 0.0, t_end, 10);
    let xi = XiGrid::auto_from_trajectory(&traj, 128).unwrap();
    let (n1, _) = accumulate_measures(&traj, &problem.diffusion, 0.0, &xi).unwrap();
    let oracle = (1.0 - (-8.0 * PI * PI * t_end).exp()) / 4.0;
    let got = n1.total_mass();
    assert!(
        (got - oracle).abs() <= 0.01 * oracle,
        "n1 mass {got} vs oracle {oracle}"
    );
}

#[test]
fn measure_mass_identity_two_bookkeepings() {
    // total n₁ mass must equal the time-integrated discrete Dirichlet energy
    // (same sums, binned vs direct) to 1e-10 relative
    let (problem, traj) = heat_trajectory(64, 0.0, 0.01, 5);
    let xi = XiGrid::auto_from_trajectory(&traj, 64).unwrap();
    let (n1, _) = accumulate_measures(&traj, &problem.diffusion, 0.0, &xi).unwrap();
    let grid = traj.grid();
    let mut direct = 0.0;
    for s in 0..traj.len() - 1 {
        let dt = traj.time(s + 1) - traj.time(s);
        let grad = gradient(traj.field(s));
        for cell in 0..grid.cells() {
            let g = [grad[0].values()[cell]];
            direct += problem.diffusion.matrix(cell).quad_form(&g) * grid.cell_measure() * dt;
        }
    }
    let binned = n1.total_mass();
    assert!(
        (binned - direct).abs() <= 1e-10 * direct.max(1e-300),
        "binned {binned} vs direct {direct}"
    );
}

#[test]
fn chain_rule_deposits_reproduce_x_space_sums_exactly() {
    // ξ-summing the bin deposits of one (slab, cell) recovers the x-space
    // dissipation bit for bit (one nearest bin per sample)
    let (problem, traj) = heat_trajectory(32, 0.0, 0.005, 4);
    let xi = XiGrid::auto_from_trajectory(&traj, 32).unwrap();
    let (n1, _) = accumulate_measures(&traj, &problem.diffusion, 0.0, &xi).unwrap();
    let grid = traj.grid();
    for slab in 0..n1.slabs() {
        let dt = traj.time(slab + 1) - traj.time(slab);
        let grad = gradient(traj.field(slab));
        for cell in 0..grid.cells() {
            let g = [grad[0].values()[cell]];
            let expect = problem.diffusion.matrix(cell).quad_form(&g) * grid.cell_measure() * dt;
            let binned: f64 = (0..xi.bins()).map(|b| n1.mass_at(slab, cell, b)).sum();
            assert_eq!(binned.to_bits(), expect.to_bits());
        }
    }
}

#[test]
fn n2_mass_scales_linearly_in_epsilon() {
    let t_end = 0.01;
    let mut ratios = Vec::new();
    for eps in [0.1, 0.05, 0.025] {
        let (problem, traj) = heat_trajectory(128, eps, t_end, 10);
        let xi = XiGrid::auto_from_trajectory(&traj, 128).unwrap();
        let (_, n2) = accumulate_measures(&traj, &problem.diffusion, eps, &xi).unwrap();
        ratios.push(n2.total_mass() / eps);
    }
    let max = ratios.iter().fold(0.0f64, |a, b| a.max(*b));
    let min = ratios.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    assert!(
        max / min <= 1.2,
        "n2/eps ratios spread beyond 20%: {ratios:?}"
    );
}

#[test]
fn tail_mass_vanishes_beyond_solution_range() {
    let (problem, traj) = heat_trajectory(64, 0.0, 0.01, 10);
    let xi = XiGrid::auto_from_trajectory(&traj, 64).unwrap();
    let (n1, _) = accumulate_measures(&traj, &problem.diffusion, 0.0, &xi).unwrap();
    let total = n1.total_mass();
    let mut u_max = 0.0f64;
    for s in 0..traj.len() {
        u_max = u_max.max(traj.field(s).max_abs());
    }
    assert_eq!(tail_mass(&n1, u_max + xi.width()), 0.0);
    // summation order differs from total_mass; equality up to rounding
    assert!((tail_mass(&n1, 0.0) - total).abs() <= 1e-12 * total);
    // monotone in the cutoff radius
    let mut prev = total;
    for q in 1..10 {
        let r = q as f64 * 0.12;
        let t = tail_mass(&n1, r);
        assert!(t <= prev + 1e-15);
        prev = t;
    }
}

#[test]
fn out_of_range_xi_grid_is_reported() {
    let (problem, traj) = heat_trajectory(32, 0.0, 0.005, 4);
    let xi = XiGrid::new(-0.1, 0.1, 16).unwrap();
    let err = accumulate_measures(&traj, &problem.diffusion, 0.0, &xi).unwrap_err();
    assert!(matches!(err, Error::XiRange { .. }), "{err}");
}

#[test]
fn constant_solution_residual_is_machine_zero() {
    let grid = TorusGrid::new(1, 32).unwrap();
    let u0 = ScalarField::constant(grid, 0.3);
    let problem = Problem {
        flux: FluxSpec::burgers(1),
        diffusion: DiffusionSpec::identity(grid),
        noise: NoiseModel::zero(),
    };
    let config = base_config(0.0, 1e-4, 1e-2, 10);
    let path = sample_path(1, config.steps(), 1e-4, 1);
    let traj = run(&u0, &problem, &path, &config).unwrap();
    let xi = XiGrid::new(-1.0, 1.0, 64).unwrap();
    let (n1, n2) = accumulate_measures(&traj, &problem.diffusion, 0.0, &xi).unwrap();
    let battery = TestBattery::default_for_range(-1.0, 1.0);
    let report = kinetic_residual(&traj, &problem, (&n1, &n2), &battery, None).unwrap();
    assert!(report.max_abs <= 1e-12, "residual {}", report.max_abs);
}

#[test]
fn empty_battery_is_a_configuration_error() {
    let (problem, traj) = heat_trajectory(32, 0.0, 0.005, 4);
    let xi = XiGrid::auto_from_trajectory(&traj, 32).unwrap();
    let measures = accumulate_measures(&traj, &problem.diffusion, 0.0, &xi).unwrap();
    let err = kinetic_residual(
        &traj,
        &problem,
        (&measures.0, &measures.1),
        &TestBattery::new(vec![]),
        None,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

fn residual_max_for_heat(n: usize, bins: usize, save_every: usize) -> f64 {
    let grid = TorusGrid::new(1, n).unwrap();
    let u0 = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
    let problem = Problem {
        flux: FluxSpec::zero(1),
        diffusion: DiffusionSpec::identity(grid),
        noise: NoiseModel::zero(),
    };
    // dt tied to Δx² so halving n halves everything jointly
    let dt = 0.2 / (n * n) as f64;
    let config = base_config(0.0, dt, 0.01, save_every);
    let path = sample_path(1, config.steps(), dt, 1);
    let traj = run(&u0, &problem, &path, &config).unwrap();
    let xi = XiGrid::new(-1.2, 1.2, bins).unwrap();
    let (n1, n2) = accumulate_measures(&traj, &problem.diffusion, 0.0, &xi).unwrap();
    let battery = TestBattery::default_for_range(-1.1, 1.1);
    kinetic_residual(&traj, &problem, (&n1, &n2), &battery, None)
        .unwrap()
        .max_abs
}

#[test]
fn heat_residual_halves_under_joint_refinement() {
    // halve Δx (n: 64→128), Δt slab (save stride fixed while steps quadruple
    // would over-refine time; keep slab count doubling) and Δξ together
    let coarse = residual_max_for_heat(64, 64, 160);
    let fine = residual_max_for_heat(128, 128, 320);
    let ratio = coarse / fine;
    assert!(
        ratio >= 1.5,
        "residual did not converge: coarse {coarse:.3e}, fine {fine:.3e}, ratio {ratio:.2}"
    );
}

#[test]
fn stochastic_residual_consistency() {
    // with noise active the Itô-accumulated residual must stay small
    // relative to the size of the individual terms it balances
    let n = 64;
    let grid = TorusGrid::new(1, n).unwrap();
    let u0 = ScalarField::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
    let problem = Problem {
        flux: FluxSpec::burgers(1),
        diffusion: DiffusionSpec::identity(grid),
        noise: NoiseModel::bounded_nonlinear(8),
    };
    let eps = 0.1;
    let dx = grid.spacing();
    let dt = 0.4 * dx * dx / (2.0 * 1.1);
    let config = base_config(eps, dt, 0.02, 20);
    let path = sample_path(77, config.steps(), dt, 10);

    // run twice: once bare, once observed; snapshots must agree bit for bit
    let battery = TestBattery::default_for_range(-1.6, 1.6);
    let mut acc = ItoAccumulator::new(&battery, grid);
    let traj = run_observed(&u0, &problem, &path, &config, &mut acc).unwrap();
    let bare = run(&u0, &problem, &path, &config).unwrap();
    for s in 0..traj.len() {
        for (a, b) in traj.field(s).values().iter().zip(bare.field(s).values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
    let series = acc.into_series();
    let xi = XiGrid::new(-1.8, 1.8, 128).unwrap();
    let (n1, n2) = accumulate_measures(&traj, &problem.diffusion, eps, &xi).unwrap();
    let report = kinetic_residual(&traj, &problem, (&n1, &n2), &battery, Some(&series)).unwrap();
    // missing the Itô series is an error for noisy runs
    assert!(kinetic_residual(&traj, &problem, (&n1, &n2), &battery, None).is_err());
    // the residual is far below the f-t term scale (≈ bump mass ≈ 0.4)
    assert!(
        report.max_abs < 0.05,
        "stochastic residual too large: {}",
        report.max_abs
    );
}
