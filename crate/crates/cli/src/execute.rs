//! Experiment orchestration: builds the domain objects from a configuration,
//! runs the requested command, and writes artifact files.
//!
//! Every output file names the config hash and the root seed in its header.
//! Bodies contain no timestamps, so re-running a configuration reproduces
//! them byte for byte. A run directory carries an `INCOMPLETE` marker from
//! start until successful completion; if it survives, outputs are partial.

use crate::config::{Command, ExperimentConfig};
use kspde_core::coeffs::{DiffusionSpec, FluxSpec};
use kspde_core::kinetic::{
    accumulate_measures, kinetic_residual, ItoAccumulator, TestBattery, XiGrid,
};
use kspde_core::noise::{sample_path, NoiseModel};
use kspde_core::solver::{
    comparison_run, run, run_observed, viscosity_sweep, FluxScheme, Problem, SolverConfig,
    TimeScheme, Trajectory,
};
use kspde_core::torus::{write_field, ScalarField, TorusGrid};
use kspde_core::verify::{
    additive_isometry_test, cauchy_test, contraction_test, continuity_test, energy_test,
    regularity_test, EnsembleSpec, Experiment, RunReport, Verdict,
};
use kspde_core::{Error, Result};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Exit status: 0 pass/complete, 1 fail verdict, 2 error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    FailVerdict,
}

impl Outcome {
    pub fn code(&self) -> i32 {
        match self {
            Outcome::Complete => 0,
            Outcome::FailVerdict => 1,
        }
    }
}

pub struct Executor {
    cfg: ExperimentConfig,
    out_dir: PathBuf,
    stamp: String,
}

pub fn build_grid(cfg: &ExperimentConfig) -> Result<TorusGrid> {
    TorusGrid::new(cfg.dim, cfg.n)
}

pub fn build_initial(grid: TorusGrid, name: &str, param: f64) -> Result<ScalarField> {
    let tau = 2.0 * std::f64::consts::PI;
    match name {
        "sin" => Ok(ScalarField::from_fn(grid, |x| param * (tau * x[0]).sin())),
        "cos" => Ok(ScalarField::from_fn(grid, |x| param * (tau * x[0]).cos())),
        "constant" => Ok(ScalarField::constant(grid, param)),
        "zero" => Ok(ScalarField::zeros(grid)),
        "indicator" => Ok(ScalarField::from_fn(grid, |x| {
            if x[0] < 0.5 {
                param
            } else {
                0.0
            }
        })),
        "mix" => Ok(ScalarField::from_fn(grid, |x| {
            param * ((tau * x[0]).sin() + 0.5 * (2.0 * tau * x[0]).cos())
        })),
        other => Err(Error::Config(format!("unknown initial datum '{other}'"))),
    }
}

pub fn build_problem(cfg: &ExperimentConfig, grid: TorusGrid) -> Result<Problem> {
    Ok(Problem {
        flux: FluxSpec::by_name(&cfg.flux, grid.dim(), cfg.flux_param)?,
        diffusion: DiffusionSpec::by_name(&cfg.diffusion, grid, cfg.diffusion_param)?,
        noise: NoiseModel::by_name(&cfg.noise, cfg.noise_modes, cfg.alpha)?,
    })
}

pub fn build_solver_config(cfg: &ExperimentConfig) -> Result<SolverConfig> {
    let scheme = match cfg.scheme.as_str() {
        "explicit" => TimeScheme::Explicit,
        "semi_implicit" => TimeScheme::SemiImplicit,
        other => return Err(Error::Config(format!("unknown scheme '{other}'"))),
    };
    let flux_scheme = match cfg.flux_scheme.as_str() {
        "central" => FluxScheme::Central,
        "upwind" => FluxScheme::Upwind,
        other => return Err(Error::Config(format!("unknown flux scheme '{other}'"))),
    };
    let sc = SolverConfig {
        epsilon: cfg.epsilon,
        dt: cfg.dt,
        t_end: cfg.t_end,
        scheme,
        flux_scheme,
        save_every: cfg.save_every,
        cfl_safety: cfg.cfl_safety,
    };
    sc.validate()?;
    Ok(sc)
}

impl Executor {
    pub fn new(cfg: ExperimentConfig, out_dir: impl Into<PathBuf>) -> Self {
        let out_dir = out_dir.into();
        let stamp = format!("# config {} seed {}", cfg.hash(), cfg.seed);
        Self {
            cfg,
            out_dir,
            stamp,
        }
    }

    fn marker(&self) -> PathBuf {
        self.out_dir.join("INCOMPLETE")
    }

    fn file(&self, name: &str) -> Result<fs::File> {
        Ok(fs::File::create(self.out_dir.join(name))?)
    }

    fn write_config_echo(&self) -> Result<()> {
        let mut f = self.file("config.echo")?;
        writeln!(f, "{}", self.stamp)?;
        writeln!(f, "# defaulted keys: {}", self.cfg.defaulted.join(" "))?;
        write!(f, "{}", self.cfg.emit())?;
        Ok(())
    }

    /// Runs the command, returning the exit outcome. Errors leave the
    /// `INCOMPLETE` marker in place.
    pub fn execute(&self, command: Command) -> Result<Outcome> {
        fs::create_dir_all(&self.out_dir)?;
        fs::write(self.marker(), "run in progress or aborted\n")?;
        self.write_config_echo()?;
        let outcome = match command {
            Command::Solve => self.run_solve(),
            Command::Sweep => self.run_sweep(),
            Command::Compare => self.run_compare(),
            Command::Measure => self.run_measure(),
            Command::Verify => self.run_verify(),
        }?;
        fs::remove_file(self.marker())?;
        Ok(outcome)
    }

    fn sample_run_path(&self, solver: &SolverConfig, modes: usize) -> kspde_core::noise::WienerPath {
        sample_path(self.cfg.seed, solver.steps(), solver.dt, modes.max(1))
    }

    fn needed_modes(&self, problem: &Problem, epsilon: f64) -> Result<usize> {
        Ok(if epsilon > 0.0 {
            problem.noise.truncate(epsilon)?.active_modes()
        } else {
            problem.noise.active_modes()
        })
    }

    fn write_diagnostics(&self, traj: &Trajectory) -> Result<()> {
        let mut f = self.file("diagnostics.csv")?;
        writeln!(f, "{}", self.stamp)?;
        writeln!(f, "step,time,max_abs_u,l2,mean")?;
        for d in traj.diagnostics() {
            writeln!(f, "{},{},{},{},{}", d.step, d.time, d.max_abs_u, d.l2, d.mean)?;
        }
        Ok(())
    }

    fn write_snapshots(&self, traj: &Trajectory) -> Result<()> {
        let mut index = self.file("index.txt")?;
        writeln!(index, "{}", self.stamp)?;
        for s in 0..traj.len() {
            let name = format!("u_{s:06}.dat");
            let mut f = self.file(&name)?;
            write_field(&mut f, traj.field(s), traj.time(s))?;
            writeln!(index, "{} {}", traj.time(s), name)?;
        }
        Ok(())
    }

    fn run_solve(&self) -> Result<Outcome> {
        let grid = build_grid(&self.cfg)?;
        let problem = build_problem(&self.cfg, grid)?;
        let solver = build_solver_config(&self.cfg)?;
        let u0 = build_initial(grid, &self.cfg.u0, self.cfg.u0_param)?;
        let modes = self.needed_modes(&problem, solver.epsilon)?;
        let path = self.sample_run_path(&solver, modes);
        let traj = run(&u0, &problem, &path, &solver)?;
        self.write_snapshots(&traj)?;
        self.write_diagnostics(&traj)?;
        Ok(Outcome::Complete)
    }

    fn run_sweep(&self) -> Result<Outcome> {
        let grid = build_grid(&self.cfg)?;
        let problem = build_problem(&self.cfg, grid)?;
        let solver = build_solver_config(&self.cfg)?;
        let u0 = build_initial(grid, &self.cfg.u0, self.cfg.u0_param)?;
        let ladder = &self.cfg.epsilon_ladder;
        let mut modes = 1;
        for &eps in ladder {
            modes = modes.max(self.needed_modes(&problem, eps)?);
        }
        let path = self.sample_run_path(&solver, modes);
        let widths = if self.cfg.mollify_widths.is_empty() {
            None
        } else {
            Some(self.cfg.mollify_widths.as_slice())
        };
        let report = viscosity_sweep(&u0, &problem, &path, ladder, &solver, widths)?;
        let mut f = self.file("sweep_distances.csv")?;
        writeln!(f, "{}", self.stamp)?;
        writeln!(f, "eps_upper,eps_lower,l1l1_distance")?;
        for (j, d) in report.pair_distances.iter().enumerate() {
            writeln!(f, "{},{},{}", report.epsilons[j], report.epsilons[j + 1], d)?;
        }
        for (j, curve) in report.pair_curves.iter().enumerate() {
            let mut cf = self.file(&format!("sweep_pair_{j}.csv"))?;
            writeln!(cf, "{}", self.stamp)?;
            writeln!(cf, "t value")?;
            for (t, v) in curve {
                writeln!(cf, "{t} {v}")?;
            }
        }
        if !report.monotone_decreasing {
            let mut flag = self.file("NONMONOTONE")?;
            writeln!(flag, "{}", self.stamp)?;
            writeln!(flag, "pair distances did not decrease along the ladder")?;
        }
        Ok(Outcome::Complete)
    }

    fn run_compare(&self) -> Result<Outcome> {
        let grid = build_grid(&self.cfg)?;
        let problem = build_problem(&self.cfg, grid)?;
        let solver = build_solver_config(&self.cfg)?;
        let u0_a = build_initial(grid, &self.cfg.u0, self.cfg.u0_param)?;
        let u0_b = build_initial(grid, &self.cfg.u0_b, self.cfg.u0_b_param)?;
        let modes = self.needed_modes(&problem, solver.epsilon)?;
        let path = self.sample_run_path(&solver, modes);
        let report = comparison_run(&u0_a, &u0_b, &problem, &path, &solver)?;
        let mut f = self.file("distances.csv")?;
        writeln!(f, "{}", self.stamp)?;
        writeln!(f, "time,l1_distance")?;
        for (t, d) in report.times.iter().zip(&report.distances) {
            writeln!(f, "{t},{d}")?;
        }
        Ok(Outcome::Complete)
    }

    fn run_measure(&self) -> Result<Outcome> {
        let grid = build_grid(&self.cfg)?;
        let problem = build_problem(&self.cfg, grid)?;
        let solver = build_solver_config(&self.cfg)?;
        let u0 = build_initial(grid, &self.cfg.u0, self.cfg.u0_param)?;
        let modes = self.needed_modes(&problem, solver.epsilon)?;
        let path = self.sample_run_path(&solver, modes);

        // run once with Itô accumulation against a provisional battery
        // centered on the initial range, then rebuild the ξ-grid
        let range0 = (u0.min() - 1.0, u0.max() + 1.0);
        let battery = TestBattery::default_for_range(range0.0, range0.1);
        let mut acc = ItoAccumulator::new(&battery, grid);
        let traj = run_observed(&u0, &problem, &path, &solver, &mut acc)?;
        let series = acc.into_series();

        let xi = match self.cfg.xi_range {
            Some((lo, hi)) => XiGrid::new(lo, hi, self.cfg.xi_bins)?,
            None => XiGrid::auto_from_trajectory(&traj, self.cfg.xi_bins)?,
        };
        let (n1, n2) = accumulate_measures(&traj, &problem.diffusion, solver.epsilon, &xi)?;
        let mut f1 = self.file("measure_n1.txt")?;
        writeln!(f1, "{}", self.stamp)?;
        n1.dump(&mut f1)?;
        let mut f2 = self.file("measure_n2.txt")?;
        writeln!(f2, "{}", self.stamp)?;
        n2.dump(&mut f2)?;

        let ito = if problem.noise.active_modes() > 0 {
            Some(&series)
        } else {
            None
        };
        let report = kinetic_residual(&traj, &problem, (&n1, &n2), &battery, ito)?;
        let mut rf = self.file("residual.csv")?;
        writeln!(rf, "{}", self.stamp)?;
        writeln!(rf, "phi_id,time,residual")?;
        for (p, id) in report.phi_ids.iter().enumerate() {
            for (s, t) in report.times.iter().enumerate() {
                writeln!(rf, "{},{},{}", id, t, report.residuals[p][s])?;
            }
        }
        self.write_diagnostics(&traj)?;
        Ok(Outcome::Complete)
    }

    fn run_verify(&self) -> Result<Outcome> {
        let grid = build_grid(&self.cfg)?;
        let problem = build_problem(&self.cfg, grid)?;
        let solver = build_solver_config(&self.cfg)?;
        let u0 = build_initial(grid, &self.cfg.u0, self.cfg.u0_param)?;
        let experiment = match self.cfg.experiment.as_str() {
            "contraction" => Experiment::Contraction,
            "energy" => Experiment::Energy,
            "regularity" => Experiment::Regularity,
            "cauchy" => Experiment::Cauchy,
            "continuity" => Experiment::Continuity,
            "isometry" => Experiment::Isometry,
            other => return Err(Error::Config(format!("unknown experiment '{other}'"))),
        };
        let ensemble = EnsembleSpec::new(experiment, self.cfg.paths, self.cfg.seed)?
            .with_confidence(self.cfg.confidence);
        let report = match experiment {
            Experiment::Contraction => {
                let u0_b = build_initial(grid, &self.cfg.u0_b, self.cfg.u0_b_param)?;
                contraction_test(&u0, &u0_b, &problem, &solver, &ensemble)?
            }
            Experiment::Energy => energy_test(
                &u0,
                &problem,
                &solver,
                self.cfg.p,
                &self.cfg.epsilon_ladder,
                &ensemble,
            )?,
            Experiment::Regularity => regularity_test(
                &u0,
                &problem,
                &solver,
                &self.cfg.epsilon_ladder,
                &ensemble,
            )?,
            Experiment::Cauchy => {
                let widths = if self.cfg.mollify_widths.is_empty() {
                    None
                } else {
                    Some(self.cfg.mollify_widths.as_slice())
                };
                cauchy_test(
                    &u0,
                    &problem,
                    &solver,
                    &self.cfg.epsilon_ladder,
                    widths,
                    &ensemble,
                )?
            }
            Experiment::Continuity => continuity_test(
                &u0,
                &problem,
                &solver,
                self.cfg.lambda,
                &self.cfg.epsilon_ladder,
                &ensemble,
            )?,
            Experiment::Isometry => additive_isometry_test(&u0, &solver, &ensemble)?,
        };
        self.write_report(&report)?;
        Ok(match report.verdict {
            Verdict::Pass => Outcome::Complete,
            // an inconclusive verdict is not a certified pass
            Verdict::Fail | Verdict::Inconclusive => Outcome::FailVerdict,
        })
    }

    fn write_report(&self, report: &RunReport) -> Result<()> {
        let mut txt = self.file("report.txt")?;
        writeln!(txt, "{}", self.stamp)?;
        writeln!(txt, "experiment: {}", report.experiment)?;
        writeln!(txt, "verdict: {}", report.verdict.as_str())?;
        writeln!(
            txt,
            "mean: {}  standard_error: {}",
            report.mean, report.standard_error
        )?;
        for (k, v) in &report.metadata {
            writeln!(txt, "{k}: {v}")?;
        }
        for line in &report.details {
            writeln!(txt, "{line}")?;
        }

        let mut csv = self.file("report.csv")?;
        writeln!(csv, "{}", self.stamp)?;
        writeln!(csv, "key,value")?;
        writeln!(csv, "experiment,{}", report.experiment)?;
        writeln!(csv, "verdict,{}", report.verdict.as_str())?;
        writeln!(csv, "mean,{}", report.mean)?;
        writeln!(csv, "standard_error,{}", report.standard_error)?;
        for (k, v) in &report.metadata {
            writeln!(csv, "{k},{v}")?;
        }
        for (i, v) in report.per_path.iter().enumerate() {
            writeln!(csv, "per_path_{i},{v}")?;
        }
        for (name, curve) in &report.curves {
            let safe: String = name
                .chars()
                .map(|c| if c.is_alphanumeric() { c } else { '_' })
                .collect();
            let mut cf = self.file(&format!("curve_{safe}.csv"))?;
            writeln!(cf, "{}", self.stamp)?;
            writeln!(cf, "t value")?;
            for (t, v) in curve {
                writeln!(cf, "{t} {v}")?;
            }
        }
        Ok(())
    }
}

/// Convenience wrapper used by `main` and the test-suite: parse, execute,
/// map errors to exit code 2.
pub fn run_cli(
    command: &str,
    config_text: &str,
    out_dir: &Path,
    seed_override: Option<u64>,
    paths_override: Option<usize>,
) -> i32 {
    let command = match Command::parse(command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let mut cfg = match ExperimentConfig::parse(config_text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    if let Some(seed) = seed_override {
        cfg.seed = seed;
        cfg.defaulted.retain(|k| k != "seed");
    }
    if let Some(paths) = paths_override {
        cfg.paths = paths;
        cfg.defaulted.retain(|k| k != "paths");
    }
    let executor = Executor::new(cfg, out_dir);
    match executor.execute(command) {
        Ok(outcome) => outcome.code(),
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
