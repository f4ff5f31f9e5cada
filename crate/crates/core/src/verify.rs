//! Monte-Carlo harness turning the solution theory into statistical
//! pass/fail reports: L¹ contraction of two initial data under a shared
//! Wiener path, p-energy uniformity across the viscosity ladder, fractional
//! `W^{σ,1}` regularity with `σ = min{α/(α+1), 1/2}`, Hölder time
//! continuity in `H^{−2}`, and the vanishing-viscosity Cauchy property.
//!
//! Expectations are plain Monte-Carlo means with reported standard errors.
//! Verdicts are three-valued: a report never claims `Pass` when the margin
//! of its inequality is smaller than `confidence × SE` — such runs come back
//! `Inconclusive`. Per-path seeds derive from the root seed by XOR with the
//! path index, and every reduction folds in path order, so reports are
//! identical at any parallel worker count.

use crate::error::{Error, Result};
use crate::noise::{path_seed, sample_path, NoiseModel};
use crate::par;
use crate::solver::{
    comparison_run, run, trapezoid, viscosity_sweep, Problem, SolverConfig, Trajectory,
};
use crate::torus::{
    h_negative_norm, lp_norm, mollified_seminorm, spectral_mode_energies, MollifierKernel,
    ScalarField,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Contraction,
    Energy,
    Regularity,
    Cauchy,
    Continuity,
    Isometry,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Contraction => "contraction",
            Experiment::Energy => "energy",
            Experiment::Regularity => "regularity",
            Experiment::Cauchy => "cauchy",
            Experiment::Continuity => "continuity",
            Experiment::Isometry => "isometry",
        }
    }
}

/// Which paths to average over and how sure a verdict must be.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleSpec {
    pub path_count: usize,
    pub root_seed: u64,
    pub experiment: Experiment,
    pub confidence_multiplier: f64,
}

impl EnsembleSpec {
    pub fn new(experiment: Experiment, path_count: usize, root_seed: u64) -> Result<Self> {
        if path_count < 2 {
            return Err(Error::Config("ensemble needs at least two paths".into()));
        }
        Ok(Self {
            path_count,
            root_seed,
            experiment,
            confidence_multiplier: 3.0,
        })
    }

    pub fn with_confidence(mut self, c: f64) -> Self {
        self.confidence_multiplier = c;
        self
    }

    /// Per-path seeds; XOR with distinct indices keeps them pairwise
    /// distinct.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.path_count)
            .map(|m| path_seed(self.root_seed, m))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Outcome of one verification experiment.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub experiment: String,
    /// the experiment's primary scalar per path
    pub per_path: Vec<f64>,
    pub mean: f64,
    pub standard_error: f64,
    pub verdict: Verdict,
    /// ordered key → value provenance (grid, ε, coefficients, seeds, caps)
    pub metadata: Vec<(String, String)>,
    /// named plot-ready curves of `(t, value)` pairs
    pub curves: Vec<(String, Vec<(f64, f64)>)>,
    /// human-readable detail lines
    pub details: Vec<String>,
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One-sided verdict on a batch of `(violation, se)` pairs: a significant
/// positive violation fails, a nonpositive violation passes, and a positive
/// violation inside the noise band is inconclusive (never a claimed pass).
pub fn one_sided_verdict(
    items: impl IntoIterator<Item = (f64, f64)>,
    confidence: f64,
) -> Verdict {
    let mut verdict = Verdict::Pass;
    for (violation, se) in items {
        if violation > confidence * se {
            return Verdict::Fail;
        }
        if violation > 0.0 {
            verdict = Verdict::Inconclusive;
        }
    }
    verdict
}

/// Weighted least-squares slope of `y` against `x` with per-point standard
/// errors; returns `(slope, se_slope)`.
fn fitted_slope(x: &[f64], y: &[f64], se: &[f64]) -> (f64, f64) {
    let w: Vec<f64> = se
        .iter()
        .map(|s| if *s > 0.0 { 1.0 / (s * s) } else { 1.0 })
        .collect();
    let wsum: f64 = w.iter().sum();
    let xbar = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / wsum;
    let ybar = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / wsum;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..x.len() {
        num += w[i] * (x[i] - xbar) * (y[i] - ybar);
        den += w[i] * (x[i] - xbar) * (x[i] - xbar);
    }
    (num / den, (1.0 / den).sqrt())
}

fn needed_modes(problem: &Problem, epsilon: f64) -> Result<usize> {
    let active = if epsilon > 0.0 {
        problem.noise.truncate(epsilon)?.active_modes()
    } else {
        problem.noise.active_modes()
    };
    Ok(active.max(1))
}

fn needed_modes_for_ladder(problem: &Problem, epsilons: &[f64]) -> Result<usize> {
    let mut modes = 1;
    for &eps in epsilons {
        modes = modes.max(needed_modes(problem, eps)?);
    }
    Ok(modes)
}

fn base_metadata(
    problem: &Problem,
    config: &SolverConfig,
    ensemble: &EnsembleSpec,
) -> Vec<(String, String)> {
    let grid = problem.diffusion.grid();
    vec![
        ("dim".into(), grid.dim().to_string()),
        ("n".into(), grid.points_per_axis().to_string()),
        ("flux".into(), problem.flux.name().to_string()),
        ("diffusion".into(), problem.diffusion.name().to_string()),
        ("noise_kind".into(), format!("{:?}", problem.noise.kind())),
        ("noise_cap".into(), problem.noise.mode_cap().to_string()),
        ("alpha".into(), problem.noise.alpha().to_string()),
        ("epsilon".into(), config.epsilon.to_string()),
        ("dt".into(), config.dt.to_string()),
        ("t_end".into(), config.t_end.to_string()),
        ("paths".into(), ensemble.path_count.to_string()),
        ("root_seed".into(), ensemble.root_seed.to_string()),
        (
            "confidence".into(),
            ensemble.confidence_multiplier.to_string(),
        ),
    ]
}

// ---------------------------------------------------------------------------
// initial-data mollification
// ---------------------------------------------------------------------------

/// Convolution with the unit-mass bump of the given width. Non-expansive in
/// every `L^p` (convex combination of translates) and mean-preserving.
pub fn mollify_initial(u0: &ScalarField, width: f64) -> Result<ScalarField> {
    if width <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "width",
            value: width,
            constraint: "mollification width must be positive",
        });
    }
    MollifierKernel::spatial(width)
        .on_grid(u0.grid())?
        .convolve(u0)
}

// ---------------------------------------------------------------------------
// scheme tolerance calibration
// ---------------------------------------------------------------------------

/// Fits the contraction defect constant of the discrete scheme on the
/// noise-free version of the given setup: `C_s` such that the worst increase
/// of the L¹ distance above its initial value is `C_s (Δx + Δt)`.
pub fn calibrate_scheme_tolerance(
    u0_a: &ScalarField,
    u0_b: &ScalarField,
    problem: &Problem,
    config: &SolverConfig,
) -> Result<f64> {
    let deterministic = Problem {
        flux: problem.flux.clone(),
        diffusion: problem.diffusion.clone(),
        noise: NoiseModel::zero(),
    };
    let path = sample_path(0, config.steps(), config.dt, 1);
    let report = comparison_run(u0_a, u0_b, &deterministic, &path, config)?;
    let d0 = report.distances[0];
    let worst = report
        .distances
        .iter()
        .fold(0.0f64, |acc, d| acc.max(d - d0));
    let dx = u0_a.grid().spacing();
    Ok(worst.max(0.0) / (dx + config.dt))
}

// ---------------------------------------------------------------------------
// contraction
// ---------------------------------------------------------------------------

/// L¹ contraction under a shared path: the Monte-Carlo mean of
/// `‖u_a(t) − u_b(t)‖_{L¹}` must stay below the initial distance up to the
/// calibrated scheme tolerance and statistical noise, at every snapshot.
pub fn contraction_test(
    u0_a: &ScalarField,
    u0_b: &ScalarField,
    problem: &Problem,
    config: &SolverConfig,
    ensemble: &EnsembleSpec,
) -> Result<RunReport> {
    crate::torus::check_same_grid(u0_a, u0_b)?;
    let d0 = lp_norm(&u0_a.sub(u0_b)?, 1.0)?;
    let c_s = calibrate_scheme_tolerance(u0_a, u0_b, problem, config)?;
    let tol = c_s * (u0_a.grid().spacing() + config.dt);
    let modes = needed_modes(problem, config.epsilon)?;
    let steps = config.steps();

    let per_path_data: Vec<(Vec<f64>, Vec<f64>)> =
        par::try_map_ordered(ensemble.path_count, |m| -> Result<(Vec<f64>, Vec<f64>)> {
            let path = sample_path(path_seed(ensemble.root_seed, m), steps, config.dt, modes);
            let report = comparison_run(u0_a, u0_b, problem, &path, config)?;
            Ok((report.times, report.distances))
        })?;
    let times = &per_path_data[0].0;
    let snapshots = times.len();

    let mut mean_curve = Vec::with_capacity(snapshots);
    let mut violations = Vec::with_capacity(snapshots);
    // rounding floor: averaging identical path distances may sit one ulp
    // above the directly computed initial distance
    let floor = 1e-12 * (1.0 + d0);
    for s in 0..snapshots {
        let column: Vec<f64> = per_path_data.iter().map(|(_, d)| d[s]).collect();
        let (mean, se) = mean_and_se(&column);
        mean_curve.push((times[s], mean));
        violations.push((mean - (d0 + tol) - floor, se));
    }
    let per_path: Vec<f64> = per_path_data
        .iter()
        .map(|(_, d)| d.iter().fold(0.0f64, |acc, v| acc.max(v - d0)))
        .collect();
    let (mean, se) = mean_and_se(&per_path);
    let verdict = one_sided_verdict(violations.iter().copied(), ensemble.confidence_multiplier);

    let mut metadata = base_metadata(problem, config, ensemble);
    metadata.push(("initial_distance".into(), format!("{d0}")));
    metadata.push(("scheme_tolerance_constant".into(), format!("{c_s}")));
    metadata.push(("scheme_tolerance".into(), format!("{tol}")));
    Ok(RunReport {
        experiment: "contraction".into(),
        per_path,
        mean,
        standard_error: se,
        verdict,
        metadata,
        curves: vec![("mean_l1_distance".into(), mean_curve)],
        details: vec![format!(
            "worst mean excess over initial distance + tolerance: {:.3e}",
            violations
                .iter()
                .map(|(v, _)| *v)
                .fold(f64::NEG_INFINITY, f64::max)
        )],
    })
}

// ---------------------------------------------------------------------------
// energy
// ---------------------------------------------------------------------------

/// Sup-in-time `L^p` energy across a viscosity ladder: passes when the
/// fitted slope of the per-ε Monte-Carlo means against ε is not
/// significantly positive.
pub fn energy_test(
    u0: &ScalarField,
    problem: &Problem,
    config: &SolverConfig,
    p: u32,
    epsilons: &[f64],
    ensemble: &EnsembleSpec,
) -> Result<RunReport> {
    if !(p == 2 || p == 4 || p == 6) {
        return Err(Error::UnsupportedExponent {
            p: p as f64,
            constraint: "energy exponent must be one of {2, 4, 6}",
        });
    }
    if epsilons.is_empty() {
        return Err(Error::Config("energy ladder is empty".into()));
    }
    let steps = config.steps();
    let modes = needed_modes_for_ladder(problem, epsilons)?;

    let mut per_eps_mean = Vec::new();
    let mut per_eps_se = Vec::new();
    let mut all_paths = Vec::new();
    for &eps in epsilons {
        let mut cfg = *config;
        cfg.epsilon = eps;
        let sups: Vec<f64> = par::try_map_ordered(ensemble.path_count, |m| -> Result<f64> {
            let path = sample_path(path_seed(ensemble.root_seed, m), steps, cfg.dt, modes);
            let traj = run(u0, problem, &path, &cfg)?;
            let mut sup = 0.0f64;
            for s in 0..traj.len() {
                sup = sup.max(lp_norm(traj.field(s), p as f64)?.powi(p as i32));
            }
            Ok(sup)
        })?;
        let (mean, se) = mean_and_se(&sups);
        per_eps_mean.push(mean);
        per_eps_se.push(se);
        all_paths.extend(sups);
    }
    let (slope, slope_se) = if epsilons.len() >= 2 {
        fitted_slope(epsilons, &per_eps_mean, &per_eps_se)
    } else {
        (0.0, 0.0)
    };
    let verdict = one_sided_verdict([(slope, slope_se)], ensemble.confidence_multiplier);
    let u0_energy = lp_norm(u0, p as f64)?.powi(p as i32);
    let fitted_c = per_eps_mean
        .iter()
        .fold(0.0f64, |acc, m| acc.max(m / (1.0 + u0_energy)));

    let (mean, se) = mean_and_se(&all_paths);
    let mut metadata = base_metadata(problem, config, ensemble);
    metadata.push(("p".into(), p.to_string()));
    metadata.push((
        "ladder".into(),
        epsilons
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join(","),
    ));
    metadata.push(("fitted_slope".into(), format!("{slope}")));
    metadata.push(("slope_se".into(), format!("{slope_se}")));
    metadata.push(("fitted_bound_constant".into(), format!("{fitted_c}")));
    Ok(RunReport {
        experiment: "energy".into(),
        per_path: all_paths,
        mean,
        standard_error: se,
        verdict,
        metadata,
        curves: vec![(
            "sup_energy_vs_eps".into(),
            epsilons
                .iter()
                .zip(per_eps_mean.iter())
                .map(|(e, m)| (*e, *m))
                .collect(),
        )],
        details: epsilons
            .iter()
            .zip(per_eps_mean.iter().zip(&per_eps_se))
            .map(|(e, (m, s))| format!("eps {e}: sup-energy mean {m:.6e} (se {s:.2e})"))
            .collect(),
    })
}

// ---------------------------------------------------------------------------
// additive-noise Itô isometry
// ---------------------------------------------------------------------------

/// Additive single-mode oracle: with `B = 0`, `A = I`, `g₁ ≡ 1` and ε = 0,
/// `E‖u(t)‖²₂ = Σ_k |û₀(k)|² e^{−8π²|k|²t} + t`. The ensemble mean must
/// match at every snapshot within the confidence band (two-sided).
pub fn additive_isometry_test(
    u0: &ScalarField,
    config: &SolverConfig,
    ensemble: &EnsembleSpec,
) -> Result<RunReport> {
    if config.epsilon != 0.0 {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            value: config.epsilon,
            constraint: "the isometry oracle is stated for the unregularized system",
        });
    }
    let grid = u0.grid();
    let problem = Problem {
        flux: crate::coeffs::FluxSpec::zero(grid.dim()),
        diffusion: crate::coeffs::DiffusionSpec::identity(grid),
        noise: NoiseModel::additive(1),
    };
    let steps = config.steps();
    let per_path_data: Vec<(Vec<f64>, Vec<f64>)> =
        par::try_map_ordered(ensemble.path_count, |m| -> Result<(Vec<f64>, Vec<f64>)> {
            let path = sample_path(path_seed(ensemble.root_seed, m), steps, config.dt, 1);
            let traj = run(u0, &problem, &path, config)?;
            let energies = (0..traj.len())
                .map(|s| Ok(lp_norm(traj.field(s), 2.0)?.powi(2)))
                .collect::<Result<Vec<f64>>>()?;
            Ok((traj.times().to_vec(), energies))
        })?;
    let times = per_path_data[0].0.clone();

    let modes = spectral_mode_energies(u0);
    let oracle = |t: f64| -> f64 {
        let decay: f64 = modes
            .iter()
            .map(|(k_sq, e)| e * (-8.0 * std::f64::consts::PI.powi(2) * k_sq * t).exp())
            .sum();
        decay + t
    };

    let mut violations = Vec::new();
    let mut curve_mean = Vec::new();
    let mut curve_oracle = Vec::new();
    let mut worst_dev = 0.0f64;
    for (s, t) in times.iter().enumerate() {
        let column: Vec<f64> = per_path_data.iter().map(|(_, e)| e[s]).collect();
        let (mean, se) = mean_and_se(&column);
        let target = oracle(*t);
        curve_mean.push((*t, mean));
        curve_oracle.push((*t, target));
        violations.push(((mean - target).abs(), se));
        if se > 0.0 {
            worst_dev = worst_dev.max((mean - target).abs() / se);
        }
    }
    // two-sided equality check: any deviation beyond the band fails
    let verdict = if violations
        .iter()
        .all(|(dev, se)| *dev <= ensemble.confidence_multiplier * se)
    {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    let per_path: Vec<f64> = per_path_data
        .iter()
        .map(|(_, e)| *e.last().expect("nonempty"))
        .collect();
    let (mean, se) = mean_and_se(&per_path);
    let mut metadata = base_metadata(&problem, config, ensemble);
    metadata.push(("worst_deviation_in_se".into(), format!("{worst_dev:.3}")));
    Ok(RunReport {
        experiment: "isometry".into(),
        per_path,
        mean,
        standard_error: se,
        verdict,
        metadata,
        curves: vec![
            ("mean_l2_squared".into(), curve_mean),
            ("oracle_l2_squared".into(), curve_oracle),
        ],
        details: vec![format!("worst |mean − oracle| in SE units: {worst_dev:.3}")],
    })
}

// ---------------------------------------------------------------------------
// regularity
// ---------------------------------------------------------------------------

/// The regularity exponent `σ = min{α/(α+1), 1/2}`.
pub fn sigma_from_alpha(alpha: f64) -> Result<f64> {
    if alpha <= 0.0 {
        return Err(Error::InvalidNoiseModel(format!(
            "alpha = {alpha} must be positive"
        )));
    }
    Ok((alpha / (alpha + 1.0)).min(0.5))
}

/// Fractional regularity across the viscosity ladder:
/// `E p^σ_ϱ(u^ε(t)) ≤ C_T (1 + p^σ_ϱ(u₀))` with a fitted `C_T`, uniform in
/// ε (no significant growth trend as the ladder descends).
pub fn regularity_test(
    u0: &ScalarField,
    problem: &Problem,
    config: &SolverConfig,
    epsilons: &[f64],
    ensemble: &EnsembleSpec,
) -> Result<RunReport> {
    let sigma = sigma_from_alpha(problem.noise.alpha())?;
    if epsilons.is_empty() {
        return Err(Error::Config("regularity ladder is empty".into()));
    }
    let p0 = mollified_seminorm(u0, sigma)?;
    let steps = config.steps();
    let modes = needed_modes_for_ladder(problem, epsilons)?;

    let mut per_eps_mean = Vec::new();
    let mut per_eps_se = Vec::new();
    let mut curves = Vec::new();
    let mut all_sups = Vec::new();
    for &eps in epsilons {
        let mut cfg = *config;
        cfg.epsilon = eps;
        let path_results: Vec<(f64, Vec<(f64, f64)>)> =
            par::try_map_ordered(ensemble.path_count, |m| -> Result<(f64, Vec<(f64, f64)>)> {
                let path = sample_path(path_seed(ensemble.root_seed, m), steps, cfg.dt, modes);
                let traj = run(u0, problem, &path, &cfg)?;
                // seminorms are O(n²); sample up to 8 snapshots plus the last
                let stride = (traj.len() / 8).max(1);
                let mut sup = 0.0f64;
                let mut series = Vec::new();
                let mut s = 0;
                loop {
                    let v = mollified_seminorm(traj.field(s), sigma)?;
                    sup = sup.max(v);
                    series.push((traj.time(s), v));
                    if s == traj.len() - 1 {
                        break;
                    }
                    s = (s + stride).min(traj.len() - 1);
                }
                Ok((sup, series))
            })?;
        let scalars: Vec<f64> = path_results.iter().map(|(s, _)| *s).collect();
        let (mean, se) = mean_and_se(&scalars);
        per_eps_mean.push(mean);
        per_eps_se.push(se);
        let sampled = &path_results[0].1;
        let mean_curve: Vec<(f64, f64)> = (0..sampled.len())
            .map(|idx| {
                let col: Vec<f64> = path_results.iter().map(|(_, ser)| ser[idx].1).collect();
                (sampled[idx].0, mean_and_se(&col).0)
            })
            .collect();
        curves.push((format!("mean_seminorm_eps_{eps}"), mean_curve));
        all_sups.extend(scalars);
    }
    let (slope, slope_se) = if epsilons.len() >= 2 {
        fitted_slope(epsilons, &per_eps_mean, &per_eps_se)
    } else {
        (0.0, 0.0)
    };
    let verdict = one_sided_verdict([(slope, slope_se)], ensemble.confidence_multiplier);
    let c_t = per_eps_mean
        .iter()
        .fold(0.0f64, |acc, m| acc.max(m / (1.0 + p0)));
    let (mean, se) = mean_and_se(&all_sups);
    let mut metadata = base_metadata(problem, config, ensemble);
    metadata.push(("sigma".into(), sigma.to_string()));
    metadata.push(("initial_seminorm".into(), format!("{p0}")));
    metadata.push(("fitted_c_t".into(), format!("{c_t}")));
    metadata.push(("fitted_slope".into(), format!("{slope}")));
    metadata.push(("slope_se".into(), format!("{slope_se}")));
    Ok(RunReport {
        experiment: "regularity".into(),
        per_path: all_sups,
        mean,
        standard_error: se,
        verdict,
        metadata,
        curves,
        details: epsilons
            .iter()
            .zip(per_eps_mean.iter())
            .map(|(e, m)| format!("eps {e}: sup seminorm mean {m:.6e}"))
            .collect(),
    })
}

// ---------------------------------------------------------------------------
// time continuity
// ---------------------------------------------------------------------------

/// Hölder quotient `max_{s<t} ‖u(t)−u(s)‖_{H^{−2}} / |t−s|^λ` across the
/// ladder; passes when its ensemble mean shows no significant growth trend
/// as ε descends.
pub fn continuity_test(
    u0: &ScalarField,
    problem: &Problem,
    config: &SolverConfig,
    lambda: f64,
    epsilons: &[f64],
    ensemble: &EnsembleSpec,
) -> Result<RunReport> {
    if !(0.0 < lambda && lambda < 0.5) {
        return Err(Error::InvalidExponent {
            value: lambda,
            constraint: "Hölder exponent must lie in (0, 1/2)",
        });
    }
    let interior_snapshots = config.steps() / config.save_every;
    let snapshots_per_unit = interior_snapshots as f64 / config.t_end;
    if snapshots_per_unit < 32.0 || interior_snapshots < 4 {
        return Err(Error::Config(format!(
            "continuity needs at least 32 snapshots per unit time (and no fewer than 4), got {interior_snapshots} over {}",
            config.t_end
        )));
    }
    if epsilons.is_empty() {
        return Err(Error::Config("continuity ladder is empty".into()));
    }
    let steps = config.steps();
    let modes = needed_modes_for_ladder(problem, epsilons)?;

    let mut per_eps_mean = Vec::new();
    let mut per_eps_se = Vec::new();
    let mut all_q = Vec::new();
    for &eps in epsilons {
        let mut cfg = *config;
        cfg.epsilon = eps;
        let quotients: Vec<f64> = par::try_map_ordered(ensemble.path_count, |m| {
            let path = sample_path(path_seed(ensemble.root_seed, m), steps, cfg.dt, modes);
            let traj = run(u0, problem, &path, &cfg)?;
            holder_quotient(&traj, lambda)
        })?;
        let (mean, se) = mean_and_se(&quotients);
        per_eps_mean.push(mean);
        per_eps_se.push(se);
        all_q.extend(quotients);
    }
    let (slope, slope_se) = if epsilons.len() >= 2 {
        fitted_slope(epsilons, &per_eps_mean, &per_eps_se)
    } else {
        (0.0, 0.0)
    };
    let verdict = one_sided_verdict([(slope, slope_se)], ensemble.confidence_multiplier);
    let (mean, se) = mean_and_se(&all_q);
    let mut metadata = base_metadata(problem, config, ensemble);
    metadata.push(("lambda".into(), lambda.to_string()));
    metadata.push(("fitted_slope".into(), format!("{slope}")));
    metadata.push(("slope_se".into(), format!("{slope_se}")));
    Ok(RunReport {
        experiment: "continuity".into(),
        per_path: all_q,
        mean,
        standard_error: se,
        verdict,
        metadata,
        curves: vec![(
            "holder_quotient_vs_eps".into(),
            epsilons
                .iter()
                .zip(per_eps_mean.iter())
                .map(|(e, m)| (*e, *m))
                .collect(),
        )],
        details: vec![],
    })
}

/// Discrete Hölder quotient of a trajectory in `H^{−2}`.
pub fn holder_quotient(traj: &Trajectory, lambda: f64) -> Result<f64> {
    let mut q = 0.0f64;
    for s in 0..traj.len() {
        for t in (s + 1)..traj.len() {
            let diff = traj.field(t).sub(traj.field(s))?;
            let norm = h_negative_norm(&diff, 2.0)?;
            let dt = traj.time(t) - traj.time(s);
            q = q.max(norm / dt.powf(lambda));
        }
    }
    Ok(q)
}

// ---------------------------------------------------------------------------
// vanishing-viscosity Cauchy property
// ---------------------------------------------------------------------------

/// Consecutive `L¹(0,T;L¹)` distances along the viscosity ladder, averaged
/// over shared-path ensembles; passes when the mean distances strictly
/// decrease along the ladder. Optional widths mollify the initial datum per
/// ladder entry (the smoothed-initial-data pipeline).
pub fn cauchy_test(
    u0: &ScalarField,
    problem: &Problem,
    config: &SolverConfig,
    epsilons: &[f64],
    mollify_widths: Option<&[f64]>,
    ensemble: &EnsembleSpec,
) -> Result<RunReport> {
    if epsilons.len() < 2 {
        return Err(Error::Config(
            "cauchy ladder needs at least two epsilon values".into(),
        ));
    }
    let steps = config.steps();
    let modes = needed_modes_for_ladder(problem, epsilons)?;
    let per_path: Vec<Vec<f64>> =
        par::try_map_ordered(ensemble.path_count, |m| -> Result<Vec<f64>> {
            let path = sample_path(path_seed(ensemble.root_seed, m), steps, config.dt, modes);
            let report = viscosity_sweep(u0, problem, &path, epsilons, config, mollify_widths)?;
            Ok(report.pair_distances)
        })?;
    let pairs = epsilons.len() - 1;
    let mut pair_means = Vec::with_capacity(pairs);
    let mut pair_ses = Vec::with_capacity(pairs);
    for j in 0..pairs {
        let column: Vec<f64> = per_path.iter().map(|d| d[j]).collect();
        let (mean, se) = mean_and_se(&column);
        pair_means.push(mean);
        pair_ses.push(se);
    }
    // paired differences: strict decrease wants mean(d_{j+1} − d_j) < 0
    let mut violations = Vec::new();
    for j in 0..pairs.saturating_sub(1) {
        let diffs: Vec<f64> = per_path.iter().map(|d| d[j + 1] - d[j]).collect();
        let (mean, se) = mean_and_se(&diffs);
        violations.push((mean, se));
    }
    let verdict = one_sided_verdict(violations.iter().copied(), ensemble.confidence_multiplier);
    let scalars: Vec<f64> = per_path.iter().map(|d| d[0]).collect();
    let (mean, se) = mean_and_se(&scalars);
    let mut metadata = base_metadata(problem, config, ensemble);
    metadata.push((
        "ladder".into(),
        epsilons
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join(","),
    ));
    if let Some(w) = mollify_widths {
        metadata.push((
            "mollify_widths".into(),
            w.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(","),
        ));
    }
    let monotone = pair_means.windows(2).all(|w| w[1] < w[0]);
    metadata.push(("strictly_decreasing".into(), monotone.to_string()));
    Ok(RunReport {
        experiment: "cauchy".into(),
        per_path: scalars,
        mean,
        standard_error: se,
        verdict,
        metadata,
        curves: vec![(
            "pair_distance_vs_upper_eps".into(),
            epsilons[..pairs]
                .iter()
                .zip(pair_means.iter())
                .map(|(e, m)| (*e, *m))
                .collect(),
        )],
        details: pair_means
            .iter()
            .zip(pair_ses.iter())
            .enumerate()
            .map(|(j, (m, s))| {
                format!(
                    "pair ({}, {}): mean L1L1 distance {m:.6e} (se {s:.2e})",
                    epsilons[j],
                    epsilons[j + 1]
                )
            })
            .collect(),
    })
}

/// Trapezoid time integral of a sampled curve (re-export for report
/// assembly).
pub fn curve_time_integral(times: &[f64], values: &[f64]) -> f64 {
    trapezoid(times, values)
}
