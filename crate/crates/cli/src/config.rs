//! Flat `key = value` experiment configuration with strict validation.
//!
//! Unknown keys, type mismatches and constraint violations are rejected with
//! the offending line number. Every key has a default; the set of keys that
//! were defaulted (not present in the file) is tracked so output metadata
//! can echo full provenance.

use kspde_core::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Sweep,
    Compare,
    Measure,
    Verify,
}

impl Command {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "solve" => Ok(Command::Solve),
            "sweep" => Ok(Command::Sweep),
            "compare" => Ok(Command::Compare),
            "measure" => Ok(Command::Measure),
            "verify" => Ok(Command::Verify),
            other => Err(Error::Config(format!("unknown command '{other}'"))),
        }
    }
}

/// All experiment knobs, fully defaulted.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub n: usize,
    pub flux: String,
    pub flux_param: f64,
    pub diffusion: String,
    pub diffusion_param: f64,
    pub noise: String,
    pub noise_modes: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub epsilon_ladder: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: String,
    pub flux_scheme: String,
    pub cfl_safety: f64,
    pub save_every: usize,
    pub paths: usize,
    pub seed: u64,
    pub confidence: f64,
    pub xi_bins: usize,
    /// `None` means auto-build from the trajectory
    pub xi_range: Option<(f64, f64)>,
    pub u0: String,
    pub u0_param: f64,
    pub u0_b: String,
    pub u0_b_param: f64,
    pub experiment: String,
    pub p: u32,
    pub lambda: f64,
    pub mollify_widths: Vec<f64>,
    pub out: String,
    /// keys that were not present in the parsed file
    pub defaulted: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            n: 128,
            flux: "burgers".into(),
            flux_param: 1.0,
            diffusion: "identity".into(),
            diffusion_param: 1.0,
            noise: "bounded".into(),
            noise_modes: 64,
            alpha: 1.0,
            epsilon: 0.05,
            epsilon_ladder: vec![0.1, 0.05, 0.025],
            dt: 1e-4,
            t_end: 0.1,
            scheme: "explicit".into(),
            flux_scheme: "upwind".into(),
            cfl_safety: 0.9,
            save_every: 10,
            paths: 16,
            seed: 0,
            confidence: 3.0,
            xi_bins: 128,
            xi_range: None,
            u0: "sin".into(),
            u0_param: 1.0,
            u0_b: "zero".into(),
            u0_b_param: 0.0,
            experiment: "contraction".into(),
            p: 2,
            lambda: 0.25,
            mollify_widths: vec![],
            out: "out".into(),
            defaulted: Vec::new(),
        }
    }
}

/// Every known key name, in emission order.
pub const KEYS: &[&str] = &[
    "dim",
    "n",
    "flux",
    "flux_param",
    "diffusion",
    "diffusion_param",
    "noise",
    "noise_modes",
    "alpha",
    "epsilon",
    "epsilon_ladder",
    "dt",
    "t_end",
    "scheme",
    "flux_scheme",
    "cfl_safety",
    "save_every",
    "paths",
    "seed",
    "confidence",
    "xi_bins",
    "xi_range",
    "u0",
    "u0_param",
    "u0_b",
    "u0_b_param",
    "experiment",
    "p",
    "lambda",
    "mollify_widths",
    "out",
];

impl PartialEq for ExperimentConfig {
    fn eq(&self, other: &Self) -> bool {
        // provenance bookkeeping is not part of config identity
        self.emit() == other.emit()
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| parse_err(line, format!("key '{key}': cannot parse '{raw}'")))
}

fn parse_list(line: usize, key: &str, raw: &str) -> Result<Vec<f64>> {
    if raw == "none" || raw.is_empty() {
        return Ok(vec![]);
    }
    raw.split(',')
        .map(|tok| parse_num(line, key, tok.trim()))
        .collect()
}

impl ExperimentConfig {
    /// Parses `key = value` lines (`#` comments, blank lines allowed),
    /// applies defaults for missing keys and validates constraints.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| parse_err(line, format!("expected 'key = value', got '{content}'")))?;
            let key = key.trim();
            let value = value.trim();
            if !KEYS.contains(&key) {
                return Err(parse_err(line, format!("unknown key '{key}'")));
            }
            if seen.contains(&key) {
                return Err(parse_err(line, format!("duplicate key '{key}'")));
            }
            match key {
                "dim" => cfg.dim = parse_num(line, key, value)?,
                "n" => cfg.n = parse_num(line, key, value)?,
                "flux" => cfg.flux = value.to_string(),
                "flux_param" => cfg.flux_param = parse_num(line, key, value)?,
                "diffusion" => cfg.diffusion = value.to_string(),
                "diffusion_param" => cfg.diffusion_param = parse_num(line, key, value)?,
                "noise" => cfg.noise = value.to_string(),
                "noise_modes" => cfg.noise_modes = parse_num(line, key, value)?,
                "alpha" => cfg.alpha = parse_num(line, key, value)?,
                "epsilon" => {
                    cfg.epsilon = parse_num(line, key, value)?;
                    if !(0.0..1.0).contains(&cfg.epsilon) {
                        return Err(parse_err(
                            line,
                            format!(
                                "epsilon = {} violates the viscosity constraint: the regularized problem requires epsilon in [0, 1)",
                                cfg.epsilon
                            ),
                        ));
                    }
                }
                "epsilon_ladder" => {
                    cfg.epsilon_ladder = parse_list(line, key, value)?;
                    for e in &cfg.epsilon_ladder {
                        if !(0.0 < *e && *e < 1.0) {
                            return Err(parse_err(
                                line,
                                format!("ladder entry {e} outside (0, 1)"),
                            ));
                        }
                    }
                }
                "dt" => {
                    cfg.dt = parse_num(line, key, value)?;
                    if cfg.dt <= 0.0 {
                        return Err(parse_err(line, "dt must be positive"));
                    }
                }
                "t_end" => {
                    cfg.t_end = parse_num(line, key, value)?;
                    if cfg.t_end <= 0.0 {
                        return Err(parse_err(line, "t_end must be positive"));
                    }
                }
                "scheme" => {
                    if value != "explicit" && value != "semi_implicit" {
                        return Err(parse_err(line, format!("unknown scheme '{value}'")));
                    }
                    cfg.scheme = value.to_string();
                }
                "flux_scheme" => {
                    if value != "central" && value != "upwind" {
                        return Err(parse_err(line, format!("unknown flux scheme '{value}'")));
                    }
                    cfg.flux_scheme = value.to_string();
                }
                "cfl_safety" => {
                    cfg.cfl_safety = parse_num(line, key, value)?;
                    if !(0.0 < cfg.cfl_safety && cfg.cfl_safety <= 1.0) {
                        return Err(parse_err(line, "cfl_safety must lie in (0, 1]"));
                    }
                }
                "save_every" => {
                    cfg.save_every = parse_num(line, key, value)?;
                    if cfg.save_every == 0 {
                        return Err(parse_err(line, "save_every must be at least 1"));
                    }
                }
                "paths" => cfg.paths = parse_num(line, key, value)?,
                "seed" => cfg.seed = parse_num(line, key, value)?,
                "confidence" => cfg.confidence = parse_num(line, key, value)?,
                "xi_bins" => cfg.xi_bins = parse_num(line, key, value)?,
                "xi_range" => {
                    if value == "auto" {
                        cfg.xi_range = None;
                    } else {
                        let list = parse_list(line, key, value)?;
                        if list.len() != 2 || list[1] <= list[0] {
                            return Err(parse_err(
                                line,
                                "xi_range must be 'auto' or 'lo,hi' with lo < hi",
                            ));
                        }
                        cfg.xi_range = Some((list[0], list[1]));
                    }
                }
                "u0" => cfg.u0 = value.to_string(),
                "u0_param" => cfg.u0_param = parse_num(line, key, value)?,
                "u0_b" => cfg.u0_b = value.to_string(),
                "u0_b_param" => cfg.u0_b_param = parse_num(line, key, value)?,
                "experiment" => cfg.experiment = value.to_string(),
                "p" => cfg.p = parse_num(line, key, value)?,
                "lambda" => cfg.lambda = parse_num(line, key, value)?,
                "mollify_widths" => cfg.mollify_widths = parse_list(line, key, value)?,
                "out" => cfg.out = value.to_string(),
                _ => unreachable!("key membership checked above"),
            }
            seen.push(KEYS.iter().find(|k| **k == key).expect("known key"));
        }
        cfg.defaulted = KEYS
            .iter()
            .filter(|k| !seen.contains(k))
            .map(|k| k.to_string())
            .collect();
        Ok(cfg)
    }

    /// Canonical emission: every key explicit, one per line, fixed order.
    pub fn emit(&self) -> String {
        let xi_range = match self.xi_range {
            None => "auto".to_string(),
            Some((lo, hi)) => format!("{lo},{hi}"),
        };
        let list = |v: &[f64]| -> String {
            if v.is_empty() {
                "none".to_string()
            } else {
                v.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            }
        };
        let mut out = String::new();
        for key in KEYS {
            let value = match *key {
                "dim" => self.dim.to_string(),
                "n" => self.n.to_string(),
                "flux" => self.flux.clone(),
                "flux_param" => self.flux_param.to_string(),
                "diffusion" => self.diffusion.clone(),
                "diffusion_param" => self.diffusion_param.to_string(),
                "noise" => self.noise.clone(),
                "noise_modes" => self.noise_modes.to_string(),
                "alpha" => self.alpha.to_string(),
                "epsilon" => self.epsilon.to_string(),
                "epsilon_ladder" => list(&self.epsilon_ladder),
                "dt" => self.dt.to_string(),
                "t_end" => self.t_end.to_string(),
                "scheme" => self.scheme.clone(),
                "flux_scheme" => self.flux_scheme.clone(),
                "cfl_safety" => self.cfl_safety.to_string(),
                "save_every" => self.save_every.to_string(),
                "paths" => self.paths.to_string(),
                "seed" => self.seed.to_string(),
                "confidence" => self.confidence.to_string(),
                "xi_bins" => self.xi_bins.to_string(),
                "xi_range" => xi_range.clone(),
                "u0" => self.u0.clone(),
                "u0_param" => self.u0_param.to_string(),
                "u0_b" => self.u0_b.clone(),
                "u0_b_param" => self.u0_b_param.to_string(),
                "experiment" => self.experiment.clone(),
                "p" => self.p.to_string(),
                "lambda" => self.lambda.to_string(),
                "mollify_widths" => list(&self.mollify_widths),
                "out" => self.out.clone(),
                _ => unreachable!(),
            };
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value);
            out.push('\n');
        }
        out
    }

    /// Short hex digest of the canonical emission, stamped into every output.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.emit().as_bytes());
        digest[..6].iter().map(|b| format!("{b:02x}")).collect()
    }
}
