//! `kspde` — solve, sweep, compare, measure and verify experiments for the
//! stochastic degenerate parabolic solver on the torus.
//!
//! ```text
//! kspde <command> --config <file> [--out <dir>] [--seed <u64>] [--paths <M>]
//! ```
//!
//! Commands: `solve`, `sweep`, `compare`, `measure`, `verify`. The
//! environment variable `KSPDE_SEED` overrides the config seed; an explicit
//! `--seed` flag overrides both. Exit status: 0 on pass/complete, 1 on a
//! fail verdict, 2 on error.

mod config;
mod execute;

use clap::Parser;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "kspde", about = "stochastic degenerate parabolic experiments on the torus")]
struct Cli {
    /// solve | sweep | compare | measure | verify
    command: String,
    /// flat key = value configuration file (defaults apply when omitted)
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory (overrides the config's `out` key)
    #[arg(long)]
    out: Option<PathBuf>,
    /// root seed override (beats KSPDE_SEED and the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo path count override
    #[arg(long)]
    paths: Option<usize>,
}

fn main() {
    let cli = Cli::parse();
    let config_text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                std::process::exit(2);
            }
        },
        None => String::new(),
    };
    let seed = cli.seed.or_else(|| {
        std::env::var("KSPDE_SEED")
            .ok()
            .and_then(|s| s.parse::<u64>().ok())
    });
    let out_dir = cli.out.clone().unwrap_or_else(|| {
        config::ExperimentConfig::parse(&config_text)
            .map(|c| PathBuf::from(c.out))
            .unwrap_or_else(|_| PathBuf::from("out"))
    });
    let code = execute::run_cli(&cli.command, &config_text, &out_dir, seed, cli.paths);
    std::process::exit(code);
}
