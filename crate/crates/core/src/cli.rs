//! Command-line interface. Every command prints one JSON document on stdout.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::cone::{estimate_width, ConeSpec, WidthKind};
use crate::error::{Error, Result};
use crate::l1::{recovery_trial, AdmmOptions};
use crate::phase::{
    emit, overlay_curve, report_json, run_sweep, wilson_interval, Format, Meta, ProblemGeometry,
    SweepConfig,
};
use crate::seed;
use crate::thresholds::{
    perturbed_bounds, weak_threshold, EpsilonSet, PerturbedBounds, ThresholdPoint,
};
use crate::trap::{trap_probability, TrapOptions};
use rayon::prelude::*;

/// Exit status for usage and domain errors.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for numerical failures.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "l1mesh",
    version,
    about = "l1 recovery thresholds, Gaussian widths and mesh trapping experiments"
)]
pub struct Cli {
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, global = true, env = "L1MESH_JOBS", default_value_t = 0)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Xi,
    W,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Weak threshold alpha_w(beta) and, given epsilons, the perturbed bounds.
    Threshold {
        #[arg(long)]
        beta: f64,
        /// JSON object with any of eps1_c, eps2_c, eps1_m, eps1_g, eps3_g, eps5_g, eps1, eps2.
        #[arg(long)]
        eps_file: Option<PathBuf>,
    },
    /// Monte Carlo estimate of xi_D or w_D for the l1 descent cone.
    Width {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "xi")]
        kind: KindArg,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fraction of random null spaces that meet the descent set.
    Trap {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Basis pursuit recovery rate of planted sparse vectors.
    Recover {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sweep an (alpha, beta) grid described by a JSON config file.
    Phase {
        #[arg(long)]
        config: PathBuf,
        /// Directory for CSV/JSON artifacts; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct ThresholdOutput {
    #[serde(flatten)]
    point: ThresholdPoint,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<EpsilonSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    perturbed: Option<PerturbedBounds>,
}

#[derive(Serialize)]
struct RecoverOutput {
    geometry: ProblemGeometry,
    seed: u64,
    trials: usize,
    successes: usize,
    rate: f64,
    wilson: (f64, f64),
    not_converged: usize,
    solver_errors: usize,
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn threshold(beta: f64, eps_file: Option<PathBuf>) -> Result<String> {
    let point = weak_threshold(beta)?;
    let (eps, perturbed) = match eps_file {
        Some(path) => {
            let eps: EpsilonSet = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            let bounds = perturbed_bounds(beta, &eps)?;
            (Some(eps), Some(bounds))
        }
        None => (None, None),
    };
    to_json(&ThresholdOutput {
        point,
        eps,
        perturbed,
    })
}

fn recover(geom: ProblemGeometry, trials: usize, seed: u64) -> Result<String> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be at least 1".into()));
    }
    let opts = AdmmOptions::default();
    let results = (0..trials)
        .into_par_iter()
        .map(|t| recovery_trial(&geom, seed::derive(seed, t as u64), &opts))
        .collect::<Result<Vec<_>>>()?;
    let successes = results.iter().filter(|r| r.success).count();
    to_json(&RecoverOutput {
        geometry: geom,
        seed,
        trials,
        successes,
        rate: successes as f64 / trials as f64,
        wilson: wilson_interval(successes, trials),
        not_converged: results.iter().filter(|r| !r.converged).count(),
        solver_errors: results.iter().filter(|r| r.error.is_some()).count(),
    })
}

fn phase(config: PathBuf, out: Option<PathBuf>) -> Result<String> {
    let cfg = SweepConfig::from_json(&std::fs::read_to_string(config)?)?;
    let outcome = run_sweep(&cfg)?;
    let meta = Meta::new(&cfg);
    if let Some(dir) = out.or_else(|| cfg.output.clone()) {
        let curve = cfg.overlay.then(overlay_curve);
        let records = cfg.per_trial_log.then_some(outcome.records.as_slice());
        emit(
            &dir,
            &meta,
            &outcome.cells,
            curve.as_deref(),
            records,
            &[Format::Csv, Format::Json],
        )?;
    }
    report_json(&meta, &outcome.cells)
}

/// Executes a parsed command and returns its stdout text.
pub fn execute(command: Command) -> Result<String> {
    match command {
        Command::Threshold { beta, eps_file } => threshold(beta, eps_file),
        Command::Width {
            n,
            k,
            kind,
            samples,
            seed,
        } => {
            let kind = match kind {
                KindArg::Xi => WidthKind::XiD,
                KindArg::W => WidthKind::WD,
            };
            to_json(&estimate_width::<f64>(
                &ConeSpec::new(n, k)?,
                kind,
                samples,
                seed,
            )?)
        }
        Command::Trap {
            n,
            m,
            k,
            trials,
            seed,
        } => {
            let geom = ProblemGeometry::new(n, m, k)?;
            to_json(&trap_probability(
                &geom,
                trials,
                seed,
                &TrapOptions::default(),
            )?)
        }
        Command::Recover {
            n,
            m,
            k,
            trials,
            seed,
        } => recover(ProblemGeometry::new(n, m, k)?, trials, seed),
        Command::Phase { config, out } => phase(config, out),
    }
}

/// Process exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

/// Parses `args`, runs the command in a pool of `--jobs` threads and
/// returns `(exit code, stdout, stderr)`.
pub fn run<I, S>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                (0, text, String::new())
            } else {
                (code, String::new(), text)
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
    {
        Ok(p) => p,
        Err(e) => return (EXIT_USAGE, String::new(), format!("error: {e}\n")),
    };
    match pool.install(|| execute(cli.command)) {
        Ok(out) => (0, out, String::new()),
        Err(e) => (exit_code(&e), String::new(), format!("error: {e}\n")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_class() {
        assert_eq!(exit_code(&Error::NoRoot("x".into())), EXIT_NUMERICAL);
        assert_eq!(
            exit_code(&Error::Rank { pivot: 1, size: 2 }),
            EXIT_NUMERICAL
        );
        assert_eq!(exit_code(&Error::NoCrossing), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::Domain("x".into())), EXIT_USAGE);
        assert_eq!(
            exit_code(&Error::DimensionMismatch {
                expected: 1,
                got: 2
            }),
            EXIT_USAGE
        );
    }

    #[test]
    fn run_reports_help_on_stdout() {
        let (code, out, err) = run(["l1mesh", "--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("threshold") && err.is_empty());
        let (code, out, _) = run(["l1mesh", "threshold", "--beta", "0.3"]);
        assert_eq!(code, 0);
        assert!(out.contains("alpha_w"));
    }
}
