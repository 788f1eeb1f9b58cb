//! Problem geometry, shared trial sampling and the (alpha, beta) sweep.

use std::fs;
use std::path::{Path, PathBuf};

use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::l1::{recovery_trial, recovery_vs_trap, AdmmOptions};
use crate::linalg::{sample_gaussian, Mat};
use crate::seed;
use crate::thresholds::threshold_curve;
use crate::trap::{trap_trial, TrapOptions, Verdict};

/// Dimensions of one compressed sensing instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemGeometry {
    pub n: usize,
    pub m: usize,
    pub k: usize,
}

/// How ratios are turned into integer dimensions.
pub const ROUNDING_RULE: &str = "k = round(beta * n), m = round(alpha * n), ties away from zero";

impl ProblemGeometry {
    /// Requires `k <= n` and `1 <= m < n`.
    pub fn new(n: usize, m: usize, k: usize) -> Result<Self> {
        let g = ProblemGeometry { n, m, k };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k > self.n {
            return Err(Error::InvalidInput(format!(
                "k = {} exceeds n = {}",
                self.k, self.n
            )));
        }
        if self.m == 0 || self.m >= self.n {
            return Err(Error::InvalidInput(format!(
                "need 1 <= m < n, got m = {}, n = {}",
                self.m, self.n
            )));
        }
        Ok(())
    }

    pub fn from_ratios(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        for (name, r) in [("alpha", alpha), ("beta", beta)] {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Domain(format!("{name} = {r} must lie in (0, 1)")));
            }
        }
        let m = (alpha * n as f64).round() as usize;
        let k = (beta * n as f64).round() as usize;
        Self::new(n, m, k)
    }

    pub fn alpha(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    pub fn beta_w(&self) -> f64 {
        self.k as f64 / self.n as f64
    }
}

/// Measurement matrix and planted vector of one trial.
///
/// `A` is drawn from `derive(seed, 0)`; the planted vector has support
/// `{0, .., k-1}` with entries `-|N(0, 1)|` drawn from `derive(seed, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub a: Mat<f64>,
    pub planted: Vec<f64>,
}

pub fn sample_instance(geom: &ProblemGeometry, trial_seed: u64) -> Result<Instance> {
    geom.validate()?;
    let a = sample_gaussian::<f64>(geom.m, geom.n, seed::derive(trial_seed, 0))?.matrix;
    let mut rng = seed::rng(seed::derive(trial_seed, 1));
    let mut planted = vec![0.0; geom.n];
    for x in planted.iter_mut().take(geom.k) {
        let z: f64 = StandardNormal.sample(&mut rng);
        *x = -z.abs();
    }
    Ok(Instance { a, planted })
}

/// 95% Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Which experiments a sweep runs in every cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Recovery,
    Trap,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n: usize,
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub trials: usize,
    pub mode: SweepMode,
    pub seed: u64,
    /// Output directory; the CLI's `--out` takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub per_trial_log: bool,
    /// Also write the theoretical curve.
    #[serde(default)]
    pub overlay: bool,
    #[serde(default)]
    pub admm: AdmmOptions,
    #[serde(default)]
    pub trap: TrapOptions,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidInput("n must be at least 2".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        for &r in self.betas.iter().chain(&self.alphas) {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Domain(format!("ratio {r} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

/// Aggregated outcome of one `(alpha, beta)` grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub beta: f64,
    pub alpha: f64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub trials: usize,
    pub recovery_successes: usize,
    pub trapped: usize,
    pub escaped: usize,
    pub indeterminate: usize,
    pub agreement: usize,
    pub seed_base: u64,
    /// Why the cell could not run, if it could not.
    pub error: Option<String>,
}

impl PhaseCell {
    pub fn success_rate(&self) -> f64 {
        self.recovery_successes as f64 / self.trials as f64
    }
}

/// One trial of a sweep, for the optional per-trial log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    pub recovery_success: Option<bool>,
    pub verdict: Option<Verdict>,
    pub agree: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub cells: Vec<PhaseCell>,
    pub records: Vec<TrialRecord>,
}

/// Seed of cell `index` (beta-major order) under the master seed.
pub fn cell_seed(master: u64, index: usize) -> u64 {
    seed::derive(master, index as u64)
}

fn run_trial(
    geom: &ProblemGeometry,
    cfg: &SweepConfig,
    cell: usize,
    trial: usize,
    s: u64,
) -> TrialRecord {
    let (recovery_success, verdict, agree) = match cfg.mode {
        SweepMode::Both => match recovery_vs_trap(geom, s, &cfg.admm, &cfg.trap) {
            Ok((rec, _)) => (Some(rec.recovery_success), Some(rec.verdict), rec.agree),
            Err(_) => (Some(false), Some(Verdict::Indeterminate), None),
        },
        SweepMode::Recovery => {
            let ok = recovery_trial(geom, s, &cfg.admm)
                .map(|r| r.success)
                .unwrap_or(false);
            (Some(ok), None, None)
        }
        SweepMode::Trap => {
            let v = trap_trial(geom, s, &cfg.trap)
                .map(|v| v.verdict)
                .unwrap_or(Verdict::Indeterminate);
            (None, Some(v), None)
        }
    };
    TrialRecord {
        cell,
        trial,
        seed: s,
        recovery_success,
        verdict,
        agree,
    }
}

/// Runs every cell of the grid. Output is independent of the thread count:
/// trials are mapped in parallel, collected in order and folded per cell.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let mut cells = Vec::new();
    let mut geoms = Vec::new();
    for &beta in &cfg.betas {
        for &alpha in &cfg.alphas {
            let idx = cells.len();
            let m = (alpha * cfg.n as f64).round() as usize;
            let k = (beta * cfg.n as f64).round() as usize;
            let geom = ProblemGeometry::new(cfg.n, m, k);
            cells.push(PhaseCell {
                beta,
                alpha,
                n: cfg.n,
                m,
                k,
                trials: cfg.trials,
                recovery_successes: 0,
                trapped: 0,
                escaped: 0,
                indeterminate: 0,
                agreement: 0,
                seed_base: cell_seed(cfg.seed, idx),
                error: geom.as_ref().err().map(|e| e.to_string()),
            });
            geoms.push(geom.ok());
        }
    }
    let work: Vec<(usize, usize)> = (0..cells.len())
        .filter(|&c| geoms[c].is_some())
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let records: Vec<TrialRecord> = work
        .par_iter()
        .map(|&(c, t)| {
            let geom = geoms[c].as_ref().unwrap();
            run_trial(geom, cfg, c, t, seed::derive(cells[c].seed_base, t as u64))
        })
        .collect();
    for r in &records {
        let cell = &mut cells[r.cell];
        if r.recovery_success == Some(true) {
            cell.recovery_successes += 1;
        }
        match r.verdict {
            Some(Verdict::Trapped) => cell.trapped += 1,
            Some(Verdict::Escaped) => cell.escaped += 1,
            Some(Verdict::Indeterminate) => cell.indeterminate += 1,
            None => {}
        }
        if r.agree == Some(true) {
            cell.agreement += 1;
        }
    }
    Ok(SweepOutcome { cells, records })
}

/// 50% crossing of a fitted logistic success curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub alpha_50: f64,
    /// 95% percentile bootstrap interval.
    pub ci: (f64, f64),
    /// Fitted slope in units of success log-odds per unit alpha.
    pub slope: f64,
}

/// Success counts at one alpha.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub alpha: f64,
    pub successes: usize,
    pub trials: usize,
}

const RIDGE: f64 = 1e-3;
const BOOTSTRAP_RESAMPLES: usize = 400;
const BOOTSTRAP_SEED: u64 = 0x5eed_0fc0_ffee;

/// Ridge-penalized logistic fit `logit p = a + b x` on standardized `x`,
/// by damped Newton iterations.
fn logistic_fit(xs: &[f64], s: &[f64], t: &[f64]) -> (f64, f64) {
    let objective = |a: f64, b: f64| {
        let mut ll = -0.5 * RIDGE * b * b;
        for i in 0..xs.len() {
            let eta = a + b * xs[i];
            // log(1 + e^eta) computed stably
            let sp = if eta > 0.0 {
                eta + (-eta).exp().ln_1p()
            } else {
                eta.exp().ln_1p()
            };
            ll += s[i] * eta - t[i] * sp;
        }
        ll
    };
    let (mut a, mut b) = (0.0, 0.0);
    let mut cur = objective(a, b);
    for _ in 0..200 {
        let (mut ga, mut gb) = (0.0, -RIDGE * b);
        let (mut haa, mut hab, mut hbb) = (0.0, 0.0, RIDGE);
        for i in 0..xs.len() {
            let p = 1.0 / (1.0 + (-(a + b * xs[i])).exp());
            let r = s[i] - t[i] * p;
            let w = t[i] * p * (1.0 - p);
            ga += r;
            gb += r * xs[i];
            haa += w;
            hab += w * xs[i];
            hbb += w * xs[i] * xs[i];
        }
        let det = haa * hbb - hab * hab;
        if !(det > 0.0) {
            break;
        }
        let da = (hbb * ga - hab * gb) / det;
        let db = (haa * gb - hab * ga) / det;
        let mut step = 1.0;
        let mut moved = false;
        while step > 1e-10 {
            let next = objective(a + step * da, b + step * db);
            if next >= cur {
                a += step * da;
                b += step * db;
                moved = next - cur > 1e-13 * (1.0 + cur.abs());
                cur = next;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (a, b)
}

fn crossing_of(points: &[RatePoint], successes: &[f64]) -> Result<(f64, f64)> {
    let rates: Vec<f64> = points
        .iter()
        .zip(successes)
        .map(|(p, s)| s / p.trials as f64)
        .collect();
    let above = rates.iter().any(|&r| r > 0.5);
    let below = rates.iter().any(|&r| r < 0.5);
    if !(above && below) {
        return Err(Error::NoCrossing);
    }
    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.alpha).sum::<f64>() / n;
    let sd = (points.iter().map(|p| (p.alpha - mean).powi(2)).sum::<f64>() / n).sqrt();
    let xs: Vec<f64> = points.iter().map(|p| (p.alpha - mean) / sd).collect();
    let t: Vec<f64> = points.iter().map(|p| p.trials as f64).collect();
    let (a, b) = logistic_fit(&xs, successes, &t);
    if b == 0.0 {
        return Err(Error::NoCrossing);
    }
    let lo = points.iter().map(|p| p.alpha).fold(f64::INFINITY, f64::min);
    let hi = points
        .iter()
        .map(|p| p.alpha)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(((mean - sd * a / b).clamp(lo, hi), b / sd))
}

/// Logistic fit of success rate against alpha with a binomial bootstrap
/// interval for the 50% crossing.
pub fn fit_crossing_points(points: &[RatePoint]) -> Result<Crossing> {
    if points.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "need at least 5 cells to fit a crossing, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|p| p.trials == 0 || p.successes > p.trials)
    {
        return Err(Error::InvalidInput(
            "every cell needs 0 <= successes <= trials, trials > 0".into(),
        ));
    }
    let observed: Vec<f64> = points.iter().map(|p| p.successes as f64).collect();
    let (alpha_50, slope) = crossing_of(points, &observed)?;

    let mut rng = seed::rng(BOOTSTRAP_SEED);
    let mut boots = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let resampled: Vec<f64> = points
            .iter()
            .map(|p| {
                let rate = p.successes as f64 / p.trials as f64;
                Binomial::new(p.trials as u64, rate)
                    .unwrap()
                    .sample(&mut rng) as f64
            })
            .collect();
        if let Ok((x, _)) = crossing_of(points, &resampled) {
            boots.push(x);
        }
    }
    boots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ci = if boots.is_empty() {
        (alpha_50, alpha_50)
    } else {
        let q =
            |f: f64| boots[((f * (boots.len() - 1) as f64).round() as usize).min(boots.len() - 1)];
        (q(0.025), q(0.975))
    };
    Ok(Crossing {
        alpha_50,
        ci,
        slope,
    })
}

/// Crossing of the recovery success rate over one beta column.
pub fn fit_crossing(cells: &[PhaseCell]) -> Result<Crossing> {
    let points: Vec<RatePoint> = cells
        .iter()
        .filter(|c| c.error.is_none())
        .map(|c| RatePoint {
            alpha: c.alpha,
            successes: c.recovery_successes,
            trials: c.trials,
        })
        .collect();
    fit_crossing_points(&points)
}

pub const CSV_HEADER: &str =
    "beta,alpha,n,m,k,trials,recovery_successes,trapped,escaped,indeterminate,agreement,seed_base";

pub fn cells_csv(cells: &[PhaseCell]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.beta,
            c.alpha,
            c.n,
            c.m,
            c.k,
            c.trials,
            c.recovery_successes,
            c.trapped,
            c.escaped,
            c.indeterminate,
            c.agreement,
            c.seed_base
        ));
    }
    out
}

fn opt_bool(b: Option<bool>) -> &'static str {
    match b {
        Some(true) => "1",
        Some(false) => "0",
        None => "",
    }
}

pub fn trials_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from("cell,trial,seed,recovery_success,verdict,agree\n");
    for r in records {
        let v = match r.verdict {
            Some(Verdict::Trapped) => "trapped",
            Some(Verdict::Escaped) => "escaped",
            Some(Verdict::Indeterminate) => "indeterminate",
            None => "",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.cell,
            r.trial,
            r.seed,
            opt_bool(r.recovery_success),
            v,
            opt_bool(r.agree)
        ));
    }
    out
}

/// `(beta, alpha_w)` pairs for the overlay; failed points are skipped.
pub fn overlay_curve() -> Vec<(f64, f64)> {
    let betas: Vec<f64> = (1..200).map(|i| i as f64 / 200.0).collect();
    threshold_curve(&betas)
        .into_iter()
        .filter_map(|p| p.ok())
        .map(|p| (p.beta_w, p.alpha_w))
        .collect()
}

pub fn curve_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("beta,alpha_w\n");
    for (b, a) in curve {
        out.push_str(&format!("{b},{a}\n"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub config: SweepConfig,
    pub version: String,
    pub tool_version: String,
    pub rounding_rule: String,
}

impl Meta {
    pub fn new(config: &SweepConfig) -> Self {
        Meta {
            config: config.clone(),
            version: format!("v{}", env!("CARGO_PKG_VERSION")),
            tool_version: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            rounding_rule: ROUNDING_RULE.into(),
        }
    }
}

/// Recovery crossing of one beta column, or why it could not be fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnCrossing {
    pub beta: f64,
    pub crossing: Option<Crossing>,
    pub error: Option<String>,
}

/// Fits every beta column, in order of first appearance.
pub fn column_crossings(cells: &[PhaseCell]) -> Vec<ColumnCrossing> {
    let mut betas: Vec<f64> = Vec::new();
    for c in cells {
        if !betas.contains(&c.beta) {
            betas.push(c.beta);
        }
    }
    betas
        .into_iter()
        .map(|beta| {
            let column: Vec<PhaseCell> = cells.iter().filter(|c| c.beta == beta).cloned().collect();
            match fit_crossing(&column) {
                Ok(c) => ColumnCrossing {
                    beta,
                    crossing: Some(c),
                    error: None,
                },
                Err(e) => ColumnCrossing {
                    beta,
                    crossing: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub meta: Meta,
    pub cells: Vec<PhaseCell>,
    /// Empty when the sweep ran no recovery trials.
    pub crossings: Vec<ColumnCrossing>,
}

pub fn report_json(meta: &Meta, cells: &[PhaseCell]) -> Result<String> {
    let crossings = match meta.config.mode {
        SweepMode::Trap => Vec::new(),
        _ => column_crossings(cells),
    };
    let report = PhaseReport {
        meta: meta.clone(),
        cells: cells.to_vec(),
        crossings,
    };
    Ok(serde_json::to_string_pretty(&report)? + "\n")
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
# Phase diagram of recovery success with the theoretical weak threshold.
import csv
import os
import sys

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
rows = list(csv.DictReader(open(os.path.join(here, "phase.csv"))))
beta = [float(r["beta"]) for r in rows]
alpha = [float(r["alpha"]) for r in rows]
rate = [int(r["recovery_successes"]) / int(r["trials"]) for r in rows]

fig, ax = plt.subplots(figsize=(6, 5))
sc = ax.scatter(alpha, beta, c=rate, cmap="viridis", vmin=0, vmax=1, marker="s", s=40)
fig.colorbar(sc, label="recovery success rate")
curve = os.path.join(here, "curve.csv")
if os.path.exists(curve):
    pts = list(csv.DictReader(open(curve)))
    ax.plot([float(p["alpha_w"]) for p in pts], [float(p["beta"]) for p in pts], "r-", label="weak threshold")
    ax.legend()
ax.set_xlabel("alpha = m / n")
ax.set_ylabel("beta = k / n")
out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "phase.png")
fig.savefig(out, dpi=150, bbox_inches="tight")
"#;

/// Output formats of [`emit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Writes `phase.csv` and/or `phase.json`, plus `curve.csv` when an overlay
/// is given, `trials.csv` when records are given, and `plot_phase.py`.
/// Returns the written paths.
pub fn emit(
    dir: &Path,
    meta: &Meta,
    cells: &[PhaseCell],
    overlay: Option<&[(f64, f64)]>,
    records: Option<&[TrialRecord]>,
    formats: &[Format],
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    if formats.contains(&Format::Csv) {
        put("phase.csv", cells_csv(cells))?;
    }
    if formats.contains(&Format::Json) {
        put("phase.json", report_json(meta, cells)?)?;
    }
    if let Some(curve) = overlay {
        put("curve.csv", curve_csv(curve))?;
    }
    if let Some(records) = records {
        put("trials.csv", trials_csv(records))?;
    }
    put("plot_phase.py", PLOT_SCRIPT.to_string())?;
    Ok(written)
}
