//! Runs experiments and writes their artifacts.
//!
//! Layout of a run directory:
//!
//! - `config.toml`: the resolved configuration (defaults filled in).
//! - `traces/trial_NNNNN.csv`: one trace per trial, merged into `trace.csv`.
//! - `summary.json`: final gaps, bounds and checks. Deterministic.
//! - `timing.json`: wall-clock times, kept apart so `summary.json` stays reproducible.
//!
//! A sweep writes one run directory per budget (`n_NNNNNNNN/`) plus
//! `sweep.csv`, `summary.json` and `gap_vs_n.svg` at the top.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use dualavg::multistage::AdaptiveVariant;
use dualavg::problems::ConvexityParams;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{coverage_check, rate_fit, stats, Coverage, RateFit, Stats};
use crate::config::{ExperimentConfig, Method};
use crate::plot::emit_plot;
use crate::runner::{Prepared, TraceRow, TrialOutcome};

pub const CSV_HEADER: [&str; 10] = [
    "trial",
    "stage",
    "iter",
    "oracle_calls",
    "f_gap",
    "dist_to_opt",
    "delta_observed",
    "delta_exact",
    "beta",
    "radius",
];

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let c = &r.record;
        w.write_record([
            r.trial.to_string(),
            r.stage.to_string(),
            c.iter.to_string(),
            c.oracle_calls.to_string(),
            fmt_opt(c.f_gap),
            fmt_opt(c.dist_to_opt),
            fmt_opt(c.delta_observed),
            fmt_opt(c.delta_exact),
            fmt_float(c.beta),
            fmt_float(c.radius),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Concatenates per-trial traces under one header.
fn merge_traces(files: &[PathBuf], out: &Path) -> Result<()> {
    let mut merged = String::new();
    merged.push_str(&CSV_HEADER.join(","));
    merged.push('\n');
    for f in files {
        let text = fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        for line in text.lines().skip(1) {
            merged.push_str(line);
            merged.push('\n');
        }
    }
    fs::write(out, merged).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, value: f64, limit: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub method: Method,
    pub budget: Option<usize>,
    pub eps: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub params: ConvexityParams,
    pub r0: f64,
    /// The method's guarantee at this budget (a lower bound for the resisting oracle).
    pub bound: Option<f64>,
    pub accuracy_budget: Option<f64>,
    pub gap: Option<Stats>,
    pub max_oracle_calls: usize,
    pub coverage: Option<Coverage>,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub outcomes: Vec<TrialOutcome>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    pub trial_seconds: Vec<f64>,
}

/// Output directory: `--out`, then `DUALAVG_OUT`, then `output_dir`, then `runs/<name>`.
pub fn resolve_out_dir(cli: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os("DUALAVG_OUT") {
        return PathBuf::from(p).join(&cfg.name);
    }
    cfg.output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| anyhow!("thread pool: {e}"))
}

fn checks_for(prep: &Prepared, budget: Option<usize>, outcomes: &[TrialOutcome], bound: Option<f64>) -> Result<(Vec<Check>, Option<Coverage>)> {
    let mut checks = Vec::new();
    let mut coverage = None;
    let gaps: Option<Vec<f64>> = outcomes.iter().map(|o| o.f_gap).collect();
    let max_calls = outcomes.iter().map(|o| o.oracle_calls).max().unwrap_or(0);
    if let Some(n) = budget {
        checks.push(Check::new("oracle_calls_within_budget", max_calls as f64, n as f64, max_calls <= n));
    }
    if let Some(b) = prep.accuracy_budget()? {
        checks.push(Check::new("oracle_calls_within_accuracy_budget", max_calls as f64, b, max_calls as f64 <= b));
    }
    if let (Some(gaps), Some(bound)) = (&gaps, bound) {
        let s = stats(gaps).ok_or_else(|| anyhow!("no finite gaps"))?;
        if prep.is_resisting() {
            checks.push(Check::new("frozen_gap_above_eps", s.min, bound, s.min > bound));
        } else if prep.config.variant() == AdaptiveVariant::AdaptiveS && prep.config.algorithm.method == Method::Adaptive {
            if outcomes.len() >= 100 {
                let alpha = prep.config.algorithm.alpha.unwrap_or(0.1);
                let opt: Vec<Option<f64>> = gaps.iter().map(|g| Some(*g)).collect();
                let c = coverage_check(&opt, alpha, bound)?;
                checks.push(Check::new("certificate_coverage", c.rate, c.limit, c.pass));
                coverage = Some(c);
            }
        } else if prep.stochastic() {
            let v = s.mean - 2.0 * s.se;
            checks.push(Check::new("mean_gap_within_bound", v, bound, v <= bound));
        } else {
            checks.push(Check::new("max_gap_within_bound", s.max, bound, s.max <= bound));
        }
    }
    let duals: Vec<_> = outcomes.iter().filter_map(|o| o.dual).collect();
    if !duals.is_empty() {
        let worst = duals
            .iter()
            .max_by(|a, b| (a.gap - a.bound).total_cmp(&(b.gap - b.bound)))
            .expect("nonempty");
        checks.push(Check::new("duality_gap_within_bound", worst.gap, worst.bound, duals.iter().all(|d| d.pass)));
    }
    Ok((checks, coverage))
}

/// Runs all trials at one budget (or the target accuracy when `budget` is `None`).
pub fn run_experiment(prep: &Prepared, budget: Option<usize>, out: &Path, workers: usize) -> Result<Summary> {
    let cfg = &prep.config;
    let traces = out.join("traces");
    fs::create_dir_all(&traces).with_context(|| format!("creating {}", traces.display()))?;
    fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    let start = Instant::now();
    let results: Vec<Result<(TrialOutcome, PathBuf, f64)>> = pool(workers)?.install(|| {
        (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| {
                let t0 = Instant::now();
                let o = prep.run_trial(t, budget).with_context(|| format!("trial {t}"))?;
                let path = traces.join(format!("trial_{t:05}.csv"));
                write_trace(&path, &o.rows)?;
                Ok((o, path, t0.elapsed().as_secs_f64()))
            })
            .collect()
    });
    let mut outcomes = Vec::with_capacity(results.len());
    let mut files = Vec::with_capacity(results.len());
    let mut secs = Vec::with_capacity(results.len());
    for r in results {
        let (o, p, s) = r?;
        outcomes.push(o);
        files.push(p);
        secs.push(s);
    }
    merge_traces(&files, &out.join("trace.csv"))?;

    let bound = prep.bound(budget)?;
    let (checks, coverage) = checks_for(prep, budget, &outcomes, bound)?;
    let gaps: Option<Vec<f64>> = outcomes.iter().map(|o| o.f_gap).collect();
    let summary = Summary {
        name: cfg.name.clone(),
        method: cfg.algorithm.method,
        budget,
        eps: cfg.algorithm.eps,
        trials: cfg.trials,
        seed: cfg.seed,
        params: prep.params,
        r0: prep.r0,
        bound,
        accuracy_budget: prep.accuracy_budget()?,
        gap: gaps.as_deref().and_then(stats),
        max_oracle_calls: outcomes.iter().map(|o| o.oracle_calls).max().unwrap_or(0),
        coverage,
        pass: checks.iter().all(|c| c.pass),
        checks,
        outcomes,
    };
    write_json(&out.join("summary.json"), &summary)?;
    write_json(
        &out.join("timing.json"),
        &Timing {
            total_seconds: start.elapsed().as_secs_f64(),
            trial_seconds: secs,
        },
    )?;
    Ok(summary)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_summary(dir: &Path) -> Result<Summary> {
    let p = dir.join("summary.json");
    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub budget: usize,
    pub mean_gap: Option<f64>,
    pub bound: Option<f64>,
    pub max_oracle_calls: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub name: String,
    pub points: Vec<SweepPoint>,
    pub fit: Option<RateFit>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

pub const SWEEP_HEADER: [&str; 4] = ["budget", "mean_gap", "bound", "max_oracle_calls"];

pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(SWEEP_HEADER)?;
    for p in points {
        w.write_record([
            p.budget.to_string(),
            fmt_opt(p.mean_gap),
            fmt_opt(p.bound),
            p.max_oracle_calls.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<(f64, Option<f64>, Option<f64>)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let parse = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            Ok(Some(s.parse::<f64>()?))
        }
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let n: f64 = rec.get(0).ok_or_else(|| anyhow!("missing budget"))?.parse()?;
        out.push((n, parse(rec.get(1).unwrap_or(""))?, parse(rec.get(2).unwrap_or(""))?));
    }
    Ok(out)
}

/// Renders `gap_vs_n.svg` from a sweep directory's `sweep.csv`.
pub fn plot_sweep_dir(dir: &Path, title: &str) -> Result<PathBuf> {
    let rows = read_sweep_csv(&dir.join("sweep.csv"))?;
    let gaps: Vec<(f64, f64)> = rows.iter().filter_map(|(n, g, _)| g.map(|g| (*n, g))).collect();
    let bounds: Vec<(f64, f64)> = rows.iter().filter_map(|(n, _, b)| b.map(|b| (*n, b))).collect();
    let path = dir.join("gap_vs_n.svg");
    emit_plot(&path, title, &gaps, &bounds)?;
    Ok(path)
}

/// Runs the config once per sweep budget.
pub fn run_sweep(prep: &Prepared, out: &Path, workers: usize) -> Result<SweepSummary> {
    let sweep = prep
        .config
        .sweep
        .as_ref()
        .ok_or_else(|| anyhow!("sweep: the config has no [sweep] section"))?;
    if sweep.budgets.is_empty() {
        bail!("sweep.budgets: empty sweep");
    }
    fs::create_dir_all(out)?;
    fs::write(out.join("config.toml"), prep.config.to_toml()?)?;
    let mut points = Vec::new();
    for &n in &sweep.budgets {
        let s = run_experiment(prep, Some(n), &out.join(format!("n_{n:08}")), workers)?;
        points.push(SweepPoint {
            budget: n,
            mean_gap: s.gap.map(|g| g.mean),
            bound: s.bound,
            max_oracle_calls: s.max_oracle_calls,
            pass: s.pass,
        });
    }
    write_sweep_csv(&out.join("sweep.csv"), &points)?;
    let fit_points: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.mean_gap.map(|g| (p.budget as f64, g)))
        .collect();
    let fit = rate_fit(&fit_points).ok();
    let mut checks = vec![Check::new(
        "all_budgets_pass",
        points.iter().filter(|p| !p.pass).count() as f64,
        0.0,
        points.iter().all(|p| p.pass),
    )];
    if let Some(max) = sweep.max_slope {
        let slope = fit.map_or(f64::NAN, |f| f.slope);
        checks.push(Check::new("rate_slope", slope, max, slope <= max));
    }
    let summary = SweepSummary {
        name: prep.config.name.clone(),
        points,
        fit,
        pass: checks.iter().all(|c| c.pass),
        checks,
    };
    write_json(&out.join("summary.json"), &summary)?;
    plot_sweep_dir(out, &prep.config.name)?;
    Ok(summary)
}
