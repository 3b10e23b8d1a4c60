use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dualavg::multistage::{adaptive_certificate, AdaptiveVariant};
use dualavg_harness::analysis::coverage_check;
use dualavg_harness::config::{ExperimentConfig, Method};
use dualavg_harness::experiment::{
    plot_sweep_dir, read_summary, resolve_out_dir, run_experiment, run_sweep, Check, SweepSummary,
};
use dualavg_harness::runner::Prepared;

#[derive(Parser)]
#[command(name = "dualavg", version, about = "Dual averaging experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all trials of a config at its budget or target accuracy.
    Run(RunArgs),
    /// Run a config once per budget of its [sweep] section.
    Sweep(RunArgs),
    /// Re-check the pass/fail checks stored in a run directory.
    Certify { run_dir: PathBuf },
    /// Coverage of the confidence certificate over the trials of a run.
    Coverage {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
    },
    /// Render gap_vs_n.svg for a sweep directory.
    Plot { run_dir: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    trials: Option<usize>,
}

fn load(args: &RunArgs) -> Result<(Prepared, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    let out = resolve_out_dir(args.out.as_deref(), &cfg);
    Ok((Prepared::new(&cfg)?, out))
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {}: {:.6e} (limit {:.6e})", c.name, c.value, c.limit);
    }
}

fn verdict(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn run(args: &RunArgs) -> Result<ExitCode> {
    let (prep, out) = load(args)?;
    let budget = prep.default_budget();
    let s = run_experiment(&prep, budget, &out, args.workers)?;
    println!("{} trials written to {}", s.trials, out.display());
    if let Some(g) = s.gap {
        println!("gap mean {:.6e}, max {:.6e}", g.mean, g.max);
    }
    print_checks(&s.checks);
    Ok(verdict(s.pass))
}

fn sweep(args: &RunArgs) -> Result<ExitCode> {
    let (prep, out) = load(args)?;
    let s = run_sweep(&prep, &out, args.workers)?;
    for p in &s.points {
        println!(
            "N = {:>9}: mean gap {}, bound {}",
            p.budget,
            p.mean_gap.map_or("-".into(), |g| format!("{g:.6e}")),
            p.bound.map_or("-".into(), |b| format!("{b:.6e}"))
        );
    }
    if let Some(f) = s.fit {
        println!("slope {:.4} (r2 {:.4}, {} points, {} excluded)", f.slope, f.r2, f.used, f.excluded);
    }
    print_checks(&s.checks);
    Ok(verdict(s.pass))
}

fn certify(dir: &Path) -> Result<ExitCode> {
    let text = std::fs::read_to_string(dir.join("summary.json"))
        .with_context(|| format!("reading {}/summary.json", dir.display()))?;
    if let Ok(s) = serde_json::from_str::<SweepSummary>(&text) {
        print_checks(&s.checks);
        return Ok(verdict(s.pass));
    }
    let s = read_summary(dir)?;
    for o in &s.outcomes {
        if let Some(d) = o.dual {
            println!("trial {}: duality gap {:.6e} <= {:.6e}: {}", o.trial, d.gap, d.bound, d.pass);
        }
    }
    print_checks(&s.checks);
    Ok(verdict(s.pass))
}

fn coverage(dir: &Path, alpha: f64) -> Result<ExitCode> {
    let cfg = ExperimentConfig::load(&dir.join("config.toml"))?;
    let prep = Prepared::new(&cfg)?;
    if cfg.algorithm.method != Method::Adaptive || cfg.variant() != AdaptiveVariant::AdaptiveS {
        bail!("coverage: the run has no confidence certificate (needs method = \"adaptive\", variant = \"adaptive_s\")");
    }
    let s = read_summary(dir)?;
    let n = s.budget.ok_or_else(|| anyhow!("coverage: the run has no budget"))?;
    let eps = adaptive_certificate(&prep.params, prep.setup.prox(), n, alpha)?;
    let gaps: Vec<Option<f64>> = s.outcomes.iter().map(|o| o.f_gap).collect();
    let c = coverage_check(&gaps, alpha, eps)?;
    println!(
        "certificate {eps:.6e}: {} of {} trials above, rate {:.4} (limit {:.4})",
        c.violations, c.trials, c.rate, c.limit
    );
    Ok(verdict(c.pass))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Certify { run_dir } => certify(run_dir),
        Command::Coverage { run_dir, alpha } => coverage(run_dir, *alpha),
        Command::Plot { run_dir } => plot_sweep_dir(run_dir, &run_dir.display().to_string()).map(|p| {
            println!("wrote {}", p.display());
            ExitCode::SUCCESS
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
