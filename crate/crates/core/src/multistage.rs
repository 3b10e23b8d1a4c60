//! Restart schemes built from single-stage dual averaging.
//!
//! - [`Scheme::Ball`]: shrinking trust balls `R_k^rho = 2^-k R_0^rho`
//!   (target accuracy or fixed budget).
//! - [`Scheme::FixedDilation`]: the ball `B_{R_0}(y_{k-1})` stays, the gain
//!   grows as the target radius `r_k` shrinks; needs `C(d)`. With
//!   `sigma > 0` every `L²` becomes `L² + sigma²`.
//! - [`run_adaptive`]: fixed budget, `rho` and `mu(f)` unknown.

use serde::{Deserialize, Serialize};

use crate::da::{da_run, DaConfig, DaOutput, Gain, IterRecord, RecordPolicy, Weights};
use crate::error::{Error, Result};
use crate::geometry::ProxFunction;
use crate::linalg;
use crate::problems::{ConvexityParams, FirstOrderOracle};
use crate::proxmap::{LocalProblem, ProxSetup};

/// Largest integer strictly smaller than `a`.
pub fn strict_floor(a: f64) -> i64 {
    a.ceil() as i64 - 1
}

/// Largest integer less than or equal to `a`.
pub fn floor_int(a: f64) -> i64 {
    a.floor() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    TargetAccuracy { eps: f64 },
    /// Total number of oracle calls.
    FixedBudget { calls: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Ball,
    FixedDilation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    /// 1-based stage index.
    pub k: usize,
    /// DA iterations; the stage makes `iterations + 1` oracle calls.
    pub iterations: usize,
    /// Radius of the trust ball the stage runs on.
    pub ball_radius: f64,
    /// Radius the stage is expected to reach (`R_k` or `r_k`).
    pub target_radius: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSchedule {
    pub tau: f64,
    pub stages: Vec<Stage>,
}

impl StageSchedule {
    /// `sum (N_k + 1)`.
    pub fn total_calls(&self) -> usize {
        self.stages.iter().map(|s| s.iterations + 1).sum()
    }
}

fn l2_eff(params: &ConvexityParams) -> f64 {
    params.lipschitz.powi(2) + params.sigma.powi(2)
}

/// `A(d)` for the ball scheme, `C(d)` for fixed dilation.
fn growth_constant(prox: &ProxFunction, scheme: Scheme) -> Result<f64> {
    match scheme {
        Scheme::Ball => Ok(prox.a()),
        Scheme::FixedDilation => prox
            .c()
            .ok_or_else(|| Error::Missing("fixed dilation needs the quadratic-growth constant C(d)".into())),
    }
}

/// `4 L² K / (mu(f)² mu(d) R_0^(2(rho-1)))`, the stage-length unit.
fn unit_length(params: &ConvexityParams, prox: &ProxFunction, k_const: f64, r0: f64) -> Result<f64> {
    if !(params.mu_f > 0.0) {
        return Err(Error::invalid("mu_f", "restart schemes need mu(f) > 0"));
    }
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::invalid("r0", format!("must be positive, got {r0}")));
    }
    Ok(4.0 * l2_eff(params) * k_const / (params.mu_f.powi(2) * prox.mu() * r0.powf(2.0 * (params.rho - 1.0))))
}

fn stage(params: &ConvexityParams, prox: &ProxFunction, scheme: Scheme, k_const: f64, r0: f64, unit: f64, k: usize) -> Stage {
    let tau = params.tau();
    let l = l2_eff(params).sqrt();
    let mu = prox.mu();
    let iterations = (2f64.powf(tau * k as f64) * unit).floor() as usize;
    let prev = 2f64.powf(-((k - 1) as f64) / params.rho) * r0;
    let target = 2f64.powf(-(k as f64) / params.rho) * r0;
    match scheme {
        Scheme::Ball => Stage {
            k,
            iterations,
            ball_radius: prev,
            target_radius: target,
            gamma: l * prev / (2.0 * mu * k_const).sqrt(),
        },
        Scheme::FixedDilation => Stage {
            k,
            iterations,
            ball_radius: r0,
            target_radius: target,
            gamma: l * r0 * r0 / (prev * (2.0 * k_const * mu).sqrt()),
        },
    }
}

/// Number of stages for accuracy `eps`: `strict_floor(log2(mu(f) R_0^rho / eps)) + 1`,
/// at least 1.
pub fn stage_count(params: &ConvexityParams, r0: f64, eps: f64) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", format!("must be positive, got {eps}")));
    }
    let m = strict_floor((params.mu_f * r0.powf(params.rho) / eps).log2()) + 1;
    Ok(m.max(1) as usize)
}

/// Schedule reaching accuracy `eps` (Ball with `A(d)`, FixedDilation with `C(d)`).
pub fn schedule_eps(
    params: &ConvexityParams,
    prox: &ProxFunction,
    scheme: Scheme,
    r0: f64,
    eps: f64,
) -> Result<StageSchedule> {
    let k_const = growth_constant(prox, scheme)?;
    let unit = unit_length(params, prox, k_const, r0)?;
    let m = stage_count(params, r0, eps)?;
    Ok(StageSchedule {
        tau: params.tau(),
        stages: (1..=m).map(|k| stage(params, prox, scheme, k_const, r0, unit, k)).collect(),
    })
}

pub fn schedule_ball_eps(params: &ConvexityParams, prox: &ProxFunction, r0: f64, eps: f64) -> Result<StageSchedule> {
    schedule_eps(params, prox, Scheme::Ball, r0, eps)
}

/// `2^tau (2^tau + 1)` stage-length units: below this budget the fixed-budget
/// scheme degenerates to a single stage.
pub fn min_multistage_budget(params: &ConvexityParams, prox: &ProxFunction, scheme: Scheme, r0: f64) -> Result<f64> {
    let k_const = growth_constant(prox, scheme)?;
    let unit = unit_length(params, prox, k_const, r0)?;
    let t = 2f64.powf(params.tau());
    Ok(t * (t + 1.0) * unit)
}

/// Fixed-budget schedule: as many stages as fit in `calls` oracle calls,
/// counting `N_k + 1` calls per stage. `None` when the budget is below
/// [`min_multistage_budget`].
pub fn schedule_budget(
    params: &ConvexityParams,
    prox: &ProxFunction,
    scheme: Scheme,
    r0: f64,
    calls: usize,
) -> Result<Option<StageSchedule>> {
    let k_const = growth_constant(prox, scheme)?;
    let unit = unit_length(params, prox, k_const, r0)?;
    if (calls as f64) < min_multistage_budget(params, prox, scheme, r0)? {
        return Ok(None);
    }
    let mut stages = Vec::new();
    let mut used = 0usize;
    for k in 1.. {
        let s = stage(params, prox, scheme, k_const, r0, unit, k);
        if used + s.iterations + 1 > calls {
            break;
        }
        used += s.iterations + 1;
        stages.push(s);
    }
    if stages.is_empty() {
        return Ok(None);
    }
    Ok(Some(StageSchedule {
        tau: params.tau(),
        stages,
    }))
}

/// Oracle-call budget of the target-accuracy schemes:
/// `4^(tau+1) L² K / (mu(f)^(2/rho) mu(d)) eps^-tau` with `K = A(d)` or `C(d)`.
pub fn accuracy_budget(params: &ConvexityParams, prox: &ProxFunction, scheme: Scheme, eps: f64) -> Result<f64> {
    let k_const = growth_constant(prox, scheme)?;
    let tau = params.tau();
    Ok(4f64.powf(tau + 1.0) * l2_eff(params) * k_const / (params.mu_f.powf(2.0 / params.rho) * prox.mu())
        * eps.powf(-tau))
}

/// Fixed-budget guarantee `2 (8 L² K / (mu(f)^(2/rho) mu(d) N))^(1/tau)`.
pub fn budget_bound(params: &ConvexityParams, prox: &ProxFunction, scheme: Scheme, calls: usize) -> Result<f64> {
    let k_const = growth_constant(prox, scheme)?;
    let base = 8.0 * l2_eff(params) * k_const / (params.mu_f.powf(2.0 / params.rho) * prox.mu() * calls as f64);
    Ok(2.0 * base.powf(1.0 / params.tau()))
}

/// Per-stage summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    /// Cumulative oracle calls at the end of the stage.
    pub oracle_calls: usize,
    pub beta: f64,
    pub delta_observed: Option<f64>,
    pub delta_exact: Option<f64>,
    /// `f(y_k) - f*`.
    pub f_gap: Option<f64>,
    /// `||y_k - x*||` in the setup norm.
    pub dist_to_opt: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub stages: Vec<StageRecord>,
    /// Iteration records tagged with their stage; `oracle_calls` is cumulative.
    pub iterations: Vec<(usize, IterRecord)>,
    /// Dual witnesses of the last stage, when requested.
    pub witnesses: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

impl Trace {
    pub fn total_calls(&self) -> usize {
        self.stages.last().map_or(0, |s| s.oracle_calls)
    }
}

#[derive(Debug, Clone)]
pub struct MultistageOutput {
    pub x_hat: Vec<f64>,
    pub trace: Trace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    pub mode: Mode,
    pub scheme: Scheme,
    pub params: ConvexityParams,
    pub setup: ProxSetup,
    pub x0: Vec<f64>,
    /// `R_0 >= ||x0 - x*||`; for fixed dilation a bound on the diameter of `Q`.
    pub r0: f64,
    pub record: RecordPolicy,
    pub collect_witnesses: bool,
}

impl RunParams {
    pub fn new(mode: Mode, scheme: Scheme, params: ConvexityParams, setup: ProxSetup, x0: Vec<f64>, r0: f64) -> Self {
        Self {
            mode,
            scheme,
            params,
            setup,
            x0,
            r0,
            record: RecordPolicy::Off,
            collect_witnesses: false,
        }
    }
}

/// Runs the stage list, each stage on `Q ∩ B(y_{k-1}, ball_radius)`.
fn run_stages(
    oracle: &mut dyn FirstOrderOracle,
    setup: &ProxSetup,
    x0: &[f64],
    stages: &[Stage],
    betas: impl Fn(&Stage) -> f64,
    record: RecordPolicy,
    collect_witnesses: bool,
    trace: &mut Trace,
) -> Result<Vec<Vec<f64>>> {
    let optimum = oracle.optimum();
    let norm = setup.norm();
    let mut y = x0.to_vec();
    let mut outputs = Vec::with_capacity(stages.len());
    let start_calls = oracle.calls();
    for (idx, st) in stages.iter().enumerate() {
        let last = idx + 1 == stages.len();
        let beta = betas(st);
        let lp = LocalProblem::new(setup.clone(), y.clone(), st.ball_radius, beta)?;
        let cfg = DaConfig {
            iterations: st.iterations,
            weights: Weights::Unit,
            gain: Gain::Explicit(vec![beta; st.iterations + 2]),
            record,
            collect_witnesses: collect_witnesses && last,
        };
        let offset = oracle.calls() - start_calls;
        let DaOutput {
            x_out,
            state,
            records,
            witnesses,
            ..
        } = da_run(oracle, &lp, &cfg)?;
        for mut r in records {
            r.oracle_calls += offset;
            trace.iterations.push((st.k, r));
        }
        if last {
            trace.witnesses = witnesses;
        }
        let (f_gap, dist) = match &optimum {
            Some((xs, fs)) => (
                oracle.evaluate(&x_out).map(|v| v - fs),
                Some(norm.norm_of(&linalg::sub(&x_out, xs))),
            ),
            None => (None, None),
        };
        trace.stages.push(StageRecord {
            stage: *st,
            oracle_calls: oracle.calls() - start_calls,
            beta,
            delta_observed: state.gap_value(&lp).ok(),
            delta_exact: state.gap_value_exact(&lp).ok().flatten(),
            f_gap,
            dist_to_opt: dist,
        });
        // keep the next center inside Q despite rounding in the average
        y = if setup.set().contains(&x_out) { x_out } else { setup.set().project(&x_out) };
        outputs.push(y.clone());
    }
    Ok(outputs)
}

fn single_stage(
    oracle: &mut dyn FirstOrderOracle,
    rp: &RunParams,
    calls: usize,
    gamma: f64,
    radius: f64,
    trace: &mut Trace,
) -> Result<Vec<f64>> {
    let st = Stage {
        k: 1,
        iterations: calls.max(1) - 1,
        ball_radius: radius,
        target_radius: radius,
        gamma,
    };
    let n1 = (st.iterations + 1) as f64;
    let out = run_stages(
        oracle,
        &rp.setup,
        &rp.x0,
        &[st],
        |s| s.gamma * n1.sqrt(),
        rp.record,
        rp.collect_witnesses,
        trace,
    )?;
    Ok(out.into_iter().last().expect("one stage"))
}

/// Algorithms with known `(rho, mu(f), L)`: [`Scheme::Ball`] or
/// [`Scheme::FixedDilation`], target accuracy or fixed budget.
pub fn run_multistage(oracle: &mut dyn FirstOrderOracle, rp: &RunParams) -> Result<MultistageOutput> {
    crate::error::check_dim(rp.setup.dim(), rp.x0.len())?;
    if !rp.setup.set().contains(&rp.x0) {
        return Err(Error::Infeasible {
            set: rp.setup.set().name().into(),
            detail: "starting point x0 lies outside Q".into(),
        });
    }
    let prox = rp.setup.prox();
    let mut trace = Trace::default();
    let schedule = match rp.mode {
        Mode::TargetAccuracy { eps } => Some(schedule_eps(&rp.params, prox, rp.scheme, rp.r0, eps)?),
        Mode::FixedBudget { calls } => {
            if calls == 0 {
                return Err(Error::invalid("calls", "budget must be positive"));
            }
            schedule_budget(&rp.params, prox, rp.scheme, rp.r0, calls)?
        }
    };
    let x_hat = match schedule {
        Some(s) => {
            let outs = run_stages(
                oracle,
                &rp.setup,
                &rp.x0,
                &s.stages,
                |st| st.gamma * ((st.iterations + 1) as f64).sqrt(),
                rp.record,
                rp.collect_witnesses,
                &mut trace,
            )?;
            outs.into_iter().last().expect("at least one stage")
        }
        None => {
            let Mode::FixedBudget { calls } = rp.mode else {
                unreachable!("target accuracy always has a schedule")
            };
            trace.warnings.push(format!(
                "budget {calls} below the multistage threshold; running a single stage"
            ));
            let k_const = growth_constant(prox, rp.scheme)?;
            let gamma = l2_eff(&rp.params).sqrt() * rp.r0 / (2.0 * prox.mu() * k_const).sqrt();
            single_stage(oracle, rp, calls, gamma, rp.r0, &mut trace)?
        }
    };
    Ok(MultistageOutput { x_hat, trace })
}

pub fn run_ball(oracle: &mut dyn FirstOrderOracle, rp: &RunParams) -> Result<MultistageOutput> {
    if rp.scheme != Scheme::Ball {
        return Err(Error::invalid("scheme", "run_ball needs the ball scheme"));
    }
    run_multistage(oracle, rp)
}

pub fn run_fixed_dilation(oracle: &mut dyn FirstOrderOracle, rp: &RunParams) -> Result<MultistageOutput> {
    if rp.scheme != Scheme::FixedDilation {
        return Err(Error::invalid("scheme", "run_fixed_dilation needs the fixed dilation scheme"));
    }
    run_multistage(oracle, rp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptiveVariant {
    /// Shrinking balls, output `argmin f(y_k)` by exact evaluation.
    Deterministic,
    /// Fixed dilation `R_0` with `C(d)`, output `y_m`.
    Stoca,
    /// Shrinking balls with `L² + sigma²`, output `y_m`.
    AdaptiveS,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveParams {
    /// Total oracle calls `N`.
    pub calls: usize,
    pub setup: ProxSetup,
    pub x0: Vec<f64>,
    pub r0: f64,
    pub lipschitz: f64,
    pub sigma: f64,
    pub variant: AdaptiveVariant,
    pub record: RecordPolicy,
    pub collect_witnesses: bool,
}

/// `[½ log2(mu(d) N / (K log2 N))] - 1` with ordinary round-down.
pub fn adaptive_stage_count(prox: &ProxFunction, k_const: f64, calls: usize) -> i64 {
    let n = calls as f64;
    floor_int(0.5 * (prox.mu() * n / (k_const * n.log2())).log2()) - 1
}

/// Calls per stage of the adaptive schemes, `[N/m]`. Each stage runs
/// `[N/m] - 1` DA iterations so that the total never exceeds `N`.
pub fn adaptive_stage_calls(calls: usize, m: usize) -> usize {
    calls / m
}

/// Adaptive restarts for unknown `(rho, mu(f))`.
pub fn run_adaptive(oracle: &mut dyn FirstOrderOracle, ap: &AdaptiveParams) -> Result<MultistageOutput> {
    crate::error::check_dim(ap.setup.dim(), ap.x0.len())?;
    if !ap.setup.set().contains(&ap.x0) {
        return Err(Error::Infeasible {
            set: ap.setup.set().name().into(),
            detail: "starting point x0 lies outside Q".into(),
        });
    }
    if ap.calls == 0 {
        return Err(Error::invalid("calls", "budget must be positive"));
    }
    let prox = ap.setup.prox();
    let mu = prox.mu();
    let deterministic = ap.variant == AdaptiveVariant::Deterministic;
    let l = if deterministic {
        ap.lipschitz
    } else {
        (ap.lipschitz.powi(2) + ap.sigma.powi(2)).sqrt()
    };
    let k_const = match ap.variant {
        AdaptiveVariant::Stoca => prox
            .c()
            .ok_or_else(|| Error::Missing("the stoca scheme needs C(d)".into()))?,
        _ => prox.a(),
    };
    let mut trace = Trace::default();
    let m = if ap.calls >= 4 {
        adaptive_stage_count(prox, k_const, ap.calls)
    } else {
        0
    };
    let per_stage = if m >= 1 { adaptive_stage_calls(ap.calls, m as usize) } else { 0 };
    if m < 1 || per_stage < 1 {
        trace.warnings.push(format!(
            "adaptive stage count {m} for N = {}; running a single stage without the adaptive guarantee",
            ap.calls
        ));
        let rp = RunParams {
            mode: Mode::FixedBudget { calls: ap.calls },
            scheme: Scheme::Ball,
            params: ConvexityParams::new(2.0, 0.0, ap.lipschitz, if deterministic { 0.0 } else { ap.sigma })?,
            setup: ap.setup.clone(),
            x0: ap.x0.clone(),
            r0: ap.r0,
            record: ap.record,
            collect_witnesses: ap.collect_witnesses,
        };
        let gamma = l * ap.r0 / (2.0 * mu * k_const).sqrt();
        let x_hat = single_stage(oracle, &rp, ap.calls, gamma, ap.r0, &mut trace)?;
        return Ok(MultistageOutput { x_hat, trace });
    }
    let m = m as usize;
    let iterations = per_stage - 1;
    let stages: Vec<Stage> = (1..=m)
        .map(|k| {
            let prev = 2f64.powf(-((k - 1) as f64)) * ap.r0;
            let target = 2f64.powf(-(k as f64)) * ap.r0;
            match ap.variant {
                AdaptiveVariant::Stoca => Stage {
                    k,
                    iterations,
                    ball_radius: ap.r0,
                    target_radius: target,
                    gamma: l * ap.r0 * ap.r0 / (prev * (2.0 * k_const * mu).sqrt()),
                },
                _ => Stage {
                    k,
                    iterations,
                    ball_radius: prev,
                    target_radius: target,
                    gamma: l * prev / (2.0 * mu * k_const).sqrt(),
                },
            }
        })
        .collect();
    let outs = run_stages(
        oracle,
        &ap.setup,
        &ap.x0,
        &stages,
        |st| st.gamma * ((st.iterations + 1) as f64).sqrt(),
        ap.record,
        ap.collect_witnesses,
        &mut trace,
    )?;
    let x_hat = if deterministic {
        let mut best: Option<(f64, &Vec<f64>)> = None;
        for y in &outs {
            let v = oracle
                .evaluate(y)
                .ok_or_else(|| Error::Missing("objective values for the deterministic adaptive output".into()))?;
            if best.map_or(true, |(b, _)| v < b) {
                best = Some((v, y));
            }
        }
        best.expect("m >= 1").1.clone()
    } else {
        outs.last().expect("m >= 1").clone()
    };
    Ok(MultistageOutput { x_hat, trace })
}

/// Deterministic adaptive guarantee
/// `2 (16 L² A(d) log2 N / (mu(f)^(2/rho) mu(d) N))^(rho/(2(rho-1)))`.
pub fn adaptive_bound(params: &ConvexityParams, prox: &ProxFunction, calls: usize) -> f64 {
    let n = calls as f64;
    let base = 16.0 * params.lipschitz.powi(2) * prox.a() * n.log2() / (params.mu_f.powf(2.0 / params.rho) * prox.mu() * n);
    2.0 * base.powf(params.rho / (2.0 * (params.rho - 1.0)))
}

/// Expectation guarantee of the stoca scheme
/// `4 (16 (L² + sigma²) C(d) log2 N / (mu(f)^(2/rho) mu(d) N))^(rho/(2(rho-1)))`.
pub fn stoca_bound(params: &ConvexityParams, prox: &ProxFunction, calls: usize) -> Result<f64> {
    let c = prox
        .c()
        .ok_or_else(|| Error::Missing("the stoca bound needs C(d)".into()))?;
    let n = calls as f64;
    let base = 16.0 * l2_eff(params) * c * n.log2() / (params.mu_f.powf(2.0 / params.rho) * prox.mu() * n);
    Ok(4.0 * base.powf(params.rho / (2.0 * (params.rho - 1.0))))
}

/// Confidence certificate `eps(N, alpha)` of the adaptive-s scheme for
/// caller-supplied `(rho, mu(f))`. `N_0 + 1` is the number of calls per stage.
pub fn adaptive_certificate(params: &ConvexityParams, prox: &ProxFunction, calls: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("alpha", format!("need 0 < alpha < 1, got {alpha}")));
    }
    let m = adaptive_stage_count(prox, prox.a(), calls);
    if calls < 4 || m < 1 {
        return Err(Error::invalid("calls", "budget too small for the adaptive certificate"));
    }
    let n0_plus_1 = adaptive_stage_calls(calls, m as usize) as f64;
    let rho = params.rho;
    let a = 4.0 * (16.0 / (n0_plus_1 * params.mu_f.powf(2.0 / rho))).powf(rho / (2.0 * (rho - 1.0)));
    let dev = (3.0 * ((calls as f64).log2() / (2.0 * alpha)).ln()).max(0.0).sqrt();
    let b = (l2_eff(params) * prox.a() / (2.0 * prox.mu())).sqrt() + params.sigma * dev;
    Ok(a * b.powf(rho / (rho - 1.0)))
}
