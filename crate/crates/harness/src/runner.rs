//! Builds problems from a config and runs seeded trials.

use anyhow::{anyhow, bail, Context, Result};
use dualavg::da::{da_run, theoretical_bounds, BoundVariant, DaConfig, IterRecord};
use dualavg::linalg;
use dualavg::multistage::{
    accuracy_budget, adaptive_bound, adaptive_certificate, adaptive_stage_count, budget_bound, run_adaptive,
    run_multistage, schedule_budget, stoca_bound, AdaptiveParams, AdaptiveVariant, Mode, MultistageOutput, RunParams,
    Scheme, Trace,
};
use dualavg::primal_dual::{aggregate_dual, certify_gap, GapCertificate};
use dualavg::problems::{
    ConvexityParams, DeterministicOracle, FirstOrderOracle, HardInstance, NoiseModel, PowerObjective,
    ResistingOracle, SaddlePNorm, StochasticOracle,
};
use dualavg::proxmap::{LocalProblem, ProxSetup, SetKind};
use serde::{Deserialize, Serialize};

use crate::config::{parse_record, ExperimentConfig, Method, ProblemSpec, ProxSpec};

#[derive(Debug, Clone)]
enum Problem {
    Power(PowerObjective),
    Saddle(SaddlePNorm),
    Resisting(HardInstance),
}

/// A validated config with everything needed to run trials.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub setup: ProxSetup,
    pub params: ConvexityParams,
    pub x0: Vec<f64>,
    pub r0: f64,
    problem: Problem,
}

/// Default minimizer of the power family: off-center but well inside `Q`.
fn default_x_star(kind: &SetKind, n: usize) -> Vec<f64> {
    match kind {
        SetKind::Simplex => {
            let mut x = vec![1.0 / (n + 1) as f64; n];
            x[0] = 2.0 / (n + 1) as f64;
            x
        }
        SetKind::EuclideanBall { radius } | SetKind::L1Ball { radius } => {
            let mut x = vec![0.0; n];
            x[0] = 0.3 * radius;
            if n > 1 {
                x[n - 1] = -0.2 * radius;
            }
            x
        }
        SetKind::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| a + 0.6 * (b - a)).collect(),
        SetKind::FullSpace => {
            let mut x = vec![0.0; n];
            x[0] = 0.3;
            x
        }
    }
}

impl Prepared {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let mut config = config.clone();
        let setup = config.setup()?;
        let norm = setup.norm();
        let sigma = config.noise.sigma();
        let problem = match &mut config.problem {
            ProblemSpec::Power { dim, rho, kappa, x_star, .. } => {
                let xs = x_star.get_or_insert_with(|| default_x_star(setup.set().kind(), *dim)).clone();
                let f = PowerObjective::scaled(*rho, *kappa, xs, setup.set().clone()).context("problem")?;
                Problem::Power(f)
            }
            ProblemSpec::Saddle { q, .. } => {
                Problem::Saddle(SaddlePNorm::new(*q, setup.set().clone()).context("problem")?)
            }
            ProblemSpec::Resisting {
                dim,
                lipschitz,
                rho,
                radius,
                eps,
            } => Problem::Resisting(HardInstance::new(*dim, *lipschitz, *rho, *radius, *eps).context("problem")?),
        };
        let params = match &problem {
            Problem::Power(f) => f.params(&norm, sigma).context("problem parameters")?,
            Problem::Saddle(f) => f.params(&norm, sigma).context("problem parameters")?,
            Problem::Resisting(h) => h.params(),
        };
        let x0 = config.x0()?;
        if !setup.set().contains(&x0) {
            bail!("algorithm.x0: lies outside the {}", setup.set().name());
        }
        let r0 = config.r0(&setup)?;
        config.algorithm.x0 = Some(x0.clone());
        config.algorithm.r0 = Some(r0);
        config.prox.get_or_insert(ProxSpec::Euclid);
        if config.algorithm.method == Method::Adaptive {
            config.algorithm.variant.get_or_insert(AdaptiveVariant::Deterministic);
        } else if config.algorithm.method == Method::Multistage {
            config.algorithm.scheme.get_or_insert(Scheme::Ball);
        }
        if config.algorithm.variant == Some(AdaptiveVariant::AdaptiveS) {
            config.algorithm.alpha.get_or_insert(0.1);
        }
        Ok(Self {
            config,
            setup,
            params,
            x0,
            r0,
            problem,
        })
    }

    pub fn stochastic(&self) -> bool {
        self.config.noise != NoiseModel::None
    }

    pub fn is_resisting(&self) -> bool {
        matches!(self.problem, Problem::Resisting(_))
    }

    /// Budget used by a plain `run`.
    pub fn default_budget(&self) -> Option<usize> {
        self.config.algorithm.budget
    }

    fn mode(&self, budget: Option<usize>) -> Result<Mode> {
        match (budget, self.config.algorithm.eps) {
            (Some(calls), _) => Ok(Mode::FixedBudget { calls }),
            (None, Some(eps)) => Ok(Mode::TargetAccuracy { eps }),
            (None, None) => Err(anyhow!("algorithm: no budget and no eps")),
        }
    }

    /// `(gamma, bound)` of single-stage DA with `calls` oracle calls on the
    /// ball of radius `R_0`.
    fn single_stage(&self, calls: usize, scheme: Scheme) -> Result<(f64, f64)> {
        let variant = match scheme {
            Scheme::Ball => BoundVariant::Ball { radius: self.r0 },
            Scheme::FixedDilation => BoundVariant::QuadraticGrowth {
                radius: self.r0,
                target: self.r0,
            },
        };
        let b = theoretical_bounds(&self.params, self.setup.prox(), variant, calls.max(1) - 1, None)?;
        Ok((b.gamma, b.f_gap_bound))
    }

    /// The guarantee the run is checked against, if the method has one at this budget.
    pub fn bound(&self, budget: Option<usize>) -> Result<Option<f64>> {
        let prox = self.setup.prox();
        if let Problem::Resisting(h) = &self.problem {
            return Ok(Some(h.eps));
        }
        let a = &self.config.algorithm;
        Ok(match a.method {
            Method::Da => {
                let calls = budget.ok_or_else(|| anyhow!("algorithm.budget: required"))?;
                match a.gamma {
                    None => Some(self.single_stage(calls, Scheme::Ball)?.1),
                    Some(_) => None,
                }
            }
            Method::Multistage => match self.mode(budget)? {
                Mode::TargetAccuracy { eps } => Some(eps),
                Mode::FixedBudget { calls } => {
                    let scheme = self.config.scheme();
                    match schedule_budget(&self.params, prox, scheme, self.r0, calls)? {
                        Some(_) => Some(budget_bound(&self.params, prox, scheme, calls)?),
                        None => Some(self.single_stage(calls, scheme)?.1),
                    }
                }
            },
            Method::Adaptive => {
                let calls = budget.ok_or_else(|| anyhow!("algorithm.budget: required"))?;
                let variant = self.config.variant();
                let k_const = match variant {
                    AdaptiveVariant::Stoca => prox.c().unwrap_or(f64::NAN),
                    _ => prox.a(),
                };
                if calls < 4 || adaptive_stage_count(prox, k_const, calls) < 1 {
                    None
                } else {
                    match variant {
                        AdaptiveVariant::Deterministic => Some(adaptive_bound(&self.params, prox, calls)),
                        AdaptiveVariant::Stoca => Some(stoca_bound(&self.params, prox, calls)?),
                        AdaptiveVariant::AdaptiveS => Some(adaptive_certificate(
                            &self.params,
                            prox,
                            calls,
                            a.alpha.unwrap_or(0.1),
                        )?),
                    }
                }
            }
        })
    }

    /// Oracle-call budget implied by a target accuracy.
    pub fn accuracy_budget(&self) -> Result<Option<f64>> {
        match (self.config.algorithm.method, self.config.algorithm.eps) {
            (Method::Multistage, Some(eps)) if !self.is_resisting() => Ok(Some(accuracy_budget(
                &self.params,
                self.setup.prox(),
                self.config.scheme(),
                eps,
            )?)),
            _ => Ok(None),
        }
    }

    fn base_oracle(&self, trial: u64) -> Result<Box<dyn FirstOrderOracle>> {
        let noise = self.config.noise;
        let norm = self.setup.norm();
        let seed = self.config.seed;
        Ok(match &self.problem {
            Problem::Power(f) => wrap(DeterministicOracle::new(f.clone()), noise, norm, seed, trial)?,
            Problem::Saddle(f) => wrap(DeterministicOracle::new(f.clone()), noise, norm, seed, trial)?,
            Problem::Resisting(_) => unreachable!("resisting oracles are built separately"),
        })
    }

    /// Runs one trial. `budget = None` uses the target accuracy.
    pub fn run_trial(&self, trial: u64, budget: Option<usize>) -> Result<TrialOutcome> {
        match &self.problem {
            Problem::Resisting(h) => {
                let mut o = ResistingOracle::new(*h);
                let ex = self.execute(&mut o, budget)?;
                let gap = o.frozen_instance().gap_lower_bound(&ex.x_hat);
                Ok(self.outcome(trial, budget, o.calls(), Some(gap), None, ex))
            }
            _ => {
                let mut o = self.base_oracle(trial)?;
                let ex = self.execute(o.as_mut(), budget)?;
                let (f_gap, dist) = match o.optimum() {
                    Some((xs, fs)) => (
                        o.evaluate(&ex.x_hat).map(|v| v - fs),
                        Some(self.setup.norm().norm(&linalg::sub(&ex.x_hat, &xs))?),
                    ),
                    None => (None, None),
                };
                Ok(self.outcome(trial, budget, o.calls(), f_gap, dist, ex))
            }
        }
    }

    fn outcome(
        &self,
        trial: u64,
        budget: Option<usize>,
        calls: usize,
        f_gap: Option<f64>,
        dist: Option<f64>,
        ex: Execution,
    ) -> TrialOutcome {
        TrialOutcome {
            trial,
            budget,
            oracle_calls: calls,
            f_gap,
            dist_to_opt: dist,
            stages: ex.stages,
            warnings: ex.warnings,
            dual: ex.dual,
            rows: ex
                .rows
                .into_iter()
                .map(|(stage, r)| TraceRow::new(trial, stage, r))
                .collect(),
        }
    }

    fn execute(&self, oracle: &mut dyn FirstOrderOracle, budget: Option<usize>) -> Result<Execution> {
        let a = &self.config.algorithm;
        let record = parse_record(&a.record)?;
        match a.method {
            Method::Da => {
                let calls = budget.ok_or_else(|| anyhow!("algorithm.budget: required"))?;
                if calls == 0 {
                    bail!("algorithm.budget: must be positive");
                }
                let gamma = match a.gamma {
                    Some(g) => g,
                    None => self.single_stage(calls, Scheme::Ball)?.0,
                };
                let iterations = calls - 1;
                let lp = LocalProblem::new(self.setup.clone(), self.x0.clone(), self.r0, gamma * (calls as f64).sqrt())?;
                let out = da_run(oracle, &lp, &DaConfig::constant(iterations, gamma).with_record(record))?;
                let mut rows: Vec<(usize, IterRecord)> = out.records.into_iter().map(|r| (1, r)).collect();
                if rows.is_empty() {
                    let (f_gap, dist) = match oracle.optimum() {
                        Some((xs, fs)) => (
                            oracle.evaluate(&out.x_out).map(|v| v - fs),
                            Some(self.setup.norm().norm(&linalg::sub(&out.x_out, &xs))?),
                        ),
                        None => (None, None),
                    };
                    rows.push((
                        1,
                        IterRecord {
                            iter: iterations,
                            oracle_calls: calls,
                            f_gap,
                            dist_to_opt: dist,
                            delta_observed: out.state.gap_value(&lp).ok(),
                            delta_exact: out.state.gap_value_exact(&lp).ok().flatten(),
                            beta: lp.beta(),
                            radius: self.r0,
                        },
                    ));
                }
                Ok(Execution {
                    x_hat: out.x_out,
                    rows,
                    stages: 1,
                    warnings: vec![],
                    dual: None,
                })
            }
            Method::Multistage => {
                let mut rp = RunParams::new(
                    self.mode(budget)?,
                    self.config.scheme(),
                    self.params,
                    self.setup.clone(),
                    self.x0.clone(),
                    self.r0,
                );
                rp.record = record;
                rp.collect_witnesses = a.certify_dual;
                let out = run_multistage(oracle, &rp)?;
                let dual = match (&self.problem, a.certify_dual, a.eps) {
                    (Problem::Saddle(f), true, Some(eps)) => {
                        let agg = aggregate_dual(&out.trace)?;
                        Some(certify_gap(&out.x_hat, &agg, f, eps, self.params.rho)?)
                    }
                    _ => None,
                };
                Ok(Execution::from_multistage(out, dual))
            }
            Method::Adaptive => {
                let calls = budget.ok_or_else(|| anyhow!("algorithm.budget: required"))?;
                let ap = AdaptiveParams {
                    calls,
                    setup: self.setup.clone(),
                    x0: self.x0.clone(),
                    r0: self.r0,
                    lipschitz: self.params.lipschitz,
                    sigma: self.params.sigma,
                    variant: self.config.variant(),
                    record,
                    collect_witnesses: false,
                };
                Ok(Execution::from_multistage(run_adaptive(oracle, &ap)?, None))
            }
        }
    }
}

fn wrap<B: FirstOrderOracle + 'static>(
    base: B,
    noise: NoiseModel,
    norm: dualavg::geometry::NormPair,
    seed: u64,
    trial: u64,
) -> Result<Box<dyn FirstOrderOracle>> {
    Ok(match noise {
        NoiseModel::None => Box::new(base),
        _ => Box::new(StochasticOracle::new(base, noise, norm, seed, trial)?),
    })
}

struct Execution {
    x_hat: Vec<f64>,
    rows: Vec<(usize, IterRecord)>,
    stages: usize,
    warnings: Vec<String>,
    dual: Option<GapCertificate>,
}

impl Execution {
    fn from_multistage(out: MultistageOutput, dual: Option<GapCertificate>) -> Self {
        let Trace {
            stages,
            iterations,
            warnings,
            ..
        } = out.trace;
        let rows = if iterations.is_empty() {
            stages
                .iter()
                .map(|s| {
                    (
                        s.stage.k,
                        IterRecord {
                            iter: s.stage.iterations,
                            oracle_calls: s.oracle_calls,
                            f_gap: s.f_gap,
                            dist_to_opt: s.dist_to_opt,
                            delta_observed: s.delta_observed,
                            delta_exact: s.delta_exact,
                            beta: s.beta,
                            radius: s.stage.ball_radius,
                        },
                    )
                })
                .collect()
        } else {
            iterations
        };
        Self {
            x_hat: out.x_hat,
            rows,
            stages: stages.len(),
            warnings,
            dual,
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub trial: u64,
    pub stage: usize,
    pub record: IterRecord,
}

impl TraceRow {
    fn new(trial: u64, stage: usize, record: IterRecord) -> Self {
        Self { trial, stage, record }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub budget: Option<usize>,
    pub oracle_calls: usize,
    /// `f(x_hat) - f*`; for the resisting oracle a lower bound on it.
    pub f_gap: Option<f64>,
    pub dist_to_opt: Option<f64>,
    pub stages: usize,
    pub warnings: Vec<String>,
    pub dual: Option<GapCertificate>,
    #[serde(skip)]
    pub rows: Vec<TraceRow>,
}
