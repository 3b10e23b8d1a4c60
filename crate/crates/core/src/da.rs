//! Single-stage dual averaging on `Q_R(x̄) = Q ∩ B_R(x̄)`.
//!
//! Iterates `x_0 = x̄`, `s_{k+1} = s_k + lambda_k g_k`,
//! `x_{k+1} = pi_{x̄,R,beta_{k+1}}(-s_{k+1})`; the output is the
//! `lambda`-weighted average of `x_0, ..., x_N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ProxFunction;
use crate::linalg::{self, CompensatedSum, CompensatedVec};
use crate::problems::{ConvexityParams, FirstOrderOracle};
use crate::proxmap::{prox_map, support, LocalProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Weights {
    Unit,
    /// `lambda_0, ..., lambda_N`.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Gain {
    /// `beta_i = gamma sqrt(N + 1)` for all `i`.
    Constant { gamma: f64 },
    /// `beta_0, ..., beta_{N+1}`, nondecreasing.
    Explicit(Vec<f64>),
}

/// Which iterations produce an [`IterRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RecordPolicy {
    Off,
    Every,
    /// About this many records per decade of iterations, plus the last one.
    PerDecade(u32),
}

impl RecordPolicy {
    fn wants(&self, k: usize, last: usize) -> bool {
        match *self {
            RecordPolicy::Off => false,
            RecordPolicy::Every => true,
            RecordPolicy::PerDecade(m) => {
                if k == last || k == 0 {
                    return true;
                }
                let m = m.max(1) as f64;
                // record when k + 1 crosses a point of the grid 10^(j/m)
                let a = ((k as f64).log10() * m).floor();
                let b = (((k + 1) as f64).log10() * m).floor();
                b > a
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaConfig {
    /// `N`; the run makes `N + 1` oracle calls.
    pub iterations: usize,
    pub weights: Weights,
    pub gain: Gain,
    pub record: RecordPolicy,
    /// Keep the dual witnesses `w(x_i)` returned by the oracle.
    pub collect_witnesses: bool,
}

impl DaConfig {
    pub fn constant(iterations: usize, gamma: f64) -> Self {
        Self {
            iterations,
            weights: Weights::Unit,
            gain: Gain::Constant { gamma },
            record: RecordPolicy::Off,
            collect_witnesses: false,
        }
    }

    pub fn with_record(mut self, record: RecordPolicy) -> Self {
        self.record = record;
        self
    }

    pub fn with_witnesses(mut self) -> Self {
        self.collect_witnesses = true;
        self
    }

    fn lambdas(&self) -> Result<Vec<f64>> {
        let n = self.iterations + 1;
        let l = match &self.weights {
            Weights::Unit => vec![1.0; n],
            Weights::Explicit(v) => {
                if v.len() != n {
                    return Err(Error::invalid("weights", format!("need {n} weights, got {}", v.len())));
                }
                v.clone()
            }
        };
        if l.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("weights", "must be positive and finite"));
        }
        Ok(l)
    }

    /// `beta_0, ..., beta_{N+1}`.
    pub fn betas(&self) -> Result<Vec<f64>> {
        let n = self.iterations + 2;
        let b = match &self.gain {
            Gain::Constant { gamma } => vec![gamma * ((self.iterations + 1) as f64).sqrt(); n],
            Gain::Explicit(v) => {
                if v.len() != n {
                    return Err(Error::invalid("gain", format!("need {n} values of beta, got {}", v.len())));
                }
                v.clone()
            }
        };
        if b.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("gain", "beta must be positive and finite"));
        }
        if b.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("gain", "beta must be nondecreasing"));
        }
        Ok(b)
    }
}

/// Accumulated state of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct DaState {
    /// `s_{k+1} = sum lambda_i g_i`.
    pub s: Vec<f64>,
    /// Latest iterate queried.
    pub x: Vec<f64>,
    weighted_sum: CompensatedVec,
    weight_total: CompensatedSum,
    sum_inner: CompensatedSum,
    sum_inner_exact: Option<CompensatedSum>,
    s_exact: Option<Vec<f64>>,
    /// `sum lambda_i² ||g_i||_*² / beta_i`.
    sq_term: CompensatedSum,
    /// Number of oracle answers absorbed.
    pub iter: usize,
    /// `beta_{k+1}` for the last absorbed answer.
    pub beta_next: f64,
}

impl DaState {
    fn new(center: &[f64]) -> Self {
        let n = center.len();
        Self {
            s: vec![0.0; n],
            x: center.to_vec(),
            weighted_sum: CompensatedVec::zeros(n),
            weight_total: CompensatedSum::default(),
            sum_inner: CompensatedSum::default(),
            sum_inner_exact: Some(CompensatedSum::default()),
            s_exact: Some(vec![0.0; n]),
            sq_term: CompensatedSum::default(),
            iter: 0,
            beta_next: 0.0,
        }
    }

    pub fn weight_total(&self) -> f64 {
        self.weight_total.value()
    }

    /// `sum lambda_i <g_i, x_i - x̄>`.
    pub fn sum_inner(&self) -> f64 {
        self.sum_inner.value()
    }

    /// The weighted average of the iterates absorbed so far.
    pub fn average(&self) -> Vec<f64> {
        let t = self.weight_total();
        self.weighted_sum.values().iter().map(|v| v / t).collect()
    }

    /// Gap value `delta = (sum_inner + max_{x in Q_R(x̄)} <-s, x - x̄>) / sum lambda`,
    /// from the subgradients the method saw.
    pub fn gap_value(&self, lp: &LocalProblem) -> Result<f64> {
        gap_from(lp, self.sum_inner(), &self.s, self.weight_total())
    }

    /// The same with the noise-free subgradients, when every answer had one.
    pub fn gap_value_exact(&self, lp: &LocalProblem) -> Result<Option<f64>> {
        match (&self.sum_inner_exact, &self.s_exact) {
            (Some(si), Some(s)) => Ok(Some(gap_from(lp, si.value(), s, self.weight_total())?)),
            _ => Ok(None),
        }
    }

    /// Both sides of the regret certificate at a point `x` of `Q_R(x̄)`:
    /// `sum lambda_i <g_i, x_i - x>` and
    /// `d_{x̄,R}(x) beta_{k+1} + R²/(2 mu(d)) sum lambda_i² ||g_i||_*² / beta_i`.
    pub fn certificate(&self, lp: &LocalProblem, x: &[f64]) -> Result<(f64, f64)> {
        let h = linalg::sub(x, lp.center());
        let lhs = self.sum_inner() - linalg::dot(&self.s, &h);
        let mu = lp.setup().prox().mu();
        let r = lp.radius();
        let rhs = lp.distance(x)? * self.beta_next + r * r / (2.0 * mu) * self.sq_term.value();
        Ok((lhs, rhs))
    }
}

fn gap_from(lp: &LocalProblem, sum_inner: f64, s: &[f64], total: f64) -> Result<f64> {
    let neg: Vec<f64> = s.iter().map(|v| -v).collect();
    let (sup, _) = support(lp.setup(), lp.center(), lp.radius(), &neg)?;
    Ok((sum_inner + sup) / total)
}

/// One trace row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    /// Oracle calls made by this run so far.
    pub oracle_calls: usize,
    /// `f(average) - f*`, when both are available.
    pub f_gap: Option<f64>,
    /// `||average - x*||` in the setup norm.
    pub dist_to_opt: Option<f64>,
    pub delta_observed: Option<f64>,
    pub delta_exact: Option<f64>,
    pub beta: f64,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct DaOutput {
    pub x_out: Vec<f64>,
    pub state: DaState,
    pub records: Vec<IterRecord>,
    pub witnesses: Vec<Vec<f64>>,
    /// Best queried point by observed value, when the oracle reveals values.
    pub best: Option<(Vec<f64>, f64)>,
}

/// Runs `N + 1` steps of dual averaging on `lp` (its `beta` is ignored).
pub fn da_run(oracle: &mut dyn FirstOrderOracle, lp: &LocalProblem, cfg: &DaConfig) -> Result<DaOutput> {
    crate::error::check_dim(lp.dim(), oracle.dim())?;
    let lambdas = cfg.lambdas()?;
    let betas = cfg.betas()?;
    let norm = lp.setup().norm();
    let optimum = oracle.optimum();
    let center = lp.center().to_vec();
    let calls_before = oracle.calls();

    let mut local = lp.clone();
    let mut st = DaState::new(&center);
    let mut records = Vec::new();
    let mut witnesses = Vec::new();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut x = center.clone();
    let last = cfg.iterations;

    for k in 0..=last {
        let ans = oracle.query(&x)?;
        let lam = lambdas[k];
        let g = &ans.subgradient;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("subgradient", format!("oracle returned a non-finite value at step {k}")));
        }
        let h = linalg::sub(&x, &center);
        st.weighted_sum.add_scaled(lam, &x);
        st.weight_total.add(lam);
        st.sum_inner.add(lam * linalg::dot(g, &h));
        let gn = norm.dual_norm_of(g);
        st.sq_term.add(lam * lam * gn * gn / betas[k]);
        linalg::add_scaled(&mut st.s, lam, g);
        match (&ans.exact_subgradient, st.sum_inner_exact.as_mut(), st.s_exact.as_mut()) {
            (Some(ge), Some(si), Some(se)) => {
                si.add(lam * linalg::dot(ge, &h));
                linalg::add_scaled(se, lam, ge);
            }
            _ => {
                st.sum_inner_exact = None;
                st.s_exact = None;
            }
        }
        if cfg.collect_witnesses {
            let w = ans
                .witness
                .ok_or_else(|| Error::Missing(format!("dual witness at step {k}")))?;
            witnesses.push(w);
        }
        if let Some(v) = ans.value {
            if best.as_ref().map_or(true, |(_, b)| v < *b) {
                best = Some((x.clone(), v));
            }
        }
        st.x = x.clone();
        st.iter = k + 1;
        st.beta_next = betas[k + 1];

        if cfg.record.wants(k, last) {
            let avg = st.average();
            let (f_gap, dist) = match &optimum {
                Some((xs, fs)) => (
                    oracle.evaluate(&avg).map(|v| v - fs),
                    Some(norm.norm_of(&linalg::sub(&avg, xs))),
                ),
                None => (None, None),
            };
            records.push(IterRecord {
                iter: k,
                oracle_calls: oracle.calls() - calls_before,
                f_gap,
                dist_to_opt: dist,
                delta_observed: st.gap_value(lp).ok(),
                delta_exact: st.gap_value_exact(lp).ok().flatten(),
                beta: betas[k + 1],
                radius: lp.radius(),
            });
        }

        if k < last {
            local.set_beta(betas[k + 1])?;
            let neg: Vec<f64> = st.s.iter().map(|v| -v).collect();
            x = prox_map(&local, &neg)?;
        }
    }

    Ok(DaOutput {
        x_out: st.average(),
        state: st,
        records,
        witnesses,
        best,
    })
}

/// Which constant-gain analysis to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundVariant {
    /// DA on `Q_R(x̄)` with `x*` in the ball: `d_{x̄,R}(x*) <= A(d)`.
    Ball { radius: f64 },
    /// Dilation `R` with `||x̄ - x*|| <= r`: `d_{x̄,R}(x*) <= C(d) r²/R²`.
    QuadraticGrowth { radius: f64, target: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalBounds {
    pub gamma: f64,
    /// Bound on `f(x_out) - f*` (in expectation when `sigma > 0`).
    pub f_gap_bound: f64,
    /// `(f_gap_bound / mu(f))^(1/rho)` when `mu(f) > 0`.
    pub dist_bound: Option<f64>,
    /// `f_gap_bound + 2 R sigma sqrt(3 ln(1/alpha) / (N + 1))`.
    pub confidence_bound: Option<f64>,
}

/// Recommended constant gain and the resulting bounds after `N + 1` steps.
/// With `sigma > 0` every `L²` becomes `L² + sigma²`.
pub fn theoretical_bounds(
    params: &ConvexityParams,
    prox: &ProxFunction,
    variant: BoundVariant,
    iterations: usize,
    alpha: Option<f64>,
) -> Result<TheoreticalBounds> {
    let l = (params.lipschitz.powi(2) + params.sigma.powi(2)).sqrt();
    let mu = prox.mu();
    let n1 = (iterations + 1) as f64;
    let (gamma, bound, big_r) = match variant {
        BoundVariant::Ball { radius } => {
            let a = prox.a();
            (l * radius / (2.0 * mu * a).sqrt(), l * radius * (2.0 * a / (mu * n1)).sqrt(), radius)
        }
        BoundVariant::QuadraticGrowth { radius, target } => {
            let c = prox
                .c()
                .ok_or_else(|| Error::Missing("quadratic-growth constant C(d) of this prox-function".into()))?;
            (
                radius * radius * l / (target * (2.0 * c * mu).sqrt()),
                target * l * (2.0 * c / (mu * n1)).sqrt(),
                radius,
            )
        }
    };
    let confidence = match alpha {
        None => None,
        Some(a) if a > 0.0 && a < 1.0 => {
            Some(bound + 2.0 * big_r * params.sigma * (3.0 * (1.0 / a).ln() / n1).sqrt())
        }
        Some(a) => return Err(Error::invalid("alpha", format!("need 0 < alpha < 1, got {a}"))),
    };
    Ok(TheoreticalBounds {
        gamma,
        f_gap_bound: bound,
        dist_bound: (params.mu_f > 0.0).then(|| (bound / params.mu_f).powf(1.0 / params.rho)),
        confidence_bound: confidence,
    })
}
