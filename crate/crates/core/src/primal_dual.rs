//! Duality-gap certificates for saddle-structured objectives
//! `f(x) = max_{w in S} Psi(x, w)`.
//!
//! The oracle reports `w(x_i)` with every answer; averaging the witnesses of
//! the last restart stage gives a dual point whose value `eta(w̄)` certifies
//! the primal output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multistage::Trace;
use crate::problems::{Objective, SaddlePNorm};

/// A saddle objective with a computable dual function `eta(w) = min_Q Psi(., w)`.
pub trait SaddleDual {
    fn primal_value(&self, x: &[f64]) -> f64;
    fn dual_value(&self, w: &[f64]) -> Result<f64>;
}

impl SaddleDual for SaddlePNorm {
    fn primal_value(&self, x: &[f64]) -> f64 {
        self.value(x)
    }

    fn dual_value(&self, w: &[f64]) -> Result<f64> {
        SaddlePNorm::dual_value(self, w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualAggregate {
    pub w_bar: Vec<f64>,
    /// Number of averaged witnesses, `N_m + 1`.
    pub count: usize,
    /// Stage the witnesses come from.
    pub stage: usize,
}

/// Plain average of witnesses.
pub fn aggregate_witnesses(witnesses: &[Vec<f64>], stage: usize) -> Result<DualAggregate> {
    let first = witnesses
        .first()
        .ok_or_else(|| Error::Missing("dual witnesses of the last stage".into()))?;
    let mut acc = crate::linalg::CompensatedVec::zeros(first.len());
    for w in witnesses {
        crate::error::check_dim(first.len(), w.len())?;
        acc.add_scaled(1.0, w);
    }
    let k = witnesses.len() as f64;
    Ok(DualAggregate {
        w_bar: acc.values().into_iter().map(|v| v / k).collect(),
        count: witnesses.len(),
        stage,
    })
}

/// Averages the last-stage witnesses stored in a run trace.
pub fn aggregate_dual(trace: &Trace) -> Result<DualAggregate> {
    let last = trace
        .stages
        .last()
        .ok_or_else(|| Error::Missing("stage records in the trace".into()))?;
    let agg = aggregate_witnesses(&trace.witnesses, last.stage.k)?;
    if agg.count != last.stage.iterations + 1 {
        return Err(Error::Missing(format!(
            "witnesses for all {} queries of stage {} (got {})",
            last.stage.iterations + 1,
            last.stage.k,
            agg.count
        )));
    }
    Ok(agg)
}

/// `C(rho) = 1 + 3 (6^(1/(rho-1)) + 2^(1/rho) rho^(1/(rho-1))) / rho^(rho/(rho-1)) + 6 / (2^((rho-1)/rho) rho)`.
pub fn general_gap_coefficient(rho: f64) -> f64 {
    let e = 1.0 / (rho - 1.0);
    1.0 + 3.0 * (6f64.powf(e) + 2f64.powf(1.0 / rho) * rho.powf(e)) / rho.powf(rho * e)
        + 6.0 / (2f64.powf((rho - 1.0) / rho) * rho)
}

/// Gap coefficient used for certification: the sharper 8.5 for `rho = 2`,
/// [`general_gap_coefficient`] otherwise.
pub fn gap_coefficient(rho: f64) -> f64 {
    if rho == 2.0 {
        8.5
    } else {
        general_gap_coefficient(rho)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCertificate {
    pub primal: f64,
    pub dual: f64,
    /// `f(x_hat) - eta(w̄)`.
    pub gap: f64,
    pub eps: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Compares the duality gap of `(x_hat, w̄)` with `C(rho) eps`.
pub fn certify_gap<P: SaddleDual + ?Sized>(
    x_hat: &[f64],
    agg: &DualAggregate,
    problem: &P,
    eps: f64,
    rho: f64,
) -> Result<GapCertificate> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", format!("must be positive, got {eps}")));
    }
    if !(rho >= 2.0) {
        return Err(Error::invalid("rho", format!("need rho >= 2, got {rho}")));
    }
    let primal = problem.primal_value(x_hat);
    let dual = problem.dual_value(&agg.w_bar)?;
    let gap = primal - dual;
    let bound = gap_coefficient(rho) * eps;
    Ok(GapCertificate {
        primal,
        dual,
        gap,
        eps,
        bound,
        pass: gap <= bound,
    })
}
