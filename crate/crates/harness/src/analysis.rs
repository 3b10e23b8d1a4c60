//! Post-processing of run summaries: sample statistics, rate fits and
//! coverage checks.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (0 for a single value).
    pub std: f64,
    /// Standard error of the mean.
    pub se: f64,
    pub min: f64,
    pub max: f64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn stats(values: &[f64]) -> Option<Stats> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Stats {
        count: n,
        mean,
        std: var.sqrt(),
        se: (var / n as f64).sqrt(),
        min: sorted[0],
        max: sorted[n - 1],
        q10: quantile(&sorted, 0.1),
        q50: quantile(&sorted, 0.5),
        q90: quantile(&sorted, 0.9),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub used: usize,
    /// Points dropped because the gap was zero, negative or not finite.
    pub excluded: usize,
}

/// Least-squares fit of `log(gap)` on `log(N)`.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    let good: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, g)| *n > 0.0 && *g > 0.0 && g.is_finite())
        .map(|(n, g)| (n.ln(), g.ln()))
        .collect();
    let excluded = points.len() - good.len();
    if good.len() < 3 {
        bail!("rate fit needs at least 3 positive gaps, got {} ({excluded} excluded)", good.len());
    }
    let k = good.len() as f64;
    let mx = good.iter().map(|p| p.0).sum::<f64>() / k;
    let my = good.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = good.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = good.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = good.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        bail!("rate fit needs at least two distinct budgets");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept,
        r2,
        used: good.len(),
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub trials: usize,
    pub violations: usize,
    pub rate: f64,
    /// `alpha + 3 sqrt(alpha (1 - alpha) / trials)`.
    pub limit: f64,
    pub pass: bool,
}

/// Fraction of trials whose gap exceeds the certificate `eps`.
pub fn coverage_check(gaps: &[Option<f64>], alpha: f64, eps: f64) -> Result<Coverage> {
    if !(alpha > 0.0 && alpha < 1.0) {
        bail!("alpha: need 0 < alpha < 1, got {alpha}");
    }
    if gaps.len() < 100 {
        bail!("coverage needs at least 100 trials, got {}", gaps.len());
    }
    let mut violations = 0;
    for g in gaps {
        match g {
            Some(g) => {
                if *g > eps {
                    violations += 1;
                }
            }
            None => bail!("coverage needs f* for every trial"),
        }
    }
    let trials = gaps.len();
    let rate = violations as f64 / trials as f64;
    let limit = alpha + 3.0 * (alpha * (1.0 - alpha) / trials as f64).sqrt();
    Ok(Coverage {
        trials,
        violations,
        rate,
        limit,
        pass: rate <= limit,
    })
}
