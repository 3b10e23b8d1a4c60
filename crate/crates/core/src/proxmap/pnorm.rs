//! Prox-mapping of `½||x||_p²` over the `l1` trust ball.

use crate::geometry::{conjugate_exponent, lp_norm};
use crate::linalg;
use crate::error::Result;
use crate::roots::{solve_decreasing, RootOptions};

/// Gradient of `½||w||_q²`: `||w||_q^{2-q} |w_i|^{q-1} sign(w_i)`.
pub fn half_sq_norm_gradient(w: &[f64], q: f64) -> Vec<f64> {
    let nq = lp_norm(w, q);
    if nq == 0.0 {
        return vec![0.0; w.len()];
    }
    w.iter()
        .map(|&wi| (nq * (wi.abs() / nq).powf(q - 1.0)).copysign(wi))
        .collect()
}

fn soft_threshold(s: &[f64], k: f64) -> Vec<f64> {
    s.iter().map(|&v| (v.abs() - k).max(0.0) * v.signum()).collect()
}

/// Maximizes `<st, y> - ½||y||_p²` over `||y||_1 <= 1`.
///
/// The unconstrained maximizer is the conjugate gradient `∇½||st||_q²`.
/// When it leaves the `l1` ball the optimality conditions give
/// `y = ∇½||soft(st, k)||_q²` for the multiplier `k` making `||y||_1 = 1`.
pub(crate) fn pnorm_unit_prox(st: &[f64], p: f64) -> Result<Vec<f64>> {
    let q = conjugate_exponent(p);
    let y = half_sq_norm_gradient(st, q);
    if linalg::norm1(&y) <= 1.0 {
        return Ok(y);
    }
    // the l1 mass is nonincreasing in the threshold and vanishes at ||st||_inf
    let mut excess = |k: f64| linalg::norm1(&half_sq_norm_gradient(&soft_threshold(st, k), q)) - 1.0;
    let (_lo, hi) = solve_decreasing("p-norm threshold", &mut excess, 0.0, linalg::norm_inf(st), RootOptions::default())?;
    Ok(half_sq_norm_gradient(&soft_threshold(st, hi), q))
}
