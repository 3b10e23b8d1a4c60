//! Support function of `Q ∩ B_R(z)`: `max { <s, x - z> : x in Q, ||x - z|| <= R }`.

use crate::error::{check_dim, Error, Result};
use crate::geometry::NormKind;
use crate::linalg;
use crate::roots::{solve_decreasing, RootOptions};

use super::{FeasibleSet, ProxSetup, SetKind};

/// Exact support function of the trust region `Q ∩ B_R(z)` in the norm of
/// the setup, with a maximizer.
pub fn support(setup: &ProxSetup, z: &[f64], radius: f64, s: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = setup.dim();
    check_dim(n, z.len())?;
    check_dim(n, s.len())?;
    if !(radius >= 0.0) {
        return Err(Error::invalid("radius", format!("must be nonnegative, got {radius}")));
    }
    if radius == 0.0 || s.iter().all(|&v| v == 0.0) {
        return Ok((0.0, z.to_vec()));
    }
    let set = setup.set();
    let x = match (setup.norm().kind(), set.kind()) {
        (NormKind::L2, SetKind::FullSpace) => {
            let ns = linalg::norm2(s);
            z.iter().zip(s).map(|(zi, si)| zi + radius * si / ns).collect()
        }
        (NormKind::L2, SetKind::EuclideanBall { radius: r }) => two_balls(z, radius, *r, s),
        (NormKind::L2, _) => parametric_projection(set, z, radius, s)?,
        (NormKind::L1, SetKind::FullSpace) => {
            let (j, _) = best_abs(s);
            let mut x = z.to_vec();
            x[j] += radius * s[j].signum();
            x
        }
        (NormKind::L1, SetKind::Simplex) => simplex_transfer(z, radius, s),
        (NormKind::L1, SetKind::L1Ball { radius: r }) => l1_ball_transfer(z, radius, *r, s),
        (kind, _) => {
            return Err(Error::Unsupported(format!(
                "support function for {kind:?} trust region on the {}",
                set.name()
            )))
        }
    };
    let d = linalg::sub(&x, z);
    Ok((linalg::dot(s, &d), x))
}

/// Lowest index attaining `max |s_j|`.
fn best_abs(s: &[f64]) -> (usize, f64) {
    let mut best = (0, s[0].abs());
    for (j, v) in s.iter().enumerate().skip(1) {
        if v.abs() > best.1 {
            best = (j, v.abs());
        }
    }
    best
}

/// `max <s, x>` over `||x||_2 <= r`, `||x - z||_2 <= R`.
fn two_balls(z: &[f64], trust: f64, r: f64, s: &[f64]) -> Vec<f64> {
    let ns = linalg::norm2(s);
    let dir: Vec<f64> = s.iter().map(|v| v / ns).collect();
    let x1: Vec<f64> = dir.iter().map(|d| r * d).collect();
    if linalg::dist2(&x1, z) <= trust {
        return x1;
    }
    let x2: Vec<f64> = z.iter().zip(&dir).map(|(zi, d)| zi + trust * d).collect();
    if linalg::norm2(&x2) <= r {
        return x2;
    }
    // both spheres are active: maximize over their intersection
    let nz = linalg::norm2(z);
    let e: Vec<f64> = z.iter().map(|v| v / nz).collect();
    let h = (r * r - trust * trust + nz * nz) / (2.0 * nz);
    let rho = (r * r - h * h).max(0.0).sqrt();
    let se = linalg::dot(s, &e);
    let perp: Vec<f64> = s.iter().zip(&e).map(|(si, ei)| si - se * ei).collect();
    let np = linalg::norm2(&perp);
    e.iter()
        .zip(&perp)
        .map(|(ei, pi)| h * ei + if np > 0.0 { rho * pi / np } else { 0.0 })
        .collect()
}

/// `x(t) = P_Q(z + t s)` traces the maximizers of `<s, x>` over
/// `Q ∩ B_R(z)` as `R` grows, with `||x(t) - z||` nondecreasing in `t`.
fn parametric_projection(set: &FeasibleSet, z: &[f64], radius: f64, s: &[f64]) -> Result<Vec<f64>> {
    let at = |t: f64| -> Vec<f64> {
        let y: Vec<f64> = z.iter().zip(s).map(|(zi, si)| zi + t * si).collect();
        set.project(&y)
    };
    let mut t = radius / linalg::norm2(s);
    let mut dist = linalg::dist2(&at(t), z);
    let mut grown = 0;
    while dist < radius {
        let t2 = 2.0 * t;
        let x2 = at(t2);
        let d2 = linalg::dist2(&x2, z);
        grown += 1;
        if d2 <= dist * (1.0 + 1e-15) || grown > 2000 {
            // the projection stalled on the maximizing face of Q
            return Ok(x2);
        }
        t = t2;
        dist = d2;
    }
    let mut f = |t: f64| radius - linalg::dist2(&at(t), z);
    let (lo, _) = solve_decreasing(
        "support trust radius",
        &mut f,
        0.0,
        t,
        RootOptions {
            xtol: 1e-13 * t,
            ..RootOptions::default()
        },
    )?;
    Ok(at(lo))
}

/// Simplex with an `l1` trust region: move mass from the cheapest
/// coordinates to the best one, two units of trust per unit of mass.
fn simplex_transfer(z: &[f64], radius: f64, s: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut best = 0;
    for j in 1..n {
        if s[j] > s[best] {
            best = j;
        }
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| i != best).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]).then(a.cmp(&b)));
    let mut x = z.to_vec();
    let mut budget = 0.5 * radius;
    for i in order {
        if budget <= 0.0 || s[best] - s[i] <= 0.0 {
            break;
        }
        let m = z[i].max(0.0).min(budget);
        x[i] -= m;
        x[best] += m;
        budget -= m;
    }
    x
}

/// `l1` ball of radius `r` with an `l1` trust region of radius `R`.
///
/// Moves are: shrinking `|x_i|` toward zero (gain `-s_i sign z_i` per
/// unit, frees one unit of ball budget) and growing the best coordinate
/// `j*` in the direction of `s_j*` (gain `||s||_inf`, uses one unit).
/// With `B` the total shrink amount (filled greedily by gain), the value
/// `||s||_inf * min(R - B, F + B)^+ + G(B)` is concave piecewise linear in
/// `B`, so checking its breakpoints is exact. `F = r - ||z||_1`.
fn l1_ball_transfer(z: &[f64], trust: f64, r: f64, s: &[f64]) -> Vec<f64> {
    let (j, top) = best_abs(s);
    let free = (r - linalg::norm1(z)).max(0.0);
    let mut sources: Vec<(usize, f64, f64)> = z
        .iter()
        .enumerate()
        .filter(|(_, zi)| **zi != 0.0)
        .map(|(i, zi)| (i, -s[i] * zi.signum(), zi.abs()))
        .collect();
    sources.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let total_cap: f64 = sources.iter().map(|t| t.2).sum();
    let b_max = trust.min(total_cap);

    let gain_of = |b: f64| -> f64 {
        let mut left = b;
        let mut g = 0.0;
        for &(_, gi, cap) in &sources {
            if left <= 0.0 {
                break;
            }
            let m = cap.min(left);
            g += gi * m;
            left -= m;
        }
        g
    };
    let grow_of = |b: f64| (trust - b).min(free + b).max(0.0);
    let value = |b: f64| top * grow_of(b) + gain_of(b);

    let mut candidates = vec![0.0, b_max];
    let mut cum = 0.0;
    for &(_, _, cap) in &sources {
        cum += cap;
        if cum < b_max {
            candidates.push(cum);
        }
    }
    let mid = 0.5 * (trust - free);
    if mid > 0.0 && mid < b_max {
        candidates.push(mid);
    }
    candidates.sort_by(|a, b| a.total_cmp(b));
    let mut best = (f64::NEG_INFINITY, 0.0);
    for b in candidates {
        let v = value(b);
        if v > best.0 {
            best = (v, b);
        }
    }

    let b = best.1;
    let mut x = z.to_vec();
    let mut left = b;
    for &(i, _, cap) in &sources {
        if left <= 0.0 {
            break;
        }
        let m = cap.min(left);
        x[i] -= m * z[i].signum();
        left -= m;
    }
    x[j] += grow_of(b) * s[j].signum();
    x
}
