//! Prox-mappings of the symmetrized entropy.
//!
//! All solvers work in the scaled variables of the unit ball: with
//! `s~ = R s / beta` and `zeta = z / R` the prox-mapping becomes
//!
//! ```text
//! min  sum_i [ -s~_i u_i + s~_i v_i + psi(u_i) + psi(v_i) ]
//! s.t. u, v >= 0,  sum (u + v) = 1,  plus the constraints of Q,
//! ```
//!
//! and the answer is `x = z + R (u - v)`. Coupling constraints are
//! dualized; each coordinate then separates into a two-variable problem
//! solved in closed form by [`solve_2d_entropy`].

use std::cell::{Cell, RefCell};

use crate::error::{Error, Result};
use crate::geometry::{xlogx, ProxKind};
use crate::linalg;
use crate::roots::{expand_bracket, find_root_decreasing, solve_decreasing, RootOptions};

use super::{LocalProblem, SetKind};

const LN_MIN: f64 = -690.7755278982137; // ln 1e-300
const LN_MAX: f64 = 690.0;

fn clamped_exp(l: f64) -> f64 {
    l.clamp(LN_MIN, LN_MAX).exp()
}

/// Minimizes `s u + t v + u ln u + v ln v` subject to `u >= v - z`.
///
/// The equality-constrained pair `u = (sqrt(z² + 4e^{-2-s-t}) - z)/2`,
/// `v = (sqrt(z² + 4e^{-2-s-t}) + z)/2` is accepted when the partial
/// derivatives there satisfy `ψ'_u + ψ'_v = 0` and `ψ'_u - ψ'_v > 0`
/// (a positive multiplier on the constraint); otherwise the unconstrained
/// minimizer `(e^{-1-s}, e^{-1-t})` is returned. Results are clamped to
/// `[1e-300, e^690]`.
pub fn solve_2d_entropy(s: f64, t: f64, z: f64) -> (f64, f64) {
    let (lu, lv) = solve_2d_entropy_ln(s, t, z);
    (clamped_exp(lu), clamped_exp(lv))
}

/// Same as [`solve_2d_entropy`] but returns `(ln u, ln v)`.
pub fn solve_2d_entropy_ln(s: f64, t: f64, z: f64) -> (f64, f64) {
    let lc = -2.0 - s - t;
    let (lu, lv) = if z == 0.0 {
        (0.5 * lc, 0.5 * lc)
    } else {
        // the larger root is (sqrt(z² + 4c) + |z|)/2; the smaller is c / larger
        let lz = z.abs().ln();
        let lroot = 0.5 * linalg::log_add_exp(2.0 * lz, 4f64.ln() + lc);
        let lbig = linalg::log_add_exp(lroot, lz) - std::f64::consts::LN_2;
        let lsmall = lc - lbig;
        if z > 0.0 {
            (lsmall, lbig)
        } else {
            (lbig, lsmall)
        }
    };
    let du = s + 1.0 + lu;
    let dv = t + 1.0 + lv;
    if (du + dv).abs() <= 1e-9 * (1.0 + du.abs()) && du - dv > 0.0 {
        (lu, lv)
    } else {
        (-1.0 - s, -1.0 - t)
    }
}

fn objective_2d(a: f64, b: f64, u: f64, v: f64) -> f64 {
    a * u + b * v + xlogx(u) + xlogx(v)
}

/// Scaled data of a local problem: `s~ = R s / beta`, `zeta = z / R`.
fn scaled(lp: &LocalProblem, s: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let r = lp.radius();
    let k = r / lp.beta();
    let st = s.iter().map(|v| k * v).collect();
    let zeta = lp.center().iter().map(|v| v / r).collect();
    (st, zeta)
}

/// Initial guess for the normalization multiplier: its exact value when
/// only `sum (u + v) = 1` is active.
fn lambda_guess(st: &[f64]) -> f64 {
    linalg::log_sum_exp(st.iter().flat_map(|&v| [v, -v])) - 1.0
}

fn assemble(lp: &LocalProblem, u: &[f64], v: &[f64]) -> Vec<f64> {
    let r = lp.radius();
    lp.center()
        .iter()
        .zip(u.iter().zip(v))
        .map(|(zi, (ui, vi))| zi + r * (ui - vi))
        .collect()
}

/// Closed-form prox-mapping on the whole space: `u ∝ e^{s~}`, `v ∝ e^{-s~}`.
pub(crate) fn gibbs_prox(lp: &LocalProblem, s: &[f64]) -> Vec<f64> {
    let (st, _) = scaled(lp, s);
    let lse = linalg::log_sum_exp(st.iter().flat_map(|&v| [v, -v]));
    let u: Vec<f64> = st.iter().map(|v| (v - lse).exp()).collect();
    let v: Vec<f64> = st.iter().map(|v| (-v - lse).exp()).collect();
    assemble(lp, &u, &v)
}

fn require(lp: &LocalProblem, want: &str, ok: bool) -> Result<()> {
    if lp.setup().prox().kind() != ProxKind::EntropySym || !ok {
        return Err(Error::Unsupported(format!(
            "{want} prox solver needs EntropySym on the {want}, got {:?} on the {}",
            lp.setup().prox().kind(),
            lp.setup().set().name()
        )));
    }
    Ok(())
}

/// Runs a closure-based root search whose residual may itself fail; the
/// first inner error wins over the generic bracketing report.
fn with_inner_error<T>(slot: &RefCell<Option<Error>>, res: Result<T>) -> Result<T> {
    match slot.borrow_mut().take() {
        Some(e) => Err(e),
        None => res,
    }
}

fn midpoint((lo, hi): (f64, f64)) -> f64 {
    0.5 * (lo + hi)
}

/// Entropy prox-mapping on the standard simplex.
///
/// Feasibility of `x = z + R(u - v)` reads `u_i >= v_i - zeta_i` and
/// `sum (u - v) = 0`. The first constraint stays inside the coordinate
/// subproblems; the balance constraint gets multiplier `mu` (inner root)
/// and the normalization `sum (u + v) = 1` gets `lambda` (outer root).
pub fn simplex_prox_dual(lp: &LocalProblem, s: &[f64]) -> Result<Vec<f64>> {
    require(lp, "simplex", matches!(lp.setup().set().kind(), SetKind::Simplex))?;
    crate::error::check_dim(lp.dim(), s.len())?;
    let (st, zeta) = scaled(lp, s);
    let n = st.len();
    let opts = RootOptions::default();
    let coords = |lam: f64, mu: f64, u: &mut [f64], v: &mut [f64]| {
        for i in 0..n {
            let (ui, vi) = solve_2d_entropy(-st[i] + lam + mu, st[i] + lam - mu, zeta[i]);
            u[i] = ui;
            v[i] = vi;
        }
    };
    let err = RefCell::new(None);
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    // Residuals are taken in log scale (same sign, same root): the masses
    // are close to exponential in the multipliers, so the secant steps
    // converge in a handful of iterations.
    let log_ratio = |u: &[f64], v: &[f64]| u.iter().sum::<f64>().ln() - v.iter().sum::<f64>().ln();
    // the balance multiplier moves little between outer iterations
    let last_mu: Cell<Option<f64>> = Cell::new(None);
    let balance_mu = |lam: f64, u: &mut [f64], v: &mut [f64]| -> Result<f64> {
        let (guess, width) = match last_mu.get() {
            Some(mu) => (mu, 1e-2),
            None => {
                coords(lam, 0.0, u, v);
                (0.5 * log_ratio(u, v), 0.5)
            }
        };
        let res = find_root_decreasing(
            "simplex balance multiplier",
            |mu| {
                coords(lam, mu, u, v);
                log_ratio(u, v)
            },
            guess,
            width,
            opts,
        )?;
        let mu = midpoint(res);
        last_mu.set(Some(mu));
        Ok(mu)
    };
    let outer = find_root_decreasing(
        "simplex mass multiplier",
        |lam| match balance_mu(lam, &mut u, &mut v) {
            Ok(mu) => {
                coords(lam, mu, &mut u, &mut v);
                u.iter().chain(v.iter()).sum::<f64>().ln()
            }
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        lambda_guess(&st),
        0.5,
        opts,
    );
    let lam = midpoint(with_inner_error(&err, outer)?);
    let mu = balance_mu(lam, &mut u, &mut v)?;
    coords(lam, mu, &mut u, &mut v);
    let mut x = assemble(lp, &u, &v);
    for xi in x.iter_mut() {
        // rounding can leave -1e-17 where the constraint is active
        *xi = xi.max(0.0);
    }
    Ok(x)
}

/// Per-coordinate minimizer of `a u + b v + psi(u) + psi(v) + mu |zeta + u - v|`.
///
/// Either `zeta + u - v >= 0` (w-branch) or `<= 0` (y-branch); each branch
/// is a [`solve_2d_entropy`] call and the smaller objective wins, the
/// w-branch on exact ties.
fn hyperoct_coord(a: f64, b: f64, mu: f64, zeta: f64) -> (f64, f64) {
    if mu == 0.0 {
        return (clamped_exp(-1.0 - a), clamped_exp(-1.0 - b));
    }
    let (uw, vw) = solve_2d_entropy(a + mu, b - mu, zeta);
    let (vy, uy) = solve_2d_entropy(b + mu, a - mu, -zeta);
    let ow = objective_2d(a, b, uw, vw) + mu * (zeta + uw - vw).abs();
    let oy = objective_2d(a, b, uy, vy) + mu * (zeta + uy - vy).abs();
    if oy < ow {
        (uy, vy)
    } else {
        (uw, vw)
    }
}

/// Entropy prox-mapping on an `l1` ball of radius `r` centred at the origin.
///
/// The ball constraint `sum |zeta_i + u_i - v_i| <= r / R` gets multiplier
/// `mu >= 0` (inner root, zero when slack) and the normalization gets
/// `lambda` (outer root).
pub fn hyperoct_prox_dual(lp: &LocalProblem, s: &[f64]) -> Result<Vec<f64>> {
    let radius = match lp.setup().set().kind() {
        SetKind::L1Ball { radius } => *radius,
        _ => 0.0,
    };
    require(lp, "l1 ball", radius > 0.0)?;
    crate::error::check_dim(lp.dim(), s.len())?;
    let (st, zeta) = scaled(lp, s);
    let n = st.len();
    let cap = radius / lp.radius();
    let opts = RootOptions::default();
    let coords = |lam: f64, mu: f64, u: &mut [f64], v: &mut [f64]| {
        for i in 0..n {
            let (ui, vi) = hyperoct_coord(-st[i] + lam, st[i] + lam, mu, zeta[i]);
            u[i] = ui;
            v[i] = vi;
        }
    };
    let excess = |u: &[f64], v: &[f64]| -> f64 {
        (0..n).map(|i| (zeta[i] + u[i] - v[i]).abs()).sum::<f64>().ln() - cap.ln()
    };
    let last_mu: Cell<Option<f64>> = Cell::new(None);
    let ball_mu = |lam: f64, u: &mut [f64], v: &mut [f64]| -> Result<f64> {
        coords(lam, 0.0, u, v);
        if excess(u, v) <= 0.0 {
            return Ok(0.0);
        }
        let mut f = |mu: f64| {
            coords(lam, mu, u, v);
            excess(u, v)
        };
        let (lo, hi) = match last_mu.get() {
            Some(m) if m > 0.0 => ((m - 1e-2).max(0.0), m + 1e-2),
            _ => (0.0, 1.0),
        };
        let (lo, hi) = expand_bracket("l1 ball multiplier", &mut f, lo, hi)?;
        let (lo, hi) = solve_decreasing("l1 ball multiplier", &mut f, lo.max(0.0), hi, opts)?;
        // the upper end keeps the ball constraint satisfied
        let mu = if lo == hi { lo } else { hi };
        last_mu.set(Some(mu));
        Ok(mu)
    };
    let err = RefCell::new(None);
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let outer = find_root_decreasing(
        "l1 ball mass multiplier",
        |lam| match ball_mu(lam, &mut u, &mut v) {
            Ok(mu) => {
                coords(lam, mu, &mut u, &mut v);
                u.iter().chain(v.iter()).sum::<f64>().ln()
            }
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        },
        lambda_guess(&st),
        0.5,
        opts,
    );
    let lam = midpoint(with_inner_error(&err, outer)?);
    let mu = ball_mu(lam, &mut u, &mut v)?;
    coords(lam, mu, &mut u, &mut v);
    Ok(assemble(lp, &u, &v))
}
