//! Bracketed scalar root finding for monotone residuals.
//!
//! Every multiplier search in the prox-mapping solvers reduces to finding
//! the zero of a nonincreasing function of one variable. The solver keeps a
//! sign-changing bracket at all times (Brent's method: inverse quadratic
//! interpolation and secant steps with a bisection safeguard), so it keeps
//! the robustness of plain bisection while usually converging superlinearly.

use crate::error::{Error, Result};

/// Maximum iterations per root-finding level.
pub const MAX_ITERATIONS: usize = 200;
/// Maximum number of bracket doublings.
pub const MAX_EXPANSIONS: usize = 1000;

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Absolute tolerance on the argument.
    pub xtol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            xtol: 1e-12,
            max_iter: MAX_ITERATIONS,
        }
    }
}

/// Grows `[lo, hi]` by doubling its half-width until a nonincreasing
/// function changes sign, i.e. `f(lo) >= 0 >= f(hi)`.
pub fn expand_bracket<F>(what: &'static str, f: &mut F, mut lo: f64, mut hi: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    let mut width = (hi - lo).max(1.0);
    for _ in 0..MAX_EXPANSIONS {
        if f_lo >= 0.0 && f_hi <= 0.0 {
            return Ok((lo, hi));
        }
        if f_lo < 0.0 {
            hi = lo;
            f_hi = f_lo;
            lo -= width;
            f_lo = f(lo);
        } else {
            lo = hi;
            f_lo = f_hi;
            hi += width;
            f_hi = f(hi);
        }
        width *= 2.0;
        if !width.is_finite() {
            break;
        }
    }
    Err(Error::Bracketing {
        what,
        lo_residual: f_lo,
        hi_residual: f_hi,
    })
}

/// Finds `x` in `[lo, hi]` with `f(x) = 0` for a nonincreasing `f` with
/// `f(lo) >= 0 >= f(hi)`. Returns the final bracket `(lo, hi)`; the caller
/// picks the side it needs (for instance the feasible one).
pub fn solve_decreasing<F>(
    what: &'static str,
    f: &mut F,
    lo: f64,
    hi: f64,
    opts: RootOptions,
) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo.is_nan() || f_hi.is_nan() || f_lo < 0.0 || f_hi > 0.0 {
        return Err(Error::Bracketing {
            what,
            lo_residual: f_lo,
            hi_residual: f_hi,
        });
    }
    if f_lo == 0.0 {
        return Ok((lo, lo));
    }
    if f_hi == 0.0 {
        return Ok((hi, hi));
    }
    // Brent's method: `b` is the best estimate, `c` keeps the sign change
    // with `b`, `a` is the previous `b`.
    let (mut a, mut fa) = (lo, f_lo);
    let (mut b, mut fb) = (hi, f_hi);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..opts.max_iter {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * opts.xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            if fb == 0.0 {
                return Ok((b, b));
            }
            return Ok((b.min(c), b.max(c)));
        }
        let interpolate = e.abs() >= tol && fa.abs() > fb.abs() && fa.is_finite() && fb.is_finite() && fc.is_finite();
        if interpolate {
            let s = fb / fa;
            let (mut p, mut q): (f64, f64);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::NoConvergence {
                what,
                iterations: 0,
                residual: f64::NAN,
            });
        }
    }
    Err(Error::NoConvergence {
        what,
        iterations: opts.max_iter,
        residual: (b - c).abs(),
    })
}

/// Expands a bracket around the initial guess and solves.
pub fn find_root_decreasing<F>(
    what: &'static str,
    mut f: F,
    guess: f64,
    half_width: f64,
    opts: RootOptions,
) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let hw = half_width.max(1e-3);
    let (lo, hi) = expand_bracket(what, &mut f, guess - hw, guess + hw)?;
    solve_decreasing(what, &mut f, lo, hi, opts)
}
