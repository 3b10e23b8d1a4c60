//! Norms, dual norms and prox-functions of the unit ball.
//!
//! Three prox-function families are provided, each tied to the norm it is
//! strongly convex with respect to:
//!
//! | family          | norm  | `mu(d)`                    | `A(d)`     | `C(d)` |
//! |-----------------|-------|----------------------------|------------|--------|
//! | `HalfSqEuclid`  | `l2`  | 1                          | 1/2        | 1/2    |
//! | `PNormSq(p)`    | `l1`  | `(p-1) n^{2(1-p)/p}`       | 1/2        | 1/2    |
//! | `EntropySym`    | `l1`  | 1/2                        | `ln(2n)`   | none   |
//!
//! `EntropySym` is the symmetrized entropy of the `l1` unit ball: the
//! minimum of `sum psi(u_i) + psi(v_i)` over decompositions `x = u - v`,
//! `u, v >= 0`, `sum (u + v) = 1`, shifted by `ln(2n)` so that `d(0) = 0`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// Tolerance used for set-membership decisions.
pub const FEAS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NormKind {
    L1,
    L2,
    Lp(f64),
}

/// A primal norm on `R^n` together with its dual norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormPair {
    kind: NormKind,
    dim: usize,
}

impl NormPair {
    pub fn new(kind: NormKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if let NormKind::Lp(p) = kind {
            if !(p > 1.0) || !p.is_finite() {
                return Err(Error::invalid("p", format!("need 1 < p < inf, got {p}")));
            }
        }
        Ok(Self { kind, dim })
    }

    pub fn l1(dim: usize) -> Self {
        Self { kind: NormKind::L1, dim }
    }

    pub fn l2(dim: usize) -> Self {
        Self { kind: NormKind::L2, dim }
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.norm_of(x))
    }

    pub fn dual_norm(&self, s: &[f64]) -> Result<f64> {
        check_dim(self.dim, s.len())?;
        Ok(self.dual_norm_of(s))
    }

    pub(crate) fn norm_of(&self, x: &[f64]) -> f64 {
        match self.kind {
            NormKind::L1 => linalg::norm1(x),
            NormKind::L2 => linalg::norm2(x),
            NormKind::Lp(p) => lp_norm(x, p),
        }
    }

    pub(crate) fn dual_norm_of(&self, s: &[f64]) -> f64 {
        match self.kind {
            NormKind::L1 => linalg::norm_inf(s),
            NormKind::L2 => linalg::norm2(s),
            NormKind::Lp(p) => lp_norm(s, conjugate_exponent(p)),
        }
    }

    /// Exponent of the dual norm (`inf` for the `l1` primal).
    pub fn dual_exponent(&self) -> f64 {
        match self.kind {
            NormKind::L1 => f64::INFINITY,
            NormKind::L2 => 2.0,
            NormKind::Lp(p) => conjugate_exponent(p),
        }
    }
}

pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

pub fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return linalg::norm_inf(x);
    }
    let m = linalg::norm_inf(x);
    if m == 0.0 {
        return 0.0;
    }
    // scale by the max entry to keep |x|^p in range
    m * x.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProxKind {
    HalfSqEuclid,
    PNormSq(f64),
    EntropySym,
}

/// Certified constants of a prox-function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxConstants {
    /// Strong-convexity modulus with respect to the paired norm.
    pub mu: f64,
    /// Maximum over the unit ball.
    pub a: f64,
    /// Quadratic-growth constant, when `d(x) <= C ||x||^2` holds.
    pub c: Option<f64>,
}

/// Constants for a prox family in dimension `n`.
pub fn prox_constants(kind: ProxKind, n: usize) -> ProxConstants {
    match kind {
        ProxKind::HalfSqEuclid => ProxConstants {
            mu: 1.0,
            a: 0.5,
            c: Some(0.5),
        },
        ProxKind::EntropySym => ProxConstants {
            mu: 0.5,
            a: (2.0 * n as f64).ln(),
            c: None,
        },
        ProxKind::PNormSq(p) => ProxConstants {
            mu: (p - 1.0) * (n as f64).powf(2.0 * (1.0 - p) / p),
            a: 0.5,
            c: Some(0.5),
        },
    }
}

/// Default exponent for `PNormSq`: `1 + 1/ln n`, capped at 2 where the
/// `(p - 1)` modulus stops being valid.
pub fn default_pnorm_exponent(n: usize) -> f64 {
    if n < 3 {
        2.0
    } else {
        (1.0 + 1.0 / (n as f64).ln()).min(2.0)
    }
}

/// A prox-function of the unit ball of its paired norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxFunction {
    kind: ProxKind,
    dim: usize,
    constants: ProxConstants,
}

impl ProxFunction {
    pub fn half_sq_euclid(dim: usize) -> Result<Self> {
        Self::new(ProxKind::HalfSqEuclid, dim)
    }

    pub fn entropy_sym(dim: usize) -> Result<Self> {
        Self::new(ProxKind::EntropySym, dim)
    }

    pub fn pnorm_sq(dim: usize, p: f64) -> Result<Self> {
        Self::new(ProxKind::PNormSq(p), dim)
    }

    pub fn new(kind: ProxKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        match kind {
            ProxKind::HalfSqEuclid => {}
            ProxKind::EntropySym => {
                if dim < 2 {
                    return Err(Error::invalid("dim", "EntropySym needs n >= 2"));
                }
            }
            ProxKind::PNormSq(p) => {
                if dim < 2 {
                    return Err(Error::invalid("dim", "PNormSq needs n >= 2"));
                }
                if !(p > 1.0 && p <= 2.0) {
                    return Err(Error::invalid("p", format!("need 1 < p <= 2, got {p}")));
                }
            }
        }
        Ok(Self {
            kind,
            dim,
            constants: prox_constants(kind, dim),
        })
    }

    pub fn kind(&self) -> ProxKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constants(&self) -> ProxConstants {
        self.constants
    }

    pub fn mu(&self) -> f64 {
        self.constants.mu
    }

    pub fn a(&self) -> f64 {
        self.constants.a
    }

    pub fn c(&self) -> Option<f64> {
        self.constants.c
    }

    /// The norm this prox-function is strongly convex with respect to.
    pub fn norm(&self) -> NormPair {
        match self.kind {
            ProxKind::HalfSqEuclid => NormPair::l2(self.dim),
            ProxKind::PNormSq(_) | ProxKind::EntropySym => NormPair::l1(self.dim),
        }
    }

    /// Evaluates `d(x)`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        match self.kind {
            ProxKind::HalfSqEuclid => Ok(0.5 * x.iter().map(|v| v * v).sum::<f64>()),
            ProxKind::PNormSq(p) => {
                let r = lp_norm(x, p);
                Ok(0.5 * r * r)
            }
            ProxKind::EntropySym => {
                let (u, v) = entropy_decomposition(x)?;
                let inner: f64 = u.iter().chain(v.iter()).map(|&t| xlogx(t)).sum();
                Ok((inner + (2.0 * self.dim as f64).ln()).max(0.0))
            }
        }
    }
}

/// `t ln t` with `0 ln 0 = 0`.
pub fn xlogx(t: f64) -> f64 {
    if t > 0.0 {
        t * t.ln()
    } else {
        0.0
    }
}

/// Optimal decomposition `x = u - v`, `u, v >= 0`, `sum(u + v) = 1`, of a
/// point of the unit `l1` ball under the entropy `sum psi(u) + psi(v)`.
///
/// Stationarity gives `u_i v_i = c^2` for a common `c >= 0`, hence
/// `u_i + v_i = sqrt(x_i^2 + 4 c^2)`; `c` is fixed by the normalization and
/// found by bisection.
pub fn entropy_decomposition(x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    let l1 = linalg::norm1(x);
    if l1 > 1.0 + FEAS_TOL {
        return Err(Error::Infeasible {
            set: "unit l1 ball".into(),
            detail: format!("||x||_1 = {l1}"),
        });
    }
    let x: Vec<f64> = if l1 > 1.0 {
        x.iter().map(|v| v / l1).collect()
    } else {
        x.to_vec()
    };
    let total = |c: f64| x.iter().map(|xi| (xi * xi + 4.0 * c * c).sqrt()).sum::<f64>();
    let c = if total(0.0) >= 1.0 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, 0.5 / n as f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if total(mid) > 1.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for &xi in &x {
        let root = (xi * xi + 4.0 * c * c).sqrt();
        // stable forms: the smaller of the pair is 2c^2 / (root + |x|)
        let small = if root + xi.abs() > 0.0 {
            2.0 * c * c / (root + xi.abs())
        } else {
            0.0
        };
        let large = small + xi.abs();
        if xi >= 0.0 {
            u.push(large);
            v.push(small);
        } else {
            u.push(small);
            v.push(large);
        }
    }
    Ok((u, v))
}

/// Checks the midpoint form of strong convexity with modulus `mu` on
/// random segments inside the unit ball of the prox-function's norm.
/// Returns the worst slack `min(½d(x)+½d(y) - μ/8 ||x-y||² - d(mid))`.
pub fn midpoint_convexity_slack<R: Rng>(d: &ProxFunction, mu: f64, samples: usize, rng: &mut R) -> Result<f64> {
    let norm = d.norm();
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let x = sample_unit_ball(&norm, rng);
        let y = sample_unit_ball(&norm, rng);
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let diff = norm.norm_of(&linalg::sub(&x, &y));
        let slack = 0.5 * d.value(&x)? + 0.5 * d.value(&y)? - mu / 8.0 * diff * diff - d.value(&mid)?;
        worst = worst.min(slack);
    }
    Ok(worst)
}

/// Draws a point of the closed unit ball of `norm`, with a share of
/// boundary and near-origin points.
pub fn sample_unit_ball<R: Rng>(norm: &NormPair, rng: &mut R) -> Vec<f64> {
    let n = norm.dim();
    let mut g: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    // sparse directions exercise the ball's vertices
    if rng.random::<f64>() < 0.2 {
        let keep = rng.random_range(0..n);
        for (i, gi) in g.iter_mut().enumerate() {
            if i != keep && rng.random::<f64>() < 0.7 {
                *gi = 0.0;
            }
        }
    }
    let r = norm.norm_of(&g);
    if r == 0.0 {
        return g;
    }
    let radius = match rng.random_range(0..4) {
        0 => 1.0,
        _ => rng.random::<f64>(),
    };
    g.iter().map(|v| v / r * radius).collect()
}

/// A function whose symmetrization `f0(x) = min { f(u) + f(v) : x = u - v,
/// u in aQ, v in (1-a)Q, a in [0,1] }` can be evaluated by brute force.
pub trait Symmetrized {
    fn dim(&self) -> usize;
    /// Norm in which the modulus of `f` is measured.
    fn norm(&self) -> NormPair;
    /// `f0(x)` by direct minimization over decompositions.
    fn symmetrized_value(&self, x: &[f64]) -> f64;
    /// A point of `conv{Q, -Q}`.
    fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64>;
}

/// Checks the midpoint inequality
/// `f0((x+y)/2) <= ½f0(x) + ½f0(y) - (mu/16)||x-y||²`,
/// i.e. strong convexity of the symmetrization with modulus `mu/2`.
pub fn symmetrization_modulus_check<S: Symmetrized, R: Rng>(f: &S, mu: f64, samples: usize, rng: &mut R) -> bool {
    let norm = f.norm();
    (0..samples).all(|_| {
        let x = f.sample(rng);
        let y = f.sample(rng);
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let diff = norm.norm_of(&linalg::sub(&x, &y));
        let lhs = f.symmetrized_value(&mid);
        let rhs = 0.5 * f.symmetrized_value(&x) + 0.5 * f.symmetrized_value(&y) - mu / 16.0 * diff * diff;
        lhs <= rhs + 1e-7
    })
}

/// Entropy `sum u ln u` on the standard simplex of `R^2`; modulus 1 with
/// respect to `l1`.
///
/// For `x = u - v` with `u in aQ`, `v in (1-a)Q` the scale is forced to
/// `a = (1 + sum x)/2`, leaving a one-dimensional search over `v`, done by
/// a dense scan followed by golden-section refinement.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimplexEntropy2;

impl SimplexEntropy2 {
    fn inner(x: &[f64], v1: f64, b: f64) -> f64 {
        let v = [v1, b - v1];
        let u = [x[0] + v[0], x[1] + v[1]];
        if u[0] < 0.0 || u[1] < 0.0 || v[1] < 0.0 {
            return f64::INFINITY;
        }
        xlogx(u[0]) + xlogx(u[1]) + xlogx(v[0]) + xlogx(v[1])
    }
}

impl Symmetrized for SimplexEntropy2 {
    fn dim(&self) -> usize {
        2
    }

    fn norm(&self) -> NormPair {
        NormPair::l1(2)
    }

    fn symmetrized_value(&self, x: &[f64]) -> f64 {
        let a = 0.5 * (1.0 + x[0] + x[1]);
        let b = 1.0 - a;
        // feasible v1 range: v1 >= max(0, -x0), b - v1 >= max(0, -x1)
        let lo = 0f64.max(-x[0]);
        let hi = b - 0f64.max(-x[1]);
        if hi < lo {
            return f64::INFINITY;
        }
        let steps = 2000;
        let mut best = (f64::INFINITY, lo);
        for i in 0..=steps {
            let t = lo + (hi - lo) * i as f64 / steps as f64;
            let val = Self::inner(x, t, b);
            if val < best.0 {
                best = (val, t);
            }
        }
        let h = (hi - lo) / steps as f64;
        let (mut l, mut r) = ((best.1 - h).max(lo), (best.1 + h).min(hi));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let m1 = r - g * (r - l);
            let m2 = l + g * (r - l);
            if Self::inner(x, m1, b) <= Self::inner(x, m2, b) {
                r = m2;
            } else {
                l = m1;
            }
        }
        best.0.min(Self::inner(x, 0.5 * (l + r), b))
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        sample_unit_ball(&NormPair::l1(2), rng)
    }
}

/// `½||x||²` on the Euclidean unit ball; modulus 1 with respect to `l2`.
///
/// The optimal `u`, `v` are collinear with `x`, so for each scale `a` the
/// inner problem is a clipped scalar quadratic; `a` is scanned on a grid
/// and refined.
#[derive(Debug, Clone, Copy)]
pub struct EuclideanHalfSq {
    pub dim: usize,
}

impl EuclideanHalfSq {
    fn at_scale(r: f64, a: f64) -> f64 {
        // u = t e, v = (t - r) e with |t| <= a, |t - r| <= 1 - a
        let lo = (-a).max(r - (1.0 - a));
        let hi = a.min(r + (1.0 - a));
        if hi < lo {
            return f64::INFINITY;
        }
        let t = (0.5 * r).clamp(lo, hi);
        0.5 * t * t + 0.5 * (t - r) * (t - r)
    }
}

impl Symmetrized for EuclideanHalfSq {
    fn dim(&self) -> usize {
        self.dim
    }

    fn norm(&self) -> NormPair {
        NormPair::l2(self.dim)
    }

    fn symmetrized_value(&self, x: &[f64]) -> f64 {
        let r = linalg::norm2(x);
        let steps = 1000;
        let mut best = (f64::INFINITY, 0.5);
        for i in 0..=steps {
            let a = i as f64 / steps as f64;
            let v = Self::at_scale(r, a);
            if v < best.0 {
                best = (v, a);
            }
        }
        let h = 1.0 / steps as f64;
        let (mut l, mut rr) = ((best.1 - h).max(0.0), (best.1 + h).min(1.0));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let m1 = rr - g * (rr - l);
            let m2 = l + g * (rr - l);
            if Self::at_scale(r, m1) <= Self::at_scale(r, m2) {
                rr = m2;
            } else {
                l = m1;
            }
        }
        best.0.min(Self::at_scale(r, 0.5 * (l + rr)))
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        sample_unit_ball(&NormPair::l2(self.dim), rng)
    }
}
