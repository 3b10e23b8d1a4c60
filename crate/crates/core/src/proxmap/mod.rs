//! Prox-mappings, value functions and support functions on the trust
//! region `Q_R(z) = Q ∩ B_R(z)`.
//!
//! For a local problem `(z, R, beta)` the prox-mapping is
//!
//! ```text
//! pi(s) = argmax { <s, x - z> - beta d((x - z)/R) : x in Q_R(z) }
//! ```
//!
//! and `V(s)` is the optimal value. Supported combinations:
//!
//! | prox           | sets                                   |
//! |----------------|----------------------------------------|
//! | `HalfSqEuclid` | full space, Euclidean ball, simplex, l1 ball, box |
//! | `EntropySym`   | full space, simplex, l1 ball           |
//! | `PNormSq`      | full space                             |
//!
//! Other combinations return [`Error::Unsupported`].

mod entropy;
mod pnorm;
mod sets;
mod support;

pub use entropy::{hyperoct_prox_dual, simplex_prox_dual, solve_2d_entropy, solve_2d_entropy_ln};
pub use pnorm::half_sq_norm_gradient;
pub use sets::{project_l1_ball, project_simplex, FeasibleSet, SetKind};
pub use support::support;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{NormPair, ProxFunction, ProxKind};
use crate::linalg;
use crate::roots::{solve_decreasing, RootOptions};

/// A prox-function together with the feasible set it is used on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxSetup {
    prox: ProxFunction,
    set: FeasibleSet,
}

impl ProxSetup {
    pub fn new(prox: ProxFunction, set: FeasibleSet) -> Result<Self> {
        check_dim(prox.dim(), set.dim())?;
        Ok(Self { prox, set })
    }

    pub fn prox(&self) -> &ProxFunction {
        &self.prox
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn dim(&self) -> usize {
        self.prox.dim()
    }

    /// Norm of the trust ball, the one `d` is strongly convex in.
    pub fn norm(&self) -> NormPair {
        self.prox.norm()
    }

    /// Whether [`prox_map`] has a solver for this combination.
    pub fn has_prox_solver(&self) -> bool {
        match (self.prox.kind(), self.set.kind()) {
            (ProxKind::HalfSqEuclid, _) => true,
            (ProxKind::EntropySym, SetKind::FullSpace | SetKind::Simplex | SetKind::L1Ball { .. }) => true,
            (ProxKind::PNormSq(_), SetKind::FullSpace) => true,
            _ => false,
        }
    }
}

/// The prox-mapping data `(z, R, beta)` on a fixed setup.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalProblem {
    setup: ProxSetup,
    center: Vec<f64>,
    radius: f64,
    beta: f64,
}

impl LocalProblem {
    pub fn new(setup: ProxSetup, center: Vec<f64>, radius: f64, beta: f64) -> Result<Self> {
        check_dim(setup.dim(), center.len())?;
        if !setup.set().contains(&center) {
            return Err(Error::Infeasible {
                set: setup.set().name().into(),
                detail: "prox center lies outside Q".into(),
            });
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius", format!("must be finite and nonnegative, got {radius}")));
        }
        let mut lp = Self {
            setup,
            center,
            radius,
            beta: 1.0,
        };
        lp.set_beta(beta)?;
        Ok(lp)
    }

    pub fn setup(&self) -> &ProxSetup {
        &self.setup
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn set_beta(&mut self, beta: f64) -> Result<()> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::invalid("beta", format!("must be positive and finite, got {beta}")));
        }
        self.beta = beta;
        Ok(())
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        let mut lp = self.clone();
        lp.set_beta(beta)?;
        Ok(lp)
    }

    /// `d_{z,R}(x) = d((x - z)/R)`.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        if self.radius == 0.0 {
            return Ok(if x == self.center.as_slice() { 0.0 } else { f64::INFINITY });
        }
        let y: Vec<f64> = x
            .iter()
            .zip(&self.center)
            .map(|(xi, zi)| (xi - zi) / self.radius)
            .collect();
        self.setup.prox().value(&y)
    }

    /// Whether `x` lies in `Q ∩ B_R(z)` up to `tol` (relative to `R` for the ball).
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let dist = self.setup.norm().norm_of(&linalg::sub(x, &self.center));
        self.setup.set().contains_tol(x, tol) && dist <= self.radius * (1.0 + tol) + tol
    }
}

/// `pi_{z,R,beta}(s)`.
pub fn prox_map(lp: &LocalProblem, s: &[f64]) -> Result<Vec<f64>> {
    check_dim(lp.dim(), s.len())?;
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("s", "must be finite"));
    }
    if lp.radius == 0.0 || s.iter().all(|&v| v == 0.0) {
        return Ok(lp.center.clone());
    }
    let set = lp.setup.set();
    match (lp.setup.prox().kind(), set.kind()) {
        (ProxKind::HalfSqEuclid, _) => {
            let k = lp.radius * lp.radius / lp.beta;
            let y: Vec<f64> = lp.center.iter().zip(s).map(|(zi, si)| zi + k * si).collect();
            trust_region_projection(set, &lp.center, lp.radius, &y)
        }
        (ProxKind::EntropySym, SetKind::FullSpace) => Ok(entropy::gibbs_prox(lp, s)),
        (ProxKind::EntropySym, SetKind::Simplex) => simplex_prox_dual(lp, s),
        (ProxKind::EntropySym, SetKind::L1Ball { .. }) => hyperoct_prox_dual(lp, s),
        (ProxKind::PNormSq(p), SetKind::FullSpace) => {
            let k = lp.radius / lp.beta;
            let st: Vec<f64> = s.iter().map(|v| k * v).collect();
            let y = pnorm::pnorm_unit_prox(&st, p)?;
            Ok(lp.center.iter().zip(&y).map(|(zi, yi)| zi + lp.radius * yi).collect())
        }
        (kind, _) => Err(Error::Unsupported(format!("prox-mapping for {kind:?} on the {}", set.name()))),
    }
}

/// `V_{z,R,beta}(s)`, the optimal value of the prox problem.
pub fn v_value(lp: &LocalProblem, s: &[f64]) -> Result<f64> {
    let x = prox_map(lp, s)?;
    Ok(objective(lp, s, &x)?)
}

/// `<s, x - z> - beta d_{z,R}(x)`, the prox objective at `x`.
pub fn objective(lp: &LocalProblem, s: &[f64], x: &[f64]) -> Result<f64> {
    let h = linalg::sub(x, &lp.center);
    Ok(linalg::dot(s, &h) - lp.beta * lp.distance(x)?)
}

/// Checks `||pi(s1) - pi(s2)|| <= R²/(beta mu(d)) ||s1 - s2||_*`.
pub fn v_gradient_lipschitz_check(lp: &LocalProblem, s1: &[f64], s2: &[f64]) -> Result<bool> {
    let norm = lp.setup.norm();
    let x1 = prox_map(lp, s1)?;
    let x2 = prox_map(lp, s2)?;
    let lhs = norm.norm_of(&linalg::sub(&x1, &x2));
    let bound = lp.radius * lp.radius / (lp.beta * lp.setup.prox().mu()) * norm.dual_norm_of(&linalg::sub(s1, s2));
    Ok(lhs <= bound * (1.0 + 1e-9) + 1e-12)
}

/// Euclidean projection of `y` onto `Q ∩ B_R(z)` for `z` in `Q`.
///
/// The minimizer of `½||x - y||² + (nu/2)||x - z||²` over `Q` is
/// `P_Q(z + t (y - z))` with `t = 1/(1 + nu)`, and its distance to `z`
/// grows with `t`; the multiplier is found by a root search on that
/// distance.
pub fn trust_region_projection(set: &FeasibleSet, z: &[f64], radius: f64, y: &[f64]) -> Result<Vec<f64>> {
    let gap = linalg::dist2(y, z);
    if matches!(set.kind(), SetKind::FullSpace) {
        if gap <= radius {
            return Ok(y.to_vec());
        }
        let k = radius / gap;
        return Ok(z.iter().zip(y).map(|(zi, yi)| zi + k * (yi - zi)).collect());
    }
    let p = set.project(y);
    if linalg::dist2(&p, z) <= radius {
        return Ok(p);
    }
    // parametrize by tau = t |y - z| / R so the tolerance is relative to R
    let at = |tau: f64| -> Vec<f64> {
        let t = tau * radius / gap;
        let w: Vec<f64> = z.iter().zip(y).map(|(zi, yi)| zi + t * (yi - zi)).collect();
        set.project(&w)
    };
    let mut f = |tau: f64| radius - linalg::dist2(&at(tau), z);
    let (lo, _) = solve_decreasing("trust-region multiplier", &mut f, 0.0, gap / radius, RootOptions::default())?;
    Ok(at(lo))
}
