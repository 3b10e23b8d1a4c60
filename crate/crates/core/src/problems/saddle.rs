use crate::error::{check_dim, Error, Result};
use crate::geometry::{conjugate_exponent, lp_norm, NormKind, NormPair};
use crate::linalg;
use crate::proxmap::{half_sq_norm_gradient, FeasibleSet, SetKind};

use super::{ConvexityParams, Objective};

/// `f(x) = ½||x||_p² = max_w <w, x> - ½||w||_q²` with `1/p + 1/q = 1`.
///
/// The maximizing `w(x)` equals the gradient and is returned as the dual
/// witness. The dual function `eta(w) = min_{x in Q} <w, x> - ½||w||_q²`
/// has closed forms on the `l1` ball, the simplex and the Euclidean ball.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddlePNorm {
    q: f64,
    p: f64,
    set: FeasibleSet,
}

impl SaddlePNorm {
    pub fn new(q: f64, set: FeasibleSet) -> Result<Self> {
        if !(q >= 2.0 && q.is_finite()) {
            return Err(Error::invalid("q", format!("need 2 <= q < inf, got {q}")));
        }
        match set.kind() {
            SetKind::L1Ball { .. } | SetKind::Simplex | SetKind::EuclideanBall { .. } => {}
            _ => {
                return Err(Error::Unsupported(format!(
                    "dual function of the saddle objective on the {}",
                    set.name()
                )))
            }
        }
        Ok(Self {
            q,
            p: conjugate_exponent(q),
            set,
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    /// `Psi(x, w) = <w, x> - ½||w||_q²`.
    pub fn psi(&self, x: &[f64], w: &[f64]) -> f64 {
        linalg::dot(w, x) - 0.5 * lp_norm(w, self.q).powi(2)
    }

    /// `eta(w) = min_{x in Q} Psi(x, w)`.
    pub fn dual_value(&self, w: &[f64]) -> Result<f64> {
        check_dim(self.dim(), w.len())?;
        let half = 0.5 * lp_norm(w, self.q).powi(2);
        let lin = match self.set.kind() {
            SetKind::L1Ball { radius } => -radius * linalg::norm_inf(w),
            SetKind::Simplex => w.iter().copied().fold(f64::INFINITY, f64::min),
            SetKind::EuclideanBall { radius } => -radius * linalg::norm2(w),
            _ => unreachable!("rejected at construction"),
        };
        Ok(lin - half)
    }

    pub fn params(&self, norm: &NormPair, sigma: f64) -> Result<ConvexityParams> {
        check_dim(self.dim(), norm.dim())?;
        let n = self.dim() as f64;
        let p = self.p;
        // ½||x||_p² is (p - 1)-strongly convex in ||.||_p, and ||.||_p >= ||.||_2 for p <= 2
        let mu = match norm.kind() {
            NormKind::L2 => p - 1.0,
            NormKind::L1 => (p - 1.0) * n.powf(2.0 / p - 2.0),
            NormKind::Lp(_) => return Err(Error::Unsupported("saddle parameters for a general lp norm".into())),
        };
        // ||w(x)||_q = ||x||_p
        let reach_p = match self.set.kind() {
            SetKind::L1Ball { radius } => *radius,
            SetKind::Simplex => 1.0,
            SetKind::EuclideanBall { radius } => radius * n.powf(1.0 / p - 0.5),
            _ => unreachable!("rejected at construction"),
        };
        let dual_factor = match norm.kind() {
            NormKind::L2 => n.powf(0.5 - 1.0 / self.q),
            _ => 1.0,
        };
        ConvexityParams::new(2.0, mu, dual_factor * reach_p, sigma)
    }
}

impl Objective for SaddlePNorm {
    fn dim(&self) -> usize {
        self.set.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * lp_norm(x, self.p).powi(2)
    }

    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        half_sq_norm_gradient(x, self.p)
    }

    fn witness(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(half_sq_norm_gradient(x, self.p))
    }

    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        let n = self.dim();
        Some(match self.set.kind() {
            SetKind::Simplex => {
                let x = vec![1.0 / n as f64; n];
                let v = self.value(&x);
                (x, v)
            }
            _ => (vec![0.0; n], 0.0),
        })
    }
}
