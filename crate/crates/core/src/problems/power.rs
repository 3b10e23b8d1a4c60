use crate::error::{check_dim, Error, Result};
use crate::geometry::{NormKind, NormPair};
use crate::linalg;
use crate::proxmap::{FeasibleSet, SetKind};

use super::{ConvexityParams, Objective};

/// `f(x) = kappa 2^(rho-3) ||x - x*||_2^rho` restricted to a feasible set.
///
/// With respect to `l2`, `mu(f) = kappa`; `kappa < 1` gives the flatter
/// variants used to probe adaptive schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerObjective {
    rho: f64,
    kappa: f64,
    x_star: Vec<f64>,
    set: FeasibleSet,
}

impl PowerObjective {
    pub fn new(rho: f64, x_star: Vec<f64>, set: FeasibleSet) -> Result<Self> {
        Self::scaled(rho, 1.0, x_star, set)
    }

    pub fn scaled(rho: f64, kappa: f64, x_star: Vec<f64>, set: FeasibleSet) -> Result<Self> {
        if !(rho >= 2.0 && rho.is_finite()) {
            return Err(Error::invalid("rho", format!("need rho >= 2, got {rho}")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::invalid("kappa", format!("must be positive, got {kappa}")));
        }
        check_dim(set.dim(), x_star.len())?;
        if !set.contains(&x_star) {
            return Err(Error::Infeasible {
                set: set.name().into(),
                detail: "minimizer x* must lie in Q".into(),
            });
        }
        Ok(Self {
            rho,
            kappa,
            x_star,
            set,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    fn coef(&self) -> f64 {
        self.kappa * 2f64.powf(self.rho - 3.0)
    }

    /// `(rho, mu(f), L, sigma)` with respect to `norm`; `L` is certified
    /// over the set (largest distance from `x*`), so `Q` must be bounded.
    pub fn params(&self, norm: &NormPair, sigma: f64) -> Result<ConvexityParams> {
        check_dim(self.dim(), norm.dim())?;
        let reach = self
            .set
            .max_distance_from(&self.x_star)
            .ok_or_else(|| Error::Unsupported("Lipschitz constant on an unbounded set".into()))?;
        let n = self.dim() as f64;
        // ||.||_2 >= n^(-1/2) ||.||_1 and ||.||_2 >= n^(1/2 - 1/p) ||.||_p for p > 2
        let mu = match norm.kind() {
            NormKind::L2 => self.kappa,
            NormKind::L1 => self.kappa * n.powf(-self.rho / 2.0),
            NormKind::Lp(p) if p <= 2.0 => self.kappa * n.powf(-self.rho * (1.0 / p - 0.5)),
            NormKind::Lp(_) => self.kappa,
        };
        // compare the dual norm of the gradient with its l2 norm
        let dual_factor = match norm.kind() {
            NormKind::L1 | NormKind::L2 => 1.0,
            NormKind::Lp(p) => {
                let q = p / (p - 1.0);
                if q >= 2.0 {
                    1.0
                } else {
                    n.powf(1.0 / q - 0.5)
                }
            }
        };
        let lip = dual_factor * self.coef() * self.rho * reach.powf(self.rho - 1.0);
        ConvexityParams::new(self.rho, mu, lip.max(f64::MIN_POSITIVE), sigma)
    }
}

impl Objective for PowerObjective {
    fn dim(&self) -> usize {
        self.x_star.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.coef() * linalg::dist2(x, &self.x_star).powf(self.rho)
    }

    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        let d = linalg::sub(x, &self.x_star);
        let r = linalg::norm2(&d);
        if r == 0.0 {
            return vec![0.0; d.len()];
        }
        let scale = self.coef() * self.rho * r.powf(self.rho - 2.0);
        d.iter().map(|v| scale * v).collect()
    }

    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        Some((self.x_star.clone(), 0.0))
    }
}

/// `f(x) = <c, x>` on a bounded set.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearObjective {
    c: Vec<f64>,
    set: FeasibleSet,
}

impl LinearObjective {
    pub fn new(c: Vec<f64>, set: FeasibleSet) -> Result<Self> {
        check_dim(set.dim(), c.len())?;
        if matches!(set.kind(), SetKind::FullSpace) {
            return Err(Error::Unsupported("linear objective on the full space".into()));
        }
        Ok(Self { c, set })
    }

    pub fn params(&self, norm: &NormPair, sigma: f64) -> Result<ConvexityParams> {
        let lip = norm.dual_norm(&self.c)?;
        ConvexityParams::new(2.0, 0.0, lip.max(f64::MIN_POSITIVE), sigma)
    }

    fn minimizer(&self) -> Vec<f64> {
        let c = &self.c;
        let n = c.len();
        let argmax_abs = || (0..n).fold(0, |b, i| if c[i].abs() > c[b].abs() { i } else { b });
        match self.set.kind() {
            SetKind::FullSpace => unreachable!("rejected at construction"),
            SetKind::Box { lo, hi } => (0..n).map(|i| if c[i] > 0.0 { lo[i] } else { hi[i] }).collect(),
            SetKind::EuclideanBall { radius } => {
                let nc = linalg::norm2(c);
                if nc == 0.0 {
                    vec![0.0; n]
                } else {
                    c.iter().map(|v| -radius * v / nc).collect()
                }
            }
            SetKind::Simplex => {
                let j = (0..n).fold(0, |b, i| if c[i] < c[b] { i } else { b });
                let mut x = vec![0.0; n];
                x[j] = 1.0;
                x
            }
            SetKind::L1Ball { radius } => {
                let j = argmax_abs();
                let mut x = vec![0.0; n];
                x[j] = if c[j] > 0.0 { -radius } else { *radius };
                x
            }
        }
    }
}

impl Objective for LinearObjective {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        linalg::dot(&self.c, x)
    }

    fn subgradient(&self, _x: &[f64]) -> Vec<f64> {
        self.c.clone()
    }

    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        let x = self.minimizer();
        let v = linalg::dot(&self.c, &x);
        Some((x, v))
    }
}
