use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::FEAS_TOL;
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SetKind {
    FullSpace,
    /// Euclidean ball of the given radius centred at the origin.
    EuclideanBall { radius: f64 },
    /// Standard simplex `{x >= 0, sum x = 1}`.
    Simplex,
    /// `l1` ball of the given radius centred at the origin.
    L1Ball { radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

/// A simple closed convex set in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSet {
    kind: SetKind,
    dim: usize,
}

impl FeasibleSet {
    pub fn new(kind: SetKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        match &kind {
            SetKind::FullSpace | SetKind::Simplex => {}
            SetKind::EuclideanBall { radius } | SetKind::L1Ball { radius } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::invalid("radius", format!("must be positive and finite, got {radius}")));
                }
            }
            SetKind::Box { lo, hi } => {
                check_dim(dim, lo.len())?;
                check_dim(dim, hi.len())?;
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err(Error::invalid("box", "need lo <= hi in every coordinate"));
                }
            }
        }
        Ok(Self { kind, dim })
    }

    pub fn full_space(dim: usize) -> Self {
        Self {
            kind: SetKind::FullSpace,
            dim,
        }
    }

    pub fn simplex(dim: usize) -> Self {
        Self {
            kind: SetKind::Simplex,
            dim,
        }
    }

    pub fn euclidean_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::new(SetKind::EuclideanBall { radius }, dim)
    }

    pub fn l1_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::new(SetKind::L1Ball { radius }, dim)
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SetKind::FullSpace => "full space",
            SetKind::EuclideanBall { .. } => "Euclidean ball",
            SetKind::Simplex => "simplex",
            SetKind::L1Ball { .. } => "l1 ball",
            SetKind::Box { .. } => "box",
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_tol(x, FEAS_TOL)
    }

    pub fn contains_tol(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.kind {
            SetKind::FullSpace => true,
            SetKind::EuclideanBall { radius } => linalg::norm2(x) <= radius + tol,
            SetKind::Simplex => x.iter().all(|&v| v >= -tol) && (x.iter().sum::<f64>() - 1.0).abs() <= tol,
            SetKind::L1Ball { radius } => linalg::norm1(x) <= radius + tol,
            SetKind::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        match &self.kind {
            SetKind::FullSpace => y.to_vec(),
            SetKind::EuclideanBall { radius } => {
                let r = linalg::norm2(y);
                if r <= *radius {
                    y.to_vec()
                } else {
                    y.iter().map(|v| v * radius / r).collect()
                }
            }
            SetKind::Simplex => project_simplex(y, 1.0),
            SetKind::L1Ball { radius } => project_l1_ball(y, *radius),
            SetKind::Box { lo, hi } => y
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| v.clamp(*l, *h))
                .collect(),
        }
    }

    /// Euclidean diameter, `None` when unbounded.
    pub fn diameter(&self) -> Option<f64> {
        match &self.kind {
            SetKind::FullSpace => None,
            SetKind::EuclideanBall { radius } => Some(2.0 * radius),
            SetKind::Simplex => Some(if self.dim > 1 { 2f64.sqrt() } else { 0.0 }),
            SetKind::L1Ball { radius } => Some(2.0 * radius),
            SetKind::Box { lo, hi } => Some(linalg::dist2(lo, hi)),
        }
    }

    /// Largest Euclidean distance from `x` to a point of the set.
    pub fn max_distance_from(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            SetKind::FullSpace => None,
            SetKind::EuclideanBall { radius } => Some(linalg::norm2(x) + radius),
            SetKind::Simplex | SetKind::L1Ball { .. } => {
                // a convex function peaks at a vertex
                let n = self.dim;
                let scale = match self.kind {
                    SetKind::L1Ball { radius } => radius,
                    _ => 1.0,
                };
                let signs: &[f64] = if matches!(self.kind, SetKind::Simplex) { &[1.0] } else { &[1.0, -1.0] };
                let base: f64 = x.iter().map(|v| v * v).sum();
                let mut best = if matches!(self.kind, SetKind::L1Ball { .. }) { base } else { 0.0 };
                for i in 0..n {
                    for &sg in signs {
                        let vi = sg * scale;
                        best = best.max(base - x[i] * x[i] + (x[i] - vi) * (x[i] - vi));
                    }
                }
                Some(best.sqrt())
            }
            SetKind::Box { lo, hi } => Some(
                x.iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(v, (l, h))| (v - l).abs().max((v - h).abs()).powi(2))
                    .sum::<f64>()
                    .sqrt(),
            ),
        }
    }
}

/// Euclidean projection onto `{x >= 0, sum x = mass}` by sorting.
pub fn project_simplex(y: &[f64], mass: f64) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - mass) / (k + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Euclidean projection onto the `l1` ball of the given radius.
pub fn project_l1_ball(y: &[f64], radius: f64) -> Vec<f64> {
    if linalg::norm1(y) <= radius {
        return y.to_vec();
    }
    let abs: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    let p = project_simplex(&abs, radius);
    p.iter().zip(y).map(|(a, v)| a.copysign(*v)).collect()
}
