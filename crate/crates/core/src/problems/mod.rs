//! Test objectives, first-order oracles and noise models.
//!
//! An [`Objective`] is a plain convex function with a subgradient. A
//! [`FirstOrderOracle`] is what the methods see: a counted query interface
//! that may add noise ([`StochasticOracle`]) or adapt to the queries
//! ([`ResistingOracle`]).

mod hard;
mod noise;
mod power;
mod saddle;

pub use hard::{HardInstance, PiecewisePlusPower, ResistingOracle};
pub use noise::{subgaussian_scale, NoiseModel, StochasticOracle};
pub use power::{LinearObjective, PowerObjective};
pub use saddle::SaddlePNorm;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::NormPair;
use crate::linalg;

/// Convexity and noise parameters `(rho, mu(f), L, sigma)` of a problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvexityParams {
    pub rho: f64,
    pub mu_f: f64,
    /// Bound on the dual norm of subgradients over `Q`.
    pub lipschitz: f64,
    pub sigma: f64,
}

impl ConvexityParams {
    pub fn new(rho: f64, mu_f: f64, lipschitz: f64, sigma: f64) -> Result<Self> {
        if !(rho >= 2.0 && rho.is_finite()) {
            return Err(Error::invalid("rho", format!("need rho >= 2, got {rho}")));
        }
        if !(mu_f >= 0.0 && mu_f.is_finite()) {
            return Err(Error::invalid("mu_f", format!("need mu_f >= 0, got {mu_f}")));
        }
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(Error::invalid("lipschitz", format!("need L > 0, got {lipschitz}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", format!("need sigma >= 0, got {sigma}")));
        }
        Ok(Self {
            rho,
            mu_f,
            lipschitz,
            sigma,
        })
    }

    pub fn with_sigma(self, sigma: f64) -> Result<Self> {
        Self::new(self.rho, self.mu_f, self.lipschitz, sigma)
    }

    /// `tau = 2(rho - 1)/rho`.
    pub fn tau(&self) -> f64 {
        2.0 * (self.rho - 1.0) / self.rho
    }
}

/// One oracle answer.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleAnswer {
    /// The (possibly noisy) subgradient handed to the method.
    pub subgradient: Vec<f64>,
    /// Objective value, when the oracle reveals it.
    pub value: Option<f64>,
    /// Dual witness `w(x)` for saddle-structured objectives.
    pub witness: Option<Vec<f64>>,
    /// The noise-free subgradient, kept for diagnostics on synthetic problems.
    pub exact_subgradient: Option<Vec<f64>>,
}

/// Counted first-order oracle.
pub trait FirstOrderOracle {
    fn dim(&self) -> usize;

    /// Answers a query; increments the call counter exactly once.
    fn query(&mut self, x: &[f64]) -> Result<OracleAnswer>;

    /// Number of queries answered so far.
    fn calls(&self) -> usize;

    /// Exact objective value for reporting. Does not count as a query.
    fn evaluate(&self, x: &[f64]) -> Option<f64>;

    /// A minimizer and the optimal value over `Q`, when known.
    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        None
    }
}

/// A convex function with a subgradient selection.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn subgradient(&self, x: &[f64]) -> Vec<f64>;

    /// `w(x)` maximizing the saddle representation, if there is one.
    fn witness(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// A minimizer and the optimal value over the feasible set.
    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        None
    }
}

/// Noise-free oracle over an [`Objective`].
#[derive(Debug, Clone)]
pub struct DeterministicOracle<O> {
    objective: O,
    calls: usize,
}

impl<O: Objective> DeterministicOracle<O> {
    pub fn new(objective: O) -> Self {
        Self { objective, calls: 0 }
    }

    pub fn objective(&self) -> &O {
        &self.objective
    }
}

impl<O: Objective> FirstOrderOracle for DeterministicOracle<O> {
    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn query(&mut self, x: &[f64]) -> Result<OracleAnswer> {
        check_dim(self.dim(), x.len())?;
        self.calls += 1;
        let g = self.objective.subgradient(x);
        Ok(OracleAnswer {
            exact_subgradient: Some(g.clone()),
            subgradient: g,
            value: Some(self.objective.value(x)),
            witness: self.objective.witness(x),
        })
    }

    fn calls(&self) -> usize {
        self.calls
    }

    fn evaluate(&self, x: &[f64]) -> Option<f64> {
        Some(self.objective.value(x))
    }

    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        self.objective.optimum()
    }
}

impl<T: FirstOrderOracle + ?Sized> FirstOrderOracle for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn query(&mut self, x: &[f64]) -> Result<OracleAnswer> {
        (**self).query(x)
    }

    fn calls(&self) -> usize {
        (**self).calls()
    }

    fn evaluate(&self, x: &[f64]) -> Option<f64> {
        (**self).evaluate(x)
    }

    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        (**self).optimum()
    }
}

/// Smallest slack of `f(y) >= f(x) + <f'(x), y - x> + ½ mu ||y - x||^rho`
/// over the given pairs; negative means the declared parameters fail.
pub fn uniform_convexity_slack<O: Objective>(
    f: &O,
    rho: f64,
    mu: f64,
    norm: &NormPair,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> f64 {
    pairs
        .iter()
        .map(|(x, y)| {
            let g = f.subgradient(x);
            let d = linalg::sub(y, x);
            let r = norm.norm_of(&d);
            f.value(y) - f.value(x) - linalg::dot(&g, &d) - 0.5 * mu * r.powf(rho)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Largest dual norm of the subgradients at the given points.
pub fn max_subgradient_norm<O: Objective>(f: &O, norm: &NormPair, points: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .map(|x| norm.dual_norm_of(&f.subgradient(x)))
        .fold(0.0, f64::max)
}
