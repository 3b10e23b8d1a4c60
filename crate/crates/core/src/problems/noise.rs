use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NormKind, NormPair};

use super::{FirstOrderOracle, OracleAnswer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    /// Uniform direction on the dual sphere of radius `sigma`.
    BoundedDualBall { sigma: f64 },
    /// Scaled Gaussian vector; see [`subgaussian_scale`].
    SubGaussian { sigma: f64 },
}

impl NoiseModel {
    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::BoundedDualBall { sigma } | NoiseModel::SubGaussian { sigma } => sigma,
        }
    }

    fn validate(&self) -> Result<()> {
        let s = self.sigma();
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::invalid("sigma", format!("must be nonnegative, got {s}")));
        }
        Ok(())
    }
}

/// Per-coordinate scale `c` such that `xi = c g`, `g ~ N(0, I_n)`, satisfies
/// `E exp(||xi||_*² / sigma²) <= e`.
///
/// - `l2` dual: `c = sigma sqrt((1 - e^(-1/(2n))) / 2)`. Since
///   `E exp(t ||g||²) = (1 - 2t)^(-n/2)` the moment equals `e^(1/4)`; the
///   margin keeps `exp(||xi||²/sigma²)` square integrable, so the bound can
///   be checked by sampling.
/// - `l_inf` dual: `c = sigma / sqrt(2 ln(2n) + 4)`. Write `t = c²/sigma²`
///   and `M = max g_i²`. For `t <= s < 1/2` Jensen gives
///   `E e^(tM) <= (E e^(sM))^(t/s) <= (n (1 - 2s)^(-1/2))^(t/s)`; taking
///   `1 - 2s = 1/(2 ln(2n) + 4)` the exponent is at most 1 whenever
///   `ln(2n) <= 38`, far beyond any dimension in use.
/// - `l_q` dual: the `l2` scale, divided by `n^(1/q - 1/2)` when `q < 2`.
pub fn subgaussian_scale(norm: &NormPair, sigma: f64) -> f64 {
    let n = norm.dim() as f64;
    let l2 = sigma * ((1.0 - (-0.5 / n).exp()) / 2.0).sqrt();
    match norm.kind() {
        NormKind::L1 => sigma / (2.0 * (2.0 * n).ln() + 4.0).sqrt(),
        NormKind::L2 => l2,
        NormKind::Lp(p) => {
            let q = p / (p - 1.0);
            if q < 2.0 {
                l2 / n.powf(1.0 / q - 0.5)
            } else {
                l2
            }
        }
    }
}

/// Adds zero-mean noise to a deterministic oracle.
///
/// The noise of call `k` in trial `t` comes from a ChaCha20 stream keyed by
/// the experiment seed, with stream id `t` and word position `k << 32`, so
/// every draw is a pure function of `(seed, trial, call)`. Objective values
/// are not revealed.
#[derive(Debug, Clone)]
pub struct StochasticOracle<B> {
    base: B,
    noise: NoiseModel,
    norm: NormPair,
    seed: u64,
    trial: u64,
    calls: usize,
}

impl<B: FirstOrderOracle> StochasticOracle<B> {
    pub fn new(base: B, noise: NoiseModel, norm: NormPair, seed: u64, trial: u64) -> Result<Self> {
        noise.validate()?;
        crate::error::check_dim(base.dim(), norm.dim())?;
        Ok(Self {
            base,
            noise,
            norm,
            seed,
            trial,
            calls: 0,
        })
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn base(&self) -> &B {
        &self.base
    }

    /// The noise vector of a given call.
    pub fn draw(&self, call: usize) -> Vec<f64> {
        let n = self.norm.dim();
        match self.noise {
            NoiseModel::None => vec![0.0; n],
            NoiseModel::BoundedDualBall { sigma } => {
                let g = self.gaussian(call);
                let r = self.norm.dual_norm_of(&g);
                if r == 0.0 || sigma == 0.0 {
                    return vec![0.0; n];
                }
                g.iter().map(|v| sigma * v / r).collect()
            }
            NoiseModel::SubGaussian { sigma } => {
                let c = subgaussian_scale(&self.norm, sigma);
                self.gaussian(call).iter().map(|v| c * v).collect()
            }
        }
    }

    fn gaussian(&self, call: usize) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.trial);
        rng.set_word_pos((call as u128) << 32);
        (0..self.norm.dim()).map(|_| StandardNormal.sample(&mut rng)).collect()
    }
}

impl<B: FirstOrderOracle> FirstOrderOracle for StochasticOracle<B> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn query(&mut self, x: &[f64]) -> Result<OracleAnswer> {
        let exact = self.base.query(x)?;
        let call = self.calls;
        self.calls += 1;
        if matches!(self.noise, NoiseModel::None) {
            return Ok(exact);
        }
        let xi = self.draw(call);
        let g: Vec<f64> = exact.subgradient.iter().zip(&xi).map(|(a, b)| a + b).collect();
        Ok(OracleAnswer {
            subgradient: g,
            value: None,
            witness: exact.witness,
            exact_subgradient: Some(exact.subgradient),
        })
    }

    fn calls(&self) -> usize {
        self.calls
    }

    fn evaluate(&self, x: &[f64]) -> Option<f64> {
        self.base.evaluate(x)
    }

    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        self.base.optimum()
    }
}
