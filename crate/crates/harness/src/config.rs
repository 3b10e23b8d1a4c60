//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use dualavg::da::RecordPolicy;
use dualavg::geometry::{NormKind, ProxFunction};
use dualavg::multistage::{AdaptiveVariant, Scheme};
use dualavg::problems::NoiseModel;
use dualavg::proxmap::{FeasibleSet, ProxSetup, SetKind};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "one")]
    pub trials: usize,
    /// Master seed; trial `t` uses stream `t` of this seed.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub problem: ProblemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prox: Option<ProxSpec>,
    pub algorithm: AlgorithmSpec,
    #[serde(default = "no_noise")]
    pub noise: NoiseModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn one() -> usize {
    1
}

fn no_noise() -> NoiseModel {
    NoiseModel::None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `kappa/rho ||x - x*||^rho` style objective, see `PowerObjective`.
    Power {
        dim: usize,
        rho: f64,
        #[serde(default = "unit")]
        kappa: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_star: Option<Vec<f64>>,
        set: SetSpec,
    },
    /// `½||x||_p²` written as a max over `w`.
    Saddle { dim: usize, q: f64, set: SetSpec },
    /// Worst-case family answered by the resisting oracle.
    Resisting {
        dim: usize,
        lipschitz: f64,
        rho: f64,
        radius: f64,
        eps: f64,
    },
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    FullSpace,
    EuclideanBall { radius: f64 },
    Simplex,
    L1Ball { radius: f64 },
    /// Uniform bounds `lo <= x_i <= hi`.
    Box { lo: f64, hi: f64 },
}

impl SetSpec {
    pub fn build(&self, dim: usize) -> Result<FeasibleSet> {
        let set = match *self {
            SetSpec::FullSpace => FeasibleSet::full_space(dim),
            SetSpec::EuclideanBall { radius } => FeasibleSet::euclidean_ball(dim, radius)?,
            SetSpec::Simplex => FeasibleSet::simplex(dim),
            SetSpec::L1Ball { radius } => FeasibleSet::l1_ball(dim, radius)?,
            SetSpec::Box { lo, hi } => FeasibleSet::new(
                SetKind::Box {
                    lo: vec![lo; dim],
                    hi: vec![hi; dim],
                },
                dim,
            )?,
        };
        Ok(set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProxSpec {
    Euclid,
    Entropy,
    Pnorm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
    },
}

impl ProxSpec {
    pub fn build(&self, dim: usize) -> Result<ProxFunction> {
        Ok(match *self {
            ProxSpec::Euclid => ProxFunction::half_sq_euclid(dim)?,
            ProxSpec::Entropy => ProxFunction::entropy_sym(dim)?,
            ProxSpec::Pnorm { p } => {
                ProxFunction::pnorm_sq(dim, p.unwrap_or_else(|| dualavg::geometry::default_pnorm_exponent(dim)))?
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Single-stage dual averaging with the constant gain.
    Da,
    Multistage,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<AdaptiveVariant>,
    /// Target accuracy (multistage only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Oracle-call budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// DA gain; defaults to the one balancing the single-stage bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Confidence level for certificates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// `off`, `every` or `decade:<k>`.
    #[serde(default = "record_off")]
    pub record: String,
    #[serde(default)]
    pub certify_dual: bool,
}

fn record_off() -> String {
    "off".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub budgets: Vec<usize>,
    /// Acceptance threshold on the fitted log-log slope.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_slope: Option<f64>,
}

pub fn parse_record(s: &str) -> Result<RecordPolicy> {
    match s {
        "off" => Ok(RecordPolicy::Off),
        "every" => Ok(RecordPolicy::Every),
        _ => {
            let k = s
                .strip_prefix("decade:")
                .and_then(|k| k.parse::<u32>().ok())
                .ok_or_else(|| anyhow!("algorithm.record: expected off, every or decade:<k>, got {s:?}"))?;
            Ok(RecordPolicy::PerDecade(k))
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn dim(&self) -> usize {
        match self.problem {
            ProblemSpec::Power { dim, .. } | ProblemSpec::Saddle { dim, .. } | ProblemSpec::Resisting { dim, .. } => dim,
        }
    }

    pub fn set(&self) -> Result<FeasibleSet> {
        match &self.problem {
            ProblemSpec::Power { dim, set, .. } | ProblemSpec::Saddle { dim, set, .. } => set.build(*dim),
            ProblemSpec::Resisting { dim, radius, .. } => Ok(FeasibleSet::euclidean_ball(*dim, *radius)?),
        }
    }

    pub fn setup(&self) -> Result<ProxSetup> {
        let prox = self.prox.unwrap_or(ProxSpec::Euclid).build(self.dim())?;
        let setup = ProxSetup::new(prox, self.set()?)?;
        if !setup.has_prox_solver() {
            bail!(
                "prox: no prox-mapping solver for {:?} on the {}",
                setup.prox().kind(),
                setup.set().name()
            );
        }
        Ok(setup)
    }

    /// Field-level checks that do not need to build the problem.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            bail!("name: must be a nonempty file-name-safe string");
        }
        if self.trials == 0 {
            bail!("trials: must be at least 1");
        }
        if self.dim() == 0 {
            bail!("problem.dim: must be positive");
        }
        if let ProblemSpec::Power { x_star: Some(x), dim, .. } = &self.problem {
            if x.len() != *dim {
                bail!("problem.x_star: expected {dim} entries, got {}", x.len());
            }
        }
        if matches!(self.problem, ProblemSpec::Resisting { .. }) && self.noise != NoiseModel::None {
            bail!("noise: the resisting oracle is deterministic");
        }
        let a = &self.algorithm;
        parse_record(&a.record)?;
        if let Some(x0) = &a.x0 {
            if x0.len() != self.dim() {
                bail!("algorithm.x0: expected {} entries, got {}", self.dim(), x0.len());
            }
        }
        if let Some(r) = a.r0 {
            if !(r > 0.0 && r.is_finite()) {
                bail!("algorithm.r0: must be positive, got {r}");
            }
        }
        if let Some(alpha) = a.alpha {
            if !(alpha > 0.0 && alpha < 1.0) {
                bail!("algorithm.alpha: need 0 < alpha < 1, got {alpha}");
            }
        }
        let swept = self.sweep.is_some();
        if let Some(s) = &self.sweep {
            if s.budgets.is_empty() {
                bail!("sweep.budgets: empty sweep");
            }
            if s.budgets.contains(&0) {
                bail!("sweep.budgets: budgets must be positive");
            }
        }
        match a.method {
            Method::Da => {
                if a.eps.is_some() {
                    bail!("algorithm.eps: single-stage DA runs on a budget");
                }
                if a.budget.is_none() && !swept {
                    bail!("algorithm.budget: required for method = \"da\"");
                }
            }
            Method::Multistage => match (a.eps, a.budget) {
                (Some(e), None) if !swept => {
                    if !(e > 0.0) {
                        bail!("algorithm.eps: must be positive, got {e}");
                    }
                }
                (None, Some(_)) => {}
                (None, None) if swept => {}
                _ => bail!("algorithm: give exactly one of eps or budget (or a sweep without eps)"),
            },
            Method::Adaptive => {
                if a.eps.is_some() {
                    bail!("algorithm.eps: adaptive methods run on a budget");
                }
                if a.budget.is_none() && !swept {
                    bail!("algorithm.budget: required for method = \"adaptive\"");
                }
            }
        }
        if a.certify_dual {
            if !matches!(self.problem, ProblemSpec::Saddle { .. }) {
                bail!("algorithm.certify_dual: needs a saddle problem");
            }
            if a.method != Method::Multistage || a.eps.is_none() {
                bail!("algorithm.certify_dual: needs method = \"multistage\" with a target eps");
            }
        }
        Ok(())
    }

    /// Starting point: `algorithm.x0` or the center of `Q`.
    pub fn x0(&self) -> Result<Vec<f64>> {
        if let Some(x) = &self.algorithm.x0 {
            return Ok(x.clone());
        }
        let set = self.set()?;
        let n = self.dim();
        Ok(match set.kind() {
            SetKind::Simplex => vec![1.0 / n as f64; n],
            SetKind::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect(),
            _ => vec![0.0; n],
        })
    }

    /// `algorithm.r0`, or the diameter of `Q` in the setup norm when it is known.
    pub fn r0(&self, setup: &ProxSetup) -> Result<f64> {
        if let Some(r) = self.algorithm.r0 {
            return Ok(r);
        }
        let set = setup.set();
        let d = match (setup.norm().kind(), set.kind()) {
            (NormKind::L2, _) => set.diameter(),
            (NormKind::L1, SetKind::Simplex) => Some(2.0),
            (NormKind::L1, SetKind::L1Ball { radius }) => Some(2.0 * radius),
            _ => None,
        };
        d.ok_or_else(|| anyhow!("algorithm.r0: required for the {} with this prox", set.name()))
    }

    pub fn scheme(&self) -> Scheme {
        self.algorithm.scheme.unwrap_or(Scheme::Ball)
    }

    pub fn variant(&self) -> AdaptiveVariant {
        self.algorithm.variant.unwrap_or(AdaptiveVariant::Deterministic)
    }
}
