//! Worst-case instances `f(x) = ½L max_{i<=M}(xi_i x_i + d_i) + 2^(rho-3)||x||_2^rho`
//! on a Euclidean ball, and the oracle that builds one adversarially.

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::proxmap::FeasibleSet;

use super::{ConvexityParams, FirstOrderOracle, Objective, OracleAnswer};

/// Largest integer strictly smaller than `a`.
fn strict_floor(a: f64) -> f64 {
    a.ceil() - 1.0
}

/// Size parameters of the hard family for a target accuracy `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardInstance {
    pub dim: usize,
    pub lipschitz: f64,
    pub rho: f64,
    pub radius: f64,
    pub eps: f64,
    /// Number of pieces, which is also the number of queries the bound covers.
    pub pieces: usize,
    pub delta: f64,
    /// Offsets stay below `delta min(1, 2/L)`, so that the piecewise term
    /// `½L d_i` never exceeds `delta` at the near-minimizer.
    pub offset_cap: f64,
    /// Scale of the near-minimizer `-lambda sum xi_i e_i`.
    pub lambda: f64,
}

impl HardInstance {
    pub fn new(dim: usize, lipschitz: f64, rho: f64, radius: f64, eps: f64) -> Result<Self> {
        if !(rho >= 2.0 && rho.is_finite()) {
            return Err(Error::invalid("rho", format!("need rho >= 2, got {rho}")));
        }
        if !(radius > 0.0 && eps > 0.0) {
            return Err(Error::invalid("radius/eps", "must be positive"));
        }
        let l_min = 2f64.powf(rho - 2.0) * rho * radius.powf(rho - 1.0);
        if !(lipschitz >= l_min) {
            return Err(Error::invalid(
                "lipschitz",
                format!("need L >= 2^(rho-2) rho R^(rho-1) = {l_min}, got {lipschitz}"),
            ));
        }
        let (l, r) = (lipschitz, radius);
        let a = l * l * r * r / (16.0 * eps * eps);
        let b = l * l / (8.0 * eps.powf(2.0 * (rho - 1.0) / rho));
        let m = strict_floor(a.min(b));
        if m < 1.0 {
            return Err(Error::invalid("eps", "too large: the family has no pieces"));
        }
        if m > dim as f64 {
            return Err(Error::invalid(
                "dim",
                format!("the family needs {m} pieces but the dimension is {dim}"),
            ));
        }
        let mf = m;
        let delta = (l * r / (4.0 * mf.sqrt()))
            .min(l.powf(rho / (rho - 1.0)) / (8.0 * mf.powf(rho / (2.0 * (rho - 1.0)))))
            - eps;
        if !(delta > 0.0) {
            return Err(Error::invalid(
                "eps",
                format!("offset bound delta = {delta} is not positive for these parameters"),
            ));
        }
        let lambda = (r / mf.sqrt()).min(
            (2f64.powf(2.0 - rho) * l / (rho * mf.powf(rho / 2.0))).powf(1.0 / (rho - 1.0)),
        );
        Ok(Self {
            dim,
            lipschitz,
            rho,
            radius,
            eps,
            pieces: m as usize,
            delta,
            offset_cap: delta * (2.0 / lipschitz).min(1.0),
            lambda,
        })
    }

    pub fn set(&self) -> FeasibleSet {
        FeasibleSet::euclidean_ball(self.dim, self.radius).expect("radius checked")
    }

    /// `L` bounds `||f'||_2` on the ball since `½L >= 2^(rho-3) rho R^(rho-1)`.
    pub fn params(&self) -> ConvexityParams {
        ConvexityParams::new(self.rho, 1.0, self.lipschitz, 0.0).expect("checked at construction")
    }

    fn power_coef(&self) -> f64 {
        2f64.powf(self.rho - 3.0)
    }
}

/// A fixed member of the hard family.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePlusPower {
    inst: HardInstance,
    signs: Vec<f64>,
    offsets: Vec<f64>,
}

impl PiecewisePlusPower {
    pub fn new(inst: HardInstance, signs: Vec<f64>, offsets: Vec<f64>) -> Result<Self> {
        check_dim(inst.pieces, signs.len())?;
        check_dim(inst.pieces, offsets.len())?;
        if signs.iter().any(|s| *s != 1.0 && *s != -1.0) {
            return Err(Error::invalid("signs", "must be +1 or -1"));
        }
        if offsets.iter().any(|d| !(d.abs() < inst.offset_cap)) {
            return Err(Error::invalid("offsets", format!("need |d_i| < {}", inst.offset_cap)));
        }
        Ok(Self { inst, signs, offsets })
    }

    pub fn instance(&self) -> &HardInstance {
        &self.inst
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// `-lambda sum xi_i e_i`, where `f <= -eps`.
    pub fn near_minimizer(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.inst.dim];
        for (i, s) in self.signs.iter().enumerate() {
            x[i] = -self.inst.lambda * s;
        }
        x
    }

    /// `f(x) - f(x_bar)`, a lower bound on `f(x) - f*`.
    pub fn gap_lower_bound(&self, x: &[f64]) -> f64 {
        self.value(x) - self.value(&self.near_minimizer())
    }
}

/// Lowest-index maximizer of `xi_i x_i + d_i` over the listed pieces.
fn active_piece(pieces: impl Iterator<Item = (usize, f64, f64)>, x: &[f64]) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, s, d) in pieces {
        let v = s * x[i] + d;
        if best.map_or(true, |(_, _, bv)| v > bv) {
            best = Some((i, s, v));
        }
    }
    best
}

fn answer(inst: &HardInstance, active: (usize, f64, f64), x: &[f64]) -> (f64, Vec<f64>) {
    let (i, s, v) = active;
    let r = linalg::norm2(x);
    let c = inst.power_coef();
    let value = 0.5 * inst.lipschitz * v + c * r.powf(inst.rho);
    let scale = if r == 0.0 { 0.0 } else { c * inst.rho * r.powf(inst.rho - 2.0) };
    let mut g: Vec<f64> = x.iter().map(|xi| scale * xi).collect();
    g[i] += 0.5 * inst.lipschitz * s;
    (value, g)
}

impl Objective for PiecewisePlusPower {
    fn dim(&self) -> usize {
        self.inst.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.evaluate_full(x).0
    }

    fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        self.evaluate_full(x).1
    }
}

impl PiecewisePlusPower {
    fn evaluate_full(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let pieces = (0..self.inst.pieces).map(|i| (i, self.signs[i], self.offsets[i]));
        let active = active_piece(pieces, x).expect("at least one piece");
        answer(&self.inst, active, x)
    }
}

/// Adversarial oracle for the hard family.
///
/// The `k`-th query fixes one more piece: among the first `M` coordinates not
/// used yet it picks the one of largest magnitude in the query (lowest index
/// on ties), takes its sign (`+1` for zero) and the offset `2^-k` times the
/// offset cap.
/// The answer uses the fixed pieces only; pieces fixed later have smaller
/// offsets and never exceed the answered maximum at earlier queries, so
/// earlier answers remain valid for the final function. After `M` queries
/// the function is frozen.
#[derive(Debug, Clone)]
pub struct ResistingOracle {
    inst: HardInstance,
    fixed: Vec<(usize, f64, f64)>,
    used: Vec<bool>,
    calls: usize,
}

impl ResistingOracle {
    pub fn new(inst: HardInstance) -> Self {
        Self {
            used: vec![false; inst.pieces],
            inst,
            fixed: Vec::new(),
            calls: 0,
        }
    }

    pub fn instance(&self) -> &HardInstance {
        &self.inst
    }

    /// Pieces fixed so far, as `(index, sign, offset)` in query order.
    pub fn fixed(&self) -> &[(usize, f64, f64)] {
        &self.fixed
    }

    pub fn is_frozen(&self) -> bool {
        self.fixed.len() == self.inst.pieces
    }

    /// The function consistent with every answer so far. Pieces not fixed
    /// yet get sign `+1` and offset `2^-(k+1)` times the cap, below all fixed ones.
    pub fn frozen_instance(&self) -> PiecewisePlusPower {
        let m = self.inst.pieces;
        let rest = self.inst.offset_cap * 2f64.powi(-(self.fixed.len() as i32 + 1));
        let mut signs = vec![1.0; m];
        let mut offsets = vec![rest; m];
        for &(i, s, d) in &self.fixed {
            signs[i] = s;
            offsets[i] = d;
        }
        PiecewisePlusPower::new(self.inst, signs, offsets).expect("offsets below delta")
    }

    fn fix_next(&mut self, x: &[f64]) {
        let mut pick: Option<usize> = None;
        for i in 0..self.inst.pieces {
            if self.used[i] {
                continue;
            }
            if pick.map_or(true, |j| x[i].abs() > x[j].abs()) {
                pick = Some(i);
            }
        }
        let i = pick.expect("called only before freezing");
        let k = self.fixed.len() + 1;
        let sign = if x[i] < 0.0 { -1.0 } else { 1.0 };
        self.used[i] = true;
        self.fixed.push((i, sign, self.inst.offset_cap * 2f64.powi(-(k as i32))));
    }
}

impl FirstOrderOracle for ResistingOracle {
    fn dim(&self) -> usize {
        self.inst.dim
    }

    fn query(&mut self, x: &[f64]) -> Result<OracleAnswer> {
        check_dim(self.inst.dim, x.len())?;
        self.calls += 1;
        if !self.is_frozen() {
            self.fix_next(x);
        }
        let active = active_piece(self.fixed.iter().copied(), x).expect("one piece is fixed");
        let (value, g) = answer(&self.inst, active, x);
        Ok(OracleAnswer {
            exact_subgradient: Some(g.clone()),
            subgradient: g,
            value: Some(value),
            witness: None,
        })
    }

    fn calls(&self) -> usize {
        self.calls
    }

    fn evaluate(&self, x: &[f64]) -> Option<f64> {
        Some(self.frozen_instance().value(x))
    }
}
