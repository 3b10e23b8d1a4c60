//! Independent reference computations for the acceptance criteria.

use dualavg::error::Result;
use dualavg::geometry::{default_pnorm_exponent, lp_norm, NormKind, ProxFunction, ProxKind};
use dualavg::linalg;
use dualavg::problems::{FirstOrderOracle, OracleAnswer};
use dualavg::proxmap::{FeasibleSet, LocalProblem, ProxSetup, SetKind};
use rand::Rng;

/// Symmetrized entropy by Newton's method on the coupling constant.
pub fn entropy_d(y: &[f64]) -> f64 {
    let n = y.len();
    if y.iter().map(|v| v.abs()).sum::<f64>() > 1.0 + 1e-12 {
        return f64::INFINITY;
    }
    let phi = |c: f64| y.iter().map(|v| (v * v + 4.0 * c * c).sqrt()).sum::<f64>() - 1.0;
    let mut c = 0.0;
    if phi(0.0) < 0.0 {
        c = 0.5 / n as f64;
        for _ in 0..100 {
            let f = phi(c);
            let df: f64 = y.iter().map(|v| 4.0 * c / (v * v + 4.0 * c * c).sqrt()).sum();
            let step = f / df;
            c -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
    }
    let psi = |t: f64| if t > 0.0 { t * t.ln() } else { 0.0 };
    let mut total = (2.0 * n as f64).ln();
    for v in y {
        let root = (v * v + 4.0 * c * c).sqrt();
        total += psi(0.5 * (root + v)) + psi(0.5 * (root - v));
    }
    total
}

pub fn d_value(kind: ProxKind, y: &[f64]) -> f64 {
    match kind {
        ProxKind::HalfSqEuclid => 0.5 * y.iter().map(|v| v * v).sum::<f64>(),
        ProxKind::PNormSq(p) => 0.5 * lp_norm(y, p).powi(2),
        ProxKind::EntropySym => entropy_d(y),
    }
}

pub fn primal_norm(kind: NormKind, h: &[f64]) -> f64 {
    match kind {
        NormKind::L1 => h.iter().map(|v| v.abs()).sum(),
        NormKind::L2 => h.iter().map(|v| v * v).sum::<f64>().sqrt(),
        NormKind::Lp(p) => lp_norm(h, p),
    }
}

pub fn dual_norm(kind: NormKind, g: &[f64]) -> f64 {
    match kind {
        NormKind::L1 => g.iter().fold(0.0, |m, v| m.max(v.abs())),
        NormKind::L2 => g.iter().map(|v| v * v).sum::<f64>().sqrt(),
        NormKind::Lp(p) => lp_norm(g, p / (p - 1.0)),
    }
}

/// Zooming grid search for `max <s, x - z> - beta d((x - z)/R)` over `Q ∩ B_R(z)`.
pub struct GridOracle<'a> {
    pub lp: &'a LocalProblem,
    pub s: &'a [f64],
}

impl GridOracle<'_> {
    fn point(&self, p: &[f64]) -> Vec<f64> {
        match self.lp.setup().set().kind() {
            SetKind::Simplex => {
                let mut x = p.to_vec();
                x.push(1.0 - p.iter().sum::<f64>());
                x
            }
            _ => p.to_vec(),
        }
    }

    fn feasible(&self, x: &[f64]) -> bool {
        let lp = self.lp;
        let h = linalg::sub(x, lp.center());
        primal_norm(lp.setup().norm().kind(), &h) <= lp.radius() && lp.setup().set().contains_tol(x, 0.0)
    }

    fn retract(&self, p: &[f64]) -> Vec<f64> {
        let x = self.point(p);
        if self.feasible(&x) {
            return x;
        }
        let z = self.lp.center();
        let at = |t: f64| -> Vec<f64> { z.iter().zip(&x).map(|(zi, xi)| zi + t * (xi - zi)).collect() };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..45 {
            let mid = 0.5 * (lo + hi);
            if self.feasible(&at(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(lo)
    }

    fn value(&self, p: &[f64]) -> (f64, Vec<f64>) {
        let x = self.retract(p);
        let lp = self.lp;
        let h = linalg::sub(&x, lp.center());
        let y: Vec<f64> = h.iter().map(|v| v / lp.radius()).collect();
        (linalg::dot(self.s, &h) - lp.beta() * d_value(lp.setup().prox().kind(), &y), x)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let lp = self.lp;
        let h = linalg::sub(x, lp.center());
        let y: Vec<f64> = h.iter().map(|v| v / lp.radius()).collect();
        linalg::dot(self.s, &h) - lp.beta() * d_value(lp.setup().prox().kind(), &y)
    }

    pub fn maximize(&self) -> f64 {
        let z = self.lp.center();
        let k = match self.lp.setup().set().kind() {
            SetKind::Simplex => z.len() - 1,
            _ => z.len(),
        };
        let r = self.lp.radius();
        let mut lo: Vec<f64> = z[..k].iter().map(|v| v - r).collect();
        let mut hi: Vec<f64> = z[..k].iter().map(|v| v + r).collect();
        let mut best = (self.value(&z[..k]).0, z[..k].to_vec());
        let first = if k == 3 { 21 } else { 81 };
        for pass in 0..60 {
            let g = if pass == 0 { first } else if k == 3 { 11 } else { 21 };
            let mut idx = vec![0usize; k];
            loop {
                let p: Vec<f64> = (0..k)
                    .map(|d| lo[d] + (hi[d] - lo[d]) * idx[d] as f64 / (g - 1) as f64)
                    .collect();
                let (v, x) = self.value(&p);
                if v > best.0 {
                    best = (v, x[..k].to_vec());
                }
                let mut d = 0;
                while d < k {
                    idx[d] += 1;
                    if idx[d] < g {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
                if d == k {
                    break;
                }
            }
            if (0..k).all(|d| hi[d] - lo[d] < 1e-9) {
                break;
            }
            for d in 0..k {
                let cell = (hi[d] - lo[d]) / (g - 1) as f64;
                lo[d] = best.1[d] - 3.0 * cell;
                hi[d] = best.1[d] + 3.0 * cell;
            }
        }
        best.0
    }
}

pub fn random_center<R: Rng>(set: &FeasibleSet, rng: &mut R) -> Vec<f64> {
    let n = set.dim();
    match set.kind() {
        SetKind::Simplex => {
            let mut w: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().ln()).collect();
            if rng.random::<f64>() < 0.2 {
                w[rng.random_range(0..n)] = 0.0;
            }
            let t: f64 = w.iter().sum();
            w.iter().map(|v| v / t).collect()
        }
        SetKind::L1Ball { radius } => {
            let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let t: f64 = v.iter().map(|x| x.abs()).sum();
            let scale = radius * rng.random::<f64>() / t;
            v.iter().map(|x| x * scale).collect()
        }
        SetKind::EuclideanBall { radius } => {
            let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let t = linalg::norm2(&v);
            let scale = radius * rng.random::<f64>() / t;
            v.iter().map(|x| x * scale).collect()
        }
        SetKind::Box { lo, hi } => lo.iter().zip(hi).map(|(l, h)| l + (h - l) * rng.random::<f64>()).collect(),
        SetKind::FullSpace => (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
    }
}

pub fn sets(n: usize) -> Vec<FeasibleSet> {
    vec![
        FeasibleSet::full_space(n),
        FeasibleSet::euclidean_ball(n, 1.0).unwrap(),
        FeasibleSet::simplex(n),
        FeasibleSet::l1_ball(n, 1.0).unwrap(),
        FeasibleSet::new(
            SetKind::Box {
                lo: vec![-0.5; n],
                hi: vec![1.0; n],
            },
            n,
        )
        .unwrap(),
    ]
}

/// Every (set, prox) pair that has a prox solver.
pub fn supported_setups(n: usize) -> Vec<ProxSetup> {
    let mut out = Vec::new();
    for kind in [ProxKind::HalfSqEuclid, ProxKind::EntropySym, ProxKind::PNormSq(default_pnorm_exponent(n))] {
        for set in sets(n) {
            let setup = ProxSetup::new(ProxFunction::new(kind, n).unwrap(), set).unwrap();
            if setup.has_prox_solver() {
                out.push(setup);
            }
        }
    }
    out
}

pub fn random_problem<R: Rng>(setup: &ProxSetup, rng: &mut R) -> (LocalProblem, Vec<f64>) {
    let z = random_center(setup.set(), rng);
    let r = 0.05 + 1.2 * rng.random::<f64>();
    let beta = 0.2 + 4.0 * rng.random::<f64>();
    let scale = [0.1, 1.0, 5.0][rng.random_range(0..3)];
    let s: Vec<f64> = (0..setup.dim()).map(|_| scale * (rng.random::<f64>() * 2.0 - 1.0)).collect();
    (LocalProblem::new(setup.clone(), z, r, beta).unwrap(), s)
}

/// A uniform-ish point of `Q ∩ B_R(z)`: project a random point onto `Q`,
/// then pull it toward `z` by a random factor.
pub fn sample_local<R: Rng>(lp: &LocalProblem, rng: &mut R) -> Vec<f64> {
    let n = lp.dim();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
    let y = lp.setup().set().project(&y);
    let z = lp.center();
    let h = linalg::sub(&y, z);
    let d = primal_norm(lp.setup().norm().kind(), &h);
    let t = rng.random::<f64>() * if d > lp.radius() { lp.radius() / d } else { 1.0 };
    z.iter().zip(&h).map(|(a, b)| a + t * b).collect()
}

/// Passes queries through and keeps every query point and answer.
pub struct Recording<O> {
    pub inner: O,
    pub points: Vec<Vec<f64>>,
    pub grads: Vec<Vec<f64>>,
}

impl<O> Recording<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            points: vec![],
            grads: vec![],
        }
    }
}

impl<O: FirstOrderOracle> FirstOrderOracle for Recording<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn query(&mut self, x: &[f64]) -> Result<OracleAnswer> {
        let a = self.inner.query(x)?;
        self.points.push(x.to_vec());
        self.grads.push(a.subgradient.clone());
        Ok(a)
    }

    fn calls(&self) -> usize {
        self.inner.calls()
    }

    fn evaluate(&self, x: &[f64]) -> Option<f64> {
        self.inner.evaluate(x)
    }

    fn optimum(&self) -> Option<(Vec<f64>, f64)> {
        self.inner.optimum()
    }
}

/// Both sides of the regret inequality at `x`, with unit weights and the
/// gains `betas[0..=N+1]`, from the recorded queries:
/// `sum <g_i, x_i - x>` and
/// `beta_{N+1} d((x - z)/R) + R²/(2 mu) sum ||g_i||_*² / beta_i`.
pub fn regret_sides(lp: &LocalProblem, points: &[Vec<f64>], grads: &[Vec<f64>], betas: &[f64], x: &[f64]) -> (f64, f64) {
    let kind = lp.setup().norm().kind();
    let mu = lp.setup().prox().mu();
    let r = lp.radius();
    let mut lhs = 0.0;
    let mut sq = 0.0;
    for (i, (xi, g)) in points.iter().zip(grads).enumerate() {
        lhs += g.iter().zip(xi).zip(x).map(|((g, a), b)| g * (a - b)).sum::<f64>();
        sq += dual_norm(kind, g).powi(2) / betas[i];
    }
    let y: Vec<f64> = x.iter().zip(lp.center()).map(|(a, b)| (a - b) / r).collect();
    let rhs = betas[points.len()] * d_value(lp.setup().prox().kind(), &y) + r * r / (2.0 * mu) * sq;
    (lhs, rhs)
}

/// Least-squares slope and intercept of `log10 gap` against `log10 n`.
pub fn log_slope(points: &[(f64, f64)]) -> (f64, f64) {
    let xs: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Largest dual norm of the gradient of `2^(rho-3) ||x - x*||_2^rho` over
/// a Euclidean ball of radius `r` centered at the origin.
pub fn power_lipschitz_on_ball(rho: f64, x_star: &[f64], r: f64) -> f64 {
    let reach = r + linalg::norm2(x_star);
    2f64.powf(rho - 3.0) * rho * reach.powf(rho - 1.0)
}

/// `(mean, standard error)`.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
