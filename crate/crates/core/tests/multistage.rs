use dualavg::da::{da_run, DaConfig, RecordPolicy};
use dualavg::geometry::{NormPair, ProxFunction};
use dualavg::multistage::{
    accuracy_budget, adaptive_bound, adaptive_certificate, budget_bound, min_multistage_budget, run_adaptive,
    run_ball, run_fixed_dilation, run_multistage, schedule_ball_eps, schedule_budget, schedule_eps, stoca_bound,
    AdaptiveParams, AdaptiveVariant, Mode, RunParams, Scheme,
};
use dualavg::problems::{
    ConvexityParams, DeterministicOracle, FirstOrderOracle, NoiseModel, Objective, PowerObjective, StochasticOracle,
};
use dualavg::proxmap::{FeasibleSet, LocalProblem, ProxSetup};

fn ball_problem(n: usize, rho: f64, kappa: f64) -> (PowerObjective, ProxSetup) {
    let ball = FeasibleSet::euclidean_ball(n, 1.0).unwrap();
    let mut xs = vec![0.0; n];
    xs[0] = 0.3;
    xs[n - 1] = -0.2;
    let f = PowerObjective::scaled(rho, kappa, xs, ball.clone()).unwrap();
    let setup = ProxSetup::new(ProxFunction::half_sq_euclid(n).unwrap(), ball).unwrap();
    (f, setup)
}

fn gap(f: &PowerObjective, x: &[f64]) -> f64 {
    f.value(x) - f.optimum().unwrap().1
}

#[test]
fn cubic_schedule_matches_a_second_derivation() {
    // independent re-derivation with logarithms instead of powers
    let (rho, mu_f, l, r0, eps) = (3.0f64, 0.5f64, 2.0f64, 1.5f64, 1e-3f64);
    let d = ProxFunction::half_sq_euclid(4).unwrap();
    let p = ConvexityParams::new(rho, mu_f, l, 0.0).unwrap();
    let s = schedule_ball_eps(&p, &d, r0, eps).unwrap();
    assert!((s.tau - 4.0 / 3.0).abs() < 1e-15);

    let ratio = mu_f * r0.powi(3) / eps;
    let mut m = 0;
    while 2f64.powi(m + 1) < ratio {
        m += 1;
    }
    // m is now the largest integer with 2^m < ratio
    assert_eq!(s.stages.len(), (m + 1) as usize);
    let ln_unit = (4.0 * l * l * 0.5).ln() - 2.0 * mu_f.ln() - 4.0 * r0.ln();
    for (i, st) in s.stages.iter().enumerate() {
        let k = (i + 1) as f64;
        let expect = (ln_unit + k * 4.0 / 3.0 * 2f64.ln()).exp().floor() as usize;
        assert_eq!(st.iterations, expect, "stage {k}");
        assert!((st.target_radius.powi(3) - r0.powi(3) / 2f64.powf(k)).abs() < 1e-12);
        // sqrt(2 mu(d) A(d)) = 1 for the Euclidean prox
        assert!((st.gamma - l * st.ball_radius).abs() < 1e-12);
    }
    assert!(s.stages.windows(2).all(|w| w[1].iterations > w[0].iterations));
    let budget = accuracy_budget(&p, &d, Scheme::Ball, eps).unwrap();
    assert!(s.total_calls() as f64 <= budget);
}

#[test]
fn shrinking_balls_reach_the_target_accuracy() {
    let n = 5;
    let (f, setup) = ball_problem(n, 2.0, 1.0);
    let params = f.params(&setup.norm(), 0.0).unwrap();
    let eps = 1e-3;
    let r0 = 1.0;
    let rp = RunParams::new(Mode::TargetAccuracy { eps }, Scheme::Ball, params, setup.clone(), vec![0.0; n], r0);
    let mut o = DeterministicOracle::new(f.clone());
    let out = run_ball(&mut o, &rp).unwrap();
    assert!(gap(&f, &out.x_hat) <= eps, "gap {}", gap(&f, &out.x_hat));
    let budget = accuracy_budget(&params, setup.prox(), Scheme::Ball, eps).unwrap();
    assert!((o.calls() as f64) <= budget, "{} calls > {budget}", o.calls());
    assert_eq!(out.trace.total_calls(), o.calls());
    let sched = schedule_ball_eps(&params, setup.prox(), r0, eps).unwrap();
    assert_eq!(sched.total_calls(), o.calls());
    for s in &out.trace.stages {
        let k = s.stage.k as i32;
        let dist = s.dist_to_opt.unwrap();
        assert!(dist.powi(2) <= 2f64.powi(-k) * r0 * r0 + 1e-12, "stage {k}: {dist}");
        let delta = s.delta_observed.unwrap();
        assert!(delta <= params.mu_f * s.stage.target_radius.powi(2) + 1e-12, "stage {k}: delta {delta}");
    }
}

#[test]
fn small_budget_falls_back_to_plain_da() {
    let n = 4;
    let (f, setup) = ball_problem(n, 2.0, 1.0);
    let params = f.params(&setup.norm(), 0.0).unwrap();
    let nbar = min_multistage_budget(&params, setup.prox(), Scheme::Ball, 1.0).unwrap();
    let calls = (nbar.ceil() as usize).saturating_sub(1).max(2);
    assert!((calls as f64) < nbar);
    let rp = RunParams::new(Mode::FixedBudget { calls }, Scheme::Ball, params, setup.clone(), vec![0.0; n], 1.0);
    let mut o = DeterministicOracle::new(f.clone());
    let out = run_multistage(&mut o, &rp).unwrap();
    assert_eq!(out.trace.warnings.len(), 1);
    assert_eq!(o.calls(), calls);

    let gamma = params.lipschitz * 1.0 / (2.0 * setup.prox().mu() * setup.prox().a()).sqrt();
    let lp = LocalProblem::new(setup, vec![0.0; n], 1.0, 1.0).unwrap();
    let plain = da_run(&mut DeterministicOracle::new(f), &lp, &DaConfig::constant(calls - 1, gamma)).unwrap();
    assert_eq!(plain.x_out, out.x_hat);
}

#[test]
fn fixed_budget_stays_within_budget_and_bound() {
    for (rho, kappa) in [(2.0, 1.0), (3.0, 2.0)] {
        let n = 4;
        let (f, setup) = ball_problem(n, rho, kappa);
        let params = f.params(&setup.norm(), 0.0).unwrap();
        for calls in [500usize, 5000, 20000] {
            for scheme in [Scheme::Ball, Scheme::FixedDilation] {
                let r0 = if scheme == Scheme::Ball { 1.0 } else { 2.0 };
                let rp = RunParams::new(Mode::FixedBudget { calls }, scheme, params, setup.clone(), vec![0.0; n], r0);
                let mut o = DeterministicOracle::new(f.clone());
                let out = run_multistage(&mut o, &rp).unwrap();
                assert!(o.calls() <= calls);
                let sched = schedule_budget(&params, setup.prox(), scheme, r0, calls).unwrap();
                if let Some(s) = sched {
                    assert_eq!(s.total_calls(), o.calls());
                    let bound = budget_bound(&params, setup.prox(), scheme, calls).unwrap();
                    let g = gap(&f, &out.x_hat);
                    assert!(g <= bound, "rho {rho} N {calls} {scheme:?}: {g} > {bound}");
                }
            }
        }
    }
}

#[test]
fn fixed_dilation_reaches_the_target_accuracy() {
    let n = 5;
    let (f, setup) = ball_problem(n, 2.0, 1.0);
    let params = f.params(&setup.norm(), 0.0).unwrap();
    let eps = 1e-3;
    let r0 = 2.0;
    let rp = RunParams::new(Mode::TargetAccuracy { eps }, Scheme::FixedDilation, params, setup.clone(), vec![0.0; n], r0);
    let mut o = DeterministicOracle::new(f.clone());
    let out = run_fixed_dilation(&mut o, &rp).unwrap();
    assert!(gap(&f, &out.x_hat) <= eps);
    let budget = accuracy_budget(&params, setup.prox(), Scheme::FixedDilation, eps).unwrap();
    assert!((o.calls() as f64) <= budget);
    let ball = schedule_eps(&params, setup.prox(), Scheme::Ball, r0, eps).unwrap();
    let dil = schedule_eps(&params, setup.prox(), Scheme::FixedDilation, r0, eps).unwrap();
    // Euclidean prox has A = C = 1/2, so the stage lengths coincide
    let a: Vec<usize> = ball.stages.iter().map(|s| s.iterations).collect();
    let b: Vec<usize> = dil.stages.iter().map(|s| s.iterations).collect();
    assert_eq!(a, b);
    assert!(out.trace.stages.iter().all(|s| s.stage.ball_radius == r0));
    assert!(run_ball(&mut DeterministicOracle::new(f), &rp).is_err());
}

#[test]
fn stochastic_fixed_dilation_mean_gap_and_contraction() {
    let n = 4;
    let sigma = 1.0;
    let (f, setup) = ball_problem(n, 2.0, 1.0);
    let params = f.params(&setup.norm(), sigma).unwrap();
    let calls = 2000;
    let r0 = 2.0;
    let rp = RunParams::new(Mode::FixedBudget { calls }, Scheme::FixedDilation, params, setup.clone(), vec![0.0; n], r0);
    let sched = schedule_budget(&params, setup.prox(), Scheme::FixedDilation, r0, calls).unwrap().unwrap();
    let m = sched.stages.len();
    let trials = 200;
    let mut gaps = Vec::with_capacity(trials);
    let mut sq_dist = vec![0.0; m];
    for t in 0..trials {
        let mut o = StochasticOracle::new(
            DeterministicOracle::new(f.clone()),
            NoiseModel::BoundedDualBall { sigma },
            NormPair::l2(n),
            7,
            t as u64,
        )
        .unwrap();
        let out = run_fixed_dilation(&mut o, &rp).unwrap();
        gaps.push(gap(&f, &out.x_hat));
        for (k, s) in out.trace.stages.iter().enumerate() {
            sq_dist[k] += s.dist_to_opt.unwrap().powi(2) / trials as f64;
        }
    }
    let mean = gaps.iter().sum::<f64>() / trials as f64;
    let bound = budget_bound(&params, setup.prox(), Scheme::FixedDilation, calls).unwrap();
    assert!(mean <= bound, "mean {mean} > {bound}");
    for (k, d) in sq_dist.iter().enumerate() {
        let rk = 2f64.powi(-((k + 1) as i32)) * r0 * r0;
        assert!(*d <= rk, "stage {}: {d} > {rk}", k + 1);
    }
}

fn adaptive(n: usize, calls: usize, variant: AdaptiveVariant, setup: &ProxSetup, l: f64, sigma: f64, r0: f64) -> AdaptiveParams {
    AdaptiveParams {
        calls,
        setup: setup.clone(),
        x0: vec![0.0; n],
        r0,
        lipschitz: l,
        sigma,
        variant,
        record: RecordPolicy::Off,
        collect_witnesses: false,
    }
}

#[test]
fn adaptive_meets_its_bound_without_knowing_the_modulus() {
    let n = 4;
    for kappa in [1.0, 1e-4] {
        let (f, setup) = ball_problem(n, 2.0, kappa);
        let params = f.params(&setup.norm(), 0.0).unwrap();
        let calls = 100_000;
        let ap = adaptive(n, calls, AdaptiveVariant::Deterministic, &setup, params.lipschitz, 0.0, 1.0);
        let mut o = DeterministicOracle::new(f.clone());
        let out = run_adaptive(&mut o, &ap).unwrap();
        assert!(o.calls() <= calls);
        assert!(out.trace.warnings.is_empty());
        let bound = adaptive_bound(&params, setup.prox(), calls);
        let g = gap(&f, &out.x_hat);
        assert!(g <= bound, "kappa {kappa}: {g} > {bound}");
        // the output is the best stage point
        let best = out
            .trace
            .stages
            .iter()
            .map(|s| s.f_gap.unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!((g - best).abs() < 1e-15);
    }
}

#[test]
fn adaptive_with_tiny_budget_warns_and_runs_one_stage() {
    let n = 3;
    let (f, setup) = ball_problem(n, 2.0, 1.0);
    for calls in [1usize, 3, 10] {
        let ap = adaptive(n, calls, AdaptiveVariant::Deterministic, &setup, 1.0, 0.0, 1.0);
        let mut o = DeterministicOracle::new(f.clone());
        let out = run_adaptive(&mut o, &ap).unwrap();
        assert_eq!(out.trace.warnings.len(), 1, "N = {calls}");
        assert_eq!(out.trace.stages.len(), 1);
        assert_eq!(o.calls(), calls);
    }
}

#[test]
fn stoca_mean_gap_within_bound() {
    let n = 4;
    let sigma = 0.5;
    let (f, setup) = ball_problem(n, 2.0, 1.0);
    let params = f.params(&setup.norm(), sigma).unwrap();
    let calls = 5000;
    let ap = adaptive(n, calls, AdaptiveVariant::Stoca, &setup, params.lipschitz, sigma, 2.0);
    let trials = 100;
    let mut mean = 0.0;
    for t in 0..trials {
        let mut o = StochasticOracle::new(
            DeterministicOracle::new(f.clone()),
            NoiseModel::BoundedDualBall { sigma },
            NormPair::l2(n),
            11,
            t,
        )
        .unwrap();
        let out = run_adaptive(&mut o, &ap).unwrap();
        assert!(o.calls() <= calls);
        assert!(out.trace.stages.iter().all(|s| s.stage.ball_radius == 2.0));
        mean += gap(&f, &out.x_hat) / trials as f64;
    }
    let bound = stoca_bound(&params, setup.prox(), calls).unwrap();
    assert!(mean <= bound, "{mean} > {bound}");
}

#[test]
fn adaptive_s_certificate_covers() {
    let n = 4;
    let sigma = 1.0;
    let alpha = 0.1;
    let (f, setup) = ball_problem(n, 2.0, 1.0);
    let params = f.params(&setup.norm(), sigma).unwrap();
    let calls = 2000;
    let ap = adaptive(n, calls, AdaptiveVariant::AdaptiveS, &setup, params.lipschitz, sigma, 1.0);
    let eps = adaptive_certificate(&params, setup.prox(), calls, alpha).unwrap();
    let trials = 500;
    let mut misses = 0;
    for t in 0..trials {
        let mut o = StochasticOracle::new(
            DeterministicOracle::new(f.clone()),
            NoiseModel::SubGaussian { sigma },
            NormPair::l2(n),
            5,
            t as u64,
        )
        .unwrap();
        let out = run_adaptive(&mut o, &ap).unwrap();
        if gap(&f, &out.x_hat) > eps {
            misses += 1;
        }
    }
    let rate = misses as f64 / trials as f64;
    let limit = alpha + 3.0 * (alpha * (1.0 - alpha) / trials as f64).sqrt();
    assert!(rate <= limit, "miss rate {rate} > {limit}");
}

#[test]
fn start_outside_the_set_is_rejected() {
    let n = 3;
    let (f, setup) = ball_problem(n, 2.0, 1.0);
    let params = f.params(&setup.norm(), 0.0).unwrap();
    let rp = RunParams::new(Mode::TargetAccuracy { eps: 0.1 }, Scheme::Ball, params, setup, vec![2.0, 0.0, 0.0], 1.0);
    let mut o = DeterministicOracle::new(f);
    assert!(run_multistage(&mut o, &rp).is_err());
    assert_eq!(o.calls(), 0);
}
