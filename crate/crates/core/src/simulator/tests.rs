use super::*;
use crate::control::{LqrWeights, SystemMatrices};
use crate::estimation::NoiseModel;
use crate::linalg::{mat_from_rows, trace_product, Mat, Vector};
use crate::scheduler::Strategy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn scalar(v: f64) -> Mat {
    Mat::from_element(1, 1, v)
}

fn scalar_agent(a: f64, w: f64, v: f64, x0: f64) -> LinearAgent {
    let sys = SystemMatrices::new(scalar(a), scalar(1.0), scalar(1.0)).unwrap();
    let noise = NoiseModel::new(scalar(w), scalar(v), scalar(x0)).unwrap();
    LinearAgent::lqr(sys, noise, LqrWeights::diagonal(scalar(1.0), scalar(1.0)).unwrap()).unwrap()
}

fn scenario(agents: Vec<LinearAgent>, capacity: usize, strategy: Strategy) -> Scenario {
    let m = agents.len();
    Scenario {
        name: "test".into(),
        agents,
        capacity,
        horizon: 2,
        steps: 30,
        runs: 1,
        seed: 7,
        sigma: SigmaModel::perfect(m),
        strategy,
        loss_aware: true,
    }
}

#[test]
fn noiseless_system_stays_at_rest() {
    let agents = vec![double_integrator_agent(0.0, 0.0, default_weights()).unwrap(); 2];
    let sc = scenario(agents, 2, Strategy::Greedy);
    let trace = run_closed_loop(&sc, 0).unwrap();
    for row in &trace.steps {
        for a in row {
            assert_eq!(a.x, a.xhat);
            assert_eq!(a.x.amax(), 0.0);
            assert_eq!(a.tr_gamma_e, 0.0);
        }
    }
    assert_eq!(closed_loop_cost(&trace).j, 0.0);
}

#[test]
fn stage_costs_decay_without_noise() {
    let agent = double_integrator_agent(0.0, 0.0, default_weights()).unwrap();
    let mut agent = agent;
    agent.noise.x0 = Mat::identity(2, 2);
    let mut sc = scenario(vec![agent], 1, Strategy::Baseline);
    sc.steps = 80;
    let trace = run_closed_loop(&sc, 3).unwrap();
    let first = trace.steps[1][0].stage_cost;
    let last = trace.steps[79][0].stage_cost;
    assert!(last < 1e-6 * first, "{first} -> {last}");
}

#[test]
fn identical_seeds_reproduce_traces_bit_exactly() {
    let agents = vec![scalar_agent(1.1, 0.1, 0.01, 1.0), scalar_agent(0.9, 0.2, 0.05, 1.0)];
    let mut sc = scenario(agents, 1, Strategy::Relaxed);
    sc.sigma = SigmaModel::Constant(vec![0.7, 0.4]);
    assert_eq!(run_closed_loop(&sc, 5).unwrap(), run_closed_loop(&sc, 5).unwrap());
    assert_ne!(run_closed_loop(&sc, 5).unwrap(), run_closed_loop(&sc, 6).unwrap());
}

#[test]
fn grants_respect_capacity_and_losses_need_grants() {
    for (seed, strategy) in Strategy::ALL.iter().enumerate() {
        let agents = vec![
            scalar_agent(1.05, 0.1, 0.01, 1.0),
            scalar_agent(0.95, 0.3, 0.02, 1.0),
            scalar_agent(1.2, 0.05, 0.1, 1.0),
        ];
        let mut sc = scenario(agents, 2, *strategy);
        sc.sigma = SigmaModel::Constant(vec![0.9, 0.5, 0.2]);
        sc.seed = seed as u64;
        let trace = run_closed_loop(&sc, 0).unwrap();
        assert!(trace.steps[0].iter().all(|a| !a.delta && !a.s));
        for row in &trace.steps {
            assert!(row.iter().filter(|a| a.delta).count() <= sc.capacity);
            assert!(row.iter().all(|a| a.delta || !a.s));
        }
    }
}

#[test]
fn baseline_alternates_on_lossy_channel() {
    let mut sc = lossy2(0.1).unwrap();
    sc.strategy = Strategy::Baseline;
    let trace = run_closed_loop(&sc, 0).unwrap();
    for k in 1..sc.steps {
        assert_eq!(trace.grant_column(k), vec![k % 2 == 0, k % 2 == 1], "step {k}");
    }
}

#[test]
fn adding_an_agent_does_not_perturb_others() {
    let a = scalar_agent(1.1, 0.1, 0.01, 1.0);
    let b = scalar_agent(0.8, 0.5, 0.2, 2.0);
    let alone = run_closed_loop(&scenario(vec![a.clone()], 2, Strategy::Baseline), 4).unwrap();
    let fleet = run_closed_loop(&scenario(vec![a, b], 2, Strategy::Baseline), 4).unwrap();
    for (r1, r2) in alone.steps.iter().zip(&fleet.steps) {
        assert_eq!(r1[0], r2[0]);
    }
    let iso = closed_loop_cost(&alone);
    let both = closed_loop_cost(&fleet);
    assert_eq!(iso.j, both.per_agent[0]);
    assert!((both.j - both.per_agent.iter().sum::<f64>()).abs() <= 1e-15 * both.j);
}

#[test]
fn lyapunov_function_decreases_by_the_stage_cost() {
    let mut agent = double_integrator_agent(0.0, 0.0, default_weights()).unwrap();
    agent.noise.x0 = Mat::identity(2, 2);
    let q_eff = agent.design.closed_loop_weight();
    let p = agent.design.p.clone();
    let mut sc = scenario(vec![agent], 1, Strategy::Baseline);
    sc.steps = 50;
    let trace = run_closed_loop(&sc, 1).unwrap();
    for k in 1..sc.steps - 1 {
        let x = &trace.steps[k][0].x;
        let next = &trace.steps[k + 1][0].x;
        let drop = next.dot(&(&p * next)) - x.dot(&(&p * x));
        let bound = -x.dot(&(&q_eff * x));
        assert!(drop <= bound + 1e-5 * x.norm_squared().max(1e-12), "step {k}: {drop} vs {bound}");
    }
}

#[test]
fn closed_loop_cost_of_a_scalar_trace() {
    let weights = LqrWeights::diagonal(scalar(1.0), scalar(1.0)).unwrap();
    let steps = [1.0, 2.0]
        .iter()
        .map(|&x| {
            let x = Vector::from_element(1, x);
            let u = Vector::zeros(1);
            vec![AgentStep {
                stage_cost: crate::control::stage_cost(&x, &u, &weights),
                xhat: x.clone(),
                x,
                u,
                e: scalar(0.0),
                delta: false,
                s: false,
                sigma: 1.0,
                tr_gamma_e: 0.0,
                tr_p_x: 0.0,
            }]
        })
        .collect();
    let trace = SimTrace { scenario: "scalar".into(), run: 0, steps };
    assert_eq!(closed_loop_cost(&trace).j, 2.5);
    let empty = SimTrace { scenario: "empty".into(), run: 0, steps: vec![] };
    assert_eq!(closed_loop_cost(&empty).j, 0.0);
}

#[test]
fn single_run_statistics_equal_the_trace_summary() {
    let sc = scenario(vec![scalar_agent(1.1, 0.1, 0.01, 1.0), scalar_agent(1.0, 0.1, 0.01, 1.0)], 1, Strategy::Greedy);
    let stats = monte_carlo(&sc).unwrap();
    let trace = run_closed_loop(&sc, 0).unwrap();
    let cost = closed_loop_cost(&trace);
    assert_eq!(stats.j_mean, cost.j);
    assert_eq!(stats.j_stderr, 0.0);
    assert_eq!(stats.trace_cost_mean, cost.trace_cost);
    let grants = trace.grants();
    assert_eq!(stats.grants_mean, vec![grants[0] as f64, grants[1] as f64]);
    assert_eq!(stats.grant_ratio, Some(grants[1] as f64 / grants[0] as f64));
}

#[test]
fn baseline_normalizes_to_one() {
    let mut sc = lossy2(0.5).unwrap();
    sc.strategy = Strategy::Baseline;
    sc.runs = 4;
    sc.steps = 20;
    let stats = monte_carlo(&sc).unwrap();
    assert_eq!(stats.relative_to(&stats), 1.0);
    assert_eq!(scaled_around_minimum(&[2.0, 1.0, 4.0]), vec![2.0, 1.0, 4.0]);
    assert_eq!(scaled_around_minimum(&[4.0, 2.0]), vec![2.0, 1.0]);
}

#[test]
fn doubling_runs_shrinks_the_standard_error_by_root_two() {
    let mut small = 0.0;
    let mut large = 0.0;
    for seed in 0..20 {
        let mut sc = scenario(vec![scalar_agent(0.9, 1.0, 0.1, 1.0)], 1, Strategy::Baseline);
        sc.steps = 10;
        sc.seed = seed;
        sc.runs = 16;
        small += monte_carlo(&sc).unwrap().j_stderr;
        sc.runs = 32;
        large += monte_carlo(&sc).unwrap().j_stderr;
    }
    let ratio = small / large;
    assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.3, "ratio {ratio}");
}

#[test]
fn monte_carlo_matches_sequential_runs() {
    let mut sc = lossy2(0.5).unwrap();
    sc.runs = 3;
    sc.steps = 15;
    let stats = monte_carlo(&sc).unwrap();
    let sequential: Vec<f64> = (0..3).map(|r| closed_loop_cost(&run_closed_loop(&sc, r).unwrap()).j).collect();
    assert_eq!(stats.j_per_run, sequential);
    assert_eq!(simulate_runs(&sc).unwrap().len(), 3);
}

#[test]
fn cost_difference_averages_to_the_error_price() {
    let agent = double_integrator_agent(1e-2, 1e-3, default_weights()).unwrap();
    let e_cov = mat_from_rows(&[&[2e-3, 5e-4], &[5e-4, 1e-3]]);
    let factor = crate::linalg::psd_factor(&e_cov);
    let x = Vector::from_vec(vec![0.3, -0.2]);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = 20_000;
    let samples: Vec<f64> = (0..n)
        .map(|_| {
            let z = Vector::from_fn(2, |_, _| rng.sample(StandardNormal));
            cost_difference(&agent.sys, &agent.design, &x, &(&factor * z))
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let expected = trace_product(&agent.design.gamma, &e_cov);
    assert!((mean - expected).abs() <= 3.0 * sd / (n as f64).sqrt(), "{mean} vs {expected}");
}

#[test]
fn cost_difference_vanishes_without_error() {
    let agent = double_integrator_agent(1e-2, 1e-3, default_weights()).unwrap();
    let x = Vector::from_vec(vec![1.0, 2.0]);
    assert_eq!(cost_difference(&agent.sys, &agent.design, &x, &Vector::zeros(2)), 0.0);
}

#[test]
fn contraction_of_scalar_weights() {
    assert!((contraction(&scalar(2.0), &scalar(1.0)).unwrap() - 0.5).abs() < 1e-15);
    assert_eq!(contraction(&scalar(1.0), &scalar(3.0)).unwrap(), 0.0);
    assert!(matches!(contraction(&scalar(1.0), &scalar(0.0)), Err(SimError::InvalidAlpha(_))));
}

#[test]
fn monitor_passes_a_noiseless_loop() {
    let mut sc = scenario(vec![double_integrator_agent(0.0, 0.0, default_weights()).unwrap(); 2], 1, Strategy::Baseline);
    sc.runs = 2;
    let bound = LspBound::for_scenario(&sc, None).unwrap();
    assert_eq!(bound.mu, 0.0);
    let report = lsp_bound_monitor(&simulate_runs(&sc).unwrap(), bound, 5);
    assert!(!report.flagged());
    assert_eq!(report.fraction_inside, 1.0);
    assert!(report.mean_tr_px.iter().all(|&v| v == 0.0));
}

#[test]
fn monitor_flags_an_agent_without_communication() {
    let sys = SystemMatrices::new(
        mat_from_rows(&[&[1.2, 0.1], &[0.0, 1.1]]),
        mat_from_rows(&[&[0.005], &[0.1]]),
        Mat::identity(2, 2),
    )
    .unwrap();
    let noise = NoiseModel::new(Mat::identity(2, 2) * 1e-2, Mat::identity(2, 2) * 1e-3, Mat::identity(2, 2) * 1e-2)
        .unwrap();
    let agent = LinearAgent::lqr(sys, noise, default_weights()).unwrap();
    let mut sc = scenario(vec![agent], 1, Strategy::Baseline);
    sc.sigma = SigmaModel::Constant(vec![0.0]);
    sc.steps = 60;
    sc.runs = 4;
    let bound = LspBound::for_scenario(&sc, Some(1.0)).unwrap();
    let traces = simulate_runs(&sc).unwrap();
    assert!(traces[0].steps[59][0].tr_gamma_e > 1e3 * traces[0].steps[1][0].tr_gamma_e);
    let report = lsp_bound_monitor(&traces, bound, 10);
    assert!(report.flagged());
    assert!(report.margin < 0.0);
}

#[test]
fn library_entries_build_and_validate() {
    for info in scenario_library() {
        let name = info.name.replace("<M>", "6");
        let sc = build_scenario(&name, 2.0).unwrap();
        sc.validate().unwrap();
    }
    assert!(build_scenario("hetero1", 1.0).is_err());
    assert!(build_scenario("nonesuch", 1.0).is_err());
    assert!(build_scenario("lossy2-extreme", 1.0).is_err());
}

#[test]
fn tuning_scales_the_error_price() {
    let sc = tuning2(3.0).unwrap();
    let (d1, d2) = (&sc.agents[0].design, &sc.agents[1].design);
    assert!((&d1.k - &d2.k).amax() < 1e-9);
    assert!((&d1.gamma * 9.0 - &d2.gamma).amax() < 1e-9 * d2.gamma.amax());
}

#[test]
fn distance_model_reaches_exp_minus_d_squared() {
    let sigma = SigmaModel::Distance { floor: (-1.0f64).exp() };
    for k in 0..50 {
        for i in 0..2 {
            let d = (0.1 * k as f64 + (i + 1) as f64 * std::f64::consts::FRAC_PI_2).cos();
            assert!((sigma.sigma(i, k) - (-d * d).exp()).abs() < 1e-15);
        }
    }
    let severe = SigmaModel::Distance { floor: 0.1 };
    let min = (0..200).map(|k| severe.sigma(0, k)).fold(1.0, f64::min);
    assert!(min >= 0.1 && min < 0.11);
}

#[test]
fn invalid_scenarios_are_rejected() {
    let mut sc = identical4().unwrap();
    sc.steps = 4;
    assert!(matches!(sc.validate(), Err(SimError::InvalidScenario(_))));
    let mut sc = identical4().unwrap();
    sc.sigma = SigmaModel::Constant(vec![1.0; 3]);
    assert!(sc.validate().is_err());
    let mut sc = identical4().unwrap();
    sc.agents[0].design.k = Mat::zeros(1, 2);
    assert!(run_closed_loop(&sc, 0).is_err());
}
