use aquaval::biology::{simulate_host_parasite, simulate_removal_counts, BioParams, GrowthParams, ThresholdFn};
use aquaval::calibrate::{euler_grid, fit_beta, fit_lambda, BetaFitConfig};
use aquaval::commodity::{simulate_two_factor, CommodityParams, CommodityPathSet};
use aquaval::economics::{
    cumulative_feeding, exercise_payoff, harvest_payoff, treatment_cost_fraction, CostParams, FeedingMode, Mortality,
    PathValues, PayoffInputs,
};
use aquaval::experiment::{Experiment, ExperimentConfig};
use aquaval::grid::TimeGrid;
use aquaval::ingest::{
    extract_green_segments, removal_distribution_at, select_mechanical_only_periods, PeriodOptions,
    RemovalDistribution,
};
use aquaval::rng::StreamRole;
use aquaval::stopping::{dp_oracle, evaluate_rule, solve_rule, MarkovChain, SolverConfig};
use aquaval::synthetic::{generate_corpus, CorpusConfig};
use aquaval::world::{pilot_curves, FarmModel, ModelMode, WorldSimulator};
use proptest::prelude::*;
use rand::SeedableRng;

fn bio_strategy() -> impl Strategy<Value = (BioParams, f64)> {
    (4.0..10.0f64, 0.01..5.0f64, 0.01..5.0f64, 0.3..1.0f64).prop_map(|(lambda, b1, b2, l)| {
        (
            BioParams {
                lambda_rep: lambda,
                beta1: b1,
                beta2: b2,
                ..Default::default()
            },
            l,
        )
    })
}

fn grid() -> TimeGrid {
    euler_grid(3.0, 72).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn host_parasite_paths((bio, l) in bio_strategy(), seed in any::<u64>()) {
        let threshold = ThresholdFn::Constant(l);
        let g = grid();
        let set = simulate_host_parasite(&bio, &threshold, &g, 8, seed).unwrap();
        let times = g.times();
        for p in 0..set.n_paths {
            let (h, q, n) = (set.host_path(p), set.parasite_path(p), set.removal_path(p));
            prop_assert!(h.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(n.windows(2).all(|w| w[1] >= w[0]));
            let events = &set.events[p];
            prop_assert_eq!(events.len() as u32, *n.last().unwrap());
            let mut e = events.iter().peekable();
            for i in 1..g.len() {
                match e.peek() {
                    Some(ev) if ev.time == times[i] => {
                        prop_assert!((0.1..=0.9).contains(&ev.y_factor));
                        prop_assert!((bio.x_low..=1.0).contains(&ev.x_factor));
                        let before = (q[i] / ev.y_factor) / (h[i] / ev.x_factor);
                        prop_assert!(before >= l * (1.0 - 1e-12));
                        e.next();
                    }
                    _ => prop_assert!(q[i] / h[i] < l),
                }
            }
            prop_assert!(e.next().is_none());
        }
        prop_assert_eq!(&set, &simulate_host_parasite(&bio, &threshold, &g, 8, seed).unwrap());
    }

    #[test]
    fn commodity_paths_positive_and_reproducible(seed in any::<u64>(), rho in -1.0..=1.0f64, s1 in 0.01..1.2f64) {
        let params = CommodityParams { rho, sigma1: s1, ..CommodityParams::salmon() };
        let g = TimeGrid::uniform(3.0, 73).unwrap();
        let a = simulate_two_factor(&params, 0.03, &g, 16, seed, StreamRole::Salmon).unwrap();
        prop_assert!(a.spot.iter().all(|&s| s > 0.0 && s.is_finite()));
        let b = simulate_two_factor(&params, 0.03, &g, 16, seed, StreamRole::Salmon).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn zero_volatility_is_the_deterministic_solution(alpha in -0.2..0.3f64, r in 0.001..0.1f64, s0 in 1.0..200.0f64) {
        let params = CommodityParams {
            sigma1: 0.0, sigma2: 0.0, kappa: 1.5, alpha, lambda_rp: 0.0, rho: 0.5, s0, delta0: alpha,
        };
        let g = TimeGrid::uniform(3.0, 31).unwrap();
        let set = simulate_two_factor(&params, r, &g, 2, 1, StreamRole::Soy).unwrap();
        for (i, &t) in g.times().iter().enumerate() {
            let want = s0 * ((r - alpha) * t).exp();
            prop_assert!((set.spot_at(1, i) - want).abs() <= 1e-12 * want);
        }
    }

    #[test]
    fn cumulative_feeding_is_monotone(
        feed in prop::collection::vec(0.0..50.0f64, 40),
        host in prop::collection::vec(1.0..1e4f64, 40),
        r in 0.0..0.1f64,
    ) {
        let g = TimeGrid::uniform(3.0, 40).unwrap();
        let cf = cumulative_feeding(&feed, &host, &GrowthParams::default(), 1.1, r, &g).unwrap();
        prop_assert_eq!(cf[0], 0.0);
        prop_assert!(cf.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn treatment_cost_steps_by_c_tr(steps in prop::collection::vec(0u32..3, 1..60), c in 0.0..0.05f64) {
        let counts: Vec<u32> = steps.iter().scan(0, |n, s| { *n += s; Some(*n) }).collect();
        let ct = treatment_cost_fraction(&counts, c).unwrap();
        prop_assert!(ct.windows(2).all(|w| w[1] >= w[0]));
        for (w, n) in ct.windows(2).zip(counts.windows(2)) {
            if w[1] < 1.0 {
                let jump = (n[1] - n[0]) as f64 * c;
                prop_assert!((w[1] - w[0] - jump).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn payoff_increasing_in_spot_and_homogeneous_in_size(
        t in 0.1..3.0f64, s in 1.0..150.0f64, ds in 0.01..10.0f64,
        h in 100.0..1e4f64, ct in 0.0..0.9f64, k in 0.1..10.0f64,
    ) {
        let g = GrowthParams::default();
        let cp = CostParams::default();
        let grid = TimeGrid::uniform(t, 30).unwrap();
        let feed = vec![cp.f0; 30];
        let host = vec![h; 30];
        let cf = *cumulative_feeding(&feed, &host, &g, cp.conv, 0.03, &grid).unwrap().last().unwrap();
        let scaled: Vec<f64> = host.iter().map(|x| k * x).collect();
        let cf_k = *cumulative_feeding(&feed, &scaled, &g, cp.conv, 0.03, &grid).unwrap().last().unwrap();
        let v = harvest_payoff(t, s, h, ct, cf, &g, cp.h0, 0.03);
        prop_assert!(harvest_payoff(t, s + ds, h, ct, cf, &g, cp.h0, 0.03) > v);
        let v_k = harvest_payoff(t, s, k * h, ct, cf_k, &g, cp.h0, 0.03);
        prop_assert!((v_k - k * v).abs() <= 1e-9 * (k * v).abs().max(1.0));
    }

    #[test]
    fn estimator_ordering_on_random_chains(seed in any::<u64>(), states in 2usize..=5, dates in 2usize..=4) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let chain = MarkovChain::random(states, dates, &mut rng);
        let rule = solve_rule(&chain.sample_paths(4096, seed).unwrap(), &SolverConfig::default()).unwrap();
        let ev = evaluate_rule(&rule, &chain.sample_paths(4096, seed ^ 0x5555).unwrap(), None).unwrap();
        let optimum = dp_oracle(&chain).unwrap().value;
        prop_assert!(ev.value() <= optimum + 4.5 * ev.std_error() + 1e-12);
        prop_assert!(rule.in_sample_value.is_finite());
        prop_assert_eq!(ev.n_paths(), 4096);
        for (k, t) in ev.stop_index.iter().zip(ev.stopping_times()) {
            prop_assert!(*k < dates);
            prop_assert!(chain.times.contains(&t));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn selector_is_idempotent_and_counts_monotone(seed in any::<u64>(), noise in 0.0..0.3f64) {
        let cfg = CorpusConfig { n_valid: 6, n_excluded: 3, n_other_region: 2, noise, seed, ..Default::default() };
        let corpus = generate_corpus(&BioParams::default(), &ThresholdFn::default(), &grid(), &cfg).unwrap();
        let periods = select_mechanical_only_periods(&corpus.records, &cfg.region, &PeriodOptions::default());
        let again_records: Vec<_> = periods.iter().flat_map(|p| p.records.clone()).collect();
        let again = select_mechanical_only_periods(&again_records, &cfg.region, &PeriodOptions::default());
        prop_assert_eq!(&again, &periods);
        for p in &periods {
            let counts: Vec<u32> = (0..=150).map(|k| p.removals_until(k as f64 / 52.0)).collect();
            prop_assert!(counts.windows(2).all(|w| w[1] >= w[0]));
        }
        for s in extract_green_segments(&periods) {
            for (k, t) in s.weeks.iter().zip(s.times()) {
                prop_assert_eq!(t, *k as f64 / 52.0);
            }
        }
        let d = removal_distribution_at(&periods, 1.5).unwrap();
        prop_assert_eq!(d.counts.len(), periods.len());
    }

    #[test]
    fn lambda_fit_ignores_segment_order(seed in any::<u64>(), rot in 1usize..20) {
        let g = grid();
        let cfg = CorpusConfig { n_valid: 20, n_excluded: 0, n_other_region: 0, seed, ..Default::default() };
        let bio = BioParams::default();
        let corpus = generate_corpus(&bio, &ThresholdFn::default(), &g, &cfg).unwrap();
        let periods = select_mechanical_only_periods(&corpus.records, &cfg.region, &PeriodOptions::default());
        let mut segments = extract_green_segments(&periods);
        let a = fit_lambda(&segments, &bio, &g).unwrap();
        let n = segments.len();
        segments.rotate_left(rot % n);
        segments.reverse();
        let b = fit_lambda(&segments, &bio, &g).unwrap();
        prop_assert!((a.lambda_rep - b.lambda_rep).abs() <= 1e-9 * a.lambda_rep);
        prop_assert_eq!(a.n_points, b.n_points);
    }
}

#[test]
fn higher_reproduction_means_more_treatments() {
    let dt = grid().uniform_step().unwrap();
    let threshold = ThresholdFn::default();
    let mean_se = |lambda: f64| {
        let bio = BioParams { lambda_rep: lambda, ..Default::default() };
        let counts = simulate_removal_counts(&bio, &threshold, dt, &[1.77], 2000, 9).unwrap().remove(0);
        let d = RemovalDistribution::from_counts(1.77, counts).unwrap();
        (d.mean, d.std / (d.counts.len() as f64).sqrt())
    };
    let levels = [5.5, 6.5, 7.0143, 7.5, 8.5];
    let stats: Vec<(f64, f64)> = levels.iter().map(|&l| mean_se(l)).collect();
    for w in stats.windows(2) {
        let se = (w[0].1.powi(2) + w[1].1.powi(2)).sqrt();
        assert!(w[1].0 - w[0].0 > 3.0 * se, "{stats:?}");
    }
}

#[test]
fn beta_fit_is_reproducible() {
    let model = FarmModel::default();
    let dt = model.euler_grid().unwrap().uniform_step().unwrap();
    let counts = simulate_removal_counts(&model.bio, &model.threshold, dt, &[1.77], 300, 4).unwrap().remove(0);
    let target = RemovalDistribution::from_counts(1.77, counts).unwrap();
    let cfg = BetaFitConfig { n_paths: 200, max_iters: 40, ..Default::default() };
    let a = fit_beta(std::slice::from_ref(&target), &model.bio, &model.threshold, dt, &cfg).unwrap();
    let b = fit_beta(std::slice::from_ref(&target), &model.bio, &model.threshold, dt, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn deterministic_rule_ignores_host_and_parasite() {
    let model = FarmModel::default();
    let (_, curves) = pilot_curves(&model, 512, 1).unwrap();
    let sim = WorldSimulator::new(&model, &curves).unwrap();
    let train = sim.simulate(0, 512, 1);
    let mode = ModelMode::new(Mortality::Deterministic, FeedingMode::Stochastic);
    let rule = solve_rule(&train.decision_matrix(mode, &model, &curves).unwrap(), &SolverConfig::default())
        .unwrap()
        .with_mode(mode);
    let world = sim.simulate(0, 256, 2);
    let mut perturbed = world.clone();
    for (h, p) in perturbed.host.iter_mut().zip(perturbed.parasite.iter_mut()) {
        *h *= 0.7;
        *p *= 3.0;
    }
    for r in perturbed.removals.iter_mut() {
        *r += 5;
    }
    let a = evaluate_rule(&rule, &world.decision_matrix(mode, &model, &curves).unwrap(), None).unwrap();
    let b = evaluate_rule(&rule, &perturbed.decision_matrix(mode, &model, &curves).unwrap(), None).unwrap();
    assert_eq!(a, b);
}

#[test]
fn comparison_is_reproducible_and_ordered() {
    let cfg = ExperimentConfig { n_train: 2048, n_eval: 4096, chunk: 1024, ..Default::default() };
    let model = FarmModel::default();
    let run = || Experiment::new(&model, &cfg).unwrap().compare(FeedingMode::Stochastic, 0.015).unwrap();
    let (a, paths_a) = run();
    let (b, paths_b) = run();
    assert_eq!(a, b);
    assert_eq!(paths_a, paths_b);
    assert!(a.v0_stoch >= a.v0_determ - 3.0 * a.difference_se, "{a:?}");
    let last = 3.0;
    assert!(paths_a.iter().all(|p| p.tau_stoch <= last + 1e-12 && p.tau_determ <= last + 1e-12));
}

#[test]
fn chunking_does_not_change_paths() {
    let model = FarmModel::default();
    let (_, curves) = pilot_curves(&model, 64, 3).unwrap();
    let sim = WorldSimulator::new(&model, &curves).unwrap();
    let whole = sim.simulate(0, 64, 3);
    let tail = sim.simulate(32, 32, 3);
    let nd = whole.n_dates();
    assert_eq!(&whole.salmon_spot[32 * nd..], &tail.salmon_spot[..]);
    assert_eq!(&whole.host[32 * nd..], &tail.host[..]);
    assert_eq!(&whole.cf[0][32 * nd..], &tail.cf[0][..]);
}

#[test]
fn stochastic_payoff_reduces_to_deterministic_when_inputs_are_degenerate() {
    // One path whose host and cost inputs equal the mean curves exactly.
    let g = GrowthParams::default();
    let cp = CostParams::default();
    let grid = TimeGrid::uniform(3.0, 7).unwrap();
    let salmon = CommodityPathSet { grid: grid.clone(), n_paths: 1, spot: vec![80.0; 7], delta: vec![0.0; 7] };
    let host: Vec<f64> = (0..7).map(|i| 10_000.0 - 100.0 * i as f64).collect();
    let ct: Vec<f64> = (0..7).map(|i| 0.015 * i as f64).collect();
    let cf = cumulative_feeding(&[cp.f0; 7], &host, &g, cp.conv, 0.03, &grid).unwrap();
    let dates = &grid.times()[1..];
    let shared = PayoffInputs {
        salmon: &salmon,
        soy: None,
        host: PathValues::Shared(&host),
        parasite: None,
        treatment_cost: PathValues::Shared(&ct),
        cumulative_feeding: PathValues::Shared(&cf),
    };
    let per_path = PayoffInputs {
        host: PathValues::PerPath(&host),
        treatment_cost: PathValues::PerPath(&ct),
        cumulative_feeding: PathValues::PerPath(&cf),
        ..shared
    };
    let a = exercise_payoff(&shared, &g, &cp, 0.03, dates).unwrap();
    let b = exercise_payoff(&per_path, &g, &cp, 0.03, dates).unwrap();
    assert_eq!(a.payoff, b.payoff);
}
