use lingreedy::contexts::{sample_context_set, ContextDistribution, ContextSet, DistributionSpec};
use lingreedy::estimator::GramState;
use lingreedy::policies::{
    argmax_lowest, confidence_radius, greedy_select, lints_sample, policy_step, PolicyConfig,
    RidgeFit,
};
use lingreedy::seed::rng_from_seed;
use nalgebra::DVector;
use proptest::prelude::*;

fn context_sets() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (1usize..=6, 1usize..=8).prop_flat_map(|(d, k)| {
        (
            prop::collection::vec(-2.0..2.0f64, d),
            prop::collection::vec(prop::collection::vec(-5.0..5.0f64, d), k),
        )
    })
}

fn to_set(rows: &[Vec<f64>]) -> ContextSet {
    ContextSet::new(rows.iter().map(|r| DVector::from_column_slice(r)).collect()).unwrap()
}

proptest! {
    #[test]
    fn greedy_is_invariant_to_positive_scaling((theta, rows) in context_sets(), c in 1e-3..1e3f64) {
        let ctx = to_set(&rows);
        let th = DVector::from_column_slice(&theta);
        prop_assert_eq!(greedy_select(&th, &ctx), greedy_select(&(&th * c), &ctx));
    }

    #[test]
    fn selection_is_a_valid_lowest_maximizer((theta, rows) in context_sets()) {
        let ctx = to_set(&rows);
        let th = DVector::from_column_slice(&theta);
        let a = greedy_select(&th, &ctx);
        let scores: Vec<f64> = ctx.iter().map(|x| x.dot(&th)).collect();
        prop_assert!(a < ctx.arms());
        prop_assert!(scores.iter().all(|s| *s <= scores[a]));
        prop_assert!(scores[..a].iter().all(|s| *s < scores[a]));
    }

    #[test]
    fn equal_scores_pick_first(k in 1usize..10, v in -3.0..3.0f64) {
        prop_assert_eq!(argmax_lowest(vec![v; k]), 0);
    }
}

fn trained_state(d: usize, n: usize, seed: u64) -> GramState {
    let dist = ContextDistribution::new(&DistributionSpec::standard_gaussian(), d).unwrap();
    let mut rng = rng_from_seed(seed);
    let theta = DVector::from_fn(d, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let mut s = GramState::new(d);
    for _ in 0..n {
        let x = dist.sample(&mut rng).unwrap();
        s.update(&x, x.dot(&theta) + 0.1).unwrap();
    }
    s
}

#[test]
fn tiny_posterior_width_agrees_with_ridge_greedy() {
    let d = 4;
    let state = trained_state(d, 30, 1);
    let fit = RidgeFit::new(&state, 1.0);
    let dist = ContextDistribution::new(&DistributionSpec::standard_gaussian(), d).unwrap();
    let mut rng = rng_from_seed(2);
    let trials = 10_000;
    let agree = (0..trials)
        .filter(|_| {
            let ctx = sample_context_set(&dist, 5, &mut rng).unwrap();
            let th = lints_sample(&fit, 1e-6, &mut rng);
            greedy_select(&th, &ctx) == greedy_select(&fit.theta, &ctx)
        })
        .count();
    assert!(agree as f64 / trials as f64 > 0.99, "{agree}/{trials}");
}

#[test]
fn radius_obeys_determinant_trace_bound() {
    for (d, seed) in [(2, 3), (5, 4), (10, 5)] {
        let dist = ContextDistribution::new(&DistributionSpec::uniform_ball(1.0), d).unwrap();
        let mut rng = rng_from_seed(seed);
        let mut s = GramState::new(d);
        let mut x_max = 0.0f64;
        for _ in 0..100 {
            let x = dist.sample(&mut rng).unwrap();
            x_max = x_max.max(x.norm());
            s.update(&x, 0.0).unwrap();
        }
        let cfg = PolicyConfig::linucb(d, 1.0, 0.01, 0.5);
        let beta = confidence_radius(&s, &cfg);
        let df = d as f64;
        let bound = 0.5
            * (df * (1.0 + 100.0 * x_max * x_max / (df * 1.0)).ln() + 2.0 * (1.0f64 / 0.01).ln())
                .sqrt()
            + 1.0;
        assert!(beta <= bound + 1e-12, "d={d}: {beta} > {bound}");
    }
}

#[test]
fn radius_grows_with_data() {
    let cfg = PolicyConfig::linucb(3, 1.0, 0.05, 1.0);
    let mut s = GramState::new(3);
    let mut prev = confidence_radius(&s, &cfg);
    let mut rng = rng_from_seed(6);
    let dist = ContextDistribution::new(&DistributionSpec::standard_gaussian(), 3).unwrap();
    for _ in 0..50 {
        s.update(&dist.sample(&mut rng).unwrap(), 0.0).unwrap();
        let r = confidence_radius(&s, &cfg);
        assert!(r >= prev - 1e-12);
        prev = r;
    }
}

#[test]
fn greedy_and_linucb_steps_are_pure() {
    let state = trained_state(3, 10, 7);
    let dist = ContextDistribution::new(&DistributionSpec::standard_gaussian(), 3).unwrap();
    let mut rng = rng_from_seed(8);
    for cfg in [
        PolicyConfig::greedy(DVector::from_vec(vec![1.0, 0.0, 0.0])),
        PolicyConfig::linucb(3, 1.0, 0.1, 0.5),
    ] {
        for _ in 0..20 {
            let ctx = sample_context_set(&dist, 4, &mut rng).unwrap();
            let a = policy_step(&cfg, &state, &ctx, &mut rng_from_seed(1));
            let b = policy_step(&cfg, &state, &ctx, &mut rng_from_seed(2));
            assert_eq!(a, b);
        }
    }
}

#[test]
fn lints_is_reproducible_from_its_draw() {
    let state = trained_state(3, 10, 9);
    let cfg = PolicyConfig::lints(3, 1.0, 1.0);
    let dist = ContextDistribution::new(&DistributionSpec::standard_gaussian(), 3).unwrap();
    let ctx = sample_context_set(&dist, 6, &mut rng_from_seed(10)).unwrap();
    let a = policy_step(&cfg, &state, &ctx, &mut rng_from_seed(11));
    let b = policy_step(&cfg, &state, &ctx, &mut rng_from_seed(11));
    assert_eq!(a, b);
}
