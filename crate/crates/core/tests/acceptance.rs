//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion, nonzero exit on any failure.

use std::time::{Duration, Instant};

use lingreedy::contexts::{
    decay_rate_check, verify_lac, ContextDistribution, Covariance, DistributionSpec, Region,
};
use lingreedy::diagnostics::{
    consistency_curve, default_eps_grid, estimate_diversity_constant, estimate_margin_constant,
    gram_growth_check, summarize_consistency, GROWTH_T0,
};
use lingreedy::env::Trajectory;
use lingreedy::env::{
    greedy_regret_bound_violations, random_unit_vector, run_episode, BanditInstance,
};
use lingreedy::estimator::GramState;
use lingreedy::harness::{
    all_presets, preset_config, run_experiment, write_csv, ExperimentConfig, ExperimentResults,
    PolicyEntry, PresetDist, PresetShape, AGGREGATE_FILE, RAW_FILE,
};
use lingreedy::policies::{PolicyConfig, PolicyKind};
use lingreedy::seed::{derive_seed, rng_from_seed};
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

struct Outcome {
    id: usize,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn report(id: usize, title: &str, start: Instant, passed: bool, detail: String) -> Outcome {
    let elapsed = start.elapsed();
    println!(
        "[{}] AC{id} {title}: {detail} ({:.2}s)",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    Outcome {
        id,
        passed,
        detail,
        elapsed,
    }
}

fn final_mean(res: &ExperimentResults, policy: &str, t: usize) -> f64 {
    res.table
        .aggregate
        .iter()
        .find(|r| r.policy == policy && r.t == t)
        .map(|r| r.cum_regret_mean)
        .expect("aggregate row")
}

/// Greedy trajectories collected from every experiment in the suite.
#[derive(Default)]
struct GreedyPool(Vec<(String, Trajectory)>);

impl GreedyPool {
    fn absorb(&mut self, label: &str, res: &ExperimentResults) {
        for run in res.runs.iter().filter(|r| r.kind == PolicyKind::Greedy) {
            self.0
                .push((format!("{label}/rep{}", run.rep), run.trajectory.clone()));
        }
    }
}

fn ac1(pool: &mut GreedyPool, gaussian: &mut Option<ExperimentResults>) -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for dist in [
        PresetDist::Gaussian,
        PresetDist::UniformBall,
        PresetDist::Laplace,
    ] {
        let t0 = Instant::now();
        let cfg = preset_config(PresetShape::D20K20, dist);
        let res = run_experiment(&cfg).expect("preset runs");
        let secs = t0.elapsed().as_secs_f64();
        let (g, u, s) = (
            final_mean(&res, "greedy", 1000),
            final_mean(&res, "linucb", 1000),
            final_mean(&res, "lints", 1000),
        );
        let pass = g < u && g < s && secs < 120.0;
        ok &= pass;
        parts.push(format!(
            "{}: greedy {g:.1} linucb {u:.1} lints {s:.1} in {secs:.1}s",
            dist.name()
        ));
        pool.absorb(&format!("ac1/{}", dist.name()), &res);
        if dist == PresetDist::Gaussian {
            *gaussian = Some(res);
        }
    }
    report(
        1,
        "greedy has the lowest regret",
        start,
        ok,
        parts.join("; "),
    )
}

fn ac2(gaussian: &ExperimentResults) -> Outcome {
    let start = Instant::now();
    let ratio = |p: &str| {
        let (r500, r1000) = (final_mean(gaussian, p, 500), final_mean(gaussian, p, 1000));
        (r1000 - r500) / r500
    };
    let (g, u) = (ratio("greedy"), ratio("linucb"));
    report(
        2,
        "logarithmic growth shape",
        start,
        g <= 0.6 && u > g,
        format!("greedy (R1000-R500)/R500 = {g:.3} (<= 0.6), linucb = {u:.3}"),
    )
}

fn ac3(pool: &mut GreedyPool) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for seed in 0..10u64 {
        let root = derive_seed(0xac3, &[seed]);
        let dist = ContextDistribution::new(&DistributionSpec::standard_gaussian(), 5).unwrap();
        let theta = random_unit_vector(5, &mut rng_from_seed(derive_seed(root, &[1])));
        let theta0 = random_unit_vector(5, &mut rng_from_seed(derive_seed(root, &[2])));
        let inst = BanditInstance::new(theta, 0.5, dist, 5).unwrap();
        let traj = run_episode(&inst, &PolicyConfig::greedy(theta0), 1000, root).unwrap();
        let s = summarize_consistency(&consistency_curve(&traj), 100, 1000).expect("identified");
        worst = worst.max(s.max_over_median);
        ok &= s.max <= 5.0 * s.median;
        pool.0.push((format!("ac3/seed{seed}"), traj));
    }
    report(
        3,
        "sqrt(t)-consistency",
        start,
        ok,
        format!("worst max/median over t in [100, 1000] across 10 seeds = {worst:.3} (<= 5)"),
    )
}

fn ac4() -> Outcome {
    let start = Instant::now();
    let dist = ContextDistribution::new(&DistributionSpec::standard_gaussian(), 1).unwrap();
    let est =
        estimate_diversity_constant(&dist, 2, 100_000, 32, &mut rng_from_seed(0xac4)).unwrap();
    let z = (est.value - 1.0) / est.std_error;
    let secs = start.elapsed().as_secs_f64();
    report(
        4,
        "diversity constant, two Gaussian arms",
        start,
        z.abs() <= 3.0 && secs < 10.0,
        format!(
            "lambda* = {:.4} +- {:.4} (z = {z:.2})",
            est.value, est.std_error
        ),
    )
}

fn ac5() -> Outcome {
    let start = Instant::now();
    let th = DVector::from_vec(vec![1.0]);
    let cases = [
        (
            "uniform[-1,1]",
            DistributionSpec::uniform_ball(1.0),
            0.9,
            1.1,
        ),
        (
            "gaussian",
            DistributionSpec::standard_gaussian(),
            0.51,
            0.62,
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (name, spec, lo, hi)) in cases.into_iter().enumerate() {
        let t0 = Instant::now();
        let dist = ContextDistribution::new(&spec, 1).unwrap();
        let est = estimate_margin_constant(
            &dist,
            &th,
            2,
            100_000,
            &default_eps_grid(1.0),
            &mut rng_from_seed(0xac5 + i as u64),
        )
        .unwrap();
        let secs = t0.elapsed().as_secs_f64();
        ok &= (lo..=hi).contains(&est.slope) && secs < 10.0;
        parts.push(format!(
            "{name}: C_delta = {:.4} in [{lo}, {hi}]",
            est.slope
        ));
    }
    report(
        5,
        "margin constant closed forms",
        start,
        ok,
        parts.join("; "),
    )
}

fn table_one() -> Vec<(&'static str, DistributionSpec)> {
    vec![
        ("gaussian", DistributionSpec::standard_gaussian()),
        ("uniform", DistributionSpec::uniform_ball(1.0)),
        ("laplace", DistributionSpec::laplace(0.0, 1.0)),
        (
            "trunc-exponential",
            DistributionSpec::exponential(1.0).truncated(Region::cube(0.0, 5.0)),
        ),
        (
            "trunc-student_t",
            DistributionSpec::student_t(3.0).truncated(Region::cube(-5.0, 5.0)),
        ),
        (
            "trunc-cauchy",
            DistributionSpec::cauchy(0.0, 1.0).truncated(Region::cube(-5.0, 5.0)),
        ),
    ]
}

fn ac6() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    let mut min_fd = usize::MAX;
    for d in [1, 3, 10] {
        for (name, spec) in table_one() {
            let dist = ContextDistribution::new(&spec, d).unwrap();
            let rep = verify_lac(&dist, 1_000, 1e-3, &mut rng_from_seed(0xac6 + d as u64)).unwrap();
            if !rep.passed() || rep.fd_points < 1_000 {
                println!("    AC6 {name} d={d}: {rep:?}");
                ok = false;
            }
            worst_ratio = worst_ratio.max(rep.max_ratio);
            worst_fd = worst_fd.max(rep.fd_max_rel_error);
            min_fd = min_fd.min(rep.fd_points);
        }
    }
    report(
        6,
        "LAC certification",
        start,
        ok,
        format!(
            "6 distributions x d in {{1,3,10}}: worst ratio {worst_ratio:.4} (<= 1.001), worst FD error {worst_fd:.2e} (<= 1e-4) over >= {min_fd} points"
        ),
    )
}

fn ac7() -> Outcome {
    let start = Instant::now();
    let specs = [
        (
            "gaussian/box",
            DistributionSpec::standard_gaussian().truncated(Region::cube(-3.0, 3.0)),
        ),
        (
            "correlated-gaussian/ball",
            DistributionSpec::gaussian(
                0.0,
                Covariance::Equicorrelated {
                    variance: 1.0,
                    rho: 0.7,
                },
            )
            .truncated(Region::ball(3.0)),
        ),
        (
            "laplace/box",
            DistributionSpec::laplace(0.0, 1.0).truncated(Region::cube(-4.0, 4.0)),
        ),
        (
            "uniform/box",
            DistributionSpec::uniform_ball(2.0).truncated(Region::cube(-1.0, 1.5)),
        ),
        (
            "exponential/box",
            DistributionSpec::exponential(2.0).truncated(Region::cube(0.0, 4.0)),
        ),
        (
            "student_t/box",
            DistributionSpec::student_t(3.0).truncated(Region::cube(-5.0, 5.0)),
        ),
        (
            "cauchy/box",
            DistributionSpec::cauchy(0.0, 1.0).truncated(Region::cube(-5.0, 5.0)),
        ),
    ];
    let mut ok = true;
    let mut min_slack = f64::INFINITY;
    let mut checked = 0;
    for d in [1, 2, 4] {
        for (name, spec) in &specs {
            let region = spec.truncation.clone().unwrap();
            let dist = ContextDistribution::new(spec, d).unwrap();
            let base = ContextDistribution::new(
                &DistributionSpec {
                    truncation: None,
                    ..spec.clone()
                },
                d,
            )
            .unwrap();
            let lac = dist.lac_function();
            let r_inf = dist.sup_radius().unwrap();
            let constant_ok = lac.is_constant()
                && (lac.a1 - base.base_lac_function().eval(r_inf)).abs() <= 1e-12 * lac.a1.max(1.0);
            let mut rng = rng_from_seed(derive_seed(0xac7, &[d as u64, checked]));
            let lac_rep = verify_lac(&dist, 2_000, 1e-3, &mut rng).unwrap();
            let decay = decay_rate_check(&base, &region, 10_000, 1e-9, &mut rng).unwrap();
            let expected_m = (d as f64).sqrt() * lac.a1;
            let m_ok = (decay.decay_rate - expected_m).abs() <= 1e-12 * expected_m.max(1.0);
            if !(constant_ok && lac_rep.passed() && decay.passed && m_ok) {
                println!("    AC7 {name} d={d}: lac {lac:?} {lac_rep:?} {decay:?}");
                ok = false;
            }
            min_slack = min_slack.min(decay.min_log_slack);
            checked += 1;
        }
    }
    report(
        7,
        "truncation closure",
        start,
        ok,
        format!("{checked} truncated specs: constant L(R_inf) certified, min decay log-slack {min_slack:.3e} over 1e4 pairs each"),
    )
}

fn ac8() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(0xac8);
    let mut worst_inc: f64 = 0.0;
    for _ in 0..1_000 {
        let d = rng.random_range(1..=10);
        let n = rng.random_range(d..=5 * d + 10);
        let mut s = GramState::new(d);
        for _ in 0..n {
            let x = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            s.update(&x, rng.sample(StandardNormal)).unwrap();
        }
        if let (Some(inc), Ok(direct)) = (s.incremental_theta(), s.solve()) {
            worst_inc = worst_inc.max((inc - direct).amax());
        }
    }
    let mut worst_rec: f64 = 0.0;
    for _ in 0..1_000 {
        let d = rng.random_range(1..=10);
        let theta = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut s = GramState::new(d);
        for _ in 0..d {
            let x = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            s.update(&x, x.dot(&theta)).unwrap();
        }
        let err = s
            .theta_hat()
            .map(|th| (th - &theta).amax())
            .unwrap_or(f64::INFINITY);
        worst_rec = worst_rec.max(err);
    }
    report(
        8,
        "estimator oracle equivalence",
        start,
        worst_inc <= 1e-8 && worst_rec <= 1e-8,
        format!("incremental vs direct {worst_inc:.2e}, noiseless recovery {worst_rec:.2e} (both <= 1e-8)"),
    )
}

fn greedy_only(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.policies = vec![PolicyEntry::new(PolicyKind::Greedy)];
    cfg
}

fn ac9(pool: &mut GreedyPool) -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (shape, dist)) in all_presets().into_iter().enumerate() {
        let cfg = greedy_only(preset_config(shape, dist));
        let res = run_experiment(&cfg).expect("preset runs");
        let contexts = ContextDistribution::new(&cfg.spec, cfg.d).unwrap();
        let lambda = estimate_diversity_constant(
            &contexts,
            cfg.k,
            10_000,
            32,
            &mut rng_from_seed(0xac9 + i as u64),
        )
        .unwrap()
        .value;
        let fractions: Vec<f64> = res
            .runs
            .iter()
            .map(|r| gram_growth_check(&r.trajectory, lambda, GROWTH_T0).fraction)
            .collect();
        let passed = res
            .runs
            .iter()
            .all(|r| gram_growth_check(&r.trajectory, lambda, GROWTH_T0).passed);
        let min_frac = fractions.iter().cloned().fold(1.0, f64::min);
        ok &= passed;
        parts.push(format!(
            "{}/{}: lambda*={lambda:.4} min fraction {min_frac:.3}{}",
            shape.name(),
            dist.name(),
            if passed { "" } else { " FAIL" }
        ));
        pool.absorb(&format!("ac9/{}/{}", shape.name(), dist.name()), &res);
    }
    for p in &parts {
        println!("    AC9 {p}");
    }
    let failing = parts.iter().filter(|p| p.ends_with("FAIL")).count();
    report(
        9,
        "Gram eigenvalue growth",
        start,
        ok,
        format!(
            "{} of 15 presets pass on every replication (fraction >= 0.95 from t = 50)",
            15 - failing
        ),
    )
}

fn ac10(pool: &GreedyPool) -> Outcome {
    let start = Instant::now();
    let mut violations = 0;
    let mut rounds = 0;
    for (label, traj) in &pool.0 {
        let v = greedy_regret_bound_violations(traj);
        if !v.is_empty() {
            println!(
                "    AC10 {label}: violations at t = {:?}",
                &v[..v.len().min(10)]
            );
        }
        violations += v.len();
        rounds += traj.len();
    }
    report(
        10,
        "per-round greedy regret inequality",
        start,
        violations == 0,
        format!(
            "{violations} violations over {} trajectories, {rounds} rounds",
            pool.0.len()
        ),
    )
}

fn ac11() -> Outcome {
    let start = Instant::now();
    let cfg = preset_config(PresetShape::D20K20, PresetDist::Gaussian);
    let bytes = || {
        let dir = tempfile::tempdir().unwrap();
        write_csv(&run_experiment(&cfg).unwrap().table, dir.path()).unwrap();
        (
            std::fs::read(dir.path().join(RAW_FILE)).unwrap(),
            std::fs::read(dir.path().join(AGGREGATE_FILE)).unwrap(),
        )
    };
    let (a, b) = (bytes(), bytes());
    report(
        11,
        "determinism",
        start,
        a == b,
        format!(
            "d20k20/gaussian preset run twice: raw {} bytes, aggregate {} bytes, identical = {}",
            a.0.len(),
            a.1.len(),
            a == b
        ),
    )
}

fn main() {
    let mut pool = GreedyPool::default();
    let mut gaussian = None;
    let mut outcomes = vec![ac1(&mut pool, &mut gaussian)];
    outcomes.push(ac2(gaussian.as_ref().expect("gaussian preset ran")));
    outcomes.push(ac3(&mut pool));
    outcomes.push(ac4());
    outcomes.push(ac5());
    outcomes.push(ac6());
    outcomes.push(ac7());
    outcomes.push(ac8());
    outcomes.push(ac9(&mut pool));
    outcomes.push(ac10(&pool));
    outcomes.push(ac11());

    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| !o.passed).collect();
    let total: f64 = outcomes.iter().map(|o| o.elapsed.as_secs_f64()).sum();
    println!(
        "acceptance: {} passed, {} failed ({total:.1}s)",
        outcomes.len() - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        for o in &failed {
            eprintln!("failed AC{}: {}", o.id, o.detail);
        }
        std::process::exit(1);
    }
}
