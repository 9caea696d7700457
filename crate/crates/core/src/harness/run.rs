//! Seeded multi-replication runs and per-round aggregation.

use nalgebra::DVector;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::HarnessError;
use crate::diagnostics::{diagnose, DiagnosticsReport};
use crate::env::{random_unit_vector, run_episode, BanditInstance, Trajectory};
use crate::policies::{PolicyConfig, PolicyKind};
use crate::seed::{derive_seed, derived_rng, stream};

/// One row of the raw results file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub policy: String,
    pub rep: usize,
    pub t: usize,
    pub inst_regret: f64,
    pub cum_regret: f64,
    pub est_error_l2: Option<f64>,
    pub gram_min_eig: f64,
}

/// One row of the aggregate file: mean and sample std across replications.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub policy: String,
    pub t: usize,
    pub cum_regret_mean: f64,
    pub cum_regret_std: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    pub raw: Vec<RawRow>,
    pub aggregate: Vec<AggregateRow>,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub policy: String,
    pub kind: PolicyKind,
    pub rep: usize,
    pub theta_star: DVector<f64>,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    /// Ordered by policy (config order), then replication.
    pub runs: Vec<Run>,
    pub table: ResultsTable,
    pub diagnostics: Option<DiagnosticsReport>,
}

/// Seed of replication `rep`; shared by every policy so they face the same
/// contexts, noise and `theta*`.
pub fn replication_seed(root: u64, rep: usize) -> u64 {
    derive_seed(root, &[stream::REPLICATION, rep as u64])
}

/// Unit-norm `theta*` of a replication.
pub fn replication_theta_star(rep_seed: u64, d: usize) -> DVector<f64> {
    random_unit_vector(d, &mut derived_rng(rep_seed, &[stream::THETA_STAR]))
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every (policy, replication) pair. Replications run in parallel and
/// are merged in (policy, rep) order, so results do not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults, HarnessError> {
    cfg.validate()?;
    let dist = cfg.distribution()?;
    let policies: Vec<(String, PolicyConfig)> = cfg
        .policies
        .iter()
        .map(|e| e.label())
        .zip(cfg.resolve_policies())
        .collect();

    let instances = (0..cfg.reps)
        .map(|rep| {
            let seed = replication_seed(cfg.seed, rep);
            let theta = replication_theta_star(seed, cfg.d);
            BanditInstance::new(theta, cfg.sigma, dist.clone(), cfg.k).map(|inst| (seed, inst))
        })
        .collect::<crate::Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..policies.len())
        .flat_map(|p| (0..cfg.reps).map(move |r| (p, r)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(p, rep)| {
            let (seed, inst) = &instances[rep];
            let (name, pcfg) = &policies[p];
            run_episode(inst, pcfg, cfg.horizon, *seed).map(|trajectory| Run {
                policy: name.clone(),
                kind: pcfg.kind,
                rep,
                theta_star: inst.theta_star().clone(),
                trajectory,
            })
        })
        .collect::<crate::Result<Vec<_>>>()?;

    let table = tabulate(&runs, policies.iter().map(|(n, _)| n.as_str()), cfg.horizon);

    let diagnostics = if cfg.diagnostics {
        let greedy = runs
            .iter()
            .find(|r| r.kind == PolicyKind::Greedy && r.rep == 0);
        match greedy {
            Some(run) => {
                let budget = cfg.diagnostics_budget.unwrap_or_default();
                let mut rng = derived_rng(cfg.seed, &[stream::DIAGNOSTICS]);
                Some(diagnose(
                    &instances[0].1,
                    &run.trajectory,
                    &budget,
                    &mut rng,
                )?)
            }
            None => None,
        }
    } else {
        None
    };

    Ok(ExperimentResults {
        runs,
        table,
        diagnostics,
    })
}

/// Builds raw and aggregate rows from ordered runs.
pub fn tabulate<'a>(
    runs: &[Run],
    policy_order: impl IntoIterator<Item = &'a str>,
    horizon: usize,
) -> ResultsTable {
    let mut raw = Vec::new();
    for run in runs {
        for (rec, cum) in run
            .trajectory
            .records
            .iter()
            .zip(&run.trajectory.cum_regret)
        {
            raw.push(RawRow {
                policy: run.policy.clone(),
                rep: run.rep,
                t: rec.t,
                inst_regret: rec.inst_regret,
                cum_regret: *cum,
                est_error_l2: rec.est_error_l2,
                gram_min_eig: rec.gram_min_eig,
            });
        }
    }
    let mut aggregate = Vec::new();
    for name in policy_order {
        let mine: Vec<&Run> = runs.iter().filter(|r| r.policy == name).collect();
        if mine.is_empty() {
            continue;
        }
        for t in 0..horizon {
            let vals: Vec<f64> = mine.iter().map(|r| r.trajectory.cum_regret[t]).collect();
            let (m, s) = mean_std(&vals);
            aggregate.push(AggregateRow {
                policy: name.to_string(),
                t: t + 1,
                cum_regret_mean: m,
                cum_regret_std: s,
            });
        }
    }
    ResultsTable { raw, aggregate }
}
