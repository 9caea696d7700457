//! Ground-truth bandit instance, rewards, regret and full episodes.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::contexts::{sample_context_set, ContextDistribution, ContextSet};
use crate::error::{BanditError, Result};
use crate::estimator::GramState;
use crate::policies::{argmax_lowest, policy_step, PolicyConfig};
use crate::seed::{derived_rng, stream, SimRng};

/// Round-off allowance in the per-round greedy regret bound, scaled by `1 + max ||x_i||`.
pub const REGRET_BOUND_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct BanditInstance {
    theta_star: DVector<f64>,
    sigma: f64,
    contexts: ContextDistribution,
    arms: usize,
}

impl BanditInstance {
    pub fn new(
        theta_star: DVector<f64>,
        sigma: f64,
        contexts: ContextDistribution,
        arms: usize,
    ) -> Result<Self> {
        if theta_star.len() != contexts.dim() {
            return Err(BanditError::DimensionMismatch {
                expected: contexts.dim(),
                got: theta_star.len(),
            });
        }
        if theta_star.norm() > 1.0 + 1e-12 {
            return Err(BanditError::InvalidSpec(format!(
                "||theta*||_2 must be at most 1, got {}",
                theta_star.norm()
            )));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(BanditError::InvalidSpec(format!(
                "sigma must be >= 0, got {sigma}"
            )));
        }
        if arms == 0 {
            return Err(BanditError::InvalidSpec("K must be at least 1".into()));
        }
        Ok(Self {
            theta_star,
            sigma,
            contexts,
            arms,
        })
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn contexts(&self) -> &ContextDistribution {
        &self.contexts
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn arms(&self) -> usize {
        self.arms
    }
}

/// Uniform draw from the unit sphere in `R^d`.
pub fn random_unit_vector(d: usize, rng: &mut SimRng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// `x^T theta* + sigma z` with standard Gaussian `z`.
pub fn reward(instance: &BanditInstance, x: &DVector<f64>, rng: &mut SimRng) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    x.dot(&instance.theta_star) + instance.sigma * z
}

/// Arm with the highest expected reward (lowest index on ties).
pub fn optimal_arm(instance: &BanditInstance, contexts: &ContextSet) -> usize {
    argmax_lowest(contexts.iter().map(|x| x.dot(&instance.theta_star)))
}

/// `max_i x_i^T theta* - x_arm^T theta*`.
pub fn instantaneous_regret(instance: &BanditInstance, contexts: &ContextSet, arm: usize) -> f64 {
    let best = optimal_arm(instance, contexts);
    if best == arm {
        return 0.0;
    }
    let gap =
        contexts.arm(best).dot(&instance.theta_star) - contexts.arm(arm).dot(&instance.theta_star);
    gap.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    /// 1-based round index.
    pub t: usize,
    pub arm: usize,
    pub optimal_arm: usize,
    pub reward: f64,
    pub inst_regret: f64,
    /// `||theta_hat_t - theta*||_2` of the OLS estimate after this round's update.
    pub est_error_l2: Option<f64>,
    /// Smallest eigenvalue of the Gram matrix after this round's update.
    pub gram_min_eig: f64,
    /// `max_i ||X_i(t)||_2` over this round's contexts.
    pub max_ctx_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub records: Vec<RoundRecord>,
    pub cum_regret: Vec<f64>,
}

impl Trajectory {
    pub fn push(&mut self, record: RoundRecord) {
        let prev = self.cum_regret.last().copied().unwrap_or(0.0);
        self.cum_regret.push(prev + record.inst_regret);
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_regret(&self) -> f64 {
        self.cum_regret.last().copied().unwrap_or(0.0)
    }
}

/// Runs `horizon` rounds of `policy` on `instance`. Contexts, noise and the
/// policy's own randomness come from separate streams derived from `seed`,
/// so two policies run with the same seed see the same contexts.
pub fn run_episode(
    instance: &BanditInstance,
    policy: &PolicyConfig,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(BanditError::InvalidSpec("T must be at least 1".into()));
    }
    policy.validate(instance.dim())?;
    let mut ctx_rng = derived_rng(seed, &[stream::CONTEXTS]);
    let mut noise_rng = derived_rng(seed, &[stream::NOISE]);
    let mut policy_rng = derived_rng(seed, &[stream::POLICY]);

    let mut state = GramState::new(instance.dim());
    let mut traj = Trajectory {
        records: Vec::with_capacity(horizon),
        cum_regret: Vec::with_capacity(horizon),
    };
    for t in 1..=horizon {
        let contexts = sample_context_set(&instance.contexts, instance.arms, &mut ctx_rng)?;
        let arm = policy_step(policy, &state, &contexts, &mut policy_rng);
        let x = contexts.arm(arm);
        let y = reward(instance, x, &mut noise_rng);
        state.update(x, y)?;
        traj.push(RoundRecord {
            t,
            arm,
            optimal_arm: optimal_arm(instance, &contexts),
            reward: y,
            inst_regret: instantaneous_regret(instance, &contexts, arm),
            est_error_l2: state
                .theta_hat()
                .map(|th| (th - &instance.theta_star).norm()),
            gram_min_eig: state.min_eig(),
            max_ctx_norm: contexts.max_norm(),
        });
    }
    Ok(traj)
}

/// Rounds of a greedy trajectory where
/// `inst_regret(t) > 2 max_i ||X_i(t)|| ||theta_hat_{t-1} - theta*||` beyond round-off.
pub fn greedy_regret_bound_violations(traj: &Trajectory) -> Vec<usize> {
    traj.records
        .windows(2)
        .filter_map(|w| {
            let err = w[0].est_error_l2?;
            let r = &w[1];
            let bound = 2.0 * r.max_ctx_norm * err;
            (r.inst_regret > bound + REGRET_BOUND_SLACK * (1.0 + r.max_ctx_norm)).then_some(r.t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contexts::DistributionSpec;
    use crate::seed::rng_from_seed;

    fn instance(theta: &[f64], sigma: f64, spec: DistributionSpec, k: usize) -> BanditInstance {
        let dist = ContextDistribution::new(&spec, theta.len()).unwrap();
        BanditInstance::new(DVector::from_column_slice(theta), sigma, dist, k).unwrap()
    }

    #[test]
    fn noiseless_reward_is_linear() {
        let inst = instance(&[0.6, -0.8], 0.0, DistributionSpec::standard_gaussian(), 2);
        let mut rng = rng_from_seed(0);
        let x = DVector::from_vec(vec![2.0, 1.0]);
        assert!((reward(&inst, &x, &mut rng) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn regret_examples() {
        let inst = instance(&[1.0, 0.0], 0.0, DistributionSpec::standard_gaussian(), 2);
        let ctx = ContextSet::from_rows(&[&[1.0, 0.0], &[0.2, 0.0]]).unwrap();
        assert_eq!(instantaneous_regret(&inst, &ctx, 0), 0.0);
        assert!((instantaneous_regret(&inst, &ctx, 1) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn rejects_long_theta() {
        let dist = ContextDistribution::new(&DistributionSpec::standard_gaussian(), 2).unwrap();
        assert!(BanditInstance::new(DVector::from_vec(vec![1.0, 1.0]), 0.1, dist, 2).is_err());
    }

    #[test]
    fn noiseless_one_dimensional_episode_stops_regretting() {
        let inst = instance(&[-1.0], 0.0, DistributionSpec::standard_gaussian(), 2);
        let cfg = PolicyConfig::greedy(DVector::from_vec(vec![1.0]));
        let traj = run_episode(&inst, &cfg, 10, 5).unwrap();
        assert!(traj.records[1..].iter().all(|r| r.inst_regret == 0.0));
        assert!(traj.records[0].est_error_l2.unwrap() < 1e-12);
    }

    #[test]
    fn cumulative_regret_is_monotone() {
        let inst = instance(&[0.6, 0.8], 0.5, DistributionSpec::uniform_ball(1.0), 4);
        let cfg = PolicyConfig::greedy(DVector::from_vec(vec![1.0, 0.0]));
        let traj = run_episode(&inst, &cfg, 200, 1).unwrap();
        assert_eq!(traj.len(), 200);
        assert!(traj.cum_regret.windows(2).all(|w| w[1] >= w[0]));
        assert!(traj.records.iter().all(|r| r.inst_regret >= 0.0));
        assert!(greedy_regret_bound_violations(&traj).is_empty());
    }
}
