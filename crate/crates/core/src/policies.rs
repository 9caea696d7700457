//! Arm selection: LinGreedy and the LinUCB / LinTS baselines.
//!
//! All policies are stateless given the Gram state. Ties go to the lowest
//! arm index.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::contexts::ContextSet;
use crate::error::{BanditError, Result};
use crate::estimator::GramState;
use crate::seed::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Greedy,
    Linucb,
    Lints,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Greedy => "greedy",
            PolicyKind::Linucb => "linucb",
            PolicyKind::Lints => "lints",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "greedy" | "lingreedy" => Ok(PolicyKind::Greedy),
            "linucb" | "ucb" => Ok(PolicyKind::Linucb),
            "lints" | "ts" => Ok(PolicyKind::Lints),
            other => Err(format!(
                "unknown policy '{other}' (expected greedy, linucb or lints)"
            )),
        }
    }
}

/// Fully resolved policy parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Warm-start parameter used by greedy while the Gram matrix is singular.
    pub theta0: DVector<f64>,
    /// Ridge weight of the baselines' estimator.
    pub lambda_reg: f64,
    /// LinUCB confidence level.
    pub delta: f64,
    /// LinTS posterior width multiplier.
    pub v_scale: f64,
    /// Noise scale the baselines assume.
    pub sigma_assumed: f64,
}

impl PolicyConfig {
    pub fn greedy(theta0: DVector<f64>) -> Self {
        Self {
            kind: PolicyKind::Greedy,
            theta0,
            lambda_reg: 1.0,
            delta: 0.05,
            v_scale: 1.0,
            sigma_assumed: 0.0,
        }
    }

    pub fn linucb(d: usize, lambda_reg: f64, delta: f64, sigma_assumed: f64) -> Self {
        Self {
            kind: PolicyKind::Linucb,
            lambda_reg,
            delta,
            sigma_assumed,
            ..Self::greedy(DVector::zeros(d))
        }
    }

    pub fn lints(d: usize, lambda_reg: f64, v_scale: f64) -> Self {
        Self {
            kind: PolicyKind::Lints,
            lambda_reg,
            v_scale,
            ..Self::greedy(DVector::zeros(d))
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |m: String| Err(BanditError::InvalidSpec(m));
        if self.theta0.len() != d {
            return Err(BanditError::DimensionMismatch {
                expected: d,
                got: self.theta0.len(),
            });
        }
        if !(self.lambda_reg.is_finite() && self.lambda_reg > 0.0) {
            return bad(format!("lambda_reg must be > 0, got {}", self.lambda_reg));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.v_scale.is_finite() && self.v_scale > 0.0) {
            return bad(format!("v_scale must be > 0, got {}", self.v_scale));
        }
        if !(self.sigma_assumed.is_finite() && self.sigma_assumed >= 0.0) {
            return bad(format!(
                "sigma_assumed must be >= 0, got {}",
                self.sigma_assumed
            ));
        }
        Ok(())
    }
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax_lowest(scores: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in scores.into_iter().enumerate() {
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

/// `argmax_i x_i^T theta`.
pub fn greedy_select(theta: &DVector<f64>, contexts: &ContextSet) -> usize {
    argmax_lowest(contexts.iter().map(|x| x.dot(theta)))
}

/// Ridge estimate over the Gram state, with the factor of `Sigma + lambda I`.
#[derive(Debug, Clone)]
pub struct RidgeFit {
    pub theta: DVector<f64>,
    /// Lower Cholesky factor of `Sigma + lambda I`.
    pub chol_l: DMatrix<f64>,
    pub log_det: f64,
}

impl RidgeFit {
    pub fn new(state: &GramState, lambda_reg: f64) -> Self {
        let d = state.dim();
        let a = state.sigma() + DMatrix::identity(d, d) * lambda_reg;
        let chol = a
            .cholesky()
            .expect("Sigma + lambda I is positive definite for lambda > 0");
        let theta = chol.solve(state.moments());
        let chol_l = chol.unpack();
        let log_det = chol_l.diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        Self {
            theta,
            chol_l,
            log_det,
        }
    }

    /// `||x||_{(Sigma + lambda I)^{-1}}`.
    pub fn inverse_norm(&self, x: &DVector<f64>) -> f64 {
        self.chol_l
            .solve_lower_triangular(x)
            .expect("non-singular factor")
            .norm()
    }
}

/// Self-normalized confidence radius
/// `sigma * sqrt(log det(Sigma + lambda I) - d log lambda + 2 log(1/delta)) + sqrt(lambda)`,
/// taking `||theta*||_2 <= 1`.
pub fn confidence_radius(state: &GramState, cfg: &PolicyConfig) -> f64 {
    radius_from_fit(&RidgeFit::new(state, cfg.lambda_reg), state.dim(), cfg)
}

fn radius_from_fit(fit: &RidgeFit, d: usize, cfg: &PolicyConfig) -> f64 {
    let log_ratio = fit.log_det - d as f64 * cfg.lambda_reg.ln();
    let inner = (log_ratio + 2.0 * (1.0 / cfg.delta).ln()).max(0.0);
    cfg.sigma_assumed * inner.sqrt() + cfg.lambda_reg.sqrt()
}

/// `x_i^T theta + beta ||x_i||_{(Sigma + lambda I)^{-1}}` for every arm.
pub fn linucb_scores(fit: &RidgeFit, contexts: &ContextSet, beta: f64) -> Vec<f64> {
    contexts
        .iter()
        .map(|x| {
            let mean = x.dot(&fit.theta);
            if beta == 0.0 {
                mean
            } else {
                mean + beta * fit.inverse_norm(x)
            }
        })
        .collect()
}

/// One posterior draw `theta_s ~ N(theta_ridge, v^2 (Sigma + lambda I)^{-1})`.
pub fn lints_sample(fit: &RidgeFit, v_scale: f64, rng: &mut SimRng) -> DVector<f64> {
    let z = DVector::from_fn(fit.theta.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let w = fit
        .chol_l
        .tr_solve_lower_triangular(&z)
        .expect("non-singular factor");
    &fit.theta + w * v_scale
}

/// Chooses an arm for this round given the state after the previous round.
pub fn policy_step(
    cfg: &PolicyConfig,
    state: &GramState,
    contexts: &ContextSet,
    rng: &mut SimRng,
) -> usize {
    match cfg.kind {
        PolicyKind::Greedy => match state.theta_hat() {
            Some(theta) => greedy_select(theta, contexts),
            None => greedy_select(&cfg.theta0, contexts),
        },
        PolicyKind::Linucb => {
            let fit = RidgeFit::new(state, cfg.lambda_reg);
            let beta = radius_from_fit(&fit, state.dim(), cfg);
            argmax_lowest(linucb_scores(&fit, contexts, beta))
        }
        PolicyKind::Lints => {
            let fit = RidgeFit::new(state, cfg.lambda_reg);
            let theta = lints_sample(&fit, cfg.v_scale, rng);
            greedy_select(&theta, contexts)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    #[test]
    fn greedy_picks_best_score() {
        let ctx = ContextSet::from_rows(&[&[0.5, 9.0], &[0.6, -9.0]]).unwrap();
        assert_eq!(greedy_select(&DVector::from_vec(vec![1.0, 0.0]), &ctx), 1);
    }

    #[test]
    fn zero_theta_ties_go_to_first_arm() {
        let ctx = ContextSet::from_rows(&[&[0.5, 9.0], &[0.6, -9.0], &[1.0, 1.0]]).unwrap();
        assert_eq!(greedy_select(&DVector::zeros(2), &ctx), 0);
        assert_eq!(argmax_lowest([1.0, 3.0, 3.0, 2.0]), 1);
    }

    #[test]
    fn greedy_warm_start_uses_theta0() {
        let ctx = ContextSet::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        let cfg = PolicyConfig::greedy(DVector::from_vec(vec![0.0, 1.0]));
        let state = GramState::new(2);
        let mut rng = rng_from_seed(0);
        assert_eq!(policy_step(&cfg, &state, &ctx, &mut rng), 1);
    }

    #[test]
    fn radius_without_data() {
        let cfg = PolicyConfig::linucb(3, 2.0, 0.01, 0.5);
        let beta = confidence_radius(&GramState::new(3), &cfg);
        let expected = 0.5 * (2.0 * 100.0f64.ln()).sqrt() + 2.0f64.sqrt();
        assert!((beta - expected).abs() < 1e-12);
    }

    #[test]
    fn radius_first_term_is_linear_in_sigma() {
        let mut state = GramState::new(2);
        state
            .update(&DVector::from_vec(vec![1.0, 2.0]), 0.3)
            .unwrap();
        let a = PolicyConfig::linucb(2, 1.0, 0.1, 0.5);
        let b = PolicyConfig {
            sigma_assumed: 1.0,
            ..a.clone()
        };
        let ra = confidence_radius(&state, &a) - 1.0;
        let rb = confidence_radius(&state, &b) - 1.0;
        assert!((rb - 2.0 * ra).abs() < 1e-12);
    }

    #[test]
    fn zero_width_ucb_is_ridge_greedy() {
        let mut rng = rng_from_seed(2);
        let mut state = GramState::new(3);
        for _ in 0..20 {
            let x = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
            state.update(&x, x[0] - x[2]).unwrap();
        }
        let fit = RidgeFit::new(&state, 1.0);
        for _ in 0..50 {
            let rows: Vec<DVector<f64>> = (0..5)
                .map(|_| DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal)))
                .collect();
            let ctx = ContextSet::new(rows).unwrap();
            assert_eq!(
                argmax_lowest(linucb_scores(&fit, &ctx, 0.0)),
                greedy_select(&fit.theta, &ctx)
            );
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(PolicyConfig::linucb(2, 0.0, 0.1, 1.0).validate(2).is_err());
        assert!(PolicyConfig::linucb(2, 1.0, 1.0, 1.0).validate(2).is_err());
        assert!(PolicyConfig::lints(2, 1.0, -1.0).validate(2).is_err());
        assert!(PolicyConfig::greedy(DVector::zeros(3)).validate(2).is_err());
        assert!(PolicyConfig::lints(2, 1.0, 1.0).validate(2).is_ok());
    }
}
