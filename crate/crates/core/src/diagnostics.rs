//! Monte-Carlo estimates of the quantities that drive greedy regret:
//! diversity constant, margin constant, concentration parameters, plus
//! consistency and Gram-growth checks on recorded trajectories.
//!
//! Every estimator reports a Monte-Carlo standard error, computed either by
//! batch means or by the delta method as noted on each function.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::contexts::{sample_context_set, ContextDistribution, ContextSet};
use crate::env::{random_unit_vector, BanditInstance, Trajectory};
use crate::error::{BanditError, Result};
use crate::policies::greedy_select;
use crate::seed::SimRng;

/// Default first round assessed by [`gram_growth_check`].
pub const GROWTH_T0: usize = 50;
/// Fraction of assessed rounds that must satisfy the growth bound.
pub const GROWTH_PASS_FRACTION: f64 = 0.95;

const CHUNK: usize = 64;
const BATCHES: usize = 20;

#[derive(Debug, Clone, Serialize)]
pub struct DiversityEstimate {
    /// `min_theta lambda_min(E[x_a x_a^T])` over the sampled directions.
    pub value: f64,
    /// Delta-method standard error at the minimizing direction.
    pub std_error: f64,
    #[serde(skip)]
    pub worst_direction: DVector<f64>,
    pub directions: usize,
    pub n_mc: usize,
}

fn sampled_directions(
    d: usize,
    n_random: usize,
    both_signs: bool,
    rng: &mut SimRng,
) -> Vec<DVector<f64>> {
    let mut dirs: Vec<DVector<f64>> = (0..n_random).map(|_| random_unit_vector(d, rng)).collect();
    for j in 0..d {
        let e = DVector::from_fn(d, |i, _| if i == j { 1.0 } else { 0.0 });
        if both_signs {
            dirs.push(-&e);
        }
        dirs.push(e);
    }
    dirs
}

/// `E[x_a x_a^T]` with `a = argmax_i x_i^T theta`, estimated from `n_mc` context sets.
pub fn selected_second_moment(
    dist: &ContextDistribution,
    k: usize,
    theta: &DVector<f64>,
    n_mc: usize,
    rng: &mut SimRng,
) -> Result<DMatrix<f64>> {
    let d = dist.dim();
    let mut acc = DMatrix::zeros(d, d);
    for _ in 0..n_mc {
        let ctx = sample_context_set(dist, k, rng)?;
        let x = ctx.arm(greedy_select(theta, &ctx));
        acc.ger(1.0, x, x, 1.0);
    }
    Ok(acc / n_mc as f64)
}

/// Estimates the diversity constant: for `n_dirs` random unit directions
/// plus the coordinate axes, the smallest eigenvalue of the second moment
/// of the greedily selected context, minimized over directions. All
/// directions share the same context draws.
pub fn estimate_diversity_constant(
    dist: &ContextDistribution,
    k: usize,
    n_mc: usize,
    n_dirs: usize,
    rng: &mut SimRng,
) -> Result<DiversityEstimate> {
    if n_mc == 0 || k == 0 {
        return Err(BanditError::Diagnostics(
            "diversity estimate needs n_mc, K >= 1".into(),
        ));
    }
    let d = dist.dim();
    let dirs = sampled_directions(d, n_dirs, false, rng);
    let theta_mat = DMatrix::from_columns(&dirs);
    let replay = rng.clone();

    let mut acc: Vec<DMatrix<f64>> = vec![DMatrix::zeros(d, d); dirs.len()];
    let mut chunks: Vec<DMatrix<f64>> = vec![DMatrix::zeros(CHUNK, d); dirs.len()];
    let mut ctx_mat = DMatrix::zeros(k, d);
    let mut filled = 0;
    let flush = |chunks: &mut Vec<DMatrix<f64>>, acc: &mut Vec<DMatrix<f64>>, rows: usize| {
        for (a, c) in acc.iter_mut().zip(chunks.iter()) {
            let c = c.rows(0, rows);
            a.gemm_tr(1.0, &c, &c, 1.0);
        }
    };
    for _ in 0..n_mc {
        let ctx = sample_context_set(dist, k, rng)?;
        for (i, x) in ctx.iter().enumerate() {
            ctx_mat.set_row(i, &x.transpose());
        }
        let scores = &ctx_mat * &theta_mat;
        for (j, col) in scores.column_iter().enumerate() {
            let a = crate::policies::argmax_lowest(col.iter().copied());
            chunks[j].set_row(filled, &ctx_mat.row(a));
        }
        filled += 1;
        if filled == CHUNK {
            flush(&mut chunks, &mut acc, filled);
            filled = 0;
        }
    }
    if filled > 0 {
        flush(&mut chunks, &mut acc, filled);
    }

    let n = n_mc as f64;
    let mut best = (f64::INFINITY, 0, DVector::zeros(d));
    for (j, a) in acc.iter().enumerate() {
        let eig = (a / n).symmetric_eigen();
        let (idx, &val) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .expect("non-empty spectrum");
        if val < best.0 {
            best = (val, j, eig.eigenvectors.column(idx).into_owned());
        }
    }

    // Delta method: lambda_min is linear in the second moment along its eigenvector.
    let (value, worst, v) = best;
    let mut replay = replay;
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..n_mc {
        let ctx = sample_context_set(dist, k, &mut replay)?;
        let q = ctx.arm(greedy_select(&dirs[worst], &ctx)).dot(&v).powi(2);
        s1 += q;
        s2 += q * q;
    }
    let var = (s2 / n - (s1 / n).powi(2)).max(0.0) * n / (n - 1.0).max(1.0);
    Ok(DiversityEstimate {
        value: value.max(0.0),
        std_error: (var / n).sqrt(),
        worst_direction: dirs[worst].clone(),
        directions: dirs.len(),
        n_mc,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginPoint {
    pub eps: f64,
    pub prob: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginEstimate {
    /// Through-origin least-squares slope of `P[gap <= eps]` against `eps`.
    pub slope: f64,
    pub slope_se: f64,
    /// Intercept of an ordinary least-squares line over the same grid.
    pub intercept: f64,
    pub intercept_se: f64,
    /// RMS residual of the through-origin fit.
    pub residual_rms: f64,
    pub curve: Vec<MarginPoint>,
    pub n_mc: usize,
}

/// `{0.01, 0.02, ..., 0.1} * scale`.
pub fn default_eps_grid(scale: f64) -> Vec<f64> {
    (1..=10).map(|i| i as f64 * 0.01 * scale).collect()
}

/// Best minus second-best expected reward.
pub fn suboptimality_gap(theta_star: &DVector<f64>, contexts: &ContextSet) -> f64 {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for x in contexts.iter() {
        let s = x.dot(theta_star);
        if s > first {
            second = first;
            first = s;
        } else if s > second {
            second = s;
        }
    }
    first - second
}

fn through_origin_slope(eps: &[f64], p: &[f64]) -> f64 {
    let num: f64 = eps.iter().zip(p).map(|(e, q)| e * q).sum();
    num / eps.iter().map(|e| e * e).sum::<f64>()
}

fn ols_line(eps: &[f64], p: &[f64]) -> (f64, f64) {
    let n = eps.len() as f64;
    let me = eps.iter().sum::<f64>() / n;
    let mp = p.iter().sum::<f64>() / n;
    let sxx: f64 = eps.iter().map(|e| (e - me).powi(2)).sum();
    let sxy: f64 = eps.iter().zip(p).map(|(e, q)| (e - me) * (q - mp)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (mp - slope * me, slope)
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

/// Estimates the margin constant as the slope of `P[gap <= eps]` over
/// `eps_grid`. Standard errors come from batch means over 20 batches.
pub fn estimate_margin_constant(
    dist: &ContextDistribution,
    theta_star: &DVector<f64>,
    k: usize,
    n_mc: usize,
    eps_grid: &[f64],
    rng: &mut SimRng,
) -> Result<MarginEstimate> {
    if k < 2 {
        return Err(BanditError::Diagnostics(
            "the suboptimality gap needs K >= 2".into(),
        ));
    }
    if eps_grid.is_empty() || eps_grid.iter().any(|e| !(*e > 0.0 && *e < 0.5)) {
        return Err(BanditError::Diagnostics(
            "eps_grid values must lie in (0, 0.5)".into(),
        ));
    }
    if n_mc < 100_000 {
        return Err(BanditError::Diagnostics(format!(
            "margin estimate needs n_mc >= 1e5, got {n_mc}"
        )));
    }
    let gaps = (0..n_mc)
        .map(|_| sample_context_set(dist, k, rng).map(|c| suboptimality_gap(theta_star, &c)))
        .collect::<Result<Vec<_>>>()?;

    let probs = |slice: &[f64]| -> Vec<f64> {
        eps_grid
            .iter()
            .map(|e| slice.iter().filter(|g| **g <= *e).count() as f64 / slice.len() as f64)
            .collect()
    };
    let p_all = probs(&gaps);
    if p_all.iter().all(|p| *p == 0.0) {
        return Err(BanditError::Diagnostics(
            "degenerate margin fit: no gap fell below any grid value".into(),
        ));
    }
    let slope = through_origin_slope(eps_grid, &p_all);
    let (intercept, _) = ols_line(eps_grid, &p_all);
    let residual_rms = (eps_grid
        .iter()
        .zip(&p_all)
        .map(|(e, p)| (p - slope * e).powi(2))
        .sum::<f64>()
        / eps_grid.len() as f64)
        .sqrt();

    let batch = n_mc / BATCHES;
    let (mut slopes, mut intercepts) = (Vec::new(), Vec::new());
    let mut per_eps: Vec<Vec<f64>> = vec![Vec::new(); eps_grid.len()];
    for b in gaps.chunks(batch).filter(|c| c.len() == batch) {
        let p = probs(b);
        slopes.push(through_origin_slope(eps_grid, &p));
        intercepts.push(ols_line(eps_grid, &p).0);
        for (acc, v) in per_eps.iter_mut().zip(p) {
            acc.push(v);
        }
    }
    let nb = (slopes.len() as f64).sqrt();
    let curve = eps_grid
        .iter()
        .zip(&p_all)
        .zip(&per_eps)
        .map(|((e, p), bs)| MarginPoint {
            eps: *e,
            prob: *p,
            std_error: mean_sd(bs).1 / nb,
        })
        .collect();
    Ok(MarginEstimate {
        slope,
        slope_se: mean_sd(&slopes).1 / nb,
        intercept,
        intercept_se: mean_sd(&intercepts).1 / nb,
        residual_rms,
        curve,
        n_mc,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationEstimate {
    pub c_star: f64,
    pub p_star: f64,
    /// Euclidean radius `R` bounding the contexts.
    pub radius: f64,
    /// Largest `target_p`-quantile of `max_i X_i^T eta` over the directions.
    pub worst_quantile: f64,
    /// Batch-means standard error of the worst quantile.
    pub std_error: f64,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let idx = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Estimates the concentration parameters of a bounded context distribution:
/// `c_star` is the worst-case (over directions) `target_p`-quantile of
/// `max_i X_i^T eta`, divided by the radius `R`; `p_star = target_p`.
pub fn estimate_concentration_params(
    dist: &ContextDistribution,
    k: usize,
    n_mc: usize,
    n_dirs: usize,
    target_p: f64,
    rng: &mut SimRng,
) -> Result<ConcentrationEstimate> {
    let radius = dist.l2_radius().ok_or_else(|| {
        BanditError::Diagnostics("concentration parameters need a bounded distribution".into())
    })?;
    if !(target_p > 0.0 && target_p < 1.0) {
        return Err(BanditError::Diagnostics(
            "target_p must lie in (0, 1)".into(),
        ));
    }
    let d = dist.dim();
    let dirs = sampled_directions(d, n_dirs, true, rng);
    let theta_mat = DMatrix::from_columns(&dirs);
    let mut maxima: Vec<Vec<f64>> = vec![Vec::with_capacity(n_mc); dirs.len()];
    let mut ctx_mat = DMatrix::zeros(k, d);
    for _ in 0..n_mc {
        let ctx = sample_context_set(dist, k, rng)?;
        for (i, x) in ctx.iter().enumerate() {
            ctx_mat.set_row(i, &x.transpose());
        }
        let scores = &ctx_mat * &theta_mat;
        for (j, col) in scores.column_iter().enumerate() {
            maxima[j].push(col.max());
        }
    }
    let mut worst = (f64::NEG_INFINITY, 0);
    for (j, m) in maxima.iter().enumerate() {
        let mut s = m.clone();
        s.sort_by(f64::total_cmp);
        let q = quantile(&s, target_p);
        if q > worst.0 {
            worst = (q, j);
        }
    }
    let batch = (n_mc / BATCHES).max(1);
    let batch_q: Vec<f64> = maxima[worst.1]
        .chunks(batch)
        .filter(|c| c.len() == batch)
        .map(|c| {
            let mut s = c.to_vec();
            s.sort_by(f64::total_cmp);
            quantile(&s, target_p)
        })
        .collect();
    Ok(ConcentrationEstimate {
        c_star: (worst.0 / radius).clamp(0.0, 1.0),
        p_star: target_p,
        radius,
        worst_quantile: worst.0,
        std_error: mean_sd(&batch_q).1 / (batch_q.len() as f64).sqrt(),
    })
}

/// Empirical `1 - 1e-4` quantile of `max_i ||X_i||_2`, used in place of the
/// sub-exponential norm bound, which has no closed form for most families.
pub fn x_max_tail_quantile(
    dist: &ContextDistribution,
    k: usize,
    n_mc: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    let mut norms = (0..n_mc)
        .map(|_| sample_context_set(dist, k, rng).map(|c| c.max_norm()))
        .collect::<Result<Vec<_>>>()?;
    norms.sort_by(f64::total_cmp);
    Ok(quantile(&norms, 1.0 - 1e-4))
}

/// `(t, sqrt(t) ||theta_hat_t - theta*||_2)` for every round with an estimate.
pub fn consistency_curve(traj: &Trajectory) -> Vec<(usize, f64)> {
    traj.records
        .iter()
        .filter_map(|r| r.est_error_l2.map(|e| (r.t, (r.t as f64).sqrt() * e)))
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConsistencySummary {
    pub max: f64,
    pub median: f64,
    pub max_over_median: f64,
}

/// Max and median of the normalized error over rounds `t_lo..=t_hi`.
pub fn summarize_consistency(
    series: &[(usize, f64)],
    t_lo: usize,
    t_hi: usize,
) -> Option<ConsistencySummary> {
    let mut v: Vec<f64> = series
        .iter()
        .filter(|(t, _)| (t_lo..=t_hi).contains(t))
        .map(|(_, e)| *e)
        .collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    };
    let max = v[n - 1];
    Some(ConsistencySummary {
        max,
        median,
        max_over_median: max / median,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub passed: bool,
    /// Fraction of rounds `t >= t0` with `lambda_min(Sigma(t)) >= (lambda_star / 4) t`.
    pub fraction: f64,
    pub rounds: usize,
    pub t0: usize,
    pub lambda_star: f64,
    /// `(t, lambda_min(Sigma(t)) / t)`.
    pub series: Vec<(usize, f64)>,
}

/// Checks linear growth of the Gram matrix's smallest eigenvalue.
pub fn gram_growth_check(traj: &Trajectory, lambda_star: f64, t0: usize) -> GrowthReport {
    let assessed: Vec<_> = traj.records.iter().filter(|r| r.t >= t0).collect();
    let ok = assessed
        .iter()
        .filter(|r| r.gram_min_eig >= 0.25 * lambda_star * r.t as f64)
        .count();
    let fraction = if assessed.is_empty() {
        0.0
    } else {
        ok as f64 / assessed.len() as f64
    };
    GrowthReport {
        passed: !assessed.is_empty() && fraction >= GROWTH_PASS_FRACTION,
        fraction,
        rounds: assessed.len(),
        t0,
        lambda_star,
        series: traj
            .records
            .iter()
            .map(|r| (r.t, r.gram_min_eig / r.t as f64))
            .collect(),
    }
}

/// Monte-Carlo budget of [`diagnose`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct DiagnosticsBudget {
    pub diversity_n_mc: usize,
    pub n_dirs: usize,
    pub margin_n_mc: usize,
    pub margin_scale: f64,
    pub concentration_n_mc: usize,
    pub concentration_target_p: f64,
}

impl Default for DiagnosticsBudget {
    fn default() -> Self {
        Self {
            diversity_n_mc: 10_000,
            n_dirs: 32,
            margin_n_mc: 100_000,
            margin_scale: 1.0,
            concentration_n_mc: 10_000,
            concentration_target_p: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsReport {
    pub lambda_star_hat: f64,
    pub lambda_star_se: f64,
    pub c_delta_hat: Option<f64>,
    pub c_delta_se: Option<f64>,
    pub margin_intercept: Option<f64>,
    pub c_star_hat: Option<f64>,
    pub p_star_hat: Option<f64>,
    /// Empirical tail quantile standing in for the context norm bound.
    pub x_max_tail_quantile: f64,
    pub consistency: Option<ConsistencySummary>,
    pub growth_passed: bool,
    pub growth_fraction: f64,
    pub regret_bound_violations: usize,
    pub consistency_series: Vec<(usize, f64)>,
    pub growth_series: Vec<(usize, f64)>,
}

impl DiagnosticsReport {
    /// `key = value` text block (TOML).
    pub fn to_text_block(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }
}

/// Runs every estimator for `instance` and checks a greedy trajectory on it.
pub fn diagnose(
    instance: &BanditInstance,
    greedy: &Trajectory,
    budget: &DiagnosticsBudget,
    rng: &mut SimRng,
) -> Result<DiagnosticsReport> {
    let dist = instance.contexts();
    let k = instance.arms();
    let diversity =
        estimate_diversity_constant(dist, k, budget.diversity_n_mc, budget.n_dirs, rng)?;
    let margin = if k >= 2 {
        Some(estimate_margin_constant(
            dist,
            instance.theta_star(),
            k,
            budget.margin_n_mc,
            &default_eps_grid(budget.margin_scale),
            rng,
        )?)
    } else {
        None
    };
    let concentration = match dist.l2_radius() {
        Some(_) => Some(estimate_concentration_params(
            dist,
            k,
            budget.concentration_n_mc,
            budget.n_dirs,
            budget.concentration_target_p,
            rng,
        )?),
        None => None,
    };
    let x_max = x_max_tail_quantile(dist, k, 20_000, rng)?;
    let series = consistency_curve(greedy);
    let horizon = greedy.len();
    let growth = gram_growth_check(greedy, diversity.value, GROWTH_T0);
    Ok(DiagnosticsReport {
        lambda_star_hat: diversity.value,
        lambda_star_se: diversity.std_error,
        c_delta_hat: margin.as_ref().map(|m| m.slope),
        c_delta_se: margin.as_ref().map(|m| m.slope_se),
        margin_intercept: margin.as_ref().map(|m| m.intercept),
        c_star_hat: concentration.as_ref().map(|c| c.c_star),
        p_star_hat: concentration.as_ref().map(|c| c.p_star),
        x_max_tail_quantile: x_max,
        consistency: summarize_consistency(&series, horizon / 10, horizon),
        growth_passed: growth.passed,
        growth_fraction: growth.fraction,
        regret_bound_violations: crate::env::greedy_regret_bound_violations(greedy).len(),
        consistency_series: series,
        growth_series: growth.series,
    })
}
