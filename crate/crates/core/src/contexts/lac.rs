//! Local anti-concentration: the LAC polynomial and numerical certificates
//! for it and for the density decay rate it implies.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::distribution::{ContextDistribution, LogDensity};
use super::spec::Region;
use crate::error::{BanditError, Result};
use crate::seed::SimRng;

/// Central finite-difference step used to cross-check analytic gradients.
pub const FD_STEP: f64 = 1e-5;
/// Agreement required between analytic and finite-difference gradients,
/// relative to `max(|g|, 1)`.
pub const FD_REL_TOL: f64 = 1e-4;
/// Points this close to a kink of the log density are not assessed.
pub const KINK_EXCLUSION: f64 = 1e-8;

/// `L(x) = a1 + a2 * x^alpha`, non-decreasing on `[0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LacFunction {
    pub a1: f64,
    pub a2: f64,
    pub alpha: f64,
}

impl LacFunction {
    pub fn new(a1: f64, a2: f64, alpha: f64) -> Self {
        debug_assert!(a1 >= 0.0 && a2 >= 0.0 && alpha >= 0.0);
        Self { a1, a2, alpha }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(c, 0.0, 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.a2 == 0.0 || self.alpha == 0.0
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.a2 == 0.0 {
            self.a1
        } else {
            self.a1 + self.a2 * x.max(0.0).powf(self.alpha)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LacStatus {
    Pass,
    /// The gradient bound was exceeded.
    LacViolation,
    /// Analytic and finite-difference gradients disagree: an implementation defect.
    GradientMismatch,
}

#[derive(Debug, Clone, Serialize)]
pub struct LacReport {
    pub status: LacStatus,
    /// `max ||grad log f(x)||_inf / L(||x||_inf)` over the assessed points.
    pub max_ratio: f64,
    #[serde(skip)]
    pub worst_point: Option<DVector<f64>>,
    pub points_checked: usize,
    pub points_skipped: usize,
    pub fd_points: usize,
    pub fd_max_rel_error: f64,
    pub tol: f64,
}

impl LacReport {
    pub fn passed(&self) -> bool {
        self.status == LacStatus::Pass
    }
}

/// Points on axis-aligned and diagonal lines through the mode.
fn mode_grid(density: &impl LogDensity) -> Vec<DVector<f64>> {
    let d = density.dim();
    let mode = density.mode();
    let span = density.length_scale();
    let steps = 40;
    let mut out = Vec::with_capacity((steps + 1) * (d + 1));
    let diag = DVector::from_element(d, 1.0 / (d as f64).sqrt());
    for k in 0..=steps {
        let s = span * (2.0 * k as f64 / steps as f64 - 1.0);
        for j in 0..d {
            let mut x = mode.clone();
            x[j] += s;
            out.push(x);
        }
        out.push(&mode + &diag * s);
    }
    out
}

fn finite_difference(density: &impl LogDensity, x: &DVector<f64>) -> Option<DVector<f64>> {
    let mut g = DVector::zeros(x.len());
    for j in 0..x.len() {
        let mut up = x.clone();
        let mut down = x.clone();
        up[j] += FD_STEP;
        down[j] -= FD_STEP;
        let fu = density.log_density(&up).ok()?;
        let fd = density.log_density(&down).ok()?;
        g[j] = (fu - fd) / (2.0 * FD_STEP);
    }
    Some(g)
}

/// Numerically certifies `||grad log f(x)||_inf <= L(||x||_inf)` on
/// `n_samples` draws plus a deterministic grid around the mode, and
/// cross-checks every analytic gradient against central finite differences.
pub fn verify_lac(
    density: &impl LogDensity,
    n_samples: usize,
    tol: f64,
    rng: &mut SimRng,
) -> Result<LacReport> {
    if n_samples < 1_000 {
        return Err(BanditError::Diagnostics(format!(
            "verify_lac needs at least 1000 samples, got {n_samples}"
        )));
    }
    let mut points = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        points.push(density.sample_point(rng)?);
    }
    points.extend(mode_grid(density));

    let mut max_ratio = 0.0f64;
    let mut worst_point = None;
    let mut checked = 0;
    let mut skipped = 0;
    let mut fd_points = 0;
    let mut fd_max_rel = 0.0f64;
    for x in &points {
        if density.kink_distance(x) < KINK_EXCLUSION {
            skipped += 1;
            continue;
        }
        let grad = match density.grad_log_density(x) {
            Ok(g) => g,
            Err(BanditError::OutOfSupport) | Err(BanditError::Degenerate) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        checked += 1;
        let g_inf = grad.amax();
        let bound = density.lac_bound(x.amax());
        let ratio = if g_inf == 0.0 {
            0.0
        } else if bound > 0.0 {
            g_inf / bound
        } else {
            f64::INFINITY
        };
        if ratio > max_ratio {
            max_ratio = ratio;
            worst_point = Some(x.clone());
        }
        if density.smooth_margin(x) > 2.0 * FD_STEP {
            if let Some(fd) = finite_difference(density, x) {
                fd_points += 1;
                let rel = grad
                    .iter()
                    .zip(fd.iter())
                    .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
                    .fold(0.0, f64::max);
                fd_max_rel = fd_max_rel.max(rel);
            }
        }
    }
    let status = if fd_max_rel > FD_REL_TOL {
        LacStatus::GradientMismatch
    } else if max_ratio > 1.0 + tol {
        LacStatus::LacViolation
    } else {
        LacStatus::Pass
    };
    Ok(LacReport {
        status,
        max_ratio,
        worst_point,
        points_checked: checked,
        points_skipped: skipped,
        fd_points,
        fd_max_rel_error: fd_max_rel,
        tol,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub passed: bool,
    /// `M = sqrt(d) * L(R_inf)`.
    pub decay_rate: f64,
    pub sup_radius: f64,
    /// Smallest `log f(x1) - log f(x2) + M ||x1 - x2||_2` over the pairs;
    /// the check passes when it is at least `ln(1 - tol)`.
    pub min_log_slack: f64,
    pub pairs: usize,
}

/// Checks `f(x1)/f(x2) >= exp(-M ||x1 - x2||_2) (1 - tol)` on pairs drawn
/// from `dist` restricted to `region`, with `M = sqrt(d) L(R_inf)`.
pub fn decay_rate_check(
    dist: &ContextDistribution,
    region: &Region,
    n_pairs: usize,
    tol: f64,
    rng: &mut SimRng,
) -> Result<DecayReport> {
    let restricted = dist.truncate(region)?;
    let sup_radius = restricted.sup_radius().expect("restricted to a region");
    let decay_rate = (dist.dim() as f64).sqrt() * restricted.lac_function().eval(sup_radius);
    let mut min_slack = f64::INFINITY;
    for _ in 0..n_pairs {
        let x1 = restricted.sample(rng)?;
        let x2 = restricted.sample(rng)?;
        let slack = restricted.log_density(&x1)? - restricted.log_density(&x2)?
            + decay_rate * (&x1 - &x2).norm();
        min_slack = min_slack.min(slack);
    }
    Ok(DecayReport {
        passed: min_slack >= (1.0 - tol).ln(),
        decay_rate,
        sup_radius,
        min_log_slack: min_slack,
        pairs: n_pairs,
    })
}
