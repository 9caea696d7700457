//! Resolved context distributions: sampling, log density and its gradient.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Cauchy, Distribution, Exp, Open01, StandardNormal, StudentT};
use statrs::function::gamma::ln_gamma;

use super::lac::LacFunction;
use super::spec::{DistributionSpec, Family, Region};
use crate::error::{BanditError, Result};
use crate::seed::{rng_from_seed, SimRng};

/// Rejection attempts allowed per vector (or per coordinate) before a
/// truncation region is declared infeasible.
pub const MAX_REJECTION_ATTEMPTS: usize = 1_000_000;

/// Minimum empirical mass a truncation region must carry.
pub const MIN_TRUNCATION_MASS: f64 = 1e-3;

const MASS_CHECK_DRAWS: usize = 20_000;
const MASS_CHECK_SEED: u64 = 0x6d61_7373;

/// What the LAC and decay-rate verifiers need from a density.
pub trait LogDensity {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &DVector<f64>) -> Result<f64>;
    fn grad_log_density(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    /// Value of the LAC function at sup-norm radius `r`.
    fn lac_bound(&self, r: f64) -> f64;
    fn sample_point(&self, rng: &mut SimRng) -> Result<DVector<f64>>;
    fn mode(&self) -> DVector<f64>;
    fn length_scale(&self) -> f64;
    /// Distance from `x` to the nearest point where the log density is not smooth
    /// (a kink or the edge of the support).
    fn smooth_margin(&self, x: &DVector<f64>) -> f64;
    /// Distance to the nearest kink of the log density; infinite when there is none.
    fn kink_distance(&self, _x: &DVector<f64>) -> f64 {
        f64::INFINITY
    }
}

#[derive(Debug, Clone)]
enum Base {
    Gaussian {
        mean: DVector<f64>,
        chol: DMatrix<f64>,
        precision: DMatrix<f64>,
        log_norm: f64,
        lac: LacFunction,
    },
    Laplace {
        loc: Vec<f64>,
        scale: Vec<f64>,
    },
    UniformBall {
        radius: f64,
        log_norm: f64,
    },
    Exponential {
        rate: Vec<f64>,
    },
    StudentT {
        dof: f64,
        log_norm: f64,
    },
    Cauchy {
        loc: Vec<f64>,
        scale: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Bounds {
    Ball(f64),
    Box(Vec<f64>, Vec<f64>),
}

impl Bounds {
    fn contains(&self, x: &DVector<f64>) -> bool {
        match self {
            Bounds::Ball(r) => x.norm() <= *r,
            Bounds::Box(lo, hi) => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h),
        }
    }

    fn sup_radius(&self) -> f64 {
        match self {
            Bounds::Ball(r) => *r,
            Bounds::Box(lo, hi) => lo.iter().chain(hi).fold(0.0, |m: f64, v| m.max(v.abs())),
        }
    }

    fn l2_radius(&self) -> f64 {
        match self {
            Bounds::Ball(r) => *r,
            Bounds::Box(lo, hi) => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| l.abs().max(h.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    fn margin(&self, x: &DVector<f64>) -> f64 {
        match self {
            Bounds::Ball(r) => r - x.norm(),
            Bounds::Box(lo, hi) => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (l, h))| (v - l).min(h - v))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// A [`DistributionSpec`] resolved for a concrete dimension.
///
/// Immutable once built; sampling takes the caller's random source.
#[derive(Debug, Clone)]
pub struct ContextDistribution {
    spec: DistributionSpec,
    dim: usize,
    base: Base,
    bounds: Vec<Bounds>,
    coordinatewise: bool,
}

impl ContextDistribution {
    pub fn new(spec: &DistributionSpec, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(BanditError::InvalidSpec(
                "dimension must be at least 1".into(),
            ));
        }
        spec.validate()?;
        let base = resolve_base(&spec.family, d)?;
        let coordinatewise = spec.family.is_coordinatewise();
        let mut dist = Self {
            spec: DistributionSpec {
                truncation: None,
                ..spec.clone()
            },
            dim: d,
            base,
            bounds: Vec::new(),
            coordinatewise,
        };
        if let Some(region) = &spec.truncation {
            dist = dist.truncate(region)?;
        }
        Ok(dist)
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_truncated(&self) -> bool {
        !self.bounds.is_empty()
    }

    /// Restricts the distribution to `region`, checking that the region
    /// carries at least [`MIN_TRUNCATION_MASS`] under the current distribution.
    ///
    /// Truncating an already truncated distribution intersects the regions.
    pub fn truncate(&self, region: &Region) -> Result<Self> {
        let bounds = match region {
            Region::Ball { radius } => Bounds::Ball(*radius),
            Region::Box { lo, hi } => {
                let lo = lo.resolve(self.dim, "truncation.box.lo")?;
                let hi = hi.resolve(self.dim, "truncation.box.hi")?;
                if lo
                    .iter()
                    .zip(&hi)
                    .any(|(l, h)| l >= h || !l.is_finite() || !h.is_finite())
                {
                    return Err(BanditError::InvalidSpec(
                        "truncation.box: need finite lo < hi on every coordinate".into(),
                    ));
                }
                Bounds::Box(lo, hi)
            }
        };
        let mut out = self.clone();
        out.spec.truncation = Some(region.clone());
        out.bounds.push(bounds);
        out.check_mass()?;
        Ok(out)
    }

    fn coordinate_box(&self) -> Option<(&[f64], &[f64])> {
        match self.bounds.first() {
            Some(Bounds::Box(lo, hi)) if self.coordinatewise => Some((lo, hi)),
            _ => None,
        }
    }

    fn check_mass(&self) -> Result<()> {
        let mut rng = rng_from_seed(MASS_CHECK_SEED);
        if let (1, Some((lo, hi))) = (self.bounds.len(), self.coordinate_box()) {
            for j in 0..self.dim {
                let hits = (0..MASS_CHECK_DRAWS)
                    .filter(|_| {
                        let v = self.sample_coord(j, &mut rng);
                        lo[j] <= v && v <= hi[j]
                    })
                    .count();
                let mass = hits as f64 / MASS_CHECK_DRAWS as f64;
                if mass < MIN_TRUNCATION_MASS {
                    return Err(BanditError::InfeasibleTruncation(format!(
                        "coordinate {j} keeps empirical mass {mass:.2e} < {MIN_TRUNCATION_MASS:e}"
                    )));
                }
            }
            return Ok(());
        }
        // Mass of the newest region relative to the distribution it refines.
        let (newest, earlier) = self.bounds.split_last().expect("at least one region");
        let parent = Self {
            bounds: earlier.to_vec(),
            ..self.clone()
        };
        let draws = (MASS_CHECK_DRAWS / self.dim).max(2_000);
        let mut hits = 0usize;
        for _ in 0..draws {
            if newest.contains(&parent.sample(&mut rng)?) {
                hits += 1;
            }
        }
        let mass = hits as f64 / draws as f64;
        if mass < MIN_TRUNCATION_MASS {
            return Err(BanditError::InfeasibleTruncation(format!(
                "region keeps empirical mass {mass:.2e} < {MIN_TRUNCATION_MASS:e}"
            )));
        }
        Ok(())
    }

    /// One draw from the untruncated family.
    fn sample_base(&self, rng: &mut SimRng) -> DVector<f64> {
        match &self.base {
            Base::Gaussian { mean, chol, .. } => {
                let z = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                mean + chol * z
            }
            Base::UniformBall { radius, .. } => {
                let mut z = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                let mut n = z.norm();
                while n == 0.0 {
                    z = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                    n = z.norm();
                }
                let u: f64 = rng.sample(Open01);
                z * (radius * u.powf(1.0 / self.dim as f64) / n)
            }
            _ => DVector::from_fn(self.dim, |j, _| self.sample_coord(j, rng)),
        }
    }

    /// One draw of coordinate `j` of a coordinatewise family.
    fn sample_coord(&self, j: usize, rng: &mut SimRng) -> f64 {
        match &self.base {
            Base::Gaussian { mean, chol, .. } => {
                mean[j] + chol[(j, j)] * rng.sample::<f64, _>(StandardNormal)
            }
            Base::Laplace { loc, scale } => {
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                loc[j] - scale[j] * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Base::Exponential { rate } => Exp::new(rate[j]).expect("validated rate").sample(rng),
            Base::StudentT { dof, .. } => StudentT::new(*dof).expect("validated dof").sample(rng),
            Base::Cauchy { loc, scale } => Cauchy::new(loc[j], scale[j])
                .expect("validated scale")
                .sample(rng),
            Base::UniformBall { .. } => unreachable!("uniform ball is not coordinatewise"),
        }
    }

    /// One context vector. Truncated distributions sample by rejection:
    /// coordinate by coordinate for product families on a box, jointly otherwise.
    pub fn sample(&self, rng: &mut SimRng) -> Result<DVector<f64>> {
        if self.bounds.is_empty() {
            return Ok(self.sample_base(rng));
        }
        for _ in 0..MAX_REJECTION_ATTEMPTS {
            let (x, rest) = match self.coordinate_box() {
                Some((lo, hi)) => (self.sample_in_box(lo, hi, rng)?, &self.bounds[1..]),
                None => (self.sample_base(rng), &self.bounds[..]),
            };
            if rest.iter().all(|b| b.contains(&x)) {
                return Ok(x);
            }
        }
        Err(BanditError::InfeasibleTruncation(format!(
            "rejection sampling exceeded {MAX_REJECTION_ATTEMPTS} attempts"
        )))
    }

    fn sample_in_box(&self, lo: &[f64], hi: &[f64], rng: &mut SimRng) -> Result<DVector<f64>> {
        let mut x = DVector::zeros(self.dim);
        for j in 0..self.dim {
            let mut attempts = 0;
            x[j] = loop {
                let v = self.sample_coord(j, rng);
                if lo[j] <= v && v <= hi[j] {
                    break v;
                }
                attempts += 1;
                if attempts >= MAX_REJECTION_ATTEMPTS {
                    return Err(BanditError::InfeasibleTruncation(format!(
                        "rejection sampling exceeded {MAX_REJECTION_ATTEMPTS} attempts on coordinate {j}"
                    )));
                }
            };
        }
        Ok(x)
    }

    pub fn in_support(&self, x: &DVector<f64>) -> bool {
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let base_ok = match &self.base {
            Base::UniformBall { radius, .. } => x.norm() <= *radius,
            Base::Exponential { .. } => x.iter().all(|v| *v >= 0.0),
            _ => true,
        };
        base_ok && self.bounds.iter().all(|b| b.contains(x))
    }

    fn check_point(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(BanditError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !self.in_support(x) {
            return Err(BanditError::OutOfSupport);
        }
        Ok(())
    }

    /// Log density at `x`. The family's normalizing constant is included;
    /// truncation renormalization is not, since it never affects gradients.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_point(x)?;
        let v = match &self.base {
            Base::Gaussian {
                mean,
                precision,
                log_norm,
                ..
            } => {
                let c = x - mean;
                log_norm - 0.5 * c.dot(&(precision * &c))
            }
            Base::Laplace { loc, scale } => x
                .iter()
                .zip(loc.iter().zip(scale))
                .map(|(v, (m, b))| -(2.0 * b).ln() - (v - m).abs() / b)
                .sum(),
            Base::UniformBall { log_norm, .. } => *log_norm,
            Base::Exponential { rate } => x.iter().zip(rate).map(|(v, l)| l.ln() - l * v).sum(),
            Base::StudentT { dof, log_norm } => x
                .iter()
                .map(|v| log_norm - 0.5 * (dof + 1.0) * (v * v / dof).ln_1p())
                .sum(),
            Base::Cauchy { loc, scale } => x
                .iter()
                .zip(loc.iter().zip(scale))
                .map(|(v, (m, s))| {
                    let z = (v - m) / s;
                    -(std::f64::consts::PI * s).ln() - (z * z).ln_1p()
                })
                .sum(),
        };
        Ok(v)
    }

    /// Analytic gradient of the log density. Truncation leaves it unchanged.
    pub fn grad_log_density(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_point(x)?;
        let g = match &self.base {
            Base::Gaussian {
                mean, precision, ..
            } => -(precision * (x - mean)),
            Base::Laplace { loc, scale } => {
                if x.iter().zip(loc).any(|(v, m)| v == m) {
                    return Err(BanditError::Degenerate);
                }
                DVector::from_fn(self.dim, |j, _| -(x[j] - loc[j]).signum() / scale[j])
            }
            Base::UniformBall { .. } => DVector::zeros(self.dim),
            Base::Exponential { rate } => DVector::from_fn(self.dim, |j, _| -rate[j]),
            Base::StudentT { dof, .. } => x.map(|v| -(dof + 1.0) * v / (dof + v * v)),
            Base::Cauchy { loc, scale } => DVector::from_fn(self.dim, |j, _| {
                let c = x[j] - loc[j];
                -2.0 * c / (scale[j] * scale[j] + c * c)
            }),
        };
        Ok(g)
    }

    /// LAC function of the untruncated family.
    pub fn base_lac_function(&self) -> LacFunction {
        match &self.base {
            Base::Gaussian { lac, .. } => *lac,
            Base::Laplace { scale, .. } => LacFunction::constant(max_recip(scale)),
            Base::UniformBall { .. } => LacFunction::constant(1.0),
            Base::Exponential { rate } => {
                LacFunction::constant(rate.iter().cloned().fold(0.0, f64::max))
            }
            Base::StudentT { dof, .. } => LacFunction::constant(student_t_lac_constant(*dof)),
            Base::Cauchy { scale, .. } => LacFunction::constant(max_recip(scale)),
        }
    }

    /// LAC function of this distribution: the family's polynomial, or the
    /// constant obtained by evaluating it at the sup-norm radius of the
    /// truncation region.
    pub fn lac_function(&self) -> LacFunction {
        let base = self.base_lac_function();
        match self.sup_radius() {
            Some(r) => LacFunction::constant(base.eval(r)),
            None => base,
        }
    }

    /// Sup-norm radius of the truncation region.
    pub fn sup_radius(&self) -> Option<f64> {
        self.bounds.iter().map(Bounds::sup_radius).reduce(f64::min)
    }

    /// Euclidean radius of a ball containing the support, when bounded.
    pub fn l2_radius(&self) -> Option<f64> {
        let base = match &self.base {
            Base::UniformBall { radius, .. } => Some(*radius),
            _ => None,
        };
        base.into_iter()
            .chain(self.bounds.iter().map(Bounds::l2_radius))
            .reduce(f64::min)
    }

    /// Mean and variance of coordinate `j` for untruncated families, when finite.
    pub fn coordinate_moments(&self, j: usize) -> Option<(f64, f64)> {
        if self.is_truncated() {
            return None;
        }
        match &self.base {
            Base::Gaussian { mean, chol, .. } => {
                let var = chol.row(j).iter().map(|v| v * v).sum();
                Some((mean[j], var))
            }
            Base::Laplace { loc, scale } => Some((loc[j], 2.0 * scale[j] * scale[j])),
            Base::UniformBall { radius, .. } => {
                Some((0.0, radius * radius / (self.dim as f64 + 2.0)))
            }
            Base::Exponential { rate } => Some((1.0 / rate[j], 1.0 / (rate[j] * rate[j]))),
            Base::StudentT { dof, .. } if *dof > 2.0 => Some((0.0, dof / (dof - 2.0))),
            Base::StudentT { dof, .. } if *dof > 1.0 => Some((0.0, f64::INFINITY)),
            _ => None,
        }
    }
}

fn max_recip(v: &[f64]) -> f64 {
    v.iter().map(|s| 1.0 / s).fold(0.0, f64::max)
}

/// `sup_x |d/dx log f(x)|` for the standard Student's t density, attained at `x = sqrt(dof)`.
pub fn student_t_lac_constant(dof: f64) -> f64 {
    (dof + 1.0) / (2.0 * dof.sqrt())
}

fn resolve_base(family: &Family, d: usize) -> Result<Base> {
    Ok(match family {
        Family::Gaussian { mean, covariance } => {
            let mean = DVector::from_vec(mean.resolve(d, "mean")?);
            let rows = covariance.to_rows(d)?;
            let cov = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
            let asym = (&cov - cov.transpose()).amax();
            if asym > 1e-12 * cov.amax().max(1.0) {
                return Err(BanditError::InvalidSpec(format!(
                    "covariance is not symmetric (max asymmetry {asym:e})"
                )));
            }
            let min_eig = cov.symmetric_eigenvalues().min();
            // Written this way so a NaN eigenvalue is rejected too.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(min_eig > 0.0) {
                return Err(BanditError::InvalidSpec(format!(
                    "covariance must be positive definite (min eigenvalue {min_eig:e})"
                )));
            }
            let chol = cov
                .clone()
                .cholesky()
                .ok_or_else(|| BanditError::InvalidSpec("covariance Cholesky failed".into()))?;
            let precision = chol.inverse();
            let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
            let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
            let slope = if covariance.is_diagonal() {
                4.0 / min_eig
            } else {
                precision
                    .row_iter()
                    .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                    .fold(0.0, f64::max)
            };
            let lac = LacFunction::new(slope * mean.amax(), slope, 1.0);
            Base::Gaussian {
                mean,
                chol: chol.unpack(),
                precision,
                log_norm,
                lac,
            }
        }
        Family::Laplace { location, scale } => Base::Laplace {
            loc: location.resolve(d, "location")?,
            scale: scale.resolve(d, "scale")?,
        },
        Family::UniformBall { radius } => {
            let df = d as f64;
            let log_vol =
                0.5 * df * std::f64::consts::PI.ln() - ln_gamma(0.5 * df + 1.0) + df * radius.ln();
            Base::UniformBall {
                radius: *radius,
                log_norm: -log_vol,
            }
        }
        Family::Exponential { rate } => Base::Exponential {
            rate: rate.resolve(d, "rate")?,
        },
        Family::StudentT { dof } => Base::StudentT {
            dof: *dof,
            log_norm: ln_gamma(0.5 * (dof + 1.0))
                - ln_gamma(0.5 * dof)
                - 0.5 * (dof * std::f64::consts::PI).ln(),
        },
        Family::Cauchy { location, scale } => Base::Cauchy {
            loc: location.resolve(d, "location")?,
            scale: scale.resolve(d, "scale")?,
        },
    })
}

impl LogDensity for ContextDistribution {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        ContextDistribution::log_density(self, x)
    }

    fn grad_log_density(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        ContextDistribution::grad_log_density(self, x)
    }

    fn lac_bound(&self, r: f64) -> f64 {
        self.lac_function().eval(r)
    }

    fn sample_point(&self, rng: &mut SimRng) -> Result<DVector<f64>> {
        self.sample(rng)
    }

    fn mode(&self) -> DVector<f64> {
        match &self.base {
            Base::Gaussian { mean, .. } => mean.clone(),
            Base::Laplace { loc, .. } | Base::Cauchy { loc, .. } => DVector::from_column_slice(loc),
            _ => DVector::zeros(self.dim),
        }
    }

    fn length_scale(&self) -> f64 {
        let s = match &self.base {
            Base::Gaussian { chol, .. } => chol.diagonal().amax().max(1e-12) * 3.0,
            Base::Laplace { scale, .. } | Base::Cauchy { scale, .. } => {
                3.0 * scale.iter().cloned().fold(0.0, f64::max)
            }
            Base::UniformBall { radius, .. } => *radius,
            Base::Exponential { rate } => 3.0 / rate.iter().cloned().fold(f64::INFINITY, f64::min),
            Base::StudentT { dof, .. } => 2.0 * dof.sqrt().max(1.0),
        };
        match self.sup_radius() {
            Some(r) => s.min(r),
            None => s,
        }
    }

    fn smooth_margin(&self, x: &DVector<f64>) -> f64 {
        let base = match &self.base {
            Base::UniformBall { radius, .. } => radius - x.norm(),
            Base::Exponential { .. } => x.min(),
            _ => f64::INFINITY,
        };
        let region = self
            .bounds
            .iter()
            .map(|b| b.margin(x))
            .fold(f64::INFINITY, f64::min);
        base.min(region).min(self.kink_distance(x))
    }

    fn kink_distance(&self, x: &DVector<f64>) -> f64 {
        match &self.base {
            Base::Laplace { loc, .. } => x
                .iter()
                .zip(loc)
                .map(|(v, m)| (v - m).abs())
                .fold(f64::INFINITY, f64::min),
            _ => f64::INFINITY,
        }
    }
}
