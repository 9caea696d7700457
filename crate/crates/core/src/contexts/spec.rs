//! Serializable description of a context distribution.
//!
//! A [`DistributionSpec`] is dimension-free where it can be: per-coordinate
//! parameters given as a single number are broadcast to every coordinate
//! when the spec is resolved for a concrete dimension.

use serde::{Deserialize, Serialize};

use crate::error::{BanditError, Result};

/// A scalar broadcast to all coordinates, or one value per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coords {
    Scalar(f64),
    PerCoord(Vec<f64>),
}

impl Coords {
    pub fn resolve(&self, d: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            Coords::Scalar(v) => Ok(vec![*v; d]),
            Coords::PerCoord(v) if v.len() == 1 => Ok(vec![v[0]; d]),
            Coords::PerCoord(v) if v.len() == d => Ok(v.clone()),
            Coords::PerCoord(v) => Err(BanditError::InvalidSpec(format!(
                "{what}: expected 1 or {d} values, got {}",
                v.len()
            ))),
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            Coords::Scalar(v) => vec![*v],
            Coords::PerCoord(v) => v.clone(),
        }
    }
}

impl From<f64> for Coords {
    fn from(v: f64) -> Self {
        Coords::Scalar(v)
    }
}

impl From<Vec<f64>> for Coords {
    fn from(v: Vec<f64>) -> Self {
        Coords::PerCoord(v)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariance {
    #[default]
    Identity,
    /// Diagonal variances.
    Diagonal(Coords),
    /// Unit-free equicorrelation: `variance` on the diagonal, `variance * rho` elsewhere.
    Equicorrelated {
        variance: f64,
        rho: f64,
    },
    /// Full matrix, row-major.
    Dense(Vec<Vec<f64>>),
}

impl Covariance {
    /// Dense `d x d` matrix as nested rows.
    pub fn to_rows(&self, d: usize) -> Result<Vec<Vec<f64>>> {
        let mut rows = vec![vec![0.0; d]; d];
        match self {
            Covariance::Identity => (0..d).for_each(|i| rows[i][i] = 1.0),
            Covariance::Diagonal(v) => {
                for (i, s) in v.resolve(d, "covariance.diagonal")?.into_iter().enumerate() {
                    rows[i][i] = s;
                }
            }
            Covariance::Equicorrelated { variance, rho } => {
                for (i, row) in rows.iter_mut().enumerate() {
                    for (j, c) in row.iter_mut().enumerate() {
                        *c = if i == j { *variance } else { variance * rho };
                    }
                }
            }
            Covariance::Dense(m) => {
                if m.len() != d || m.iter().any(|r| r.len() != d) {
                    return Err(BanditError::InvalidSpec(format!(
                        "covariance.dense: expected a {d}x{d} matrix"
                    )));
                }
                rows = m.clone();
            }
        }
        Ok(rows)
    }

    pub fn is_diagonal(&self) -> bool {
        match self {
            Covariance::Identity | Covariance::Diagonal(_) => true,
            Covariance::Equicorrelated { rho, .. } => *rho == 0.0,
            Covariance::Dense(m) => m
                .iter()
                .enumerate()
                .all(|(i, r)| r.iter().enumerate().all(|(j, v)| i == j || *v == 0.0)),
        }
    }
}

/// Parametric family of a single arm's context vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Gaussian {
        #[serde(default = "zero_coords")]
        mean: Coords,
        #[serde(default)]
        covariance: Covariance,
    },
    Laplace {
        #[serde(default = "zero_coords")]
        location: Coords,
        #[serde(default = "unit_coords")]
        scale: Coords,
    },
    UniformBall {
        radius: f64,
    },
    Exponential {
        #[serde(default = "unit_coords")]
        rate: Coords,
    },
    /// Standard Student's t, independent across coordinates.
    StudentT {
        dof: f64,
    },
    Cauchy {
        #[serde(default = "zero_coords")]
        location: Coords,
        #[serde(default = "unit_coords")]
        scale: Coords,
    },
}

fn zero_coords() -> Coords {
    Coords::Scalar(0.0)
}

fn unit_coords() -> Coords {
    Coords::Scalar(1.0)
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian { .. } => "gaussian",
            Family::Laplace { .. } => "laplace",
            Family::UniformBall { .. } => "uniform_ball",
            Family::Exponential { .. } => "exponential",
            Family::StudentT { .. } => "student_t",
            Family::Cauchy { .. } => "cauchy",
        }
    }

    /// True when the density factorizes over coordinates.
    pub fn is_coordinatewise(&self) -> bool {
        match self {
            Family::Gaussian { covariance, .. } => covariance.is_diagonal(),
            Family::UniformBall { .. } => false,
            _ => true,
        }
    }
}

/// Truncation region applied to each arm's vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Centered Euclidean ball.
    Ball { radius: f64 },
    /// Axis-aligned box `[lo_j, hi_j]`.
    Box { lo: Coords, hi: Coords },
}

impl Region {
    pub fn ball(radius: f64) -> Self {
        Region::Ball { radius }
    }

    /// The same interval on every coordinate.
    pub fn cube(lo: f64, hi: f64) -> Self {
        Region::Box {
            lo: Coords::Scalar(lo),
            hi: Coords::Scalar(hi),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Region::Ball { radius } => positive(*radius, "truncation.ball.radius"),
            Region::Box { lo, hi } => {
                let (lo, hi) = (lo.values(), hi.values());
                if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
                    return Err(BanditError::InvalidSpec(
                        "truncation.box: bounds must be finite".into(),
                    ));
                }
                if lo.len() == hi.len() && lo.iter().zip(&hi).any(|(l, h)| l >= h) {
                    return Err(BanditError::InvalidSpec(
                        "truncation.box: lo must be strictly below hi".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmCoupling {
    /// Every arm's vector is an independent draw from the family.
    #[default]
    IndependentArms,
    /// Gaussian only: coordinates correlated through one covariance,
    /// arms drawn independently from it.
    SharedGaussianCovariance,
}

/// Closed description of a context-set distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Region>,
    #[serde(default)]
    pub arm_coupling: ArmCoupling,
}

impl DistributionSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            truncation: None,
            arm_coupling: ArmCoupling::IndependentArms,
        }
    }

    pub fn standard_gaussian() -> Self {
        Self::new(Family::Gaussian {
            mean: zero_coords(),
            covariance: Covariance::Identity,
        })
    }

    pub fn gaussian(mean: impl Into<Coords>, covariance: Covariance) -> Self {
        Self::new(Family::Gaussian {
            mean: mean.into(),
            covariance,
        })
    }

    pub fn laplace(location: impl Into<Coords>, scale: impl Into<Coords>) -> Self {
        Self::new(Family::Laplace {
            location: location.into(),
            scale: scale.into(),
        })
    }

    pub fn uniform_ball(radius: f64) -> Self {
        Self::new(Family::UniformBall { radius })
    }

    pub fn exponential(rate: impl Into<Coords>) -> Self {
        Self::new(Family::Exponential { rate: rate.into() })
    }

    pub fn student_t(dof: f64) -> Self {
        Self::new(Family::StudentT { dof })
    }

    pub fn cauchy(location: impl Into<Coords>, scale: impl Into<Coords>) -> Self {
        Self::new(Family::Cauchy {
            location: location.into(),
            scale: scale.into(),
        })
    }

    /// Returns the spec restricted to `region`. Mass is checked when the
    /// spec is resolved for a dimension.
    pub fn truncated(mut self, region: Region) -> Self {
        self.truncation = Some(region);
        self
    }

    pub fn with_coupling(mut self, coupling: ArmCoupling) -> Self {
        self.arm_coupling = coupling;
        self
    }

    /// Dimension-free parameter checks.
    pub fn validate(&self) -> Result<()> {
        match &self.family {
            Family::Gaussian { mean, covariance } => {
                finite(&mean.values(), "mean")?;
                match covariance {
                    Covariance::Diagonal(v) => v
                        .values()
                        .iter()
                        .try_for_each(|s| positive(*s, "covariance.diagonal"))?,
                    Covariance::Equicorrelated { variance, rho } => {
                        positive(*variance, "covariance.equicorrelated.variance")?;
                        if !rho.is_finite() || *rho >= 1.0 {
                            return Err(BanditError::InvalidSpec(
                                "covariance.equicorrelated.rho must be below 1".into(),
                            ));
                        }
                    }
                    Covariance::Dense(m) => {
                        finite(&m.concat(), "covariance.dense")?;
                    }
                    Covariance::Identity => {}
                }
            }
            Family::Laplace { location, scale } | Family::Cauchy { location, scale } => {
                finite(&location.values(), "location")?;
                scale
                    .values()
                    .iter()
                    .try_for_each(|s| positive(*s, "scale"))?;
            }
            Family::UniformBall { radius } => positive(*radius, "radius")?,
            Family::Exponential { rate } => rate
                .values()
                .iter()
                .try_for_each(|s| positive(*s, "rate"))?,
            Family::StudentT { dof } => positive(*dof, "dof")?,
        }
        if let Some(region) = &self.truncation {
            region.validate()?;
        }
        if self.arm_coupling == ArmCoupling::SharedGaussianCovariance
            && !matches!(self.family, Family::Gaussian { .. })
        {
            return Err(BanditError::InvalidSpec(
                "arm_coupling: shared_gaussian_covariance requires kind = gaussian".into(),
            ));
        }
        Ok(())
    }
}

fn positive(v: f64, what: &str) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(BanditError::InvalidSpec(format!(
            "{what} must be finite and > 0, got {v}"
        )))
    }
}

fn finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(BanditError::InvalidSpec(format!("{what} must be finite")))
    }
}
