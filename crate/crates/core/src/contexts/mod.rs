//! Context distributions of the LAC family.

mod distribution;
mod lac;
mod spec;

use nalgebra::DVector;

pub use distribution::{
    student_t_lac_constant, ContextDistribution, LogDensity, MAX_REJECTION_ATTEMPTS,
    MIN_TRUNCATION_MASS,
};
pub use lac::{
    decay_rate_check, verify_lac, DecayReport, LacFunction, LacReport, LacStatus, FD_REL_TOL,
    FD_STEP, KINK_EXCLUSION,
};
pub use spec::{ArmCoupling, Coords, Covariance, DistributionSpec, Family, Region};

use crate::error::{BanditError, Result};
use crate::seed::SimRng;

/// The K context vectors revealed in one round; entry `i` belongs to arm `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSet {
    vectors: Vec<DVector<f64>>,
}

impl ContextSet {
    pub fn new(vectors: Vec<DVector<f64>>) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(BanditError::InvalidSpec(
                "context set needs at least one arm".into(),
            ));
        };
        let d = first.len();
        if let Some(v) = vectors.iter().find(|v| v.len() != d) {
            return Err(BanditError::DimensionMismatch {
                expected: d,
                got: v.len(),
            });
        }
        if vectors.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(BanditError::NonFinite("context set"));
        }
        Ok(Self { vectors })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        Self::new(rows.iter().map(|r| DVector::from_column_slice(r)).collect())
    }

    pub fn arms(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn arm(&self, i: usize) -> &DVector<f64> {
        &self.vectors[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.vectors.iter()
    }

    pub fn max_norm(&self) -> f64 {
        self.vectors.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Draws one context set of `k` arms. Arms are independent draws under
/// both coupling modes; under a shared Gaussian covariance the correlation
/// is across coordinates within an arm.
pub fn sample_context_set(
    dist: &ContextDistribution,
    k: usize,
    rng: &mut SimRng,
) -> Result<ContextSet> {
    if k == 0 {
        return Err(BanditError::InvalidSpec("K must be at least 1".into()));
    }
    let vectors = (0..k)
        .map(|_| dist.sample(rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(ContextSet { vectors })
}
