//! The three experiment shapes and five context distributions used for the
//! reference regret comparison (`T = 1000`, 10 replications, `sigma = 0.5`).

use crate::contexts::{Covariance, DistributionSpec, Region};

use super::config::ExperimentConfig;

pub const PRESET_HORIZON: usize = 1000;
pub const PRESET_REPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetShape {
    D20K20,
    D100K20,
    D20K100,
}

impl PresetShape {
    pub const ALL: [PresetShape; 3] = [
        PresetShape::D20K20,
        PresetShape::D100K20,
        PresetShape::D20K100,
    ];

    /// `(d, K)`.
    pub fn dims(self) -> (usize, usize) {
        match self {
            PresetShape::D20K20 => (20, 20),
            PresetShape::D100K20 => (100, 20),
            PresetShape::D20K100 => (20, 100),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PresetShape::D20K20 => "d20k20",
            PresetShape::D100K20 => "d100k20",
            PresetShape::D20K100 => "d20k100",
        }
    }
}

impl std::str::FromStr for PresetShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown preset '{s}' (expected d20k20, d100k20 or d20k100)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetDist {
    /// Unit variances, pairwise covariance 0.7.
    Gaussian,
    /// Uniform on the ball of radius `sqrt(d)`.
    UniformBall,
    /// Laplace(0, 1) per coordinate.
    Laplace,
    /// Cauchy(0, 1) per coordinate, truncated to `[-5, 5]`.
    TruncatedCauchy,
    /// Exponential(1) per coordinate.
    Exponential,
}

impl PresetDist {
    pub const ALL: [PresetDist; 5] = [
        PresetDist::Gaussian,
        PresetDist::UniformBall,
        PresetDist::Laplace,
        PresetDist::TruncatedCauchy,
        PresetDist::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetDist::Gaussian => "gaussian",
            PresetDist::UniformBall => "uniform_ball",
            PresetDist::Laplace => "laplace",
            PresetDist::TruncatedCauchy => "truncated_cauchy",
            PresetDist::Exponential => "exponential",
        }
    }

    pub fn spec(self, d: usize) -> DistributionSpec {
        match self {
            PresetDist::Gaussian => DistributionSpec::gaussian(
                0.0,
                Covariance::Equicorrelated {
                    variance: 1.0,
                    rho: 0.7,
                },
            ),
            PresetDist::UniformBall => DistributionSpec::uniform_ball((d as f64).sqrt()),
            PresetDist::Laplace => DistributionSpec::laplace(0.0, 1.0),
            PresetDist::TruncatedCauchy => {
                DistributionSpec::cauchy(0.0, 1.0).truncated(Region::cube(-5.0, 5.0))
            }
            PresetDist::Exponential => DistributionSpec::exponential(1.0),
        }
    }
}

impl std::str::FromStr for PresetDist {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.to_ascii_lowercase().replace('-', "_");
        let alias = match s.as_str() {
            "gauss" | "correlated_gaussian" => "gaussian",
            "unif" | "uniform" => "uniform_ball",
            "cauchy" | "truncated_t" | "student_t" => "truncated_cauchy",
            "exp" => "exponential",
            other => other,
        };
        Self::ALL
            .into_iter()
            .find(|p| p.name() == alias)
            .ok_or_else(|| {
                format!(
                    "unknown distribution '{s}' (expected gaussian, uniform_ball, laplace, truncated_cauchy or exponential)"
                )
            })
    }
}

/// Preset experiment with all three policies.
pub fn preset_config(shape: PresetShape, dist: PresetDist) -> ExperimentConfig {
    let (d, k) = shape.dims();
    let mut cfg = ExperimentConfig::new(d, k, PRESET_HORIZON, dist.spec(d));
    cfg.reps = PRESET_REPS;
    cfg
}

/// Every (shape, distribution) pair.
pub fn all_presets() -> Vec<(PresetShape, PresetDist)> {
    PresetShape::ALL
        .into_iter()
        .flat_map(|s| PresetDist::ALL.into_iter().map(move |d| (s, d)))
        .collect()
}
