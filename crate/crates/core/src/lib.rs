//! Simulation lab for exploration-free linear contextual bandits.
//!
//! - [`contexts`]: LAC-family context distributions, truncation, and
//!   numerical LAC / decay-rate certificates.
//! - [`estimator`]: adaptive OLS state (Gram matrix, moments, estimate).
//! - [`policies`]: LinGreedy, LinUCB and LinTS arm selection.
//! - [`env`]: ground-truth instances, rewards, regret and episodes.
//! - [`diagnostics`]: Monte-Carlo estimates of the diversity constant,
//!   margin constant and concentration parameters, plus consistency and
//!   Gram-growth checks on trajectories.
//! - [`harness`]: seeded multi-replication experiments with CSV/SVG output.

pub mod contexts;
pub mod diagnostics;
pub mod env;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod policies;
pub mod seed;

pub use error::{BanditError, Result};
