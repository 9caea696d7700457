//! Adaptive OLS state: Gram matrix, moment vector and estimate.
//!
//! The estimate is recomputed from a Cholesky factorization each round and
//! that result is authoritative. A Sherman-Morrison inverse is carried
//! alongside so the two paths can be compared.

use nalgebra::{DMatrix, DVector};

use crate::error::{BanditError, Result};

/// The Gram matrix counts as invertible once its smallest eigenvalue exceeds this.
pub const INVERTIBILITY_THRESHOLD: f64 = 1e-9;

const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct GramState {
    sigma: DMatrix<f64>,
    b: DVector<f64>,
    theta_hat: Option<DVector<f64>>,
    t: usize,
    invertible_since: Option<usize>,
    min_eig: f64,
    inverse: Option<DMatrix<f64>>,
}

impl GramState {
    /// Zero Gram matrix and moment vector, no estimate.
    pub fn new(d: usize) -> Self {
        assert!(d >= 1, "dimension must be at least 1");
        Self {
            sigma: DMatrix::zeros(d, d),
            b: DVector::zeros(d),
            theta_hat: None,
            t: 0,
            invertible_since: None,
            min_eig: 0.0,
            inverse: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn rounds(&self) -> usize {
        self.t
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn moments(&self) -> &DVector<f64> {
        &self.b
    }

    /// OLS estimate, once the Gram matrix is invertible.
    pub fn theta_hat(&self) -> Option<&DVector<f64>> {
        self.theta_hat.as_ref()
    }

    pub fn invertible_since(&self) -> Option<usize> {
        self.invertible_since
    }

    pub fn is_identified(&self) -> bool {
        self.invertible_since.is_some()
    }

    /// Smallest eigenvalue of the current Gram matrix.
    pub fn min_eig(&self) -> f64 {
        self.min_eig
    }

    /// Estimate from the incrementally maintained inverse.
    pub fn incremental_theta(&self) -> Option<DVector<f64>> {
        self.inverse.as_ref().map(|inv| inv * &self.b)
    }

    /// Adds the observation `(x, y)`: `Sigma += x x^T`, `b += y x`.
    pub fn update(&mut self, x: &DVector<f64>, y: f64) -> Result<()> {
        if x.len() != self.dim() {
            return Err(BanditError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(BanditError::NonFinite("estimator update"));
        }
        self.sigma.ger(1.0, x, x, 1.0);
        self.b.axpy(y, x, 1.0);
        self.t += 1;
        self.min_eig = min_eigenvalue(&self.sigma)?;

        if let Some(inv) = self.inverse.as_mut() {
            let u = &*inv * x;
            let denom = 1.0 + x.dot(&u);
            inv.ger(-1.0 / denom, &u, &u, 1.0);
        }
        if self.min_eig > INVERTIBILITY_THRESHOLD {
            let chol = self
                .sigma
                .clone()
                .cholesky()
                .ok_or(BanditError::NotIdentified(self.min_eig))?;
            self.theta_hat = Some(chol.solve(&self.b));
            if self.invertible_since.is_none() {
                self.invertible_since = Some(self.t);
                self.inverse = Some(chol.inverse());
            }
        }
        Ok(())
    }

    /// Fresh solve of `Sigma theta = b` through a Cholesky factorization.
    pub fn solve(&self) -> Result<DVector<f64>> {
        solve_spd(&self.sigma, &self.b)
    }
}

/// Solves `m theta = b` for symmetric positive definite `m` without forming an inverse.
pub fn solve_spd(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lmin = min_eigenvalue(m)?;
    if lmin <= INVERTIBILITY_THRESHOLD {
        return Err(BanditError::NotIdentified(lmin));
    }
    m.clone()
        .cholesky()
        .map(|c| c.solve(b))
        .ok_or(BanditError::NotIdentified(lmin))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(BanditError::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * m.amax().max(1.0) {
        return Err(BanditError::Asymmetric(asym));
    }
    Ok(m.symmetric_eigenvalues().min())
}

/// `sqrt(v^T m v)`, clamped at zero for round-off on PSD `m`.
pub fn weighted_norm(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v)).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn vec(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn init_is_zero() {
        let s = GramState::new(3);
        assert_eq!(s.sigma(), &DMatrix::zeros(3, 3));
        assert_eq!(s.moments(), &DVector::zeros(3));
        assert!(s.theta_hat().is_none());
        assert_eq!(s.rounds(), 0);
        assert_eq!(GramState::new(1).min_eig(), 0.0);
    }

    #[test]
    fn single_axis_update_stays_singular() {
        let mut s = GramState::new(3);
        s.update(&vec(&[1.0, 0.0, 0.0]), 1.0).unwrap();
        assert_eq!(s.sigma()[(0, 0)], 1.0);
        assert!(s.theta_hat().is_none());
        assert!(matches!(s.solve(), Err(BanditError::NotIdentified(_))));
    }

    #[test]
    fn exact_ols_small_cases() {
        let mut s = GramState::new(1);
        s.update(&vec(&[3.0]), 6.0).unwrap();
        assert!((s.theta_hat().unwrap()[0] - 2.0).abs() < 1e-15);

        let mut s = GramState::new(2);
        s.update(&vec(&[1.0, 0.0]), 1.0).unwrap();
        s.update(&vec(&[0.0, 1.0]), -1.0).unwrap();
        assert_eq!(s.theta_hat().unwrap(), &vec(&[1.0, -1.0]));
        assert_eq!(s.invertible_since(), Some(2));
    }

    #[test]
    fn rejects_non_finite() {
        let mut s = GramState::new(2);
        assert!(s.update(&vec(&[f64::NAN, 0.0]), 1.0).is_err());
        assert!(s.update(&vec(&[1.0, 0.0]), f64::INFINITY).is_err());
        assert_eq!(s.rounds(), 0);
    }

    #[test]
    fn incremental_matches_direct_solve() {
        let mut rng = rng_from_seed(11);
        let mut s = GramState::new(4);
        for _ in 0..50 {
            let x = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y: f64 = rng.sample(StandardNormal);
            s.update(&x, y).unwrap();
        }
        let direct = s.solve().unwrap();
        let inc = s.incremental_theta().unwrap();
        assert!((direct - inc).amax() < 1e-8);
    }

    #[test]
    fn solve_small_systems() {
        let id = DMatrix::identity(2, 2);
        assert_eq!(
            solve_spd(&id, &vec(&[2.0, -1.0])).unwrap(),
            vec(&[2.0, -1.0])
        );
        let m = DMatrix::from_diagonal(&vec(&[2.0, 4.0]));
        let th = solve_spd(&m, &vec(&[2.0, 4.0])).unwrap();
        assert!((th - vec(&[1.0, 1.0])).amax() < 1e-15);
    }

    #[test]
    fn min_eigenvalue_basics() {
        assert!((min_eigenvalue(&DMatrix::identity(4, 4)).unwrap() - 1.0).abs() < 1e-14);
        let m = DMatrix::from_diagonal(&vec(&[2.0, 5.0]));
        assert!((min_eigenvalue(&m).unwrap() - 2.0).abs() < 1e-14);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            min_eigenvalue(&asym),
            Err(BanditError::Asymmetric(_))
        ));
    }

    #[test]
    fn weighted_norm_basics() {
        assert_eq!(
            weighted_norm(&DMatrix::identity(2, 2), &vec(&[3.0, 4.0])),
            5.0
        );
        assert_eq!(
            weighted_norm(&DMatrix::identity(2, 2), &vec(&[0.0, 0.0])),
            0.0
        );
    }
}
