//! Dense linear algebra helpers and scalar normal-distribution functions.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{MvmnpError, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal log-density.
#[inline]
pub fn norm_ln_pdf(x: f64) -> f64 {
    -0.5 * (LN_2PI + x * x)
}

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal quantile.
///
/// The `erfc_inv` starting value is only good to about 1e-10, so it is
/// polished with one Halley step on the lower-tail probability.
pub fn norm_quantile(p: f64) -> f64 {
    if p > 0.5 {
        return -norm_quantile(1.0 - p);
    }
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    let dens = norm_pdf(x);
    if dens <= f64::MIN_POSITIVE {
        return x;
    }
    let e = (norm_cdf(x) - p) / dens;
    x - e / (1.0 + 0.5 * x * e)
}

/// Unpolished standard normal quantile, relative accuracy about 1e-10.
/// Cheap enough for the inner loop of inversion samplers.
#[inline]
pub fn norm_quantile_fast(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Cholesky factor of a symmetric positive definite matrix.
///
/// Factorization is retried with a diagonal jitter of 1e-10, escalated by
/// factors of ten up to 1e-6, before the matrix is declared non-PD.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl SpdFactor {
    pub fn new(matrix: &DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(MvmnpError::Shape(format!(
                "expected a square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(MvmnpError::Numerical("matrix has non-finite entries".into()));
        }
        if let Some(chol) = Cholesky::new(matrix.clone()) {
            return Ok(Self { chol, jitter: 0.0 });
        }
        let mut jitter = 1e-10;
        while jitter <= 1e-6 * (1.0 + 1e-9) {
            let mut shifted = matrix.clone();
            for i in 0..shifted.nrows() {
                shifted[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(shifted) {
                return Ok(Self { chol, jitter });
            }
            jitter *= 10.0;
        }
        let diag = matrix.diagonal();
        Err(MvmnpError::NotPositiveDefinite {
            jitter: jitter / 10.0,
            min_diag: diag.min(),
            max_diag: diag.max(),
        })
    }

    /// Jitter that had to be added for the factorization to succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Lower-triangular factor `L` with `A = L Lᵀ`.
    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let inv = self.chol.inverse();
        // the solve-based inverse is only symmetric up to rounding
        (&inv + inv.transpose()) * 0.5
    }

    /// Returns `‖L⁻¹ x‖²`, i.e. `xᵀ A⁻¹ x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        let mut y = x.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut y);
        y.norm_squared()
    }
}

/// Multivariate normal log-density `log φ(z; mean, sigma)`.
pub fn log_mvn_density(z: &DVector<f64>, mean: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    if z.len() != mean.len() || z.len() != sigma.nrows() {
        return Err(MvmnpError::Shape(format!(
            "log density: z has {} entries, mean {}, sigma {}x{}",
            z.len(),
            mean.len(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let factor = SpdFactor::new(sigma)?;
    Ok(log_mvn_density_factored(z, mean, &factor))
}

pub fn log_mvn_density_factored(z: &DVector<f64>, mean: &DVector<f64>, factor: &SpdFactor) -> f64 {
    let diff = z - mean;
    -0.5 * (z.len() as f64 * LN_2PI + factor.log_det() + factor.quad_form(&diff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn univariate_standard_density_at_zero() {
        let z = DVector::from_element(1, 0.0);
        let v = log_mvn_density(&z, &z, &DMatrix::identity(1, 1)).unwrap();
        assert_relative_eq!(v, -0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-15);
    }

    #[test]
    fn bivariate_identity_at_mean() {
        let z = DVector::from_vec(vec![0.3, -1.2]);
        let v = log_mvn_density(&z, &z, &DMatrix::identity(2, 2)).unwrap();
        assert_relative_eq!(v, -(2.0 * std::f64::consts::PI).ln(), epsilon = 1e-14);
    }

    #[test]
    fn matches_textbook_formula() {
        let sigma = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.4, 0.3, 1.5, 0.2, -0.4, 0.2, 1.1]);
        let z = DVector::from_vec(vec![0.5, -0.7, 1.3]);
        let mean = DVector::from_vec(vec![0.1, 0.2, -0.3]);
        // textbook: explicit inverse and determinant by cofactor expansion
        let det: f64 = sigma[(0, 0)] * (sigma[(1, 1)] * sigma[(2, 2)] - sigma[(1, 2)] * sigma[(2, 1)])
            - sigma[(0, 1)] * (sigma[(1, 0)] * sigma[(2, 2)] - sigma[(1, 2)] * sigma[(2, 0)])
            + sigma[(0, 2)] * (sigma[(1, 0)] * sigma[(2, 1)] - sigma[(1, 1)] * sigma[(2, 0)]);
        let inv = sigma.clone().try_inverse().unwrap();
        let d = &z - &mean;
        let expected = -1.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * (d.transpose() * inv * &d)[(0, 0)];
        let got = log_mvn_density(&z, &mean, &sigma).unwrap();
        assert_relative_eq!(got, expected, epsilon = 1e-12);
    }

    #[test]
    fn non_pd_matrix_is_rejected() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = SpdFactor::new(&sigma).unwrap_err();
        assert!(matches!(err, MvmnpError::NotPositiveDefinite { .. }));
    }

    #[test]
    fn borderline_singular_matrix_gets_jitter() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = SpdFactor::new(&sigma).unwrap();
        assert!(f.jitter() > 0.0 && f.jitter() <= 1e-6);
    }

    #[test]
    fn normal_quantile_inverts_cdf() {
        for &x in &[-7.5, -3.0, -0.4, 0.0, 0.9, 2.5] {
            assert_relative_eq!(norm_quantile(norm_cdf(x)), x, epsilon = 1e-13, max_relative = 1e-13);
        }
    }
}
