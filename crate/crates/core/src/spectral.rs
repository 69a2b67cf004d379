use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::params::Matrix;
use crate::scalar::Real;

/// Largest eigenvalue modulus of a square matrix. The system is stationary
/// iff this is `< 1`.
pub fn spectral_radius<T: Real>(m: &Matrix<T>) -> Result<T> {
    let n = m.dim();
    if n == 0 {
        return Ok(T::zero());
    }
    if m.entries().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "branching matrix has non-finite entries".into(),
        ));
    }
    let dense = DMatrix::from_fn(n, n, |i, j| m.get(i, j).as_f64());
    let radius = dense
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    Ok(T::lit(radius))
}

pub fn is_stationary<T: Real>(m: &Matrix<T>) -> Result<bool> {
    Ok(spectral_radius(m)? < T::one())
}
