use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{dot_h, least_squares, ridge_solve, Complex64, ComplexMatrix};
use crate::scene::steering_vector;

#[derive(Debug, Clone, PartialEq)]
pub struct RangeEstimate {
    pub distances: Vec<f64>,
    pub gains: Vec<Complex64>,
    /// The stacked design was rank deficient and a ridge solve was used.
    pub regularized: bool,
}

/// Fits `r[n] ≈ Σ_q β_q a_r(θ_q) a_t(θ_q)ᴴ s[n]` by least squares and maps
/// each gain to a distance assuming unit scattering amplitude,
/// `d = (λ/4π)/√|β|`, clamped to `[d_min, d_max]`.
pub fn ls_range(
    r: &ComplexMatrix,
    transmit: &ComplexMatrix,
    angles: &[f64],
    wavelength: f64,
    d_min: f64,
    d_max: f64,
) -> Result<RangeEstimate> {
    let (n_r, n) = (r.rows(), r.cols());
    if transmit.cols() != n {
        return Err(Error::Dimension(format!(
            "echo has {n} slots, transmit has {}",
            transmit.cols()
        )));
    }
    let n_t = transmit.rows();
    let slots: Vec<_> = (0..n).map(|j| transmit.column(j)).collect();
    let design = ComplexMatrix::from_fn(n_r * n, angles.len(), |row, q| {
        let (i, j) = (row / n, row % n);
        let ar = steering_vector(angles[q], n_r);
        let at = steering_vector(angles[q], n_t);
        ar[i] * dot_h(&at, &slots[j])
    });
    let rhs: Vec<Complex64> = (0..n_r * n).map(|row| r[(row / n, row % n)]).collect();
    let (gains, regularized) = match least_squares(&design, &rhs) {
        Ok(g) => (g, false),
        Err(Error::Singular { .. }) => (ridge_solve(&design, &rhs, 1e-6)?, true),
        Err(e) => return Err(e),
    };
    let distances = gains
        .iter()
        .map(|b| {
            let m = b.norm();
            if m > 0.0 {
                (wavelength / (4.0 * PI) / m.sqrt()).clamp(d_min, d_max)
            } else {
                d_max
            }
        })
        .collect();
    Ok(RangeEstimate {
        distances,
        gains,
        regularized,
    })
}
