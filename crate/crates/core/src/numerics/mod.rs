//! Shared numeric kernels: complex dense matrices, Hermitian eigensolver,
//! QR least squares and labeled reproducible random streams.

mod eig;
mod lstsq;
mod matrix;
mod rng;

pub use eig::{eigenvalues_general, hermitian_eig, HermitianEig};
pub use lstsq::{least_squares, least_squares_matrix, ridge_solve};
pub use matrix::{ComplexMatrix, ComplexVector};
pub use num_complex::Complex64;
pub use rng::{normal, RngStream};

/// Shorthand constructor.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `10^(dbm/10)` milliwatts expressed in watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1e3).log10()
}

/// Inner product `aᴴ b`.
pub fn dot_h(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
