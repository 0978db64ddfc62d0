use num_complex::Complex64;

use super::eig::householder_vector;
use super::matrix::{ComplexMatrix, ComplexVector};
use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-10;

/// Minimizes `‖Ax − b‖₂` by Householder QR.
///
/// Fails with [`Error::Singular`] when `A` is column-rank deficient; the
/// error carries the number of diagonal entries of `R` above
/// `1e-10 · max|R_kk|`.
pub fn least_squares(a: &ComplexMatrix, b: &[Complex64]) -> Result<ComplexVector> {
    if b.len() != a.rows() {
        return Err(Error::Dimension(format!(
            "A is {}x{} but b has {} entries",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    let rhs = ComplexMatrix::from_vec(b.len(), 1, b.to_vec())?;
    Ok(least_squares_matrix(a, &rhs)?.column(0))
}

/// Column-wise least squares for a matrix right-hand side.
pub fn least_squares_matrix(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (m, n) = (a.rows(), a.cols());
    if m < n {
        return Err(Error::Dimension(format!("underdetermined {m}x{n} system")));
    }
    if b.rows() != m {
        return Err(Error::Dimension(format!(
            "A has {m} rows but B has {}",
            b.rows()
        )));
    }
    let mut r = a.clone();
    let mut qb = b.clone();
    let k_rhs = b.cols();
    for k in 0..n {
        let x: Vec<Complex64> = (k..m).map(|i| r[(i, k)]).collect();
        let Some(v) = householder_vector(&x) else {
            continue;
        };
        for j in k..n {
            let dot: Complex64 = (k..m).map(|i| v[i - k].conj() * r[(i, j)]).sum();
            for i in k..m {
                r[(i, j)] -= v[i - k] * dot * 2.0;
            }
        }
        for j in 0..k_rhs {
            let dot: Complex64 = (k..m).map(|i| v[i - k].conj() * qb[(i, j)]).sum();
            for i in k..m {
                qb[(i, j)] -= v[i - k] * dot * 2.0;
            }
        }
    }
    let rmax = (0..n).map(|k| r[(k, k)].norm()).fold(0.0, f64::max);
    let rank = (0..n).filter(|&k| r[(k, k)].norm() > RANK_TOL * rmax).count();
    if rank < n || rmax == 0.0 {
        return Err(Error::Singular { rank, cols: n });
    }
    let mut x = ComplexMatrix::zeros(n, k_rhs);
    for j in 0..k_rhs {
        for i in (0..n).rev() {
            let mut s = qb[(i, j)];
            for l in i + 1..n {
                s -= r[(i, l)] * x[(l, j)];
            }
            x[(i, j)] = s / r[(i, i)];
        }
    }
    Ok(x)
}

/// Ridge-regularized normal equations `(AᴴA + λ·s·I) x = Aᴴb`, with `s` the
/// largest diagonal of `AᴴA`. Used when the design is near rank deficient.
pub fn ridge_solve(a: &ComplexMatrix, b: &[Complex64], lambda: f64) -> Result<ComplexVector> {
    let ah = a.adjoint();
    let mut g = ah.matmul(a)?;
    let n = g.rows();
    let s = (0..n).map(|i| g[(i, i)].re).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for i in 0..n {
        g[(i, i)] += Complex64::new(lambda * s, 0.0);
    }
    let rhs = ah.matvec(b)?;
    least_squares(&g, &rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c64, RngStream};

    fn random(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        let g = RngStream::new(seed, "lstsq").gaussian(2 * rows * cols);
        ComplexMatrix::from_fn(rows, cols, |i, j| {
            c64(g[2 * (i * cols + j)], g[2 * (i * cols + j) + 1])
        })
    }

    /// Normal equations solved by Gaussian elimination with partial pivoting;
    /// shares nothing with the QR path.
    fn normal_equations_oracle(a: &ComplexMatrix, b: &[Complex64]) -> Vec<Complex64> {
        let ah = a.adjoint();
        let g = ah.matmul(a).unwrap();
        let mut rhs = ah.matvec(b).unwrap();
        let n = g.rows();
        let mut m: Vec<Vec<Complex64>> = (0..n).map(|i| g.row(i).to_vec()).collect();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| m[i][k].norm().total_cmp(&m[j][k].norm())).unwrap();
            m.swap(k, p);
            rhs.swap(k, p);
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    let t = m[k][j];
                    m[i][j] -= f * t;
                }
                let t = rhs[k];
                rhs[i] -= f * t;
            }
        }
        let mut x = vec![c64(0.0, 0.0); n];
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for j in i + 1..n {
                s -= m[i][j] * x[j];
            }
            x[i] = s / m[i][i];
        }
        x
    }

    #[test]
    fn identity_returns_rhs() {
        let b: Vec<_> = (0..5).map(|i| c64(i as f64, -(i as f64))).collect();
        let x = least_squares(&ComplexMatrix::identity(5), &b).unwrap();
        for (u, v) in x.iter().zip(&b) {
            assert!((u - v).norm() < 1e-14);
        }
    }

    #[test]
    fn consistent_overdetermined_system_is_exact() {
        let a = random(12, 3, 5);
        let x0 = vec![c64(1.0, 2.0), c64(-0.5, 0.0), c64(0.0, 3.0)];
        let b = a.matvec(&x0).unwrap();
        let x = least_squares(&a, &b).unwrap();
        let resid = a.matvec(&x).unwrap();
        let r: f64 = resid.iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        assert!(r < 1e-12);
    }

    #[test]
    fn matches_normal_equation_oracle() {
        let a = random(16, 4, 7);
        let b = RngStream::new(8, "rhs").gaussian(32);
        let b: Vec<_> = b.chunks(2).map(|c| c64(c[0], c[1])).collect();
        let x = least_squares(&a, &b).unwrap();
        let oracle = normal_equations_oracle(&a, &b);
        for (u, v) in x.iter().zip(&oracle) {
            assert!((u - v).norm() < 1e-7 * v.norm().max(1.0));
        }
        // Residual orthogonal to the column space.
        let ax = a.matvec(&x).unwrap();
        let r: Vec<_> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let proj = a.adjoint().matvec(&r).unwrap();
        assert!(proj.iter().all(|z| z.norm() < 1e-8));
    }

    #[test]
    fn rank_deficient_reports_rank() {
        let mut a = random(6, 3, 11);
        for i in 0..6 {
            a[(i, 2)] = a[(i, 0)] * 2.0;
        }
        let b = vec![c64(1.0, 0.0); 6];
        match least_squares(&a, &b) {
            Err(Error::Singular { rank, cols }) => {
                assert_eq!(rank, 2);
                assert_eq!(cols, 3);
            }
            other => panic!("expected singular error, got {other:?}"),
        }
        assert!(ridge_solve(&a, &b, 1e-6).is_ok());
    }
}
