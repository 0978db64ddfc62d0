use num_complex::Complex64;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted descending and
/// eigenvectors stored as the matching columns of `vectors`.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        self.vectors.column(k)
    }
}

/// Cyclic complex Jacobi eigensolver.
///
/// Each rotation first removes the phase of the pivot with a diagonal
/// unitary and then applies a real Givens rotation, so the iterate stays
/// Hermitian to rounding.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEig> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition of a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let scale = m.frobenius_norm();
    let defect = m.hermitian_defect();
    if defect > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Contract(format!(
            "matrix is not Hermitian (defect {defect:.3e}, norm {scale:.3e})"
        )));
    }

    let mut a = m.clone();
    // Symmetrize exactly so the diagonal is real.
    for i in 0..n {
        a[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
        for j in i + 1..n {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
    let mut v = ComplexMatrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermitianEig { values, vectors })
}

fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    if mag < 1e-300 || mag <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[(p, q)] = Complex64::new(0.0, 0.0);
        a[(q, p)] = Complex64::new(0.0, 0.0);
        return;
    }
    let phase = apq / mag;
    let theta = (aqq - app) / (2.0 * mag);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // U = diag(1, e^{-i phi}) * [[c, s], [-s, c]] on the (p, q) plane.
    let upp = Complex64::new(c, 0.0);
    let upq = Complex64::new(s, 0.0);
    let uqp = -phase.conj() * s;
    let uqq = phase.conj() * c;

    let n = a.rows();
    // A <- A U
    for i in 0..n {
        let aip = a[(i, p)];
        let aiq = a[(i, q)];
        a[(i, p)] = aip * upp + aiq * uqp;
        a[(i, q)] = aip * upq + aiq * uqq;
    }
    // A <- U^H A
    for j in 0..n {
        let apj = a[(p, j)];
        let aqj = a[(q, j)];
        a[(p, j)] = upp.conj() * apj + uqp.conj() * aqj;
        a[(q, j)] = upq.conj() * apj + uqq.conj() * aqj;
    }
    a[(p, q)] = Complex64::new(0.0, 0.0);
    a[(q, p)] = Complex64::new(0.0, 0.0);
    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
    // V <- V U
    for i in 0..n {
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip * upp + viq * uqp;
        v[(i, q)] = vip * upq + viq * uqq;
    }
}

/// Eigenvalues of a small general complex matrix by shifted QR iteration
/// with deflation. Intended for the Q×Q rotation operator in ESPRIT.
pub fn eigenvalues_general(m: &ComplexMatrix) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigenvalues of a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let mut a = m.clone();
    let mut n = a.rows();
    let mut out = Vec::with_capacity(n);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    let mut iters = 0usize;
    while n > 0 {
        if n == 1 {
            out.push(a[(0, 0)]);
            break;
        }
        let tail: f64 = (0..n - 1).map(|j| a[(n - 1, j)].norm()).sum();
        if tail <= 1e-14 * scale {
            out.push(a[(n - 1, n - 1)]);
            n -= 1;
            iters = 0;
            continue;
        }
        iters += 1;
        if iters > 10_000 {
            return Err(Error::Numerical("QR iteration did not converge".into()));
        }
        // Wilkinson shift from the trailing 2x2 block; exceptional shift
        // every 11 iterations to break cycles.
        let (a11, a12, a21, a22) = (
            a[(n - 2, n - 2)],
            a[(n - 2, n - 1)],
            a[(n - 1, n - 2)],
            a[(n - 1, n - 1)],
        );
        let tr = a11 + a22;
        let det = a11 * a22 - a12 * a21;
        let disc = (tr * tr * 0.25 - det).sqrt();
        let l1 = tr * 0.5 + disc;
        let l2 = tr * 0.5 - disc;
        let mut mu = if (l1 - a22).norm() < (l2 - a22).norm() { l1 } else { l2 };
        if iters.is_multiple_of(11) {
            mu += Complex64::new(tail, 0.0);
        }
        qr_step(&mut a, n, mu);
    }
    Ok(out)
}

/// One shifted QR step `A - mu I = QR; A <- RQ + mu I` on the leading n×n block.
fn qr_step(a: &mut ComplexMatrix, n: usize, mu: Complex64) {
    for i in 0..n {
        a[(i, i)] -= mu;
    }
    // Householder QR in place, keeping reflectors to apply from the right.
    let mut reflectors: Vec<(usize, Vec<Complex64>)> = Vec::with_capacity(n);
    for k in 0..n - 1 {
        let x: Vec<Complex64> = (k..n).map(|i| a[(i, k)]).collect();
        let Some(v) = householder_vector(&x) else {
            continue;
        };
        // A[k.., k..n] <- (I - 2 v vᴴ) A
        for j in 0..n {
            let dot: Complex64 = (k..n).map(|i| v[i - k].conj() * a[(i, j)]).sum();
            for i in k..n {
                a[(i, j)] -= v[i - k] * dot * 2.0;
            }
        }
        reflectors.push((k, v));
    }
    // A <- R Q where Q = H_0 H_1 ... ; right-multiply by each H_k.
    for (k, v) in &reflectors {
        for i in 0..n {
            let dot: Complex64 = (*k..n).map(|j| a[(i, j)] * v[j - k]).sum();
            for j in *k..n {
                a[(i, j)] -= dot * v[j - k].conj() * 2.0;
            }
        }
    }
    for i in 0..n {
        a[(i, i)] += mu;
    }
}

/// Unit Householder vector `v` such that `(I - 2vvᴴ) x = α e₁`.
pub(crate) fn householder_vector(x: &[Complex64]) -> Option<Vec<Complex64>> {
    let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return None;
    }
    let phase = if x[0].norm() > 0.0 {
        x[0] / x[0].norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let mut v = x.to_vec();
    v[0] += phase * norm;
    let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if vnorm == 0.0 {
        return None;
    }
    for z in &mut v {
        *z /= vnorm;
    }
    Some(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{c64, RngStream};

    fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
        let g = RngStream::new(seed, "herm").gaussian(2 * n * n);
        let b = ComplexMatrix::from_fn(n, n, |i, j| c64(g[2 * (i * n + j)], g[2 * (i * n + j) + 1]));
        b.add(&b.adjoint()).unwrap()
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let e = hermitian_eig(&ComplexMatrix::identity(4)).unwrap();
        assert_eq!(e.values, vec![1.0; 4]);
    }

    #[test]
    fn diagonal_is_sorted_with_permuted_basis() {
        let m = ComplexMatrix::diag_real(&[3.0, 1.0, 2.0]);
        let e = hermitian_eig(&m).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);
        let expect = [0usize, 2, 1];
        for (k, &row) in expect.iter().enumerate() {
            assert!((e.vectors[(row, k)].norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn reconstruction_of_random_hermitian() {
        for (n, seed) in [(8, 1u64), (16, 2), (33, 3), (64, 4)] {
            let m = random_hermitian(n, seed);
            let e = hermitian_eig(&m).unwrap();
            let recon = e
                .vectors
                .matmul(&ComplexMatrix::diag_real(&e.values))
                .unwrap()
                .matmul(&e.vectors.adjoint())
                .unwrap();
            let err = recon.sub(&m).unwrap().frobenius_norm();
            assert!(err <= 1e-8 * m.frobenius_norm(), "n={n} err={err}");
            // Mv = λv
            for k in 0..n {
                let v = e.vector(k);
                let mv = m.matvec(&v).unwrap();
                let r: f64 = mv
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| (a - b * e.values[k]).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(r <= 1e-8 * m.frobenius_norm());
            }
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
            // Orthonormal columns.
            let g = e.vectors.adjoint().matmul(&e.vectors).unwrap();
            let dev = g.sub(&ComplexMatrix::identity(n)).unwrap().frobenius_norm();
            assert!(dev < 1e-10);
        }
    }

    #[test]
    fn rejects_non_square_and_non_hermitian() {
        assert!(matches!(
            hermitian_eig(&ComplexMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
        let mut m = ComplexMatrix::identity(3);
        m[(0, 1)] = c64(0.5, 0.0);
        assert!(matches!(hermitian_eig(&m), Err(Error::Contract(_))));
    }

    #[test]
    fn general_eigenvalues_of_triangular_and_rotation() {
        let mut m = ComplexMatrix::zeros(3, 3);
        m[(0, 0)] = c64(1.0, 1.0);
        m[(1, 1)] = c64(-2.0, 0.0);
        m[(2, 2)] = c64(0.0, 3.0);
        m[(0, 2)] = c64(5.0, 0.0);
        let mut ev = eigenvalues_general(&m).unwrap();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re));
        assert!((ev[0] - c64(-2.0, 0.0)).norm() < 1e-12);
        assert!((ev[1] - c64(0.0, 3.0)).norm() < 1e-12);
        assert!((ev[2] - c64(1.0, 1.0)).norm() < 1e-12);

        // Similarity transform of a known diagonal.
        let d = [c64(0.6, 0.8), c64(-1.0, 0.0), c64(0.0, -1.0), c64(0.8, -0.6)];
        let n = d.len();
        let g = RngStream::new(9, "sim").gaussian(2 * n * n);
        let p = ComplexMatrix::from_fn(n, n, |i, j| c64(g[2 * (i * n + j)], g[2 * (i * n + j) + 1]));
        let pinv = crate::numerics::least_squares_matrix(&p, &ComplexMatrix::identity(n)).unwrap();
        let dm = ComplexMatrix::from_fn(n, n, |i, j| if i == j { d[i] } else { c64(0.0, 0.0) });
        let a = p.matmul(&dm).unwrap().matmul(&pinv).unwrap();
        let ev = eigenvalues_general(&a).unwrap();
        for want in d {
            assert!(ev.iter().any(|z| (z - want).norm() < 1e-8), "{want} not in {ev:?}");
        }
    }
}
