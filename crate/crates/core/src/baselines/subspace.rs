use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{
    eigenvalues_general, hermitian_eig, least_squares_matrix, ComplexMatrix,
};
use crate::scene::steering_vector;

#[derive(Debug, Clone, PartialEq)]
pub struct AngleEstimate {
    pub angles: Vec<f64>,
    /// MUSIC: fewer than Q peaks. ESPRIT: a rotation eigenvalue far from
    /// the unit circle.
    pub flagged: bool,
}

/// `(1/N) Σ_n r[n] r[n]ᴴ` over the columns of `r`.
pub fn sample_covariance(r: &ComplexMatrix) -> ComplexMatrix {
    let (m, n) = (r.rows(), r.cols());
    let mut c = ComplexMatrix::zeros(m, m);
    for j in 0..n {
        for a in 0..m {
            let ra = r[(a, j)];
            for b in 0..m {
                c[(a, b)] += ra * r[(b, j)].conj();
            }
        }
    }
    c.scale(1.0 / n.max(1) as f64)
}

/// Uniform grid of `points` angles over `[−limit, limit]`.
pub fn music_grid(points: usize, limit: f64) -> Vec<f64> {
    (0..points)
        .map(|i| -limit + 2.0 * limit * i as f64 / (points - 1) as f64)
        .collect()
}

fn check_order(cov: &ComplexMatrix, q: usize, max: usize) -> Result<()> {
    if q == 0 || q > max {
        return Err(Error::Config(format!(
            "{q} sources cannot be resolved with {} receive elements",
            cov.rows()
        )));
    }
    Ok(())
}

/// Pseudo-spectrum `1/‖E_nᴴ a(θ)‖²` on `grid`.
pub fn music_spectrum(cov: &ComplexMatrix, q: usize, grid: &[f64]) -> Result<Vec<f64>> {
    let n = cov.rows();
    check_order(cov, q, n.saturating_sub(1))?;
    let eig = hermitian_eig(cov)?;
    let noise: Vec<Vec<_>> = (q..n).map(|k| eig.vector(k)).collect();
    Ok(grid
        .iter()
        .map(|&theta| {
            let a = steering_vector(theta, n);
            let p: f64 = noise
                .iter()
                .map(|e| {
                    e.iter()
                        .zip(&a)
                        .map(|(x, y)| x.conj() * y)
                        .sum::<crate::numerics::Complex64>()
                        .norm_sqr()
                })
                .sum();
            1.0 / p.max(f64::MIN_POSITIVE)
        })
        .collect())
}

/// The `q` largest local maxima of the MUSIC spectrum. Missing peaks are
/// filled by repeating the largest one and flagged.
pub fn music_angles(cov: &ComplexMatrix, q: usize, grid: &[f64]) -> Result<AngleEstimate> {
    let p = music_spectrum(cov, q, grid)?;
    let (lo, hi) = p
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    let margin = 1e-12;
    let mut peaks: Vec<usize> = Vec::new();
    if hi > lo * (1.0 + 1e-6) {
        for i in 0..p.len() {
            let left = i == 0 || p[i] > p[i - 1] * (1.0 + margin);
            let right = i + 1 == p.len() || p[i] >= p[i + 1] * (1.0 + margin);
            if left && right {
                peaks.push(i);
            }
        }
    }
    peaks.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    peaks.truncate(q);
    let flagged = peaks.len() < q;
    let top = peaks.first().copied().unwrap_or_else(|| {
        (0..p.len()).fold(0, |best, i| if p[i] > p[best] { i } else { best })
    });
    while peaks.len() < q {
        peaks.push(top);
    }
    Ok(AngleEstimate {
        angles: peaks.iter().map(|&i| grid[i]).collect(),
        flagged,
    })
}

/// Rotational-invariance estimates from the two shifted `(N_r − 1)`-element
/// subarrays of the signal subspace.
pub fn esprit_angles(cov: &ComplexMatrix, q: usize) -> Result<AngleEstimate> {
    let n = cov.rows();
    check_order(cov, q, n.saturating_sub(2))?;
    let eig = hermitian_eig(cov)?;
    let e1 = ComplexMatrix::from_fn(n - 1, q, |i, k| eig.vectors[(i, k)]);
    let e2 = ComplexMatrix::from_fn(n - 1, q, |i, k| eig.vectors[(i + 1, k)]);
    let psi = least_squares_matrix(&e1, &e2)?;
    let phi = eigenvalues_general(&psi)?;
    let mut flagged = false;
    let mut angles: Vec<f64> = phi
        .iter()
        .map(|z| {
            let m = z.norm();
            if !(0.5..=1.5).contains(&m) {
                flagged = true;
            }
            (z.arg() / PI).clamp(-1.0, 1.0).asin()
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(AngleEstimate { angles, flagged })
}
