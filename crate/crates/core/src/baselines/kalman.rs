use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type M4 = [[f64; 4]; 4];

/// White-acceleration spectral densities for the angle and range axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessNoise {
    pub angle: f64,
    pub range: f64,
}

/// Constant-velocity track on `(θ, θ̇, d, ḋ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KalmanTrack {
    pub x: [f64; 4],
    pub p: M4,
    pub dt: f64,
    pub noise: ProcessNoise,
    /// Measurement variance on both observed components.
    pub r: f64,
}

fn transition(dt: f64) -> M4 {
    [
        [1.0, dt, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, dt],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

fn mul(a: &M4, b: &M4) -> M4 {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn transpose(a: &M4) -> M4 {
    let mut t = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            t[i][j] = a[j][i];
        }
    }
    t
}

fn symmetrize(p: &mut M4) {
    for i in 0..4 {
        for j in i + 1..4 {
            let m = 0.5 * (p[i][j] + p[j][i]);
            p[i][j] = m;
            p[j][i] = m;
        }
    }
}

/// Cholesky test with a small relative slack.
fn is_psd(p: &M4) -> bool {
    let scale = (0..4).map(|i| p[i][i].abs()).fold(0.0, f64::max).max(1e-300);
    let mut l = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = p[i][i] - s + 1e-12 * scale;
                if !(d >= 0.0) {
                    return false;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = if l[j][j] > 0.0 { (p[i][j] - s) / l[j][j] } else { 0.0 };
            }
        }
    }
    true
}

impl KalmanTrack {
    pub fn new(theta: f64, d: f64, dt: f64, noise: ProcessNoise, r: f64) -> Self {
        let mut p = [[0.0; 4]; 4];
        p[0][0] = r;
        p[1][1] = 1.0;
        p[2][2] = r;
        p[3][3] = 100.0;
        Self {
            x: [theta, 0.0, d, 0.0],
            p,
            dt,
            noise,
            r,
        }
    }

    fn process_cov(&self) -> M4 {
        let t = self.dt;
        let (a, b, c) = (t.powi(3) / 3.0, t.powi(2) / 2.0, t);
        let (qa, qr) = (self.noise.angle, self.noise.range);
        [
            [qa * a, qa * b, 0.0, 0.0],
            [qa * b, qa * c, 0.0, 0.0],
            [0.0, 0.0, qr * a, qr * b],
            [0.0, 0.0, qr * b, qr * c],
        ]
    }

    pub fn predict(&mut self) {
        let f = transition(self.dt);
        let x = self.x;
        self.x = [x[0] + self.dt * x[1], x[1], x[2] + self.dt * x[3], x[3]];
        let mut p = mul(&mul(&f, &self.p), &transpose(&f));
        let q = self.process_cov();
        for i in 0..4 {
            for j in 0..4 {
                p[i][j] += q[i][j];
            }
        }
        symmetrize(&mut p);
        self.p = p;
    }

    /// Innovation `(ν, S)` for measurement `(θ, d)` at the current state.
    fn innovation(&self, theta: f64, d: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let nu = [theta - self.x[0], d - self.x[2]];
        let s = [
            [self.p[0][0] + self.r, self.p[0][2]],
            [self.p[2][0], self.p[2][2] + self.r],
        ];
        (nu, s)
    }

    /// Gaussian log-likelihood of the measurement under the prediction.
    pub fn log_likelihood(&self, theta: f64, d: f64) -> f64 {
        let (nu, s) = self.innovation(theta, d);
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        let quad = (s[1][1] * nu[0] * nu[0] - 2.0 * s[0][1] * nu[0] * nu[1] + s[0][0] * nu[1] * nu[1]) / det;
        -0.5 * (quad + det.ln() + 2.0 * (2.0 * PI).ln())
    }

    /// Joseph-form update with `H` selecting `θ` and `d`.
    pub fn update(&mut self, theta: f64, d: f64) -> Result<()> {
        let (nu, s) = self.innovation(theta, d);
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        if !(det > 0.0) {
            return Err(Error::Numerical(format!("innovation covariance determinant {det}")));
        }
        let si = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
        // K = P Hᵀ S⁻¹, 4×2.
        let mut k = [[0.0; 2]; 4];
        for i in 0..4 {
            let ph = [self.p[i][0], self.p[i][2]];
            k[i][0] = ph[0] * si[0][0] + ph[1] * si[1][0];
            k[i][1] = ph[0] * si[0][1] + ph[1] * si[1][1];
        }
        for i in 0..4 {
            self.x[i] += k[i][0] * nu[0] + k[i][1] * nu[1];
        }
        let mut ikh = [[0.0; 4]; 4];
        for i in 0..4 {
            ikh[i][i] = 1.0;
            ikh[i][0] -= k[i][0];
            ikh[i][2] -= k[i][1];
        }
        let mut p = mul(&mul(&ikh, &self.p), &transpose(&ikh));
        for i in 0..4 {
            for j in 0..4 {
                p[i][j] += self.r * (k[i][0] * k[j][0] + k[i][1] * k[j][1]);
            }
        }
        symmetrize(&mut p);
        if !is_psd(&p) {
            return Err(Error::Numerical("Kalman covariance lost positive semidefiniteness".into()));
        }
        self.p = p;
        Ok(())
    }

    pub fn angle(&self) -> f64 {
        self.x[0]
    }

    pub fn range(&self) -> f64 {
        self.x[2]
    }

    pub fn covariance_is_psd(&self) -> bool {
        (0..4).all(|i| (0..4).all(|j| self.p[i][j] == self.p[j][i])) && is_psd(&self.p)
    }
}

/// Picks the grid pair maximizing the summed one-step predictive
/// log-likelihood over recorded `(θ, d)` sequences, one per target.
pub fn tune_process_noise(
    tracks: &[Vec<(f64, f64)>],
    dt: f64,
    r: f64,
    angle_grid: &[f64],
    range_grid: &[f64],
) -> Result<ProcessNoise> {
    let mut best: Option<(f64, ProcessNoise)> = None;
    for &qa in angle_grid {
        for &qr in range_grid {
            let noise = ProcessNoise { angle: qa, range: qr };
            let mut ll = 0.0;
            for seq in tracks {
                let Some(&(t0, d0)) = seq.first() else { continue };
                let mut kf = KalmanTrack::new(t0, d0, dt, noise, r);
                for &(t, d) in &seq[1..] {
                    kf.predict();
                    ll += kf.log_likelihood(t, d);
                    kf.update(t, d)?;
                }
            }
            if best.as_ref().is_none_or(|(b, _)| ll > *b) {
                best = Some((ll, noise));
            }
        }
    }
    best.map(|(_, n)| n)
        .ok_or_else(|| Error::Config("empty process-noise grid".into()))
}
