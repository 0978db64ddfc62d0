//! Echo compression: RMS normalization, the scalar energy feature and a
//! Gaussian VAE trained on the ELBO. Only the encoder mean feeds the tracker.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamConfig, Grads, LayerSpec, Mat, ParamStore, Sequential};
use crate::numerics::{ComplexMatrix, RngStream};

/// Floor returned by [`echo_energy`] for an all-zero block.
pub const ENERGY_FLOOR_DB: f64 = -300.0;
const LOGVAR_LIMIT: f64 = 8.0;

/// Flattens an `N_r × N` echo into the real two-channel layout
/// `[Re(R) row-major, Im(R) row-major]`.
pub fn echo_to_tensor(r: &ComplexMatrix) -> Vec<f64> {
    let data = r.as_slice();
    let mut out = Vec::with_capacity(2 * data.len());
    out.extend(data.iter().map(|c| c.re));
    out.extend(data.iter().map(|c| c.im));
    out
}

/// Scales `v` to Frobenius norm `√len`.
pub fn rms_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Domain(format!("cannot normalize echo with norm {norm}")));
    }
    let s = (v.len() as f64).sqrt() / norm;
    Ok(v.iter().map(|x| x * s).collect())
}

/// Mean per-entry power in dB. Returns the floor and `true` for a zero block.
pub fn echo_energy(r: &ComplexMatrix) -> (f64, bool) {
    let n = r.as_slice().len().max(1) as f64;
    let p = r.as_slice().iter().map(|c| c.norm_sqr()).sum::<f64>() / n;
    if p > 0.0 {
        (10.0 * p.log10(), false)
    } else {
        (ENERGY_FLOOR_DB, true)
    }
}

/// `½ Σ (μ² + σ² − 1 − ln σ²)`.
pub fn gaussian_kl(mu: &[f64], logvar: &[f64]) -> f64 {
    0.5 * mu
        .iter()
        .zip(logvar)
        .map(|(m, lv)| m * m + lv.exp() - 1.0 - lv)
        .sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaeConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub latent: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElboTerms {
    /// Batch mean of `½‖r − r̂‖²`.
    pub reconstruction: f64,
    /// Batch mean of the closed-form KL to `N(0, I)`.
    pub kl: f64,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vae {
    pub config: VaeConfig,
    pub store: ParamStore,
    encoder: Sequential,
    decoder: Sequential,
}

impl Vae {
    pub fn new(config: VaeConfig, init: &RngStream) -> Result<Self> {
        let VaeConfig {
            input_dim: d,
            hidden: h,
            latent: z,
        } = config;
        if d == 0 || h == 0 || z == 0 {
            return Err(Error::Config(format!("invalid VAE dimensions {config:?}")));
        }
        let mut store = ParamStore::new();
        let encoder = Sequential::build(
            &mut store,
            "vae.enc",
            d,
            &[
                LayerSpec::Dense { inp: d, out: h },
                LayerSpec::Silu,
                LayerSpec::Dense { inp: h, out: h },
                LayerSpec::Silu,
                LayerSpec::Dense { inp: h, out: 2 * z },
            ],
            init,
        )?;
        let decoder = Sequential::build(
            &mut store,
            "vae.dec",
            z,
            &[
                LayerSpec::Dense { inp: z, out: h },
                LayerSpec::Silu,
                LayerSpec::Dense { inp: h, out: h },
                LayerSpec::Silu,
                LayerSpec::Dense { inp: h, out: d },
            ],
            init,
        )?;
        Ok(Self {
            config,
            store,
            encoder,
            decoder,
        })
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.config.input_dim {
            return Err(Error::Dimension(format!(
                "VAE expects inputs of width {}, got {width}",
                self.config.input_dim
            )));
        }
        Ok(())
    }

    /// Encoder heads `(μ, clamped logσ²)` for every row.
    pub fn posterior(&self, x: &Mat) -> Result<(Mat, Mat)> {
        self.check_width(x.cols)?;
        let out = self.encoder.apply(&self.store, x)?;
        let (mu, mut lv) = out.hsplit(self.config.latent);
        for v in &mut lv.data {
            *v = v.clamp(-LOGVAR_LIMIT, LOGVAR_LIMIT);
        }
        Ok((mu, lv))
    }

    /// Posterior mean for one normalized echo.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (mu, _) = self.posterior(&Mat::from_vec(1, x.len(), x.to_vec()))?;
        Ok(mu.data)
    }

    pub fn reconstruct(&self, z: &Mat) -> Result<Mat> {
        self.decoder.apply(&self.store, z)
    }

    /// Negative-ELBO terms and gradients for fixed reparameterization noise.
    pub fn elbo_and_grads(&self, x: &Mat, eps: &Mat) -> Result<(ElboTerms, Grads)> {
        self.check_width(x.cols)?;
        let dz = self.config.latent;
        if eps.rows != x.rows || eps.cols != dz {
            return Err(Error::Dimension("reparameterization noise shape".into()));
        }
        let b = x.rows as f64;
        let (heads, etape) = self.encoder.forward(&self.store, x)?;
        let (mu, raw_lv) = heads.hsplit(dz);
        let lv: Vec<f64> = raw_lv
            .data
            .iter()
            .map(|v| v.clamp(-LOGVAR_LIMIT, LOGVAR_LIMIT))
            .collect();
        let sd: Vec<f64> = lv.iter().map(|v| (0.5 * v).exp()).collect();
        let mut z = mu.clone();
        for i in 0..z.data.len() {
            z.data[i] += sd[i] * eps.data[i];
        }
        let (recon, dtape) = self.decoder.forward(&self.store, &z)?;
        let mut drec = Mat::zeros(recon.rows, recon.cols);
        let mut rec_loss = 0.0;
        for i in 0..recon.data.len() {
            let r = recon.data[i] - x.data[i];
            rec_loss += 0.5 * r * r;
            drec.data[i] = r / b;
        }
        let mut kl = 0.0;
        for r in 0..x.rows {
            kl += gaussian_kl(mu.row(r), &lv[r * dz..(r + 1) * dz]);
        }
        let mut grads = self.store.zero_grads();
        let dzm = self.decoder.backward(&self.store, &dtape, &drec, &mut grads)?;
        let mut dheads = Mat::zeros(x.rows, 2 * dz);
        for r in 0..x.rows {
            for j in 0..dz {
                let i = r * dz + j;
                let g = dzm.data[i];
                let row = dheads.row_mut(r);
                row[j] = g + mu.data[i] / b;
                let inside = raw_lv.data[i].abs() < LOGVAR_LIMIT;
                row[dz + j] = if inside {
                    g * eps.data[i] * 0.5 * sd[i] + 0.5 * (lv[i].exp() - 1.0) / b
                } else {
                    0.0
                };
            }
        }
        self.encoder
            .backward(&self.store, &etape, &dheads, &mut grads)?;
        Ok((
            ElboTerms {
                reconstruction: rec_loss / b,
                kl: kl / b,
                skipped: false,
            },
            grads,
        ))
    }

    /// One Adam step on the negative ELBO with `z = μ + σ⊙ε`.
    pub fn train_step(&mut self, x: &Mat, lr: f64, stream: &RngStream) -> Result<ElboTerms> {
        if x.rows == 0 {
            return Err(Error::EmptyBuffer);
        }
        let eps = Mat::from_vec(
            x.rows,
            self.config.latent,
            stream.gaussian(x.rows * self.config.latent),
        );
        let (mut terms, grads) = self.elbo_and_grads(x, &eps)?;
        if (terms.reconstruction + terms.kl).is_finite() {
            adam_step(&mut self.store, &grads, AdamConfig::with_lr(lr));
        } else {
            terms.skipped = true;
            self.store.skipped += 1;
        }
        Ok(terms)
    }
}
