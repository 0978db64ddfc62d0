use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reverse-step noise level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaChoice {
    /// `σ_t² = τ̃_t = (1−ᾱ_{t−1})/(1−ᾱ_t)·τ_t`, zero at t = 1.
    Posterior,
    /// `σ_t² = τ_t`.
    Beta,
}

/// Linear variance schedule. Vectors are indexed by `t − 1` for `t ∈ 1..=T_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSchedule {
    pub steps: usize,
    pub tau: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_bar: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl DiffusionSchedule {
    pub fn new(steps: usize, tau_start: f64, tau_end: f64, sigma: SigmaChoice) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("diffusion needs at least one step".into()));
        }
        if !(tau_start > 0.0 && tau_start <= tau_end && tau_end < 1.0) {
            return Err(Error::Config(format!(
                "need 0 < tau_start <= tau_end < 1, got {tau_start}, {tau_end}"
            )));
        }
        let tau: Vec<f64> = (0..steps)
            .map(|i| {
                if steps == 1 {
                    tau_start
                } else {
                    tau_start + (tau_end - tau_start) * i as f64 / (steps - 1) as f64
                }
            })
            .collect();
        let alpha: Vec<f64> = tau.iter().map(|t| 1.0 - t).collect();
        let mut alpha_bar = Vec::with_capacity(steps);
        let mut acc = 1.0;
        for a in &alpha {
            acc *= a;
            alpha_bar.push(acc);
        }
        let sigma = (0..steps)
            .map(|i| match sigma {
                SigmaChoice::Beta => tau[i].sqrt(),
                SigmaChoice::Posterior => {
                    let prev = if i == 0 { 1.0 } else { alpha_bar[i - 1] };
                    ((1.0 - prev) / (1.0 - alpha_bar[i]) * tau[i]).sqrt()
                }
            })
            .collect();
        Ok(Self {
            steps,
            tau,
            alpha,
            alpha_bar,
            sigma,
        })
    }

    /// `ᾱ_t` with `ᾱ_0 = 1`.
    pub fn alpha_bar_at(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bar[t - 1]
        }
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps {
            return Err(Error::Domain(format!(
                "diffusion step {t} outside 1..={}",
                self.steps
            )));
        }
        Ok(())
    }
}
