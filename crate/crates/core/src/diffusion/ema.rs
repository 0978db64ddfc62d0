use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationStat {
    /// EMA of `|v − μ|`.
    Absolute,
    /// Square root of the EMA of `(v − μ)²`.
    Squared,
}

/// Running standardization `(v − μ)/(σ + ε)` with exponentially weighted
/// statistics. Before the first update it applies `μ = 0, σ = 1`; the first
/// update seeds `μ` with the observation itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmaNormalizer {
    pub mean: Vec<f64>,
    spread: Vec<f64>,
    pub decay: f64,
    pub eps: f64,
    pub stat: DeviationStat,
    pub updates: u64,
    /// A frozen normalizer ignores updates.
    pub frozen: bool,
}

impl EmaNormalizer {
    pub fn new(dim: usize, decay: f64, eps: f64, stat: DeviationStat) -> Self {
        Self {
            mean: vec![0.0; dim],
            spread: vec![1.0; dim],
            decay,
            eps,
            stat,
            updates: 0,
            frozen: false,
        }
    }

    /// Identity map (`μ = 0`, `σ + ε = 1`), never updated.
    pub fn identity(dim: usize) -> Self {
        let mut n = Self::new(dim, 0.0, 0.0, DeviationStat::Absolute);
        n.frozen = true;
        n
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn std(&self) -> Vec<f64> {
        self.spread
            .iter()
            .map(|&s| {
                let sd = match self.stat {
                    DeviationStat::Absolute => s,
                    DeviationStat::Squared => s.sqrt(),
                };
                sd.max(self.eps)
            })
            .collect()
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "normalizer has dimension {}, vector has {}",
                self.dim(),
                v.len()
            )));
        }
        Ok(())
    }

    pub fn update(&mut self, v: &[f64]) -> Result<()> {
        self.check(v)?;
        if self.frozen {
            return Ok(());
        }
        let d = self.decay;
        if self.updates == 0 {
            self.mean.copy_from_slice(v);
        } else {
            for (m, x) in self.mean.iter_mut().zip(v) {
                *m = d * *m + (1.0 - d) * x;
            }
        }
        for ((s, m), x) in self.spread.iter_mut().zip(&self.mean).zip(v) {
            let dev = match self.stat {
                DeviationStat::Absolute => (x - m).abs(),
                DeviationStat::Squared => (x - m).powi(2),
            };
            *s = d * *s + (1.0 - d) * dev;
        }
        self.updates += 1;
        Ok(())
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        Ok(v.iter()
            .zip(&self.mean)
            .zip(self.std())
            .map(|((x, m), s)| (x - m) / (s + self.eps))
            .collect())
    }

    pub fn invert(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        Ok(v.iter()
            .zip(&self.mean)
            .zip(self.std())
            .map(|((x, m), s)| x * (s + self.eps) + m)
            .collect())
    }
}
