//! DFT transmit codebook, transmit assembly and prediction-driven beam
//! selection.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot_h, Complex64, ComplexMatrix, ComplexVector, RngStream};
use crate::scene::steering_vector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub beams: Vec<ComplexVector>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    /// Pointing direction of beam `m`: `sinθ = 2m/N_s` wrapped into [-1, 1).
    pub fn beam_angle(&self, m: usize) -> f64 {
        let ns = self.beams.len() as f64;
        let s = (2.0 * m as f64 / ns + 1.0).rem_euclid(2.0) - 1.0;
        s.asin()
    }
}

/// Beam indices and per-beam powers (W) for one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamPlan {
    pub indices: Vec<usize>,
    pub powers: Vec<f64>,
}

impl BeamPlan {
    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    pub fn validate(&self, codebook: &Codebook, budget: f64) -> Result<()> {
        if self.indices.len() != self.powers.len() {
            return Err(Error::Config("beam plan index/power length mismatch".into()));
        }
        if self.indices.iter().any(|&i| i >= codebook.len()) {
            return Err(Error::Config("beam index outside the codebook".into()));
        }
        let mut sorted = self.indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.indices.len() {
            return Err(Error::Config("duplicate beam in plan".into()));
        }
        if self.powers.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Config("negative beam power".into()));
        }
        if self.total_power() > budget * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "plan uses {:.6} W of a {budget:.6} W budget",
                self.total_power()
            )));
        }
        Ok(())
    }
}

/// Beam `m`, entry `k` = `e^{j2πkm/N_s}/√N_t`.
pub fn dft_codebook(n_tx: usize, n_beams: usize) -> Result<Codebook> {
    if n_beams == 0 || n_tx == 0 {
        return Err(Error::Config("codebook needs at least one beam and element".into()));
    }
    let norm = 1.0 / (n_tx as f64).sqrt();
    let beams = (0..n_beams)
        .map(|m| {
            (0..n_tx)
                .map(|k| Complex64::from_polar(norm, 2.0 * PI * (k * m) as f64 / n_beams as f64))
                .collect()
        })
        .collect();
    Ok(Codebook { beams })
}

/// Superposition `s[n] = Σ_m √P_m v_m e_m[n]` with unit-modulus QPSK symbols.
pub fn assemble_transmit(
    plan: &BeamPlan,
    codebook: &Codebook,
    slots: usize,
    budget: f64,
    symbols: &RngStream,
) -> Result<ComplexMatrix> {
    plan.validate(codebook, budget)?;
    let n_tx = codebook.beams.first().map_or(0, Vec::len);
    let mut rng = symbols.rng();
    let mut x = ComplexMatrix::zeros(n_tx, slots);
    for n in 0..slots {
        for (&m, &p) in plan.indices.iter().zip(&plan.powers) {
            let e = Complex64::new(
                if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 },
                if rng.random::<bool>() { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 },
            );
            let w = e * p.sqrt();
            for (k, v) in codebook.beams[m].iter().enumerate() {
                x[(k, n)] += v * w;
            }
        }
    }
    Ok(x)
}

/// Path-loss-compensated alignment `Σ_q d̂_q⁴ |a_t(θ̂_q)ᴴ v|²`.
pub fn beam_score(beam: &[Complex64], predictions: &[(f64, f64)]) -> f64 {
    predictions
        .iter()
        .map(|&(theta, d)| {
            let a = steering_vector(theta, beam.len());
            d.powi(4) * dot_h(&a, beam).norm_sqr()
        })
        .sum()
}

/// Top-`M_s` beams by score, ties broken by lower index, equal power split.
pub fn select_beams(scores: &[f64], m_s: usize, budget: f64) -> Result<BeamPlan> {
    if m_s == 0 || m_s > scores.len() {
        return Err(Error::Config(format!(
            "cannot select {m_s} beams from {}",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let indices: Vec<usize> = order.into_iter().take(m_s).collect();
    Ok(BeamPlan {
        powers: vec![budget / m_s as f64; m_s],
        indices,
    })
}

/// Beams whose pointing directions sit closest to `M_s` evenly spaced
/// angles across `[-limit, limit]`; used before any echo is available.
pub fn initial_plan(codebook: &Codebook, m_s: usize, limit: f64, budget: f64) -> Result<BeamPlan> {
    if m_s == 0 || m_s > codebook.len() {
        return Err(Error::Config(format!(
            "cannot select {m_s} beams from {}",
            codebook.len()
        )));
    }
    let mut used = vec![false; codebook.len()];
    let mut indices = Vec::with_capacity(m_s);
    for i in 0..m_s {
        let want = if m_s == 1 {
            0.0
        } else {
            -limit + 2.0 * limit * i as f64 / (m_s - 1) as f64
        };
        let best = (0..codebook.len())
            .filter(|&m| !used[m])
            .min_by(|&a, &b| {
                let da = (codebook.beam_angle(a) - want).abs();
                let db = (codebook.beam_angle(b) - want).abs();
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("codebook has unused beams");
        used[best] = true;
        indices.push(best);
    }
    Ok(BeamPlan {
        powers: vec![budget / m_s as f64; m_s],
        indices,
    })
}
