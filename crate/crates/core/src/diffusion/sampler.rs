use super::denoiser::NoisePredictor;
use super::schedule::DiffusionSchedule;
use crate::error::{Error, Result};
use crate::nn::Mat;
use crate::numerics::{normal, RngStream};

/// `x_t = √ᾱ_t·x₀ + √(1−ᾱ_t)·ε`.
pub fn forward_noise(schedule: &DiffusionSchedule, x0: &[f64], t: usize, eps: &[f64]) -> Result<Vec<f64>> {
    schedule.check_step(t)?;
    if x0.len() != eps.len() {
        return Err(Error::Dimension(format!(
            "state has {} entries, noise has {}",
            x0.len(),
            eps.len()
        )));
    }
    let ab = schedule.alpha_bar_at(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect())
}

fn reverse_update(schedule: &DiffusionSchedule, t: usize, x: &mut [f64], eps: &[f64], z: Option<&[f64]>) {
    let i = t - 1;
    let coef = schedule.tau[i] / (1.0 - schedule.alpha_bar[i]).sqrt();
    let inv = 1.0 / schedule.alpha[i].sqrt();
    for (j, v) in x.iter_mut().enumerate() {
        *v = inv * (*v - coef * eps[j]);
        if let Some(z) = z {
            *v += schedule.sigma[i] * z[j];
        }
    }
}

fn run_sampler<P, F>(pred: &P, schedule: &DiffusionSchedule, streams: &[RngStream], mut eps_of: F) -> Vec<Vec<f64>>
where
    P: NoisePredictor,
    F: FnMut(&Mat, usize) -> Mat,
{
    let dim = pred.state_dim();
    let mut rngs: Vec<_> = streams.iter().map(|s| s.rng()).collect();
    let mut x = Mat::zeros(streams.len(), dim);
    for (k, rng) in rngs.iter_mut().enumerate() {
        for v in x.row_mut(k) {
            *v = normal(rng);
        }
    }
    let mut z = vec![0.0; dim];
    for t in (1..=schedule.steps).rev() {
        let eps = eps_of(&x, t);
        for (k, rng) in rngs.iter_mut().enumerate() {
            let noise = if t > 1 {
                for v in z.iter_mut() {
                    *v = normal(rng);
                }
                Some(z.as_slice())
            } else {
                None
            };
            let e = eps.row(k).to_vec();
            reverse_update(schedule, t, x.row_mut(k), &e, noise);
        }
    }
    x.to_rows()
}

/// Ancestral sampling with classifier-free guidance,
/// `ε̃ = (1+w)·ε(x_t,t,c) − w·ε(x_t,t,∅)`. One trajectory per stream;
/// results are in the normalized state domain.
pub fn guided_sample<P: NoisePredictor>(
    pred: &P,
    schedule: &DiffusionSchedule,
    cond: &[f64],
    w: f64,
    streams: &[RngStream],
) -> Vec<Vec<f64>> {
    let k = streams.len();
    let mut cmat = Mat::zeros(2 * k, cond.len());
    for r in 0..2 * k {
        cmat.row_mut(r).copy_from_slice(cond);
    }
    let null: Vec<bool> = (0..2 * k).map(|r| r >= k).collect();
    run_sampler(pred, schedule, streams, |x, t| {
        let mut both = Mat::zeros(2 * k, x.cols);
        both.data[..x.data.len()].copy_from_slice(&x.data);
        both.data[x.data.len()..].copy_from_slice(&x.data);
        let out = pred.predict(&both, &vec![t; 2 * k], &cmat, &null);
        let (c, u) = out.data.split_at(x.data.len());
        Mat::from_vec(
            k,
            x.cols,
            c.iter().zip(u).map(|(c, u)| (1.0 + w) * c - w * u).collect(),
        )
    })
}

/// Conditional sampling without guidance.
pub fn conditional_sample<P: NoisePredictor>(
    pred: &P,
    schedule: &DiffusionSchedule,
    cond: &[f64],
    streams: &[RngStream],
) -> Vec<Vec<f64>> {
    let k = streams.len();
    let mut cmat = Mat::zeros(k, cond.len());
    for r in 0..k {
        cmat.row_mut(r).copy_from_slice(cond);
    }
    let null = vec![false; k];
    run_sampler(pred, schedule, streams, |x, t| pred.predict(x, &vec![t; k], &cmat, &null))
}
