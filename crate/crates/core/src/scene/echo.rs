use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::config::RadioConfig;
use super::state::SceneState;
use super::steering_vector;
use crate::error::{Error, Result};
use crate::numerics::{dot_h, normal, Complex64, ComplexMatrix, RngStream};

/// Received echo for one block, `N_r × N`.
pub type EchoBlock = ComplexMatrix;

/// Target and clutter returns without receiver noise.
pub fn noiseless_echo(
    scene: &SceneState,
    transmit: &ComplexMatrix,
    radio: &RadioConfig,
) -> Result<EchoBlock> {
    if transmit.rows() != radio.n_tx {
        return Err(Error::Dimension(format!(
            "transmit has {} rows, array has {} elements",
            transmit.rows(),
            radio.n_tx
        )));
    }
    let n = transmit.cols();
    let lambda = radio.wavelength();
    let mut out = ComplexMatrix::zeros(radio.n_rx, n);

    let reflectors = scene
        .targets
        .iter()
        .map(|t| (t.theta, t.coefficient(lambda), t.doppler_hz(lambda)))
        .chain(
            scene
                .clutter
                .iter()
                .map(|c| (c.angle, c.coefficient(lambda), c.doppler_hz)),
        );

    let columns: Vec<Vec<Complex64>> = (0..n).map(|j| transmit.column(j)).collect();
    for (angle, gain, doppler) in reflectors {
        let at = steering_vector(angle, radio.n_tx);
        let ar = steering_vector(angle, radio.n_rx);
        for (j, s) in columns.iter().enumerate() {
            let t_n = j as f64 * radio.slot_s;
            let amp = gain * Complex64::from_polar(1.0, 2.0 * PI * doppler * t_n) * dot_h(&at, s);
            for (i, a) in ar.iter().enumerate() {
                out[(i, j)] += a * amp;
            }
        }
    }
    Ok(out)
}

/// Circularly-symmetric receiver noise `CN(0, σ_r² I)` for `n` slots.
pub fn noise_matrix(radio: &RadioConfig, n: usize, stream: &RngStream) -> EchoBlock {
    let sd = radio.noise_w().sqrt() * FRAC_1_SQRT_2;
    let mut rng = stream.rng();
    ComplexMatrix::from_fn(radio.n_rx, n, |_, _| {
        Complex64::new(normal(&mut rng) * sd, normal(&mut rng) * sd)
    })
}

/// Echo `R = Σ targets + Σ clutter + Z`, slot times `t_n = (n−1)·T_s`.
pub fn synthesize_echo(
    scene: &SceneState,
    transmit: &ComplexMatrix,
    radio: &RadioConfig,
    noise: &RngStream,
) -> Result<EchoBlock> {
    let clean = noiseless_echo(scene, transmit, radio)?;
    if radio.noise_w() == 0.0 {
        return Ok(clean);
    }
    clean.add(&noise_matrix(radio, transmit.cols(), noise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::c64;
    use crate::scene::{init_scene, SceneConfig};

    fn single_target_scene(radio: &RadioConfig, theta: f64, range: f64) -> SceneState {
        let cfg = SceneConfig {
            clutter_patches: 0,
            ..SceneConfig::default()
        };
        let mut s = init_scene(radio, &cfg, 1, 1).unwrap();
        let t = &mut s.targets[0];
        t.theta = theta;
        t.range = range;
        t.position = [range * theta.sin(), range * theta.cos()];
        s
    }

    fn random_transmit(radio: &RadioConfig, n: usize, label: &str) -> ComplexMatrix {
        let g = RngStream::new(77, label).gaussian(2 * radio.n_tx * n);
        ComplexMatrix::from_fn(radio.n_tx, n, |i, j| {
            let k = 2 * (i * n + j);
            c64(g[k], g[k + 1])
        })
    }

    #[test]
    fn empty_scene_without_noise_is_zero() {
        let radio = RadioConfig {
            noise_dbm: f64::NEG_INFINITY,
            ..RadioConfig::default()
        };
        let cfg = SceneConfig {
            clutter_patches: 0,
            ..SceneConfig::default()
        };
        let mut s = init_scene(&RadioConfig::default(), &cfg, 1, 1).unwrap();
        s.targets.clear();
        let x = random_transmit(&radio, 8, "x");
        let r = synthesize_echo(&s, &x, &radio, &RngStream::new(1, "noise")).unwrap();
        assert_eq!(r.frobenius_norm(), 0.0);
    }

    #[test]
    fn single_slot_matches_outer_product() {
        let radio = RadioConfig {
            n_tx: 8,
            n_rx: 6,
            ..RadioConfig::default()
        };
        let s = single_target_scene(&radio, 0.3, 17.0);
        let x = random_transmit(&radio, 1, "one");
        let r = noiseless_echo(&s, &x, &radio).unwrap();
        let t = &s.targets[0];
        let lambda = radio.wavelength();
        let beta = Complex64::from_polar(
            (lambda / (4.0 * PI * 17.0)).powi(2) * t.amplitude,
            t.phase,
        );
        let k = 0.3f64.sin();
        let proj: Complex64 = (0..8)
            .map(|m| Complex64::from_polar(1.0 / 8f64.sqrt(), -PI * m as f64 * k) * x[(m, 0)])
            .sum();
        for i in 0..6 {
            let ar = Complex64::from_polar(1.0 / 6f64.sqrt(), PI * i as f64 * k);
            let want = beta * ar * proj;
            assert!((r[(i, 0)] - want).norm() <= 1e-12 * want.norm());
        }
    }

    #[test]
    fn linear_in_transmit() {
        let radio = RadioConfig {
            n_tx: 8,
            n_rx: 8,
            slots: 16,
            ..RadioConfig::default()
        };
        let s = init_scene(&radio, &SceneConfig::default(), 3, 9).unwrap();
        let x1 = random_transmit(&radio, 16, "a");
        let x2 = random_transmit(&radio, 16, "b");
        let noise = RngStream::new(5, "noise");
        let z = noise_matrix(&radio, 16, &noise);
        let r1 = synthesize_echo(&s, &x1, &radio, &noise).unwrap().sub(&z).unwrap();
        let r2 = synthesize_echo(&s, &x2, &radio, &noise).unwrap().sub(&z).unwrap();
        let r12 = synthesize_echo(&s, &x1.add(&x2).unwrap(), &radio, &noise)
            .unwrap()
            .sub(&z)
            .unwrap();
        let diff = r12.sub(&r1.add(&r2).unwrap()).unwrap().frobenius_norm();
        assert!(diff <= 1e-12 * r12.frobenius_norm().max(1e-300), "{diff}");
    }

    #[test]
    fn doppler_progression() {
        let radio = RadioConfig {
            n_tx: 8,
            n_rx: 8,
            slots: 16,
            ..RadioConfig::default()
        };
        let mut s = single_target_scene(&radio, -0.4, 25.0);
        s.targets[0].velocity = [3.0, 9.0];
        let f = s.targets[0].doppler_hz(radio.wavelength());
        assert!(f.abs() > 100.0);
        let col = random_transmit(&radio, 1, "col").column(0);
        let x = ComplexMatrix::from_columns(&vec![col; 16]).unwrap();
        let r = noiseless_echo(&s, &x, &radio).unwrap();
        for n in 0..16 {
            let rot = Complex64::from_polar(1.0, 2.0 * PI * f * n as f64 * radio.slot_s);
            for i in 0..8 {
                let want = r[(i, 0)] * rot;
                assert!((r[(i, n)] - want).norm() <= 1e-10 * r[(i, 0)].norm());
            }
        }
    }

    #[test]
    fn noise_only_variance() {
        let radio = RadioConfig {
            n_rx: 4,
            ..RadioConfig::default()
        };
        let z = noise_matrix(&radio, 10_000, &RngStream::new(3, "noise"));
        let var = z.as_slice().iter().map(|c| c.norm_sqr()).sum::<f64>() / z.as_slice().len() as f64;
        let s2 = radio.noise_w();
        assert!((var - s2).abs() / s2 < 0.02);
    }

    #[test]
    fn wrong_transmit_rows_rejected() {
        let radio = RadioConfig::default();
        let s = init_scene(&radio, &SceneConfig::default(), 3, 1).unwrap();
        let x = ComplexMatrix::zeros(4, 2);
        assert!(matches!(noiseless_echo(&s, &x, &radio), Err(Error::Dimension(_))));
    }
}
