use std::f64::consts::{LN_10, PI};

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::config::{RadioConfig, SceneConfig, TargetKind};
use crate::error::{Error, Result};
use crate::numerics::{dbm_to_watts, normal, Complex64, RngStream};

/// Two-way free-space amplitude attenuation `(λ / 4πd)²`.
pub fn path_gain(d: f64, wavelength: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("path gain at non-positive distance {d}")));
    }
    Ok((wavelength / (4.0 * PI * d)).powi(2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub q: usize,
    pub kind: TargetKind,
    pub theta: f64,
    pub range: f64,
    /// Cartesian position, x lateral and y along broadside.
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub heading: f64,
    /// Scattering amplitude seen this block, glint included.
    pub amplitude: f64,
    pub log_amp: f64,
    pub nominal_log_amp: f64,
    pub phase: f64,
    pub phase_velocity: f64,
    pub turn_rate: f64,
    pub turn_remaining: u32,
    pub glint: bool,
}

impl TargetState {
    pub fn radial_velocity(&self) -> f64 {
        self.velocity[0] * self.theta.sin() + self.velocity[1] * self.theta.cos()
    }

    pub fn doppler_hz(&self, wavelength: f64) -> f64 {
        2.0 * self.radial_velocity() / wavelength
    }

    /// Complex coefficient `g(d)·A·e^{jφ}`.
    pub fn coefficient(&self, wavelength: f64) -> Complex64 {
        let g = (wavelength / (4.0 * PI * self.range)).powi(2);
        Complex64::from_polar(g * self.amplitude, self.phase)
    }

    fn sync_polar(&mut self) {
        let [x, y] = self.position;
        self.range = x.hypot(y);
        self.theta = x.atan2(y);
    }

    fn set_polar(&mut self, theta: f64, range: f64) {
        self.theta = theta;
        self.range = range;
        self.position = [range * theta.sin(), range * theta.cos()];
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterPatch {
    pub p: usize,
    pub angle: f64,
    pub range: f64,
    pub alpha: Complex64,
    pub doppler_hz: f64,
    pub power_scale: f64,
}

impl ClutterPatch {
    /// `γ = √scale · k(range) · α`.
    pub fn coefficient(&self, wavelength: f64) -> Complex64 {
        let k = (wavelength / (4.0 * PI * self.range)).powi(2);
        self.alpha * (self.power_scale.sqrt() * k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    /// 1-based block index.
    pub block: usize,
    pub targets: Vec<TargetState>,
    pub clutter: Vec<ClutterPatch>,
    pub config: SceneConfig,
    pub seed: u64,
}

/// Compact per-block record for the JSON scene log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneSnapshot {
    pub block: usize,
    pub targets: Vec<TargetSnapshot>,
    pub clutter_alpha: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetSnapshot {
    pub q: usize,
    pub kind: TargetKind,
    pub theta: f64,
    pub range: f64,
    pub velocity: [f64; 2],
    pub amplitude: f64,
}

impl SceneState {
    pub fn angles(&self) -> Vec<f64> {
        self.targets.iter().map(|t| t.theta).collect()
    }

    pub fn ranges(&self) -> Vec<f64> {
        self.targets.iter().map(|t| t.range).collect()
    }

    pub fn snapshot(&self) -> SceneSnapshot {
        SceneSnapshot {
            block: self.block,
            targets: self
                .targets
                .iter()
                .map(|t| TargetSnapshot {
                    q: t.q,
                    kind: t.kind,
                    theta: t.theta,
                    range: t.range,
                    velocity: t.velocity,
                    amplitude: t.amplitude,
                })
                .collect(),
            clutter_alpha: self.clutter.iter().map(|c| [c.alpha.re, c.alpha.im]).collect(),
        }
    }

    /// Expected clutter echo power (W) under an isotropic transmit of total
    /// power `tx_power_w`, with every AR state at unit power.
    pub fn expected_clutter_power(&self, radio: &RadioConfig) -> f64 {
        let lambda = radio.wavelength();
        let tx = radio.tx_power_w();
        self.clutter
            .iter()
            .map(|c| {
                let k = (lambda / (4.0 * PI * c.range)).powi(2);
                c.power_scale * k * k * tx / radio.n_tx as f64
            })
            .sum()
    }
}

fn complex_normal(rng: &mut ChaCha20Rng) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex64::new(normal(rng) * s, normal(rng) * s)
}

fn wrap_angle(a: f64) -> f64 {
    let mut x = (a + PI).rem_euclid(2.0 * PI) - PI;
    if x == -PI {
        x = PI;
    }
    x
}

/// Builds the block-1 scene: targets on a uniform angle grid over
/// `[-angle_limit, angle_limit]`, uniform ranges, types assigned round-robin
/// and clutter scaled to the configured total power.
pub fn init_scene(
    radio: &RadioConfig,
    config: &SceneConfig,
    q: usize,
    seed: u64,
) -> Result<SceneState> {
    if q == 0 {
        return Err(Error::Config("at least one target is required".into()));
    }
    radio.validate()?;
    config.validate()?;
    let root = RngStream::new(seed, "scene/init");
    let mut rng = root.child("targets").rng();
    let lim = config.angle_limit;
    let mut targets = Vec::with_capacity(q);
    for i in 0..q {
        let theta = if q == 1 {
            0.0
        } else {
            -lim + 2.0 * lim * i as f64 / (q - 1) as f64
        };
        let range = rng.random_range(config.r_min..=config.r_cell);
        let kind = TargetKind::ALL[i % 3];
        let speed = config.profile(kind).speed;
        let heading = rng.random_range(-PI..PI);
        let beta = complex_normal(&mut rng);
        let amplitude = beta.norm().max(1e-6);
        let mut t = TargetState {
            q: i,
            kind,
            theta,
            range,
            position: [0.0, 0.0],
            velocity: [speed * heading.sin(), speed * heading.cos()],
            heading,
            amplitude,
            log_amp: amplitude.ln(),
            nominal_log_amp: amplitude.ln(),
            phase: beta.arg(),
            phase_velocity: 0.0,
            turn_rate: 0.0,
            turn_remaining: 0,
            glint: false,
        };
        t.set_polar(theta, range);
        targets.push(t);
    }

    let mut rng = root.child("clutter").rng();
    let n_c = config.clutter_patches;
    let lambda = radio.wavelength();
    let share = if n_c > 0 {
        dbm_to_watts(config.clutter_total_dbm) / n_c as f64
    } else {
        0.0
    };
    let clutter = (0..n_c)
        .map(|p| {
            let angle = rng.random_range(-lim..=lim);
            let range = rng.random_range(config.r_min..=config.r_cell);
            let alpha = complex_normal(&mut rng);
            let doppler_hz = normal(&mut rng) * config.clutter_doppler_std_hz;
            let k = (lambda / (4.0 * PI * range)).powi(2);
            let power_scale = share / (k * k * radio.tx_power_w() / radio.n_tx as f64);
            ClutterPatch {
                p,
                angle,
                range,
                alpha,
                doppler_hz,
                power_scale,
            }
        })
        .collect();

    Ok(SceneState {
        block: 1,
        targets,
        clutter,
        config: config.clone(),
        seed,
    })
}

/// Advances every target and clutter patch by one block.
///
/// All randomness for block `l → l+1` is drawn from streams labeled by the
/// scene seed, the block index and the target index, so the result does not
/// depend on anything else consumed during the block.
pub fn advance_scene(scene: &SceneState, radio: &RadioConfig) -> SceneState {
    let cfg = &scene.config;
    let dt = radio.block_s();
    let root = RngStream::new(scene.seed, "scene/advance").child(scene.block);
    let mut next = scene.clone();
    next.block += 1;

    for t in &mut next.targets {
        let prof = cfg.profile(t.kind).clone();
        let mut rng = root.child(format!("q{}", t.q)).rng();

        // Random turns: a per-block heading rotation held for a geometric
        // number of blocks.
        let mut rotation = 0.0;
        if t.turn_remaining > 0 {
            rotation = t.turn_rate;
            t.turn_remaining -= 1;
        } else if prof.turn_prob > 0.0 && rng.random::<f64>() < prof.turn_prob {
            t.turn_rate = normal(&mut rng) * prof.turn_std_deg.to_radians();
            let stop = 1.0 / cfg.turn_mean_blocks;
            let mut duration = 1u32;
            while rng.random::<f64>() >= stop && duration < 10_000 {
                duration += 1;
            }
            rotation = t.turn_rate;
            t.turn_remaining = duration - 1;
        }
        let [vx, vy] = t.velocity;
        let (s, c) = rotation.sin_cos();
        let mut v = [vx * c + vy * s, -vx * s + vy * c];

        // Nearly-constant velocity: Gaussian perturbation, then pull the
        // speed back toward the nominal value.
        if cfg.velocity_noise_std > 0.0 {
            v[0] += normal(&mut rng) * cfg.velocity_noise_std;
            v[1] += normal(&mut rng) * cfg.velocity_noise_std;
            let speed = v[0].hypot(v[1]);
            if speed > 0.0 {
                let target = cfg.speed_pull * prof.speed + (1.0 - cfg.speed_pull) * speed;
                v = [v[0] * target / speed, v[1] * target / speed];
            }
        }

        t.position = [t.position[0] + v[0] * dt, t.position[1] + v[1] * dt];
        t.velocity = v;
        t.sync_polar();
        reflect_at_bounds(t, cfg);
        let [vx, vy] = t.velocity;
        if vx != 0.0 || vy != 0.0 {
            t.heading = vx.atan2(vy);
        }

        // Log-amplitude AR(1) around the nominal level plus aspect-gated glints.
        let sigma = prof.log_amp_jitter_db * LN_10 / 20.0;
        t.log_amp = cfg.log_amp_ar * t.log_amp
            + (1.0 - cfg.log_amp_ar) * t.nominal_log_amp
            + sigma * normal(&mut rng);
        let fire = rng.random::<f64>() < prof.glint_prob;
        let aspect = wrap_angle(t.theta + PI);
        let gated = wrap_angle(t.heading - aspect).abs() < cfg.glint_gate_deg.to_radians();
        t.glint = fire && gated;
        t.amplitude = t.log_amp.exp() * if t.glint { 10f64.powf(prof.glint_db / 20.0) } else { 1.0 };

        // Phase drift with AR(1) velocity and rare sign flips.
        t.phase_velocity = prof.phase_ar * t.phase_velocity
            + prof.phase_vel_std_deg.to_radians() * normal(&mut rng);
        if rng.random::<f64>() < prof.sign_flip_prob {
            t.phase_velocity = -t.phase_velocity;
        }
        t.phase = wrap_angle(t.phase + t.phase_velocity);
    }

    let mut rng = root.child("clutter").rng();
    let rho = cfg.clutter_ar;
    let innov = (1.0 - rho * rho).max(0.0).sqrt();
    for c in &mut next.clutter {
        let w = complex_normal(&mut rng);
        c.alpha = c.alpha * rho + w * innov;
    }
    next
}

/// Clamps range and angle to the cell, mirroring the radial or tangential
/// velocity component that pushed the target out.
fn reflect_at_bounds(t: &mut TargetState, cfg: &SceneConfig) {
    let (sin, cos) = t.theta.sin_cos();
    let radial = t.velocity[0] * sin + t.velocity[1] * cos;
    let mut tangential = t.velocity[0] * cos - t.velocity[1] * sin;
    let mut radial_out = radial;
    let mut theta = t.theta;
    let mut range = t.range;
    let mut moved = false;
    if range < cfg.r_min {
        range = cfg.r_min;
        radial_out = radial.abs();
        moved = true;
    } else if range > cfg.r_cell {
        range = cfg.r_cell;
        radial_out = -radial.abs();
        moved = true;
    }
    if theta > cfg.angle_limit {
        theta = cfg.angle_limit;
        tangential = -tangential.abs();
        moved = true;
    } else if theta < -cfg.angle_limit {
        theta = -cfg.angle_limit;
        tangential = tangential.abs();
        moved = true;
    }
    if moved {
        let (s, c) = theta.sin_cos();
        t.velocity = [radial_out * s + tangential * c, radial_out * c - tangential * s];
        t.set_polar(theta, range);
    }
}
