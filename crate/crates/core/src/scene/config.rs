use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::dbm_to_watts;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Narrowband full-duplex array front end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    pub carrier_hz: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    /// Slots per block (N).
    pub slots: usize,
    pub slot_s: f64,
    pub noise_dbm: f64,
    pub tx_power_dbm: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 28e9,
            n_tx: 32,
            n_rx: 32,
            slots: 64,
            slot_s: 1e-3,
            noise_dbm: -90.0,
            tx_power_dbm: 43.0,
        }
    }
}

impl RadioConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn block_s(&self) -> f64 {
        self.slots as f64 * self.slot_s
    }

    pub fn noise_w(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    pub fn tx_power_w(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz > 0.0 && self.slot_s > 0.0) {
            return Err(Error::Config("carrier and slot duration must be positive".into()));
        }
        if self.n_tx == 0 || self.n_rx == 0 || self.slots == 0 {
            return Err(Error::Config("antenna and slot counts must be positive".into()));
        }
        if !self.noise_dbm.is_finite() || !self.tx_power_dbm.is_finite() {
            return Err(Error::Config("power levels must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Pedestrian,
    Car,
    Drone,
}

impl TargetKind {
    pub const ALL: [TargetKind; 3] = [TargetKind::Pedestrian, TargetKind::Car, TargetKind::Drone];
}

/// Per-type motion and scattering parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeProfile {
    pub speed: f64,
    pub turn_prob: f64,
    pub turn_std_deg: f64,
    pub log_amp_jitter_db: f64,
    pub glint_prob: f64,
    pub glint_db: f64,
    pub phase_ar: f64,
    pub phase_vel_std_deg: f64,
    pub sign_flip_prob: f64,
}

impl TypeProfile {
    pub fn pedestrian() -> Self {
        Self {
            speed: 1.5,
            turn_prob: 0.3,
            turn_std_deg: 20.0,
            log_amp_jitter_db: 0.8,
            glint_prob: 0.02,
            glint_db: 4.0,
            phase_ar: 0.985,
            phase_vel_std_deg: 0.8,
            sign_flip_prob: 0.02,
        }
    }

    pub fn car() -> Self {
        Self {
            speed: 15.0,
            turn_prob: 0.1,
            turn_std_deg: 5.0,
            log_amp_jitter_db: 0.3,
            glint_prob: 0.01,
            glint_db: 6.0,
            phase_ar: 0.995,
            phase_vel_std_deg: 0.15,
            sign_flip_prob: 0.005,
        }
    }

    pub fn drone() -> Self {
        Self {
            speed: 20.0,
            turn_prob: 0.2,
            turn_std_deg: 10.0,
            log_amp_jitter_db: 1.0,
            glint_prob: 0.08,
            glint_db: 10.0,
            phase_ar: 0.975,
            phase_vel_std_deg: 1.2,
            sign_flip_prob: 0.05,
        }
    }
}

/// Scene geometry and stochastic-dynamics parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub r_min: f64,
    pub r_cell: f64,
    /// Targets and clutter live in [-angle_limit, angle_limit].
    pub angle_limit: f64,
    pub clutter_patches: usize,
    pub clutter_total_dbm: f64,
    pub clutter_ar: f64,
    pub clutter_doppler_std_hz: f64,
    pub log_amp_ar: f64,
    /// Per-component velocity perturbation std, m/s per block.
    pub velocity_noise_std: f64,
    /// Weight of the nominal speed when renormalizing after perturbation.
    pub speed_pull: f64,
    pub turn_mean_blocks: f64,
    pub glint_gate_deg: f64,
    pub pedestrian: TypeProfile,
    pub car: TypeProfile,
    pub drone: TypeProfile,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            r_min: 10.0,
            r_cell: 50.0,
            angle_limit: PI / 3.0,
            clutter_patches: 100,
            clutter_total_dbm: -55.0,
            clutter_ar: 0.99,
            clutter_doppler_std_hz: 5.0,
            log_amp_ar: 0.995,
            velocity_noise_std: 1.0,
            speed_pull: 0.95,
            turn_mean_blocks: 5.0,
            glint_gate_deg: 15.0,
            pedestrian: TypeProfile::pedestrian(),
            car: TypeProfile::car(),
            drone: TypeProfile::drone(),
        }
    }
}

impl SceneConfig {
    pub fn profile(&self, kind: TargetKind) -> &TypeProfile {
        match kind {
            TargetKind::Pedestrian => &self.pedestrian,
            TargetKind::Car => &self.car,
            TargetKind::Drone => &self.drone,
        }
    }

    pub fn profile_mut(&mut self, kind: TargetKind) -> &mut TypeProfile {
        match kind {
            TargetKind::Pedestrian => &mut self.pedestrian,
            TargetKind::Car => &mut self.car,
            TargetKind::Drone => &mut self.drone,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_cell > self.r_min) {
            return Err(Error::Config("need 0 < r_min < r_cell".into()));
        }
        if !(self.angle_limit > 0.0 && self.angle_limit <= PI / 2.0) {
            return Err(Error::Config("angle_limit must be in (0, pi/2]".into()));
        }
        if !(0.0..=1.0).contains(&self.clutter_ar) || !(0.0..=1.0).contains(&self.log_amp_ar) {
            return Err(Error::Config("AR coefficients must be in [0, 1]".into()));
        }
        if self.turn_mean_blocks < 1.0 {
            return Err(Error::Config("turn_mean_blocks must be >= 1".into()));
        }
        for kind in TargetKind::ALL {
            let p = self.profile(kind);
            for prob in [p.turn_prob, p.glint_prob, p.sign_flip_prob] {
                if !(0.0..=1.0).contains(&prob) {
                    return Err(Error::Config(format!("{kind:?}: probability out of range")));
                }
            }
        }
        Ok(())
    }
}
