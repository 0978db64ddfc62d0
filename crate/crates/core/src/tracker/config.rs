use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diffusion::{DeviationStat, SigmaChoice};
use crate::error::{Error, Result};
use crate::scene::{RadioConfig, SceneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ddpm,
    Music,
    Esprit,
    Cnn,
    Kf,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Ddpm, Method::Music, Method::Esprit, Method::Cnn, Method::Kf];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ddpm => "ddpm",
            Method::Music => "music",
            Method::Esprit => "esprit",
            Method::Cnn => "cnn",
            Method::Kf => "kf",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Paper,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            _ => Err(Error::Config(format!("unknown profile '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaeSettings {
    pub latent: usize,
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    /// Replayed echoes added to the current one in each VAE minibatch.
    pub replay: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DdpmSettings {
    pub hidden: usize,
    pub time_dim: usize,
    pub lr: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnnSettings {
    pub channels: [usize; 3],
    pub dense: usize,
    pub kernel: usize,
    pub lr: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmaSettings {
    pub decay: f64,
    pub eps: f64,
    pub stat: DeviationStat,
    /// Replace the state normalizer by the identity map.
    pub state_identity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KfSettings {
    pub measurement_var: f64,
    pub angle_grid: Vec<f64>,
    pub range_grid: Vec<f64>,
}

/// Everything that defines an episode apart from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    pub radio: RadioConfig,
    pub scene: SceneConfig,
    /// Q.
    pub targets: usize,
    /// L.
    pub blocks: usize,
    /// L_train; blocks `1..=L_train` receive ground-truth feedback.
    pub train_blocks: usize,
    /// M_s.
    pub probe_beams: usize,
    /// N_s.
    pub codebook_size: usize,
    /// K.
    pub samples: usize,
    /// w.
    pub guidance: f64,
    pub p_drop: f64,
    /// T_d.
    pub diffusion_steps: usize,
    pub tau_start: f64,
    pub tau_end: f64,
    pub sigma: SigmaChoice,
    /// Range weight η in the per-target loss.
    pub eta: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub vae: VaeSettings,
    pub ddpm: DdpmSettings,
    pub cnn: CnnSettings,
    pub ema: EmaSettings,
    pub kf: KfSettings,
    pub music_grid: usize,
    /// Baselines observe the echo produced by the tracker's beams. When
    /// false they get a separate echo from the fixed initial beam plan.
    pub shared_beams: bool,
    pub methods: Vec<Method>,
}

impl EpisodeConfig {
    pub fn desk() -> Self {
        Self {
            radio: RadioConfig {
                n_tx: 8,
                n_rx: 8,
                slots: 16,
                ..RadioConfig::default()
            },
            scene: SceneConfig::default(),
            targets: 3,
            blocks: 600,
            train_blocks: 200,
            probe_beams: 4,
            codebook_size: 16,
            samples: 16,
            guidance: 3.0,
            p_drop: 0.05,
            diffusion_steps: 50,
            tau_start: 1e-4,
            tau_end: 1e-2,
            sigma: SigmaChoice::Posterior,
            eta: 6.25e-4,
            buffer_capacity: 4096,
            batch_size: 64,
            vae: VaeSettings {
                latent: 32,
                hidden: 64,
                lr: 1e-3,
                epochs: 8,
                replay: 7,
            },
            ddpm: DdpmSettings {
                hidden: 128,
                time_dim: 64,
                lr: 2e-4,
                epochs: 8,
            },
            cnn: CnnSettings {
                channels: [16, 32, 32],
                dense: 32,
                kernel: 3,
                lr: 1e-3,
                epochs: 8,
            },
            ema: EmaSettings {
                decay: 0.99,
                eps: 1e-6,
                stat: DeviationStat::Absolute,
                state_identity: false,
            },
            kf: KfSettings {
                measurement_var: 1e-6,
                angle_grid: vec![1e-4, 1e-3, 1e-2],
                range_grid: vec![0.1, 1.0, 10.0],
            },
            music_grid: 2048,
            shared_beams: true,
            methods: Method::ALL.to_vec(),
        }
    }

    pub fn paper() -> Self {
        let desk = Self::desk();
        Self {
            radio: RadioConfig::default(),
            targets: 9,
            blocks: 5000,
            train_blocks: 400,
            probe_beams: 8,
            codebook_size: 32,
            samples: 128,
            diffusion_steps: 200,
            vae: VaeSettings {
                latent: 128,
                hidden: 256,
                ..desk.vae.clone()
            },
            ddpm: DdpmSettings {
                hidden: 512,
                ..desk.ddpm.clone()
            },
            cnn: CnnSettings {
                channels: [64, 128, 128],
                dense: 128,
                ..desk.cnn.clone()
            },
            ..desk
        }
    }

    pub fn profile(p: Profile) -> Self {
        match p {
            Profile::Desk => Self::desk(),
            Profile::Paper => Self::paper(),
        }
    }

    /// Overlays a JSON object on the profile defaults. Unknown keys at any
    /// level are rejected.
    pub fn from_json_over(base: &EpisodeConfig, overlay: &str) -> Result<Self> {
        let over: Value =
            serde_json::from_str(overlay).map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        if !over.is_object() {
            return Err(Error::Config("config must be a JSON object".into()));
        }
        let mut merged = serde_json::to_value(base)?;
        merge(&mut merged, over);
        let cfg: EpisodeConfig =
            serde_json::from_value(merged).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn has(&self, m: Method) -> bool {
        self.methods.contains(&m)
    }

    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        self.scene.validate()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if self.targets == 0 {
            return bad("at least one target is required".into());
        }
        if self.train_blocks >= self.blocks {
            return bad(format!(
                "train_blocks ({}) must be below blocks ({})",
                self.train_blocks, self.blocks
            ));
        }
        if self.probe_beams == 0 || self.probe_beams > self.codebook_size {
            return bad(format!(
                "probe_beams must lie in 1..={}",
                self.codebook_size
            ));
        }
        if self.samples == 0 || self.batch_size == 0 || self.diffusion_steps == 0 {
            return bad("samples, batch_size and diffusion_steps must be positive".into());
        }
        if !(self.guidance >= 0.0) || !(0.0..=1.0).contains(&self.p_drop) {
            return bad("guidance must be >= 0 and p_drop in [0, 1]".into());
        }
        if !(self.eta >= 0.0) {
            return bad("eta must be non-negative".into());
        }
        if !(self.ema.decay >= 0.0 && self.ema.decay < 1.0 && self.ema.eps > 0.0) {
            return bad("ema decay must lie in [0, 1) and eps be positive".into());
        }
        if self.kf.angle_grid.is_empty() || self.kf.range_grid.is_empty() || !(self.kf.measurement_var > 0.0) {
            return bad("Kalman grids must be non-empty and measurement_var positive".into());
        }
        if self.cnn.kernel.is_multiple_of(2) {
            return bad("cnn kernel must be odd".into());
        }
        if self.music_grid < 2 {
            return bad("music_grid needs at least two points".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method must be enabled".into());
        }
        if (self.has(Method::Music) || self.has(Method::Esprit)) && self.targets + 2 > self.radio.n_rx {
            return bad(format!(
                "subspace baselines need n_rx >= Q + 2, got {} for Q = {}",
                self.radio.n_rx, self.targets
            ));
        }
        Ok(())
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_validate() {
        EpisodeConfig::desk().validate().unwrap();
        EpisodeConfig::paper().validate().unwrap();
    }

    #[test]
    fn overlay_merges_nested_fields() {
        let c = EpisodeConfig::from_json_over(&EpisodeConfig::desk(), r#"{"targets": 2, "radio": {"slots": 8}}"#).unwrap();
        assert_eq!(c.targets, 2);
        assert_eq!(c.radio.slots, 8);
        assert_eq!(c.radio.n_rx, 8);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in [r#"{"target": 2}"#, r#"{"radio": {"slot": 8}}"#, r#"{"vae": {"size": 1}}"#] {
            let e = EpisodeConfig::from_json_over(&EpisodeConfig::desk(), bad).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{e}");
        }
    }

    #[test]
    fn invariants_are_checked() {
        let e = EpisodeConfig::from_json_over(&EpisodeConfig::desk(), r#"{"train_blocks": 600}"#).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        let e = EpisodeConfig::from_json_over(&EpisodeConfig::desk(), r#"{"probe_beams": 17}"#).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn methods_parse() {
        assert_eq!("esprit".parse::<Method>().unwrap(), Method::Esprit);
        assert!("foo".parse::<Method>().is_err());
    }
}
