use serde::{Deserialize, Serialize};

use super::buffer::ReplayBuffer;
use super::config::{EpisodeConfig, Method};
use super::metrics::{aggregate_predictions, associate_by_angle, per_target_loss, rsse, Prediction};
use crate::baselines::{
    esprit_angles, ls_range, music_angles, music_grid, sample_covariance, tune_process_noise, CnnConfig,
    CnnRegressor, KalmanTrack, ProcessNoise,
};
use crate::beam::{assemble_transmit, beam_score, dft_codebook, initial_plan, select_beams, BeamPlan, Codebook};
use crate::diffusion::{
    guided_sample, pack_state, training_step, unpack_state, Denoiser, DenoiserConfig, DiffusionSchedule,
    EmaNormalizer, StateBounds,
};
use crate::error::{Error, Result};
use crate::nn::Mat;
use crate::numerics::{ComplexMatrix, RngStream};
use crate::scene::{advance_scene, init_scene, synthesize_echo, SceneState};
use crate::vae::{echo_energy, echo_to_tensor, rms_normalize, Vae, VaeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Infer,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Infer => "infer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: Method,
    pub estimates: Prediction,
    pub angle_rsse: f64,
    pub dist_rsse: f64,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockFlags {
    pub music_degenerate: bool,
    pub esprit_unreliable: bool,
    pub ranging_regularized: bool,
    pub state_clamped: bool,
    pub energy_floor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub block: usize,
    pub phase: Phase,
    pub truth: Prediction,
    pub beams: Vec<usize>,
    pub methods: Vec<MethodRecord>,
    pub flags: BlockFlags,
    pub energy_db: f64,
    pub vae_reconstruction: f64,
    pub vae_kl: f64,
    pub ddpm_loss: Option<f64>,
    pub cnn_loss: Option<f64>,
}

impl BlockRecord {
    pub fn method(&self, m: Method) -> Option<&MethodRecord> {
        self.methods.iter().find(|r| r.method == m)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Purpose {
    Metric,
    Training,
}

/// Complete tracker state between blocks. Serializing it is a checkpoint:
/// all randomness is drawn from streams labelled by block index, so a
/// restored episode continues bit-identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Episode {
    pub config: EpisodeConfig,
    pub seed: u64,
    /// Next block to run, 1-based.
    pub block: usize,
    scene: SceneState,
    codebook: Codebook,
    plan: BeamPlan,
    baseline_plan: BeamPlan,
    schedule: DiffusionSchedule,
    bounds: StateBounds,
    vae: Vae,
    denoiser: Denoiser,
    cnn: CnnRegressor,
    norm_c: EmaNormalizer,
    norm_x: EmaNormalizer,
    replay: ReplayBuffer<(Vec<f64>, Vec<f64>)>,
    echoes: ReplayBuffer<Vec<f64>>,
    kf: Vec<KalmanTrack>,
    kf_history: Vec<Vec<(f64, f64)>>,
    kf_noise: ProcessNoise,
    ddpm_next: Option<Prediction>,
    cnn_next: Option<Prediction>,
    /// Ground-truth reads for training purposes during inference blocks.
    /// Stays zero unless the phase discipline is broken.
    pub truth_audit: u64,
}

impl Episode {
    pub fn new(config: EpisodeConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let root = RngStream::new(seed, "episode");
        let radio = &config.radio;
        let q = config.targets;
        let scene = init_scene(radio, &config.scene, q, seed)?;
        let codebook = dft_codebook(radio.n_tx, config.codebook_size)?;
        let budget = radio.tx_power_w();
        let plan = initial_plan(&codebook, config.probe_beams, config.scene.angle_limit, budget)?;
        let schedule = DiffusionSchedule::new(config.diffusion_steps, config.tau_start, config.tau_end, config.sigma)?;
        let cond_dim = config.vae.latent + 1;
        let vae = Vae::new(
            VaeConfig {
                input_dim: 2 * radio.n_rx * radio.slots,
                hidden: config.vae.hidden,
                latent: config.vae.latent,
            },
            &root.child("init/vae"),
        )?;
        let denoiser = Denoiser::new(
            DenoiserConfig {
                state_dim: 3 * q,
                cond_dim,
                hidden: config.ddpm.hidden,
                time_dim: config.ddpm.time_dim,
            },
            &root.child("init/ddpm"),
        )?;
        let cnn = CnnRegressor::new(
            CnnConfig {
                input_len: cond_dim,
                channels: config.cnn.channels,
                dense: config.cnn.dense,
                output: 3 * q,
                kernel: config.cnn.kernel,
            },
            &root.child("init/cnn"),
        )?;
        let ema = &config.ema;
        let norm_x = if ema.state_identity {
            EmaNormalizer::identity(3 * q)
        } else {
            EmaNormalizer::new(3 * q, ema.decay, ema.eps, ema.stat)
        };
        let norm_c = EmaNormalizer::new(cond_dim, ema.decay, ema.eps, ema.stat);
        let kf_noise = ProcessNoise {
            angle: config.kf.angle_grid[config.kf.angle_grid.len() / 2],
            range: config.kf.range_grid[config.kf.range_grid.len() / 2],
        };
        Ok(Self {
            bounds: StateBounds {
                d_min: config.scene.r_min,
                d_max: config.scene.r_cell,
            },
            replay: ReplayBuffer::new(config.buffer_capacity),
            echoes: ReplayBuffer::new(config.buffer_capacity),
            kf: Vec::new(),
            kf_history: vec![Vec::new(); q],
            kf_noise,
            ddpm_next: None,
            cnn_next: None,
            truth_audit: 0,
            block: 1,
            baseline_plan: plan.clone(),
            plan,
            scene,
            codebook,
            schedule,
            vae,
            denoiser,
            cnn,
            norm_c,
            norm_x,
            config,
            seed,
        })
    }

    pub fn finished(&self) -> bool {
        self.block > self.config.blocks
    }

    pub fn phase(&self) -> Phase {
        if self.block <= self.config.train_blocks {
            Phase::Train
        } else {
            Phase::Infer
        }
    }

    pub fn scene(&self) -> &SceneState {
        &self.scene
    }

    fn truth(&mut self, purpose: Purpose) -> Prediction {
        if purpose == Purpose::Training && self.phase() == Phase::Infer {
            self.truth_audit += 1;
        }
        self.scene.angles().into_iter().zip(self.scene.ranges()).collect()
    }

    fn stream(&self, label: &str) -> RngStream {
        RngStream::new(self.seed, "episode").child(label).child(self.block)
    }

    fn clamp_estimate(&self, theta: f64, d: f64) -> (f64, f64) {
        let lim = self.config.scene.angle_limit;
        (theta.clamp(-lim, lim), d.clamp(self.bounds.d_min, self.bounds.d_max))
    }

    /// Runs the current block and advances to the next one.
    pub fn step(&mut self) -> Result<BlockRecord> {
        if self.finished() {
            return Err(Error::State("episode already finished".into()));
        }
        let cfg = self.config.clone();
        let radio = &cfg.radio;
        let q = cfg.targets;
        let l = self.block;
        let phase = self.phase();
        let training = phase == Phase::Train;
        let budget = radio.tx_power_w();
        let mut flags = BlockFlags::default();

        // Probe with the current plan and collect the echo.
        let transmit = assemble_transmit(&self.plan, &self.codebook, radio.slots, budget, &self.stream("symbols"))?;
        let echo = synthesize_echo(&self.scene, &transmit, radio, &self.stream("noise"))?;
        let beams = self.plan.indices.clone();

        let truth = self.truth(Purpose::Metric);
        let mut estimates: Vec<(Method, Prediction)> = Vec::new();

        if cfg.has(Method::Ddpm) {
            if let Some(p) = self.ddpm_next.take() {
                estimates.push((Method::Ddpm, p));
            }
        }
        if cfg.has(Method::Cnn) {
            if let Some(p) = self.cnn_next.take() {
                estimates.push((Method::Cnn, p));
            }
        }
        if cfg.has(Method::Kf) {
            if let Some(p) = self.kalman_block(training)? {
                estimates.push((Method::Kf, p));
            }
        }
        if cfg.has(Method::Music) || cfg.has(Method::Esprit) {
            let (b_tx, b_echo) = if cfg.shared_beams {
                (transmit.clone(), echo.clone())
            } else {
                let tx = assemble_transmit(
                    &self.baseline_plan,
                    &self.codebook,
                    radio.slots,
                    budget,
                    &self.stream("baseline-symbols"),
                )?;
                let rx = synthesize_echo(&self.scene, &tx, radio, &self.stream("baseline-noise"))?;
                (tx, rx)
            };
            let cov = sample_covariance(&b_echo);
            let lambda = radio.wavelength();
            let subspace = |angles: Vec<f64>, flags: &mut BlockFlags| -> Result<Prediction> {
                let r = ls_range(&b_echo, &b_tx, &angles, lambda, self.bounds.d_min, self.bounds.d_max)?;
                flags.ranging_regularized |= r.regularized;
                let est: Prediction = angles.into_iter().zip(r.distances).collect();
                Ok(associate_by_angle(&truth, &est))
            };
            if cfg.has(Method::Music) {
                let grid = music_grid(cfg.music_grid, cfg.scene.angle_limit);
                let m = music_angles(&cov, q, &grid)?;
                flags.music_degenerate = m.flagged;
                estimates.push((Method::Music, subspace(m.angles, &mut flags)?));
            }
            if cfg.has(Method::Esprit) {
                let e = esprit_angles(&cov, q)?;
                flags.esprit_unreliable = e.flagged;
                estimates.push((Method::Esprit, subspace(e.angles, &mut flags)?));
            }
        }

        // Echo features and VAE update.
        let tensor = rms_normalize(&echo_to_tensor(&echo))?;
        let (energy, floor) = echo_energy(&echo);
        flags.energy_floor = floor;
        let z = self.vae.encode(&tensor)?;
        let (mut recon, mut kl) = (0.0, 0.0);
        for e in 0..cfg.vae.epochs {
            let mut rows = vec![tensor.clone()];
            if !self.echoes.is_empty() && cfg.vae.replay > 0 {
                for r in self.echoes.sample(cfg.vae.replay, &self.stream("vae-batch").child(e))? {
                    rows.push(r.clone());
                }
            }
            let terms = self.vae.train_step(&Mat::from_rows(&rows), cfg.vae.lr, &self.stream("vae-eps").child(e))?;
            recon += terms.reconstruction;
            kl += terms.kl;
        }
        let epochs = cfg.vae.epochs.max(1) as f64;
        self.echoes.push(tensor);

        let mut c_raw = z;
        c_raw.push(energy);
        let c = self.norm_c.apply(&c_raw)?;

        // Guided sampling, aggregation and beam selection for block l + 1.
        if cfg.has(Method::Ddpm) {
            let root = self.stream("sample");
            let streams: Vec<RngStream> = (0..cfg.samples).map(|k| root.child(k)).collect();
            let raw: Vec<Vec<f64>> = guided_sample(&self.denoiser, &self.schedule, &c, cfg.guidance, &streams)
                .iter()
                .map(|s| self.norm_x.invert(s))
                .collect::<Result<_>>()?;
            if raw.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("non-finite diffusion sample at block {l}")));
            }
            let (point, per_sample) = aggregate_predictions(&raw, &self.bounds)?;
            let scores: Vec<f64> = self
                .codebook
                .beams
                .iter()
                .map(|v| per_sample.iter().map(|p| beam_score(v, p)).sum::<f64>() / per_sample.len() as f64)
                .collect();
            self.plan = select_beams(&scores, cfg.probe_beams, budget)?;
            self.ddpm_next = Some(point);
        }
        if cfg.has(Method::Cnn) {
            let out = self.cnn.forward(&c)?;
            let (t, d) = unpack_state(&out, &self.bounds);
            self.cnn_next = Some(t.into_iter().zip(d).collect());
        }

        // Scene dynamics and ground-truth feedback.
        self.scene = advance_scene(&self.scene, radio);
        if training {
            let next = self.truth(Purpose::Training);
            let (th, d): (Vec<f64>, Vec<f64>) = next.into_iter().unzip();
            let (x_next, clamped) = pack_state(&th, &d, &self.bounds);
            flags.state_clamped = clamped;
            self.norm_x.update(&x_next)?;
            self.replay.push((c_raw.clone(), x_next));
        }
        self.norm_c.update(&c_raw)?;

        let (mut ddpm_loss, mut cnn_loss) = (None, None);
        if training {
            let (mut dl, mut cl) = (0.0, 0.0);
            for e in 0..cfg.ddpm.epochs.max(cfg.cnn.epochs) {
                let idx = self.replay.sample_indices(cfg.batch_size, &self.stream("replay").child(e))?;
                let mut cm = Mat::zeros(idx.len(), c_raw.len());
                let mut xm = Mat::zeros(idx.len(), 3 * q);
                let mut xr = Mat::zeros(idx.len(), 3 * q);
                for (r, &i) in idx.iter().enumerate() {
                    let (cr, x) = self.replay.get(i).expect("sampled index");
                    cm.row_mut(r).copy_from_slice(&self.norm_c.apply(cr)?);
                    xm.row_mut(r).copy_from_slice(&self.norm_x.apply(x)?);
                    xr.row_mut(r).copy_from_slice(x);
                }
                if cfg.has(Method::Ddpm) && e < cfg.ddpm.epochs {
                    let noise = self.stream("ddpm").child(e);
                    dl += training_step(
                        &mut self.denoiser,
                        &self.schedule,
                        &xm,
                        &cm,
                        cfg.p_drop,
                        cfg.ddpm.lr,
                        &noise,
                    )?;
                }
                if cfg.has(Method::Cnn) && e < cfg.cnn.epochs {
                    cl += self.cnn.train_step(&cm, &xr, cfg.cnn.lr)?;
                }
            }
            if cfg.has(Method::Ddpm) && cfg.ddpm.epochs > 0 {
                ddpm_loss = Some(dl / cfg.ddpm.epochs as f64);
            }
            if cfg.has(Method::Cnn) && cfg.cnn.epochs > 0 {
                cnn_loss = Some(cl / cfg.cnn.epochs as f64);
            }
            if l == cfg.train_blocks {
                self.norm_x.frozen = true;
            }
        }

        let methods = estimates
            .into_iter()
            .map(|(method, est)| {
                let (angle_rsse, dist_rsse) = rsse(&truth, &est)?;
                Ok(MethodRecord {
                    method,
                    losses: per_target_loss(&truth, &est, cfg.eta),
                    estimates: est,
                    angle_rsse,
                    dist_rsse,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        self.block += 1;
        Ok(BlockRecord {
            block: l,
            phase,
            truth,
            beams,
            methods,
            flags,
            energy_db: energy,
            vae_reconstruction: recon / epochs,
            vae_kl: kl / epochs,
            ddpm_loss,
            cnn_loss,
        })
    }

    /// Kalman prediction for the current block, plus ground-truth updates
    /// and one-off noise tuning during training.
    fn kalman_block(&mut self, training: bool) -> Result<Option<Prediction>> {
        let dt = self.config.radio.block_s();
        let r = self.config.kf.measurement_var;
        if self.kf.is_empty() {
            // Tracks start from the first ground truth, available in block 1.
            let truth = self.truth(Purpose::Training);
            self.kf = truth
                .iter()
                .map(|&(t, d)| KalmanTrack::new(t, d, dt, self.kf_noise, r))
                .collect();
            for (h, p) in self.kf_history.iter_mut().zip(&truth) {
                h.push(*p);
            }
            return Ok(None);
        }
        for k in &mut self.kf {
            k.predict();
        }
        let est: Prediction = self
            .kf
            .iter()
            .map(|k| self.clamp_estimate(k.angle(), k.range()))
            .collect();
        if training {
            let truth = self.truth(Purpose::Training);
            for ((k, h), &(t, d)) in self.kf.iter_mut().zip(&mut self.kf_history).zip(&truth) {
                k.update(t, d)?;
                h.push((t, d));
            }
            if self.block == self.config.train_blocks {
                self.retune_kalman()?;
            }
        }
        Ok(Some(est))
    }

    fn retune_kalman(&mut self) -> Result<()> {
        let dt = self.config.radio.block_s();
        let r = self.config.kf.measurement_var;
        self.kf_noise = tune_process_noise(&self.kf_history, dt, r, &self.config.kf.angle_grid, &self.config.kf.range_grid)?;
        let mut tracks = Vec::with_capacity(self.kf_history.len());
        for seq in &self.kf_history {
            let (t0, d0) = seq[0];
            let mut k = KalmanTrack::new(t0, d0, dt, self.kf_noise, r);
            for &(t, d) in &seq[1..] {
                k.predict();
                k.update(t, d)?;
            }
            tracks.push(k);
        }
        self.kf = tracks;
        Ok(())
    }

    pub fn kalman_noise(&self) -> ProcessNoise {
        self.kf_noise
    }

    pub fn transmit_plan(&self) -> &BeamPlan {
        &self.plan
    }

    pub fn echo_for_plan(&self, plan: &BeamPlan) -> Result<ComplexMatrix> {
        let radio = &self.config.radio;
        let tx = assemble_transmit(plan, &self.codebook, radio.slots, radio.tx_power_w(), &self.stream("symbols"))?;
        synthesize_echo(&self.scene, &tx, radio, &self.stream("noise"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> EpisodeConfig {
        let mut c = EpisodeConfig::desk();
        c.targets = 1;
        c.blocks = 6;
        c.train_blocks = 3;
        c.samples = 2;
        c.diffusion_steps = 5;
        c.vae.latent = 4;
        c.vae.hidden = 8;
        c.ddpm.hidden = 8;
        c.ddpm.time_dim = 8;
        c.cnn.channels = [2, 2, 2];
        c.cnn.dense = 4;
        c.batch_size = 8;
        c.music_grid = 64;
        c
    }

    #[test]
    fn runs_all_blocks_with_expected_method_rows() {
        let mut ep = Episode::new(tiny(), 3).unwrap();
        let mut recs = Vec::new();
        while !ep.finished() {
            recs.push(ep.step().unwrap());
        }
        assert_eq!(recs.len(), 6);
        assert_eq!(recs[0].methods.len(), 2);
        assert!(recs[1..].iter().all(|r| r.methods.len() == 5));
        assert_eq!(recs[3].phase, Phase::Infer);
        assert_eq!(ep.truth_audit, 0);
        assert!(ep.step().is_err());
        for r in &recs {
            assert!(r.methods.iter().all(|m| m.angle_rsse >= 0.0 && m.dist_rsse >= 0.0));
            assert_eq!(r.beams.len(), 4);
        }
    }

    #[test]
    fn serialized_state_resumes_identically() {
        let mut a = Episode::new(tiny(), 5).unwrap();
        for _ in 0..2 {
            a.step().unwrap();
        }
        let json = serde_json::to_string(&a).unwrap();
        let mut b: Episode = serde_json::from_str(&json).unwrap();
        while !a.finished() {
            let ra = a.step().unwrap();
            let rb = b.step().unwrap();
            assert_eq!(serde_json::to_string(&ra).unwrap(), serde_json::to_string(&rb).unwrap());
        }
    }
}
