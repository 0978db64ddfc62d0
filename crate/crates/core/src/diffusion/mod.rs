//! Conditional DDPM: variance schedule, closed-form forward corruption,
//! classifier-free training objective, guided ancestral sampling, state
//! packing and EMA normalizers.

mod denoiser;
mod ema;
mod sampler;
mod schedule;
mod state;

pub use denoiser::{
    diffusion_loss, draw_training_noise, training_step, Denoiser, DenoiserConfig, NoisePredictor,
    TrainingDraws,
};
pub use ema::{DeviationStat, EmaNormalizer};
pub use sampler::{conditional_sample, forward_noise, guided_sample};
pub use schedule::{DiffusionSchedule, SigmaChoice};
pub use state::{pack_state, unpack_state, StateBounds, StateVector};
