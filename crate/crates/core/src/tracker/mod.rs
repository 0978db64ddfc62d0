//! The per-block tracking loop: probing, echo conditioning, guided sampling,
//! beam selection, baselines, replay training, metrics and persistence.

mod buffer;
mod config;
mod episode;
mod metrics;
mod runner;

pub use buffer::ReplayBuffer;
pub use config::{
    CnnSettings, DdpmSettings, EmaSettings, EpisodeConfig, KfSettings, Method, Profile, VaeSettings,
};
pub use episode::{BlockFlags, BlockRecord, Episode, MethodRecord, Phase};
pub use metrics::{aggregate_predictions, associate_by_angle, hungarian, per_target_loss, rsse, Prediction};
pub use runner::{checkpoint_path, run_episode, EpisodeSummary, MethodSummary, RunOptions};
