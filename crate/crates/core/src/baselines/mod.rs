//! Benchmarks: MUSIC and ESPRIT angle estimation with least-squares ranging,
//! a constant-velocity Kalman tracker and a 1-D CNN regressor.

mod cnn;
mod kalman;
mod ranging;
mod subspace;

pub use cnn::{CnnConfig, CnnRegressor};
pub use kalman::{tune_process_noise, KalmanTrack, ProcessNoise};
pub use ranging::{ls_range, RangeEstimate};
pub use subspace::{esprit_angles, music_angles, music_grid, music_spectrum, sample_covariance, AngleEstimate};
