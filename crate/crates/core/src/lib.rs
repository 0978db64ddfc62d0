//! Multi-target RF tracking workbench.
//!
//! A monostatic full-duplex base station probes a scene of moving point
//! targets and static clutter with codebook beams. Each block's echo is
//! compressed by a VAE, and a classifier-free-guided conditional diffusion
//! model predicts the next-block target states, which in turn drive beam
//! selection. MUSIC, ESPRIT, a Kalman filter and a CNN regressor run
//! alongside on the same echoes for comparison.

pub mod baselines;
pub mod beam;
pub mod diffusion;
pub mod error;
pub mod nn;
pub mod numerics;
pub mod scene;
pub mod tracker;
pub mod vae;

pub use error::{Error, Result};
