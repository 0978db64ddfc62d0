//! Ground-truth scene: moving point targets, static clutter patches and the
//! received echo they produce for a given transmit block.

mod config;
mod echo;
mod state;

pub use config::{RadioConfig, SceneConfig, TargetKind, TypeProfile, SPEED_OF_LIGHT};
pub use echo::{noise_matrix, noiseless_echo, synthesize_echo, EchoBlock};
pub use state::{
    advance_scene, init_scene, path_gain, ClutterPatch, SceneSnapshot, SceneState, TargetState,
};

use std::f64::consts::PI;

use crate::numerics::{Complex64, ComplexVector};

/// Unit-norm half-wavelength ULA response, entry k = e^{jπk·sinθ}/√n.
pub fn steering_vector(theta: f64, n_elems: usize) -> ComplexVector {
    let norm = 1.0 / (n_elems as f64).sqrt();
    let s = theta.sin();
    (0..n_elems)
        .map(|k| Complex64::from_polar(norm, PI * k as f64 * s))
        .collect()
}
