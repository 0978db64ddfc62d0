//! Small differentiable-network substrate: parameter storage, a handful of
//! layer kinds with hand-written reverse passes, Adam, finite-difference
//! gradient checks and a checkpoint file format.

mod adam;
mod checkpoint;
mod gradcheck;
mod layers;
mod param;
mod tensor;

pub use adam::{adam_step, AdamConfig};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{check_gradients, GradCheck};
pub use layers::{
    relu, relu_backward, silu, silu_backward, Conv1d, Dense, LayerNorm, LayerSpec, Sequential, Tape,
};
pub use param::{Grads, Param, ParamId, ParamStore};
pub use tensor::Mat;
