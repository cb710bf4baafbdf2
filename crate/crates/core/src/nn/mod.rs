//! Dense networks, reverse-mode gradients and the Adam optimizer.

mod adam;
mod checkpoint;
mod mlp;

pub use adam::{adam_step, AdamState, LrSchedule};
pub use checkpoint::{Checkpoint, CheckpointHeader, CHECKPOINT_MAGIC};
pub use mlp::{backward, mlp_forward, param_count, Activation, ForwardCache, Mlp, MlpSpec, ParamStore, LEAKY_RELU_SLOPE};
