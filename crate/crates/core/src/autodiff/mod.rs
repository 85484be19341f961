//! Minimal reverse-mode automatic differentiation over dense tensors.

mod adam;
mod container;
pub mod gradcheck;
mod tape;
mod tensor;

pub use adam::{adam_step, clip_global_norm, AdamConfig, AdamState};
pub use container::{load_tensors, save_tensors, ParamStore};
pub use tape::{concat, Gradients, Tape, Var};
pub use tensor::Tensor;
