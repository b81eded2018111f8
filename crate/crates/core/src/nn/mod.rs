//! Dense f64 tensors, hand-written forward/backward primitives, Adam,
//! a finite-difference gradient checker, and the checkpoint format.

mod checkpoint;
mod gradcheck;
pub mod ops;
mod store;
mod tensor;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointData, FORMAT_VERSION, MAGIC,
};
pub use gradcheck::{finite_diff_check, GradCheckOptions, GradCheckReport};
pub use store::{adam_step, AdamConfig, Param, ParamStore};
pub use tensor::{matmul, Tensor};
