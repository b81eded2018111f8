pub mod cli;
pub mod dsp;
pub mod encoders;
pub mod error;
pub mod nn;
pub mod objective;
mod io;
pub mod retrieval;
pub mod seed;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
