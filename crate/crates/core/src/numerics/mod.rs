//! Dense matrix arithmetic, reverse-mode differentiation and optimisation.

pub mod adam;
pub mod elementary;
mod matrix;
pub mod rng;
mod sparse;
pub mod tape;

pub use adam::{adam_step, clip_global_norm, AdamConfig, AdamState};
pub use matrix::{softmax_over, Matrix};
pub use rng::Rng;
pub use sparse::{SparseOp, Summation};
pub use tape::{Gradients, Tape, Var};
