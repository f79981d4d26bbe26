//! The forecasting model: bicomponent graph convolution, multi-range attention,
//! the graph-convolutional GRU cell and the encoder-decoder stack.
//!
//! Every function works on batches. A batch of `B` graph signals over `n`
//! nodes with `p` features is a `(B·n) × p` matrix made of `B` consecutive
//! `n`-row blocks; graph operators act on each block independently and dense
//! parameter products act on all rows at once. `B = 1` is the single-sample case.

mod cell;
pub mod checkpoint;
mod config;
mod layers;
mod params;
mod seq2seq;

pub use cell::{bgcgru_step, CellOutput};
pub use checkpoint::Checkpoint;
pub use config::{ModelConfig, RangeMixing};
pub use layers::{
    bicomponent_forward, graph_conv, mra_bgcn, multi_range_attention, Activation, Attended,
};
pub use params::{CellParams, GateParams, ModelParams};
pub use seq2seq::{forecast, predict, DecoderFeed};
