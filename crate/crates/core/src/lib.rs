//! Spatial-temporal traffic forecasting over sensor road networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense matrices, a define-by-run gradient tape, Adam, seeded RNG.
//! - [`graphs`]: the node-wise sensor graph, the edge-wise graph built from edge
//!   interaction patterns (or its line-graph / identity ablations), incidence and
//!   row normalisation.
//! - [`model`]: bicomponent graph convolution, multi-range attention, the graph
//!   convolutional GRU cell and the encoder-decoder forecaster, plus checkpoints.
//! - [`data`]: readings tables, z-score scaling, chronological windowing and a
//!   synthetic traffic generator.
//! - [`training`]: masked MAE, learning-rate and scheduled-sampling schedules and
//!   the training loop.
//! - [`eval`]: masked metrics, the historical-average baseline and horizon reports.
//! - [`config`]: the run configuration file shared by the command-line tool.
//! - [`gradcheck`]: finite-difference verification of every layer's gradients.

pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod graphs;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
pub use numerics::{Matrix, Rng};
