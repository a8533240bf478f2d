#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod data;
pub mod eeg;
pub mod error;
pub mod eval;
pub mod frontend;
pub mod model;
pub mod nn;
pub mod phoneme;
pub mod pipeline;
pub mod rng;
pub mod speech;
pub mod trainer;

pub use error::{Error, Result};

pub type Tensor32 = eegspeech_tensor::Tensor<f32>;
pub type Tensor64 = eegspeech_tensor::Tensor<f64>;
pub type Trainer32 = trainer::Trainer<f32>;
pub type Trainer64 = trainer::Trainer<f64>;
pub type Checkpoint32 = trainer::Checkpoint<f32>;
pub type Checkpoint64 = trainer::Checkpoint<f64>;
