//! A from-scratch neural-network library whose core primitive is a
//! unified trainable neuron: per-input non-linearity and linear
//! transformation merged into one expression,
//! `y = sum_i (alpha_i + tanh(beta_i x_i)) * gamma_i x_i + delta`,
//! with every parameter trainable and the backward pass derived
//! analytically.
//!
//! The crate ships the dense-matrix substrate, the neuron layer with
//! its three parameter-sharing modes, a feedforward classifier with
//! softmax cross-entropy, Adam with step decay, an IDX MNIST loader,
//! and a deterministic training CLI.

pub mod aptx;
pub mod error;
pub mod gradcheck;
pub mod mnist;
pub mod network;
pub mod optim;
pub mod tensor;
pub mod train;

pub use aptx::{
    aptx_backward, aptx_forward, init_aptx, trainable_count, AptxLayerParams, LayerGradients,
    SharingMode,
};
pub use error::{Error, Result};
pub use network::{
    backward, forward, init_network, load_checkpoint, predict, save_checkpoint,
    softmax_cross_entropy, total_parameters, LinearLayerParams, Network,
};
pub use optim::{adam_step, lr_at_epoch, AdamState, StepLrSchedule};
pub use tensor::{elementwise, rng_uniform, ElementwiseOp, Matrix, Rng};
pub use train::{train, EpochMetrics, TrainConfig};
