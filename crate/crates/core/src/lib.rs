//! Autoencoder-based co-training for multi-view representation learning.
//!
//! Each view of a dataset gets its own autoencoder. A supervised network reuses
//! every encoder, maps all view latents through one shared matrix, sums them and
//! applies ReLU to obtain a joint latent representation `z`, then classifies
//! from `z`. Training alternates between the two: every epoch first fits each
//! autoencoder on reconstruction, then fits the supervised network (updating
//! the encoders too), handing best-round weight snapshots back and forth.
//!
//! Module map:
//!
//! - [`tensor`], [`init`], [`loss`], [`rng`] hold dense `f64` matrices, Xavier
//!   init, activations and the two losses.
//! - [`optim`] is AdaDelta.
//! - [`network`] has forward and hand-derived backward passes for both networks.
//! - [`cotrain`] runs the alternating schedule, snapshot bank and early stopping.
//! - [`data`] reads CSV dataset directories, splits, batches and synthesizes data.
//! - [`eval`] has logistic regression, a diagonal GMM, ACC / macro-F1 / NMI /
//!   Jaccard and the four-column evaluation protocol.
//! - [`config`] and [`cli`] hold the run configuration and command handlers.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod cotrain;
pub mod data;
pub mod error;
pub mod eval;
pub mod init;
pub mod loss;
pub mod network;
pub mod optim;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::RngSeed;
pub use tensor::Matrix;
