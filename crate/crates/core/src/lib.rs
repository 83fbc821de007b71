//! Supervised blockmodel for sparse networks: joint inference of latent
//! network positions and a softmax node classifier by variational Bayesian EM.

pub mod classify;
pub mod error;
pub mod inference;
pub mod network;
pub mod optim;
pub mod special;
pub mod synth;

pub use error::{Error, Result};
pub mod toolkit;
