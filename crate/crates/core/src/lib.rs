//! Plug-and-play generative sampling.
//!
//! An energy-based sampler composes a learned prior (a denoising autoencoder or
//! a generator/encoder pair) with a replaceable condition network, and walks
//! image space or a latent code space with Langevin-style steps.

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod io;
pub mod nets;
pub mod ppgn;
pub mod rng;
pub mod samplers;
pub mod tensor;

pub use autodiff::{Gradients, Primitive, Tape, Var};
pub use error::{Error, Result};
pub use rng::{rng_normal, RngStream};
pub use tensor::Tensor;
