//! Hypernetworks and embedding-based conditioning on a small reverse-mode
//! autodiff engine.
//!
//! The crate is organised bottom-up:
//!
//! - [`autodiff`]: tape, primitives and finite-difference checking
//! - [`nets`]: MLP specs, flat parameter vectors, spectral complexity, conv
//! - [`analysis`]: clones, minimality, normality and permutation isomorphisms
//! - [`composition`]: hypernetwork `g(x; f(I))` and embedding `q(x ‖ e(I))`
//! - [`targets`]: frozen random ground-truth functions
//! - [`data`]: IDX / CIFAR-10 loaders and self-supervised task builders
//! - [`train`]: losses, optimizers and the training loop
//! - [`gradcheck`]: backprop against central differences
//! - [`theory`]: parameter-budget calculators
//! - [`par`]: data-parallel helpers with a sequential fallback

pub mod analysis;
pub mod autodiff;
pub mod composition;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod nets;
pub mod par;
pub mod rng;
pub mod targets;
pub mod tensor;
pub mod theory;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
