//! Deep symmetric autoencoders.
//!
//! The crate covers three nested hypothesis classes of mirrored encoder/decoder
//! networks (unconstrained, biorthogonal, orthogonal), bilipschitz activations,
//! unconstrained parametrizations of the constrained classes, a reverse-mode
//! tape to train through those parametrizations, the iterated truncated-SVD
//! initialization, and evaluators for the layerwise reconstruction-error
//! bounds that connect the networks back to POD.

pub mod activations;
pub mod architecture;
pub mod autodiff;
pub mod bounds;
pub mod data_io;
mod error;
pub mod init;
pub mod linalg;
pub mod training;

pub use activations::Activation;
pub use architecture::{assemble, ClassTag, LayerParams, ParamVector, Skeleton, SymmetricAutoencoder};
pub use error::{Error, Result};
pub use linalg::Matrix;
