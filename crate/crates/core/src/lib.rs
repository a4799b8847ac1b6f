//! Multi-stream convolutional networks built from down-scaled base
//! architectures, where each stream sees one intensity slice of the input
//! image. Ships with the supporting pieces an end-to-end robustness
//! experiment needs: a deterministic from-scratch tensor engine, an
//! asset-free image corruption suite, parameter/FLOPs accounting, dataset
//! plumbing, and a train/eval harness.

pub mod analyzer;
pub mod checkpoint;
pub mod corruptions;
pub mod datasets;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod graph;
pub mod loss;
pub mod optim;
pub mod slicer;
pub(crate) mod par;
pub mod tensor;
pub mod zoo;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor};
