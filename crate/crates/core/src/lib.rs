//! Star_d ensembling for small feedforward ReLU networks.
//!
//! The crate is organised around six areas:
//!
//! - [`nn`]: dense ReLU networks with shifted activations, optional batch
//!   normalisation and dropout, backpropagation, and the sparse bounded
//!   network class used by the theory lab.
//! - [`optim`]: SGD/Adam and the constant / cyclic cosine learning-rate
//!   schedules.
//! - [`data`]: CSV ingestion, standard scaling, splitting, batching and a
//!   synthetic teacher task with known ground truth.
//! - [`ensemble`]: the convex star aggregate, snapshot training and the seven
//!   experiment variants.
//! - [`theory`]: brute-force checks of the geometric inequality, offset
//!   Rademacher bounds, covering bounds and lower isometry.
//! - [`experiment`]: metrics, experiment runner, theory-suite driver and
//!   report emission.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod kv;
pub mod nn;
pub mod optim;
pub mod seed;
pub mod theory;

pub use error::{Error, Result};
