//! Parallel-circuit (PC) feedforward networks.
//!
//! A PC network splits every hidden layer of a multilayer perceptron into `k`
//! equal, laterally unconnected circuits that share the input and output
//! layers. With `k = 1` it is an ordinary fully connected MLP (the single
//! circuit, SC, baseline). Three dropout variants are provided:
//!
//! - node dropout (ND): independent per-node masks, drawn per circuit;
//! - non-fixed DropCircuit (NFD): one bit per circuit, redrawn for every
//!   presented sample;
//! - fixed DropCircuit (FD): one circuit mask per training instance, drawn
//!   once and reused for the whole run.
//!
//! The crate also carries the data loaders (IDX, CSV), the SGD training loop
//! and the benchmark runner used by the `pcnet` CLI.

pub mod bench;
pub mod data;
pub mod dropout;
pub mod error;
pub mod math;
pub mod network;
pub mod trainer;

pub use data::Dataset;
pub use dropout::{DropoutKind, DropoutPolicy, FixedMaskTable, MaskSet};
pub use error::{Error, Result};
pub use math::{Matrix, Purpose, RngKey};
pub use network::{Gradients, OutputHead, Parameters, Topology};
pub use trainer::{Hyperparams, TrialResult};
