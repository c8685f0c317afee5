//! Graph classifiers and an edge-dropping harness for connectome-style
//! graphs.
//!
//! The crate bundles a small reverse-mode differentiation core
//! ([`tensor`]), dataset construction and perturbation ([`data`]), a residual
//! GCN and a sparse expander-graph transformer ([`models`]), and the seeded
//! training harness and sweep drivers used to measure how much a model's
//! accuracy depends on edges versus node features ([`training`],
//! [`experiment`]).

pub mod data;
pub mod error;
pub mod experiment;
pub mod models;
pub mod optim;
pub mod rng;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
