//! Logistic collective matrix factorization over multi-relational binary
//! databases.
//!
//! Every entity of every type gets one k-dimensional vector shared by all
//! relations it takes part in; the probability that a cell `r(e1, e2)` is
//! true is `sigmoid(phi_e1 . phi_e2)`, optionally plus per-entity biases and
//! a per-relation offset. Vectors are fitted by plain SGD over observed
//! tuples and sampled negatives.

pub mod error;
pub mod cli;
pub mod embed_tools;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod rng;
pub mod schema;
pub mod synth;
pub mod train;

mod fsutil;

pub use error::{Error, Result};
pub use fsutil::write_atomic;
pub use model::EmbeddingStore;
pub use schema::{Database, LabeledCell, Observation, SchemaManifest, TupleRecord};
pub use train::{train, TrainConfig, TrainLog};
