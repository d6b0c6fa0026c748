//! Knowledge-graph refinement by alternating ontology-driven soft-logic
//! inference with type-gated embedding models.

pub mod cli;
pub mod config;
pub mod embed;
pub mod error;
pub mod eval;
pub mod kg;
pub mod noise;
pub mod pipeline;
pub mod psl;
pub mod synth;
pub mod util;

pub use error::{Error, Result};
