//! Semantic code retrieval over program graphs and text graphs.
//!
//! Text descriptions and code snippets are both turned into directed, relation
//! labeled multigraphs, encoded with a shared relational graph-convolution
//! layer, compared node-by-node with cross attention, pooled and scored by
//! cosine similarity.

pub mod code;
pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod features;
pub mod graph;
pub mod model;
pub mod synth;
pub mod tensor;
pub mod text_graph;
pub mod train;

pub use error::{Error, Result};
