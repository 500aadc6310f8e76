//! Non-neural machinery for a compact multimodal reasoning pipeline.
//!
//! The crate covers the deterministic parts of the stack that surround the
//! model itself: planning how images turn into token grids, laying out fused
//! text+image sequences, rendering and repairing reasoning transcripts,
//! curating and synthesizing training records, balancing stage mixtures, and
//! scoring accuracy/latency/token trade-offs.

pub mod curate;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod layout;
pub mod mixture;
pub mod record;
pub mod synth;
pub mod tokenize;
pub mod transcript;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
