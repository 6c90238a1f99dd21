//! patchnote: joint bug repair and commit message generation at desk scale.
//!
//! The crate bundles a small f64 autodiff engine, a BPE subword
//! tokenizer, a buggy/fixed/commit data pipeline, a three-component
//! transformer with changes-aware dynamic attention, the training
//! regimes built on top of it, and the evaluation metrics.

pub mod bpe;
pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod diff;
pub mod error;
pub mod eval;
pub mod model;
pub mod params;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
