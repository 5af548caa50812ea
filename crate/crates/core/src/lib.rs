//! Sentence embeddings from layered token vectors.
//!
//! The crate turns per-layer token embeddings (from a transformer dump, a
//! static token table, or random token vectors) into one vector per text,
//! reshapes those vectors with fitted post-processing transforms, and scores
//! them on similarity, clustering, classification and isotropy diagnostics.

pub mod aggregate;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod models;
pub mod postprocess;
pub mod store;
pub mod tokenize;

pub use error::{Error, Result};
