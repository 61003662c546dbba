//! Joint disease name recognition and normalization.
//!
//! Every word span of a sentence is scored against every concept of a
//! controlled vocabulary as `context + λ · dictionary`, where the context score
//! comes from a learned span representation and the dictionary score is the
//! best TF-IDF character-n-gram cosine between the span and the concept's
//! synonyms. The highest-scoring label (possibly Null) wins for each span and
//! overlapping winners are resolved greedily.

pub mod abbrev;
mod binio;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod lexicon;
pub mod matcher;
pub mod pipeline;
pub mod spanmodel;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
