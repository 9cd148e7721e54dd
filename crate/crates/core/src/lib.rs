//! Validation, near-duplicate detection and external-evidence enrichment for
//! Portuguese fake-news corpora, plus the analytics and few-shot evaluation
//! built on the enriched records.

pub mod analytics;
pub mod claim;
pub mod dedup;
pub mod enrich;
pub mod error;
pub mod eval;
pub mod langid;
pub mod matching;
pub mod model;
pub(crate) mod par;
pub mod providers;
pub mod ratings;
pub mod records;
pub mod textprep;
pub mod validation;

pub use error::{Error, Result};
