//! Retrieval over versioned technical-specification corpora.
//!
//! The engine builds three stores from plain-text specifications and Change
//! Request dumps:
//!
//! * [`spec_db::SpecDb`] holds clause-aligned chunks with exact metadata lookup
//!   and dense retrieval.
//! * [`change_db::ChangeDb`] holds line-level diffs between adjacent versions of
//!   every clause.
//! * [`tdoc_db::TdocDb`] holds one chunk per enumerated change of a Change
//!   Request, paired with its reason and consequence.
//!
//! [`pipeline`] ties them together: hypothetical-document expansion, initial
//! retrieval, recursive cross-reference resolution ([`crossref`]), evolution
//! retrieval and prompt assembly. [`eval`] scores cross-reference retrieval
//! against a gold set.
//!
//! Everything runs offline with [`embedding::MockEmbedder`] and
//! [`embedding::NullGenerator`]. Data-parallel loops use rayon when the
//! `parallel` feature is enabled (the default) and fall back to sequential
//! iteration otherwise.

pub mod change_db;
pub mod config;
pub mod corpus;
pub mod crossref;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod par;
pub mod pipeline;
pub mod spec_db;
pub mod store;
pub mod tdoc_db;

pub use error::{Error, Result};
