//! Quote corpus search: ingestion, quote-level aggregation, a purpose-built
//! inverted index and the query engine behind the search API.

pub mod aggregate;
pub mod index;
pub mod ingest;
pub mod model;
pub mod query;
pub mod synth;

pub use aggregate::{canonicalize_text, consensus_scores, merge_occurrences, CanonicalKey};
pub use index::{IndexKind, IndexSet, IndexSnapshot, StoredDoc};
pub use model::*;
pub use query::{autocomplete, execute, SearchQuery, SearchResponse};
