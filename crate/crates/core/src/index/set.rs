//! The three snapshots a deployment serves, kept and persisted together.

use std::path::Path;
use std::time::Instant;

use super::{build_article_index, build_quote_index, build_speaker_index, load_index, save_index, IndexError, IndexKind, IndexSnapshot};
use crate::ingest::Corpus;
use crate::query::{rank, ExecOptions, QueryError, RankedResults, SearchQuery, SearchResponse, Target};

#[derive(Debug, Clone)]
pub struct IndexSet {
    pub quotes: IndexSnapshot,
    pub articles: IndexSnapshot,
    pub speakers: IndexSnapshot,
}

impl IndexSet {
    pub fn build(corpus: &Corpus) -> Result<Self, IndexError> {
        Ok(IndexSet {
            quotes: build_quote_index(corpus.quotes.iter().cloned(), &corpus.catalog)?,
            articles: build_article_index(corpus.articles.iter().cloned(), &corpus.catalog)?,
            speakers: build_speaker_index(&corpus.catalog)?,
        })
    }

    pub fn empty() -> Self {
        IndexSet {
            quotes: IndexSnapshot::empty(IndexKind::Quote),
            articles: IndexSnapshot::empty(IndexKind::Article),
            speakers: IndexSnapshot::empty(IndexKind::Speaker),
        }
    }

    /// Writes `quote/`, `article/` and `speaker/` under `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), IndexError> {
        for snap in [&self.quotes, &self.articles, &self.speakers] {
            save_index(snap, &dir.join(snap.kind().as_str()))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, IndexError> {
        let load = |kind: IndexKind| -> Result<IndexSnapshot, IndexError> {
            let snap = load_index(&dir.join(kind.as_str()))?;
            if snap.kind() != kind {
                return Err(IndexError::KindMismatch {
                    expected: kind,
                    found: snap.kind(),
                });
            }
            Ok(snap)
        };
        Ok(IndexSet {
            quotes: load(IndexKind::Quote)?,
            articles: load(IndexKind::Article)?,
            speakers: load(IndexKind::Speaker)?,
        })
    }

    pub fn for_target(&self, target: Target) -> &IndexSnapshot {
        match target {
            Target::Quotation => &self.quotes,
            Target::Article => &self.articles,
        }
    }

    pub fn rank(&self, query: &SearchQuery, opts: ExecOptions) -> Result<RankedResults, QueryError> {
        rank(query, self.for_target(query.target), opts)
    }

    /// Materializes the requested page of `ranked`, with speaker names.
    pub fn respond(&self, ranked: &RankedResults, query: &SearchQuery, query_time_s: f64) -> SearchResponse {
        SearchResponse::from_ranked(ranked, query, self.for_target(query.target), Some(&self.speakers), query_time_s)
    }

    pub fn search(&self, query: &SearchQuery, opts: ExecOptions) -> Result<SearchResponse, QueryError> {
        let started = Instant::now();
        let ranked = self.rank(query, opts)?;
        let mut response = self.respond(&ranked, query, 0.0);
        response.query_time_s = started.elapsed().as_secs_f64();
        Ok(response)
    }
}
