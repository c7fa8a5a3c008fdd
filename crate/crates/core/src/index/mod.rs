//! Purpose-built search index.
//!
//! One [`IndexSnapshot`] per corpus (quotes, articles, speakers). Each holds
//! a positional inverted index over the aggregated text field (articles
//! carry two: quotes only, and quotes plus context), keyword facet postings,
//! narrow numeric columns with sorted permutations for range scans, the
//! stored documents, and for speakers a case-folded name prefix index.

mod set;
mod storage;
mod tokenize;
pub mod varint;

#[cfg(feature = "baseline")]
pub mod baseline;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use caseless::default_case_fold_str;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    epoch_day, ArticleRecord, CanonicalQuote, DateRange, SpeakerCatalog, SpeakerProfile,
};

pub use set::IndexSet;
pub use storage::{directory_size, load_index, read_manifest, save_index, IndexManifest, SectionEntry, SCHEMA_VERSION};
pub use tokenize::{
    aggregate_text_fields, tokenize, tokenize_spans, FieldSource, Token, TokenSpan, POSITION_GAP,
    SEGMENT_SEPARATOR,
};

/// Longest name prefix stored in the speaker prefix index.
pub const MAX_PREFIX_CHARS: usize = 12;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate document id: {0}")]
    DuplicateId(String),
    #[error("document kind {found} does not belong in a {expected} index")]
    KindMismatch { expected: IndexKind, found: IndexKind },
    #[error("checksum mismatch")]
    ChecksumMismatch,
    #[error("version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: String, found: String },
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Quote,
    Article,
    Speaker,
}

impl IndexKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IndexKind::Quote => "quote",
            IndexKind::Article => "article",
            IndexKind::Speaker => "speaker",
        }
    }
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IndexKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quote" => Ok(IndexKind::Quote),
            "article" => Ok(IndexKind::Article),
            "speaker" => Ok(IndexKind::Speaker),
            other => Err(format!("unknown index kind {other:?}")),
        }
    }
}

/// Which aggregated field a text query runs against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextScope {
    /// Quote texts (plus speaker name for quotes, profile text for speakers).
    Primary,
    /// Article quotes followed by their context windows.
    WithContext,
}

impl TextScope {
    pub(crate) fn id(self) -> u8 {
        match self {
            TextScope::Primary => 0,
            TextScope::WithContext => 1,
        }
    }

    pub(crate) fn from_id(id: u8) -> Option<Self> {
        match id {
            0 => Some(TextScope::Primary),
            1 => Some(TextScope::WithContext),
            _ => None,
        }
    }
}

/// Keyword fields: matched on the whole stored value, never tokenized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FacetField {
    Speaker,
    Nationality,
    Occupation,
    Gender,
}

impl FacetField {
    pub const ALL: [FacetField; 4] = [
        FacetField::Speaker,
        FacetField::Nationality,
        FacetField::Occupation,
        FacetField::Gender,
    ];

    pub(crate) fn id(self) -> u8 {
        match self {
            FacetField::Speaker => 0,
            FacetField::Nationality => 1,
            FacetField::Occupation => 2,
            FacetField::Gender => 3,
        }
    }

    pub(crate) fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }
}

/// Posting list for one term: documents ascending, positions ascending
/// within each document, stored flat.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PostingList {
    docs: Vec<u32>,
    offsets: Vec<u32>,
    positions: Vec<u32>,
}

impl PostingList {
    fn push(&mut self, doc: u32, positions: &[u32]) {
        if self.offsets.is_empty() {
            self.offsets.push(0);
        }
        self.docs.push(doc);
        self.positions.extend_from_slice(positions);
        self.offsets.push(self.positions.len() as u32);
    }

    pub fn docs(&self) -> &[u32] {
        &self.docs
    }

    pub fn doc_freq(&self) -> usize {
        self.docs.len()
    }

    /// Positions of the term in the `i`-th document of this list.
    pub fn positions_at(&self, i: usize) -> &[u32] {
        &self.positions[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn term_freq_at(&self, i: usize) -> u32 {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Positions in `doc`, if the document contains the term.
    pub fn positions_in(&self, doc: u32) -> Option<&[u32]> {
        self.docs
            .binary_search(&doc)
            .ok()
            .map(|i| self.positions_at(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[u32])> + '_ {
        self.docs
            .iter()
            .enumerate()
            .map(move |(i, &d)| (d, self.positions_at(i)))
    }
}

/// Positional inverted index over one aggregated field.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TextField {
    terms: Vec<String>,
    postings: Vec<PostingList>,
    doc_lengths: Vec<u32>,
    avg_length: f64,
}

impl TextField {
    fn build(docs: &[Vec<Token>]) -> TextField {
        let mut by_term: HashMap<&str, PostingList> = HashMap::new();
        let mut doc_lengths = Vec::with_capacity(docs.len());
        let mut scratch: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
        for (ord, tokens) in docs.iter().enumerate() {
            doc_lengths.push(tokens.len() as u32);
            scratch.clear();
            for t in tokens {
                scratch.entry(t.term.as_str()).or_default().push(t.position);
            }
            for (term, positions) in &scratch {
                by_term.entry(term).or_default().push(ord as u32, positions);
            }
        }
        let mut entries: Vec<(&str, PostingList)> = by_term.into_iter().collect();
        entries.sort_unstable_by(|a, b| a.0.cmp(b.0));
        let (terms, postings) = entries
            .into_iter()
            .map(|(t, p)| (t.to_string(), p))
            .unzip();
        TextField::from_parts(terms, postings, doc_lengths)
    }

    pub(crate) fn from_parts(terms: Vec<String>, postings: Vec<PostingList>, doc_lengths: Vec<u32>) -> Self {
        let total: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        let avg_length = if doc_lengths.is_empty() {
            0.0
        } else {
            total as f64 / doc_lengths.len() as f64
        };
        TextField {
            terms,
            postings,
            doc_lengths,
            avg_length,
        }
    }

    /// Sorted term dictionary.
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn postings(&self, term: &str) -> Option<&PostingList> {
        self.terms
            .binary_search_by(|t| t.as_str().cmp(term))
            .ok()
            .map(|i| &self.postings[i])
    }

    pub fn postings_at(&self, i: usize) -> &PostingList {
        &self.postings[i]
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings(term).map_or(0, PostingList::doc_freq)
    }

    pub fn doc_length(&self, doc: u32) -> u32 {
        self.doc_lengths[doc as usize]
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn avg_length(&self) -> f64 {
        self.avg_length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "doc", rename_all = "lowercase")]
pub enum StoredDoc {
    Quote(CanonicalQuote),
    Article(ArticleRecord),
    Speaker(SpeakerProfile),
}

impl StoredDoc {
    pub fn kind(&self) -> IndexKind {
        match self {
            StoredDoc::Quote(_) => IndexKind::Quote,
            StoredDoc::Article(_) => IndexKind::Article,
            StoredDoc::Speaker(_) => IndexKind::Speaker,
        }
    }

    pub fn id(&self) -> &str {
        match self {
            StoredDoc::Quote(q) => &q.quote_id,
            StoredDoc::Article(a) => &a.article_id,
            StoredDoc::Speaker(s) => &s.speaker_id,
        }
    }
}

/// An immutable, query-ready index over one corpus.
#[derive(Debug, Clone)]
pub struct IndexSnapshot {
    kind: IndexKind,
    doc_ids: Vec<String>,
    id_lookup: HashMap<String, u32>,
    fields: BTreeMap<TextScope, TextField>,
    facets: BTreeMap<(FacetField, String), Vec<u32>>,
    dates: Vec<i32>,
    counts: Vec<u32>,
    date_order: Vec<u32>,
    count_order: Vec<u32>,
    docs: Vec<StoredDoc>,
    prefixes: BTreeMap<String, Vec<u32>>,
}

impl IndexSnapshot {
    pub fn empty(kind: IndexKind) -> Self {
        Self::from_parts(
            kind,
            Vec::new(),
            BTreeMap::new(),
            BTreeMap::new(),
            Vec::new(),
            Vec::new(),
            Vec::new(),
            BTreeMap::new(),
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        kind: IndexKind,
        doc_ids: Vec<String>,
        fields: BTreeMap<TextScope, TextField>,
        facets: BTreeMap<(FacetField, String), Vec<u32>>,
        dates: Vec<i32>,
        counts: Vec<u32>,
        docs: Vec<StoredDoc>,
        prefixes: BTreeMap<String, Vec<u32>>,
    ) -> Self {
        let id_lookup = doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        let mut date_order: Vec<u32> = (0..dates.len() as u32).collect();
        date_order.sort_by_key(|&d| (dates[d as usize], d));
        let mut count_order: Vec<u32> = (0..counts.len() as u32).collect();
        count_order.sort_by_key(|&d| (counts[d as usize], d));
        IndexSnapshot {
            kind,
            doc_ids,
            id_lookup,
            fields,
            facets,
            dates,
            counts,
            date_order,
            count_order,
            docs,
            prefixes,
        }
    }

    pub fn kind(&self) -> IndexKind {
        self.kind
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_id(&self, ord: u32) -> &str {
        &self.doc_ids[ord as usize]
    }

    pub fn ordinal_of(&self, id: &str) -> Option<u32> {
        self.id_lookup.get(id).copied()
    }

    pub fn doc(&self, ord: u32) -> &StoredDoc {
        &self.docs[ord as usize]
    }

    pub fn docs(&self) -> &[StoredDoc] {
        &self.docs
    }

    pub fn field(&self, scope: TextScope) -> Option<&TextField> {
        self.fields.get(&scope)
    }

    pub fn fields(&self) -> impl Iterator<Item = (TextScope, &TextField)> {
        self.fields.iter().map(|(s, f)| (*s, f))
    }

    /// Documents whose keyword field equals `value` exactly.
    pub fn facet(&self, field: FacetField, value: &str) -> &[u32] {
        // BTreeMap lookup needs an owned key; facets are few, so the
        // allocation is not worth avoiding.
        self.facets
            .get(&(field, value.to_string()))
            .map_or(&[], Vec::as_slice)
    }

    pub fn facets(&self) -> impl Iterator<Item = (FacetField, &str, &[u32])> {
        self.facets
            .iter()
            .map(|((f, v), docs)| (*f, v.as_str(), docs.as_slice()))
    }

    /// Document date as days since 1970-01-01 (earliest date for quotes).
    pub fn date_of(&self, ord: u32) -> i32 {
        self.dates[ord as usize]
    }

    /// Occurrence count for quotes, quote count for articles and speakers.
    pub fn count_of(&self, ord: u32) -> u32 {
        self.counts[ord as usize]
    }

    pub(crate) fn dates(&self) -> &[i32] {
        &self.dates
    }

    pub(crate) fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Documents with `from <= date <= to`, in ordinal order, found by
    /// binary search over the sorted date permutation.
    pub fn docs_in_date_range(&self, range: DateRange) -> Vec<u32> {
        let (lo, hi) = (epoch_day(range.from), epoch_day(range.to));
        let start = self.date_order.partition_point(|&d| self.dates[d as usize] < lo);
        let end = self.date_order.partition_point(|&d| self.dates[d as usize] <= hi);
        let mut out = self.date_order[start..end.max(start)].to_vec();
        out.sort_unstable();
        out
    }

    /// Documents with count `>= threshold`, in ordinal order.
    pub fn docs_with_count_at_least(&self, threshold: u32) -> Vec<u32> {
        let start = self
            .count_order
            .partition_point(|&d| self.counts[d as usize] < threshold);
        let mut out = self.count_order[start..].to_vec();
        out.sort_unstable();
        out
    }

    /// Speaker ordinals whose case-folded name or alias starts with
    /// `prefix`, ranked by quote count (descending) then name.
    pub fn speakers_with_prefix(&self, prefix: &str) -> Vec<u32> {
        let folded = default_case_fold_str(prefix);
        let key: String = folded.chars().take(MAX_PREFIX_CHARS).collect();
        let Some(list) = self.prefixes.get(&key) else {
            return Vec::new();
        };
        if folded.chars().count() <= MAX_PREFIX_CHARS {
            return list.clone();
        }
        list.iter()
            .copied()
            .filter(|&ord| match self.doc(ord) {
                StoredDoc::Speaker(p) => std::iter::once(&p.name)
                    .chain(&p.aliases)
                    .any(|n| default_case_fold_str(n).starts_with(&folded)),
                _ => false,
            })
            .collect()
    }

    pub fn prefixes(&self) -> &BTreeMap<String, Vec<u32>> {
        &self.prefixes
    }
}

fn facet_values(profile: Option<&SpeakerProfile>) -> Vec<(FacetField, String)> {
    let mut out = Vec::new();
    if let Some(p) = profile {
        out.extend(p.nationalities.iter().map(|n| (FacetField::Nationality, n.id.clone())));
        out.extend(p.occupations.iter().map(|o| (FacetField::Occupation, o.id.clone())));
        out.extend(p.gender.iter().map(|g| (FacetField::Gender, g.id.clone())));
    }
    out
}

/// Builds a snapshot from documents of a single kind.
///
/// The catalog supplies speaker names (quote text field) and speaker
/// attributes (facets) for quote and article documents. Document ordinals
/// follow input order.
pub fn build_index<I>(kind: IndexKind, docs: I, catalog: &SpeakerCatalog) -> Result<IndexSnapshot, IndexError>
where
    I: IntoIterator<Item = StoredDoc>,
{
    let mut doc_ids = Vec::new();
    let mut seen = HashSet::new();
    let mut stored = Vec::new();
    let mut primary_tokens = Vec::new();
    let mut context_tokens = Vec::new();
    let mut facets: BTreeMap<(FacetField, String), Vec<u32>> = BTreeMap::new();
    let mut dates = Vec::new();
    let mut counts = Vec::new();
    let mut prefix_sets: BTreeMap<String, Vec<u32>> = BTreeMap::new();

    for doc in docs {
        if doc.kind() != kind {
            return Err(IndexError::KindMismatch {
                expected: kind,
                found: doc.kind(),
            });
        }
        let id = doc.id().to_string();
        if !seen.insert(id.clone()) {
            return Err(IndexError::DuplicateId(id));
        }
        let ord = doc_ids.len() as u32;
        let mut doc_facets: Vec<(FacetField, String)> = Vec::new();

        match &doc {
            StoredDoc::Quote(q) => {
                let profile = catalog.get(&q.top_speaker);
                let text = aggregate_text_fields(
                    FieldSource::Quote {
                        quote: q,
                        speaker_name: profile.map(|p| p.name.as_str()),
                    },
                    false,
                );
                primary_tokens.push(tokenize(&text));
                doc_facets.push((FacetField::Speaker, q.top_speaker.clone()));
                doc_facets.extend(facet_values(profile));
                dates.push(epoch_day(q.earliest_date));
                counts.push(q.num_occurrences);
            }
            StoredDoc::Article(a) => {
                primary_tokens.push(tokenize(&aggregate_text_fields(FieldSource::Article(a), false)));
                context_tokens.push(tokenize(&aggregate_text_fields(FieldSource::Article(a), true)));
                for occ in &a.occurrences {
                    if let Some(top) = occ.top_candidate() {
                        doc_facets.push((FacetField::Speaker, top.speaker_id.clone()));
                        doc_facets.extend(facet_values(catalog.get(&top.speaker_id)));
                    }
                }
                dates.push(epoch_day(a.date));
                counts.push(a.occurrences.len() as u32);
            }
            StoredDoc::Speaker(p) => {
                primary_tokens.push(tokenize(&aggregate_text_fields(FieldSource::Speaker(p), false)));
                doc_facets.push((FacetField::Speaker, p.speaker_id.clone()));
                doc_facets.extend(facet_values(Some(p)));
                dates.push(0);
                counts.push(p.quote_count);
                for name in std::iter::once(&p.name).chain(&p.aliases) {
                    let folded = default_case_fold_str(name);
                    let mut prefix = String::new();
                    for c in folded.chars().take(MAX_PREFIX_CHARS) {
                        prefix.push(c);
                        let list = prefix_sets.entry(prefix.clone()).or_default();
                        if list.last() != Some(&ord) {
                            list.push(ord);
                        }
                    }
                }
            }
        }

        doc_facets.sort();
        doc_facets.dedup();
        for key in doc_facets {
            facets.entry(key).or_default().push(ord);
        }
        doc_ids.push(id);
        stored.push(doc);
    }

    let mut fields = BTreeMap::new();
    fields.insert(TextScope::Primary, TextField::build(&primary_tokens));
    if kind == IndexKind::Article {
        fields.insert(TextScope::WithContext, TextField::build(&context_tokens));
    }

    // Rank each prefix list once so lookups are a slice copy.
    for list in prefix_sets.values_mut() {
        list.sort_unstable();
        list.dedup();
        list.sort_by(|&a, &b| {
            let (pa, pb) = match (&stored[a as usize], &stored[b as usize]) {
                (StoredDoc::Speaker(pa), StoredDoc::Speaker(pb)) => (pa, pb),
                _ => unreachable!("prefix index only holds speakers"),
            };
            pb.quote_count
                .cmp(&pa.quote_count)
                .then_with(|| pa.name.cmp(&pb.name))
                .then_with(|| a.cmp(&b))
        });
    }

    Ok(IndexSnapshot::from_parts(
        kind,
        doc_ids,
        fields,
        facets,
        dates,
        counts,
        stored,
        prefix_sets,
    ))
}

pub fn build_quote_index<I>(quotes: I, catalog: &SpeakerCatalog) -> Result<IndexSnapshot, IndexError>
where
    I: IntoIterator<Item = CanonicalQuote>,
{
    build_index(IndexKind::Quote, quotes.into_iter().map(StoredDoc::Quote), catalog)
}

pub fn build_article_index<I>(articles: I, catalog: &SpeakerCatalog) -> Result<IndexSnapshot, IndexError>
where
    I: IntoIterator<Item = ArticleRecord>,
{
    build_index(IndexKind::Article, articles.into_iter().map(StoredDoc::Article), catalog)
}

pub fn build_speaker_index(catalog: &SpeakerCatalog) -> Result<IndexSnapshot, IndexError> {
    build_index(
        IndexKind::Speaker,
        catalog.iter().cloned().map(StoredDoc::Speaker),
        catalog,
    )
}
