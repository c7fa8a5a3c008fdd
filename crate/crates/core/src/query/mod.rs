//! Query execution: text matching (fuzzy or exact phrase), facet and range
//! filtering, BM25 ranking with a result cap, full-match histograms, and
//! speaker autocomplete.

mod fuzzy;
mod histogram;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{tokenize, tokenize_spans, FacetField, IndexKind, IndexSnapshot, StoredDoc, TextField, TextScope};
use crate::model::{epoch_day, from_epoch_day, is_entity_id, ArticleRecord, CanonicalQuote, DateRange, Validate, Violation, NO_SPEAKER};

pub use fuzzy::{bounded_distance, expand_term, max_edits};
pub use histogram::{build_histogram, choose_granularity, empty_bins, Granularity, HistogramBin, MAX_BINS};

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
pub const DEFAULT_RESULT_CAP: usize = 1000;
pub const DEFAULT_PAGE_SIZE: u32 = 10;
pub const MAX_PAGE_SIZE: u32 = 100;
pub const DEFAULT_SUGGESTIONS: usize = 10;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("invalid query: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("query targets the {expected} index but got a {found} snapshot")]
    KindMismatch { expected: IndexKind, found: IndexKind },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    #[default]
    Quotation,
    Article,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Quotation => "quotation",
            Target::Article => "article",
        }
    }

    pub fn index_kind(self) -> IndexKind {
        match self {
            Target::Quotation => IndexKind::Quote,
            Target::Article => IndexKind::Article,
        }
    }
}

impl FromStr for Target {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "quotation" => Ok(Target::Quotation),
            "article" => Ok(Target::Article),
            _ => Err("unknown target".into()),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SortOrder {
    #[default]
    Relevance,
    DateAsc,
    DateDesc,
    OccurrencesDesc,
}

impl SortOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            SortOrder::Relevance => "relevance",
            SortOrder::DateAsc => "date_asc",
            SortOrder::DateDesc => "date_desc",
            SortOrder::OccurrencesDesc => "occurrences_desc",
        }
    }
}

impl FromStr for SortOrder {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "relevance" => Ok(SortOrder::Relevance),
            "date_asc" => Ok(SortOrder::DateAsc),
            "date_desc" => Ok(SortOrder::DateDesc),
            "occurrences_desc" => Ok(SortOrder::OccurrencesDesc),
            _ => Err("unknown sort order".into()),
        }
    }
}

/// A structured search request.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SearchQuery {
    pub target: Target,
    pub text: String,
    pub exact: bool,
    pub with_context: bool,
    pub speaker: Option<String>,
    pub nationality: Option<String>,
    pub occupation: Option<String>,
    pub gender: Option<String>,
    pub min_occurrences: Option<u32>,
    pub date_range: DateRange,
    pub sort: SortOrder,
    pub page: u32,
    pub page_size: u32,
}

impl Default for SearchQuery {
    fn default() -> Self {
        SearchQuery {
            target: Target::Quotation,
            text: String::new(),
            exact: false,
            with_context: false,
            speaker: None,
            nationality: None,
            occupation: None,
            gender: None,
            min_occurrences: None,
            date_range: DateRange::default(),
            sort: SortOrder::Relevance,
            page: 1,
            page_size: DEFAULT_PAGE_SIZE,
        }
    }
}

impl SearchQuery {
    pub fn quotation(text: impl Into<String>) -> Self {
        SearchQuery {
            text: text.into(),
            ..Self::default()
        }
    }

    pub fn article(text: impl Into<String>) -> Self {
        SearchQuery {
            target: Target::Article,
            text: text.into(),
            ..Self::default()
        }
    }

    /// Present facet filters, in a fixed order.
    pub fn facets(&self) -> Vec<(FacetField, &str)> {
        [
            (FacetField::Speaker, &self.speaker),
            (FacetField::Nationality, &self.nationality),
            (FacetField::Occupation, &self.occupation),
            (FacetField::Gender, &self.gender),
        ]
        .into_iter()
        .filter_map(|(f, v)| v.as_deref().map(|v| (f, v)))
        .collect()
    }

    pub fn scope(&self) -> TextScope {
        if self.target == Target::Article && self.with_context {
            TextScope::WithContext
        } else {
            TextScope::Primary
        }
    }
}

impl Validate for SearchQuery {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.with_context && self.target != Target::Article {
            out.push(Violation::new("with_context", "only valid for target=article"));
        }
        if self.min_occurrences.is_some() && self.target != Target::Quotation {
            out.push(Violation::new("num_occurrences", "only valid for target=quotation"));
        }
        for (name, value) in [
            ("speaker", &self.speaker),
            ("nationality", &self.nationality),
            ("occupation", &self.occupation),
            ("gender", &self.gender),
        ] {
            if let Some(v) = value {
                let ok = is_entity_id(v) || (name == "speaker" && v == NO_SPEAKER);
                if !ok {
                    out.push(Violation::new(name, "not a valid identifier"));
                }
            }
        }
        if self.date_range.from > self.date_range.to {
            out.push(Violation::new("from_date", "from > to"));
        }
        if self.page < 1 {
            out.push(Violation::new("page", "must be at least 1"));
        }
        if self.page_size < 1 || self.page_size > MAX_PAGE_SIZE {
            out.push(Violation::new("page_size", format!("must be between 1 and {MAX_PAGE_SIZE}")));
        }
        out
    }
}

/// Documents matching a text query, with their BM25 scores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchSet {
    /// Ascending document ordinals.
    pub docs: Vec<u32>,
    /// Score per entry of `docs`.
    pub scores: Vec<f64>,
    /// Index terms that satisfied some query token.
    pub matched_terms: BTreeSet<String>,
}

fn idf(total_docs: usize, doc_freq: usize) -> f64 {
    let (n, df) = (total_docs as f64, doc_freq as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

fn bm25_term(idf: f64, tf: u32, doc_len: u32, avg_len: f64) -> f64 {
    let tf = f64::from(tf);
    let norm = if avg_len > 0.0 { f64::from(doc_len) / avg_len } else { 1.0 };
    idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * norm))
}

/// Matches `text` against one aggregated field.
///
/// `exact`: all query tokens must occur consecutively and in order (within
/// one segment, guaranteed by the position gap). Otherwise every query
/// token must match at least one index term within its edit budget (see
/// [`max_edits`]); a token's score is the best score among its variants.
pub fn match_text(text: &str, exact: bool, field: &TextField) -> MatchSet {
    let tokens: Vec<String> = tokenize(text).into_iter().map(|t| t.term).collect();
    if tokens.is_empty() {
        return MatchSet::default();
    }
    if exact {
        match_phrase(&tokens, field)
    } else {
        match_fuzzy(&tokens, field)
    }
}

fn match_fuzzy(tokens: &[String], field: &TextField) -> MatchSet {
    let n_docs = field.doc_lengths().len();
    let avg = field.avg_length();
    let mut matched_terms = BTreeSet::new();
    let mut acc: Option<Vec<(u32, f64)>> = None;
    for token in tokens {
        let mut pairs: Vec<(u32, f64)> = Vec::new();
        for ti in expand_term(field, token) {
            let list = field.postings_at(ti);
            let term_idf = idf(n_docs, list.doc_freq());
            matched_terms.insert(field.terms()[ti].clone());
            for (i, &doc) in list.docs().iter().enumerate() {
                pairs.push((doc, bm25_term(term_idf, list.term_freq_at(i), field.doc_length(doc), avg)));
            }
        }
        pairs.sort_unstable_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.total_cmp(&a.1)));
        pairs.dedup_by_key(|p| p.0);
        acc = Some(match acc {
            None => pairs,
            Some(prev) => intersect_sum(&prev, &pairs),
        });
        if acc.as_ref().is_some_and(Vec::is_empty) {
            break;
        }
    }
    let (docs, scores) = acc.unwrap_or_default().into_iter().unzip();
    MatchSet {
        docs,
        scores,
        matched_terms,
    }
}

fn intersect_sum(a: &[(u32, f64)], b: &[(u32, f64)]) -> Vec<(u32, f64)> {
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push((a[i].0, a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn match_phrase(tokens: &[String], field: &TextField) -> MatchSet {
    let mut lists = Vec::with_capacity(tokens.len());
    for t in tokens {
        match field.postings(t) {
            Some(l) => lists.push(l),
            None => return MatchSet::default(),
        }
    }
    let n_docs = field.doc_lengths().len();
    let phrase_idf: f64 = lists.iter().map(|l| idf(n_docs, l.doc_freq())).sum();
    let rarest = lists
        .iter()
        .min_by_key(|l| l.doc_freq())
        .expect("non-empty phrase");
    let mut docs = Vec::new();
    let mut scores = Vec::new();
    let mut per_term: Vec<&[u32]> = Vec::with_capacity(lists.len());
    'docs: for &doc in rarest.docs() {
        per_term.clear();
        for l in &lists {
            match l.positions_in(doc) {
                Some(p) => per_term.push(p),
                None => continue 'docs,
            }
        }
        let freq = per_term[0]
            .iter()
            .filter(|&&start| {
                per_term
                    .iter()
                    .enumerate()
                    .skip(1)
                    .all(|(k, ps)| ps.binary_search(&(start + k as u32)).is_ok())
            })
            .count() as u32;
        if freq > 0 {
            docs.push(doc);
            scores.push(bm25_term(phrase_idf, freq, field.doc_length(doc), field.avg_length()));
        }
    }
    MatchSet {
        docs,
        scores,
        matched_terms: tokens.iter().cloned().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub doc: u32,
    pub score: f64,
}

/// Everything about a query except page materialization: the capped,
/// ordered hit list plus uncapped totals. This is what gets cached.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedResults {
    pub total_matched: u64,
    pub hits: Vec<Hit>,
    pub histogram: Vec<HistogramBin>,
    pub matched_terms: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct ExecOptions {
    pub result_cap: usize,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            result_cap: DEFAULT_RESULT_CAP,
        }
    }
}

fn check_query(query: &SearchQuery, snapshot: &IndexSnapshot) -> Result<(), QueryError> {
    let violations = query.validate();
    if !violations.is_empty() {
        return Err(QueryError::Invalid(violations));
    }
    let expected = query.target.index_kind();
    if snapshot.kind() != expected {
        return Err(QueryError::KindMismatch {
            expected,
            found: snapshot.kind(),
        });
    }
    Ok(())
}

/// The full (uncapped) candidate set: text match ∩ facets ∩ date range ∩
/// minimum occurrences. Returns hits in ordinal order plus matched terms.
pub fn candidates(query: &SearchQuery, snapshot: &IndexSnapshot) -> Result<(Vec<Hit>, BTreeSet<String>), QueryError> {
    check_query(query, snapshot)?;
    let facet_lists: Vec<&[u32]> = query
        .facets()
        .into_iter()
        .map(|(f, v)| snapshot.facet(f, v))
        .collect();

    let has_text = !tokenize(&query.text).is_empty();
    let (start, matched_terms): (Vec<Hit>, BTreeSet<String>) = if has_text {
        let field = snapshot
            .field(query.scope())
            .ok_or_else(|| QueryError::Invalid(vec![Violation::new("with_context", "scope not indexed")]))?;
        let m = match_text(&query.text, query.exact, field);
        let hits = m
            .docs
            .iter()
            .zip(&m.scores)
            .map(|(&doc, &score)| Hit { doc, score })
            .collect();
        (hits, m.matched_terms)
    } else if let Some(smallest) = facet_lists.iter().min_by_key(|l| l.len()) {
        (smallest.iter().map(|&doc| Hit { doc, score: 0.0 }).collect(), BTreeSet::new())
    } else {
        let docs = snapshot.docs_in_date_range(query.date_range);
        (docs.into_iter().map(|doc| Hit { doc, score: 0.0 }).collect(), BTreeSet::new())
    };

    let (lo, hi) = (epoch_day(query.date_range.from), epoch_day(query.date_range.to));
    let min_count = query.min_occurrences.unwrap_or(0);
    let dates = snapshot.dates();
    let counts = snapshot.counts();
    let hits = start
        .into_iter()
        .filter(|h| {
            let d = dates[h.doc as usize];
            lo <= d
                && d <= hi
                && counts[h.doc as usize] >= min_count
                && facet_lists.iter().all(|l| l.binary_search(&h.doc).is_ok())
        })
        .collect();
    Ok((hits, matched_terms))
}

/// Runs a query down to the capped, sorted hit list and the histogram.
///
/// The cap keeps the `result_cap` most relevant hits (BM25; ties go to the
/// newer document, then the smaller ordinal); the requested sort order is
/// then applied to that capped list. The histogram and `total_matched`
/// cover every candidate.
pub fn rank(query: &SearchQuery, snapshot: &IndexSnapshot, opts: ExecOptions) -> Result<RankedResults, QueryError> {
    let (mut hits, matched_terms) = candidates(query, snapshot)?;
    let total_matched = hits.len() as u64;
    let histogram = build_histogram(
        hits.iter().map(|h| from_epoch_day(snapshot.date_of(h.doc))),
        query.date_range,
    );

    let by_relevance = |a: &Hit, b: &Hit| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| snapshot.date_of(b.doc).cmp(&snapshot.date_of(a.doc)))
            .then_with(|| a.doc.cmp(&b.doc))
    };
    if hits.len() > opts.result_cap {
        if opts.result_cap == 0 {
            hits.clear();
        } else {
            hits.select_nth_unstable_by(opts.result_cap - 1, by_relevance);
            hits.truncate(opts.result_cap);
        }
    }
    match query.sort {
        SortOrder::Relevance => hits.sort_by(by_relevance),
        SortOrder::DateAsc => hits.sort_by(|a, b| {
            snapshot
                .date_of(a.doc)
                .cmp(&snapshot.date_of(b.doc))
                .then_with(|| by_relevance(a, b))
        }),
        SortOrder::DateDesc => hits.sort_by(|a, b| {
            snapshot
                .date_of(b.doc)
                .cmp(&snapshot.date_of(a.doc))
                .then_with(|| by_relevance(a, b))
        }),
        SortOrder::OccurrencesDesc => hits.sort_by(|a, b| {
            snapshot
                .count_of(b.doc)
                .cmp(&snapshot.count_of(a.doc))
                .then_with(|| by_relevance(a, b))
        }),
    }
    Ok(RankedResults {
        total_matched,
        hits,
        histogram,
        matched_terms: matched_terms.into_iter().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Highlight {
    /// `text` for quotes; `quotes.<i>.text` or `quotes.<i>.context` for
    /// articles.
    pub field: String,
    /// Byte offsets into that field.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultPayload {
    Quote(CanonicalQuote),
    Article(ArticleRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBlock {
    /// 1-based position in the capped ranking.
    pub rank: usize,
    pub id: String,
    pub score: f64,
    pub date: NaiveDate,
    #[serde(flatten)]
    pub payload: ResultPayload,
    pub highlights: Vec<Highlight>,
    /// Display names for every speaker id the payload mentions.
    pub speaker_names: BTreeMap<String, String>,
}

fn highlight_field(field: &str, text: &str, terms: &BTreeSet<&str>, out: &mut Vec<Highlight>) {
    for span in tokenize_spans(text) {
        if terms.contains(span.term.as_str()) {
            out.push(Highlight {
                field: field.to_string(),
                start: span.start,
                end: span.end,
            });
        }
    }
}

fn speaker_names<'a, I>(ids: I, speakers: Option<&IndexSnapshot>) -> BTreeMap<String, String>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut out = BTreeMap::new();
    let Some(speakers) = speakers else {
        return out;
    };
    for id in ids {
        if let Some(StoredDoc::Speaker(p)) = speakers.ordinal_of(id).map(|o| speakers.doc(o)) {
            out.insert(id.to_string(), p.name.clone());
        }
    }
    out
}

/// Turns ranked hits `[from, to)` into result blocks with highlights and
/// speaker names (when a speaker index is supplied).
pub fn materialize(
    ranked: &RankedResults,
    range: std::ops::Range<usize>,
    query: &SearchQuery,
    snapshot: &IndexSnapshot,
    speakers: Option<&IndexSnapshot>,
) -> Vec<ResultBlock> {
    let terms: BTreeSet<&str> = ranked.matched_terms.iter().map(String::as_str).collect();
    let end = range.end.min(ranked.hits.len());
    let start = range.start.min(end);
    ranked.hits[start..end]
        .iter()
        .enumerate()
        .map(|(i, hit)| {
            let mut highlights = Vec::new();
            let (payload, names) = match snapshot.doc(hit.doc) {
                StoredDoc::Quote(q) => {
                    highlight_field("text", &q.display_text, &terms, &mut highlights);
                    let names = speaker_names(q.global_candidates.iter().map(|c| c.speaker_id.as_str()), speakers);
                    (ResultPayload::Quote(q.clone()), names)
                }
                StoredDoc::Article(a) => {
                    for (k, occ) in a.occurrences.iter().enumerate() {
                        highlight_field(&format!("quotes.{k}.text"), &occ.raw_text, &terms, &mut highlights);
                        if query.with_context {
                            highlight_field(&format!("quotes.{k}.context"), &occ.context, &terms, &mut highlights);
                        }
                    }
                    let ids = a
                        .occurrences
                        .iter()
                        .flat_map(|o| o.candidates.iter().map(|c| c.speaker_id.as_str()));
                    (ResultPayload::Article(a.clone()), speaker_names(ids, speakers))
                }
                StoredDoc::Speaker(_) => unreachable!("speaker snapshots are rejected by check_query"),
            };
            ResultBlock {
                rank: start + i + 1,
                id: snapshot.doc_id(hit.doc).to_string(),
                score: hit.score,
                date: from_epoch_day(snapshot.date_of(hit.doc)),
                payload,
                highlights,
                speaker_names: names,
            }
        })
        .collect()
}

/// Slice of the capped ranking covered by `page` / `page_size`.
pub fn page_range(page: u32, page_size: u32) -> std::ops::Range<usize> {
    let size = page_size as usize;
    let start = (page.max(1) as usize - 1).saturating_mul(size);
    start..start.saturating_add(size)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub total_matched: u64,
    pub returned: u64,
    pub query_time_s: f64,
    pub histogram: Vec<HistogramBin>,
    #[serde(rename = "results")]
    pub page_results: Vec<ResultBlock>,
    pub applied_query: SearchQuery,
}

impl SearchResponse {
    pub fn from_ranked(
        ranked: &RankedResults,
        query: &SearchQuery,
        snapshot: &IndexSnapshot,
        speakers: Option<&IndexSnapshot>,
        query_time_s: f64,
    ) -> Self {
        SearchResponse {
            total_matched: ranked.total_matched,
            returned: ranked.hits.len() as u64,
            query_time_s,
            histogram: ranked.histogram.clone(),
            page_results: materialize(ranked, page_range(query.page, query.page_size), query, snapshot, speakers),
            applied_query: query.clone(),
        }
    }
}

/// Executes `query` against `snapshot` and returns the requested page.
pub fn execute(query: &SearchQuery, snapshot: &IndexSnapshot) -> Result<SearchResponse, QueryError> {
    execute_with(query, snapshot, None, ExecOptions::default())
}

pub fn execute_with(
    query: &SearchQuery,
    snapshot: &IndexSnapshot,
    speakers: Option<&IndexSnapshot>,
    opts: ExecOptions,
) -> Result<SearchResponse, QueryError> {
    let started = Instant::now();
    let ranked = rank(query, snapshot, opts)?;
    let mut response = SearchResponse::from_ranked(&ranked, query, snapshot, speakers, 0.0);
    response.query_time_s = started.elapsed().as_secs_f64();
    Ok(response)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub speaker_id: String,
    pub name: String,
    pub description: String,
    pub quote_count: u32,
}

/// Up to `k` speakers whose name or alias starts with `prefix`
/// (case-folded), most-quoted first, ties by name.
pub fn autocomplete(prefix: &str, speakers: &IndexSnapshot, k: usize) -> Result<Vec<Suggestion>, QueryError> {
    let mut violations = Vec::new();
    if prefix.is_empty() {
        violations.push(Violation::new("prefix", "prefix must be non-empty"));
    }
    if k == 0 {
        violations.push(Violation::new("k", "must be at least 1"));
    }
    if speakers.kind() != IndexKind::Speaker {
        return Err(QueryError::KindMismatch {
            expected: IndexKind::Speaker,
            found: speakers.kind(),
        });
    }
    if !violations.is_empty() {
        return Err(QueryError::Invalid(violations));
    }
    Ok(speakers
        .speakers_with_prefix(prefix)
        .into_iter()
        .take(k)
        .filter_map(|ord| match speakers.doc(ord) {
            StoredDoc::Speaker(p) => Some(Suggestion {
                speaker_id: p.speaker_id.clone(),
                name: p.name.clone(),
                description: p.description.clone(),
                quote_count: p.quote_count,
            }),
            _ => None,
        })
        .collect())
}
