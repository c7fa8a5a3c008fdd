//! Shared domain types for the article-level and quote-level corpus stages
//! and the speaker catalog.
//!
//! All types are plain values. Constructors do not enforce invariants;
//! [`Validate::validate`] reports every violated invariant so ingestion can
//! decide what to do with a bad record.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Sentinel speaker id used when no candidate could be attributed.
pub const NO_SPEAKER: &str = "NONE";

/// Default search window: the span covered by the corpus.
pub const CORPUS_START: NaiveDate = match NaiveDate::from_ymd_opt(2008, 9, 1) {
    Some(d) => d,
    None => panic!("invalid date"),
};
pub const CORPUS_END: NaiveDate = match NaiveDate::from_ymd_opt(2020, 4, 17) {
    Some(d) => d,
    None => panic!("invalid date"),
};

/// Sanity bounds for occurrence dates; anything outside is rejected at ingest.
pub const DATE_LOWER_BOUND: NaiveDate = match NaiveDate::from_ymd_opt(1990, 1, 1) {
    Some(d) => d,
    None => panic!("invalid date"),
};
pub const DATE_UPPER_BOUND: NaiveDate = match NaiveDate::from_ymd_opt(2100, 1, 1) {
    Some(d) => d,
    None => panic!("invalid date"),
};

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Returns true for knowledge-graph identifiers of the form `Q<digits>`.
pub fn is_entity_id(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next() == Some('Q') && s.len() > 1 && chars.all(|c| c.is_ascii_digit())
}

/// Returns true for [`NO_SPEAKER`] or a well-formed entity id.
pub fn is_speaker_id(s: &str) -> bool {
    s == NO_SPEAKER || is_entity_id(s)
}

/// A single violated invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

pub trait Validate {
    /// Every violated invariant; empty when the value is valid.
    fn validate(&self) -> Vec<Violation>;

    fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerCandidate {
    pub speaker_id: String,
    pub probability: f64,
}

impl SpeakerCandidate {
    pub fn new(speaker_id: impl Into<String>, probability: f64) -> Self {
        SpeakerCandidate {
            speaker_id: speaker_id.into(),
            probability,
        }
    }

    pub fn no_speaker(probability: f64) -> Self {
        Self::new(NO_SPEAKER, probability)
    }

    pub fn is_no_speaker(&self) -> bool {
        self.speaker_id == NO_SPEAKER
    }
}

impl Validate for SpeakerCandidate {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.probability) {
            out.push(Violation::new("probability", "probability out of range"));
        }
        if !is_speaker_id(&self.speaker_id) {
            out.push(Violation::new("speaker_id", "invalid speaker id"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteOccurrence {
    pub occurrence_id: String,
    pub article_id: String,
    pub raw_text: String,
    pub context: String,
    pub date: NaiveDate,
    pub candidates: Vec<SpeakerCandidate>,
    pub url: String,
}

impl QuoteOccurrence {
    /// The highest-ranked local candidate.
    pub fn top_candidate(&self) -> Option<&SpeakerCandidate> {
        self.candidates.first()
    }
}

impl Validate for QuoteOccurrence {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.candidates.is_empty() {
            out.push(Violation::new("candidates", "candidates empty"));
        }
        for c in &self.candidates {
            for v in c.validate() {
                out.push(Violation::new(format!("candidates.{}", v.field), v.message));
            }
        }
        if self
            .candidates
            .windows(2)
            .any(|w| w[0].probability < w[1].probability)
        {
            out.push(Violation::new("candidates", "candidates not sorted by probability"));
        }
        if self.date < DATE_LOWER_BOUND || self.date > DATE_UPPER_BOUND {
            out.push(Violation::new("date", "date out of bounds"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub article_id: String,
    pub url: String,
    pub date: NaiveDate,
    pub occurrences: Vec<QuoteOccurrence>,
}

impl Validate for ArticleRecord {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.date < DATE_LOWER_BOUND || self.date > DATE_UPPER_BOUND {
            out.push(Violation::new("date", "date out of bounds"));
        }
        for (i, occ) in self.occurrences.iter().enumerate() {
            if occ.article_id != self.article_id {
                out.push(Violation::new(
                    format!("occurrences.{i}.article_id"),
                    "occurrence article_id mismatch",
                ));
            }
            for v in occ.validate() {
                out.push(Violation::new(format!("occurrences.{i}.{}", v.field), v.message));
            }
        }
        out
    }
}

/// A speaker's merged score over all occurrences of a quote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalCandidate {
    pub speaker_id: String,
    pub aggregate_score: f64,
    pub normalized_probability: f64,
}

impl GlobalCandidate {
    /// Total order used for ranking merged candidates: higher score first,
    /// then higher normalized probability (only differs when every score is
    /// zero), real speakers before [`NO_SPEAKER`], then id ascending.
    pub fn rank_cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .aggregate_score
            .total_cmp(&self.aggregate_score)
            .then_with(|| other.normalized_probability.total_cmp(&self.normalized_probability))
            .then_with(|| (self.speaker_id == NO_SPEAKER).cmp(&(other.speaker_id == NO_SPEAKER)))
            .then_with(|| self.speaker_id.cmp(&other.speaker_id))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalQuote {
    pub quote_id: String,
    pub canonical_text: String,
    pub display_text: String,
    pub num_occurrences: u32,
    pub earliest_date: NaiveDate,
    pub latest_date: NaiveDate,
    pub global_candidates: Vec<GlobalCandidate>,
    pub top_speaker: String,
    pub urls: Vec<String>,
}

impl Validate for CanonicalQuote {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.num_occurrences < 1 {
            out.push(Violation::new("num_occurrences", "num_occurrences < 1"));
        }
        if self.earliest_date > self.latest_date {
            out.push(Violation::new("earliest_date", "earliest_date > latest_date"));
        }
        if self.global_candidates.is_empty() {
            out.push(Violation::new("global_candidates", "candidates empty"));
        } else {
            let total: f64 = self
                .global_candidates
                .iter()
                .map(|c| c.normalized_probability)
                .sum();
            if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
                out.push(Violation::new(
                    "global_candidates",
                    "normalized probabilities do not sum to 1",
                ));
            }
            for c in &self.global_candidates {
                if !is_speaker_id(&c.speaker_id) {
                    out.push(Violation::new("global_candidates", "invalid speaker id"));
                }
                if !(c.aggregate_score >= 0.0) {
                    out.push(Violation::new("global_candidates", "negative aggregate score"));
                }
                if !(0.0..=1.0).contains(&c.normalized_probability) {
                    out.push(Violation::new("global_candidates", "probability out of range"));
                }
            }
            if self
                .global_candidates
                .windows(2)
                .any(|w| w[0].rank_cmp(&w[1]) == std::cmp::Ordering::Greater)
            {
                out.push(Violation::new("global_candidates", "candidates not sorted by score"));
            }
            let best = self
                .global_candidates
                .iter()
                .min_by(|a, b| a.rank_cmp(b))
                .map(|c| c.speaker_id.as_str());
            if best != Some(self.top_speaker.as_str()) {
                out.push(Violation::new("top_speaker", "top_speaker is not the argmax"));
            }
        }
        let mut seen = HashSet::new();
        if !self.urls.iter().all(|u| seen.insert(u)) {
            out.push(Violation::new("urls", "duplicate url"));
        }
        out
    }
}

/// An identifier with its human-readable label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledId {
    pub id: String,
    pub label: String,
}

impl LabeledId {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        LabeledId {
            id: id.into(),
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerProfile {
    pub speaker_id: String,
    pub name: String,
    pub aliases: Vec<String>,
    pub description: String,
    pub occupations: Vec<LabeledId>,
    pub nationalities: Vec<LabeledId>,
    pub gender: Option<LabeledId>,
    pub quote_count: u32,
}

impl SpeakerProfile {
    /// Profile for a speaker missing from the attribute file.
    pub fn stub(speaker_id: impl Into<String>) -> Self {
        let speaker_id = speaker_id.into();
        SpeakerProfile {
            name: speaker_id.clone(),
            speaker_id,
            aliases: Vec::new(),
            description: String::new(),
            occupations: Vec::new(),
            nationalities: Vec::new(),
            gender: None,
            quote_count: 0,
        }
    }

    /// Removes duplicate entries from every attribute list, keeping first
    /// occurrences in order.
    pub fn dedup_attributes(&mut self) {
        fn dedup<T: Clone + Eq + std::hash::Hash>(v: &mut Vec<T>) {
            let mut seen = HashSet::new();
            v.retain(|x| seen.insert(x.clone()));
        }
        dedup(&mut self.aliases);
        dedup(&mut self.occupations);
        dedup(&mut self.nationalities);
    }
}

impl Validate for SpeakerProfile {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !is_entity_id(&self.speaker_id) {
            out.push(Violation::new("speaker_id", "invalid speaker id"));
        }
        let unique = |len: usize, set: usize| len == set;
        if !unique(
            self.aliases.len(),
            self.aliases.iter().collect::<HashSet<_>>().len(),
        ) {
            out.push(Violation::new("aliases", "duplicate alias"));
        }
        if !unique(
            self.occupations.len(),
            self.occupations.iter().collect::<HashSet<_>>().len(),
        ) {
            out.push(Violation::new("occupations", "duplicate occupation"));
        }
        if !unique(
            self.nationalities.len(),
            self.nationalities.iter().collect::<HashSet<_>>().len(),
        ) {
            out.push(Violation::new("nationalities", "duplicate nationality"));
        }
        out
    }
}

/// Speaker profiles keyed by id, iterated in id order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeakerCatalog(BTreeMap<String, SpeakerProfile>);

impl SpeakerCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, profile: SpeakerProfile) -> Option<SpeakerProfile> {
        self.0.insert(profile.speaker_id.clone(), profile)
    }

    pub fn get(&self, speaker_id: &str) -> Option<&SpeakerProfile> {
        self.0.get(speaker_id)
    }

    pub fn get_mut(&mut self, speaker_id: &str) -> Option<&mut SpeakerProfile> {
        self.0.get_mut(speaker_id)
    }

    pub fn contains(&self, speaker_id: &str) -> bool {
        self.0.contains_key(speaker_id)
    }

    /// Display name for a speaker, falling back to the id itself.
    pub fn name_of<'a>(&'a self, speaker_id: &'a str) -> &'a str {
        self.0.get(speaker_id).map_or(speaker_id, |p| p.name.as_str())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SpeakerProfile> {
        self.0.values()
    }

    pub fn into_profiles(self) -> impl Iterator<Item = SpeakerProfile> {
        self.0.into_values()
    }
}

impl FromIterator<SpeakerProfile> for SpeakerCatalog {
    fn from_iter<T: IntoIterator<Item = SpeakerProfile>>(iter: T) -> Self {
        let mut c = SpeakerCatalog::new();
        for p in iter {
            c.insert(p);
        }
        c
    }
}

/// Inclusive calendar date window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DateRange {
    pub from: NaiveDate,
    pub to: NaiveDate,
}

impl DateRange {
    pub fn new(from: NaiveDate, to: NaiveDate) -> Self {
        DateRange { from, to }
    }

    pub fn single_day(day: NaiveDate) -> Self {
        DateRange { from: day, to: day }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.from <= date && date <= self.to
    }
}

impl Default for DateRange {
    fn default() -> Self {
        DateRange {
            from: CORPUS_START,
            to: CORPUS_END,
        }
    }
}

impl Validate for DateRange {
    fn validate(&self) -> Vec<Violation> {
        if self.from > self.to {
            vec![Violation::new("date_range", "from > to")]
        } else {
            Vec::new()
        }
    }
}

/// Days since 1970-01-01; the integer form dates take inside the index.
pub fn epoch_day(date: NaiveDate) -> i32 {
    const UNIX_EPOCH_CE_DAYS: i32 = 719_163;
    chrono::Datelike::num_days_from_ce(&date) - UNIX_EPOCH_CE_DAYS
}

pub fn from_epoch_day(day: i32) -> NaiveDate {
    NaiveDate::from_num_days_from_ce_opt(day + 719_163).expect("epoch day in range")
}
