//! Quote-level construction: canonicalize occurrence texts, group equal
//! canonical forms, and merge speaker candidates by weighted consensus.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use caseless::default_case_fold_str;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use crate::model::{CanonicalQuote, GlobalCandidate, QuoteOccurrence, SpeakerCandidate, NO_SPEAKER};

/// Normalized text under which quote occurrences are grouped.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalKey(String);

impl CanonicalKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// First 16 hex digits of the SHA-256 of the key.
    pub fn quote_id(&self) -> String {
        let digest = Sha256::digest(self.0.as_bytes());
        hex::encode(&digest[..8])
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

const SENTENCE_PUNCTUATION: &[char] = &['.', ',', '!', '?', ';', ':'];

fn ascii_quote(c: char) -> char {
    match c {
        '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' | '\u{00AB}' | '\u{00BB}' | '\u{2033}'
        | '\u{2036}' | '\u{301D}' | '\u{301E}' | '\u{301F}' | '\u{FF02}' => '"',
        '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' | '\u{2039}' | '\u{203A}' | '\u{2032}'
        | '\u{2035}' | '\u{0060}' | '\u{00B4}' | '\u{FF07}' => '\'',
        other => other,
    }
}

fn canonicalize_once(raw: &str) -> String {
    let compat: String = raw.nfkc().collect();
    let folded = default_case_fold_str(&compat);
    let ascii: String = folded.chars().map(ascii_quote).collect();

    let mut s = ascii.trim();
    // Enclosing quotation marks. Apostrophes only count when they wrap the
    // whole text, so "'tis" and "runnin'" survive.
    loop {
        let before = s.len();
        s = s.trim_start_matches('"').trim_end_matches('"').trim();
        if s.len() >= 2 && s.starts_with('\'') && s.ends_with('\'') {
            s = s[1..s.len() - 1].trim();
        }
        if s.len() == before {
            break;
        }
    }

    let mut collapsed = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !collapsed.is_empty() {
            collapsed.push(' ');
        }
        collapsed.push_str(word);
    }

    collapsed
        .trim_end_matches(SENTENCE_PUNCTUATION)
        .trim_end()
        .to_string()
}

/// Maps raw quote text to its canonical grouping key.
///
/// Steps, in order: NFKC, full case folding, typographic quotes to ASCII,
/// trim whitespace and enclosing quotes, collapse whitespace runs, strip
/// trailing sentence punctuation. The steps are repeated until the output
/// is stable, which makes the function idempotent even when one step
/// exposes work for an earlier one (e.g. `"hi."` after stripping quotes).
pub fn canonicalize_text(raw: &str) -> CanonicalKey {
    let mut current = canonicalize_once(raw);
    // Converges in two or three rounds in practice; the bound guards
    // against pathological normalization cycles.
    for _ in 0..8 {
        let next = canonicalize_once(&current);
        if next == current {
            break;
        }
        current = next;
    }
    CanonicalKey(current)
}

/// Merges per-occurrence candidate lists into global candidates.
///
/// Each speaker's aggregate score is the sum of its probabilities over all
/// lists. Contributions are summed in sorted order, so the result is
/// bit-identical under any permutation of the input lists.
pub fn consensus_scores<L>(candidate_lists: &[L]) -> Vec<GlobalCandidate>
where
    L: AsRef<[SpeakerCandidate]>,
{
    let mut contributions: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for list in candidate_lists {
        for c in list.as_ref() {
            contributions
                .entry(c.speaker_id.as_str())
                .or_default()
                .push(c.probability);
        }
    }

    let mut scored: Vec<(String, f64)> = contributions
        .into_iter()
        .map(|(id, mut probs)| {
            probs.sort_by(f64::total_cmp);
            (id.to_string(), probs.iter().sum())
        })
        .collect();

    let total: f64 = {
        let mut scores: Vec<f64> = scored.iter().map(|(_, s)| *s).collect();
        scores.sort_by(f64::total_cmp);
        scores.iter().sum()
    };

    let mut out: Vec<GlobalCandidate> = if total > 0.0 {
        scored
            .drain(..)
            .map(|(speaker_id, aggregate_score)| GlobalCandidate {
                normalized_probability: aggregate_score / total,
                speaker_id,
                aggregate_score,
            })
            .collect()
    } else {
        // No probability mass anywhere: attribute everything to NONE.
        if !scored.iter().any(|(id, _)| id == NO_SPEAKER) {
            scored.push((NO_SPEAKER.to_string(), 0.0));
        }
        scored
            .drain(..)
            .map(|(speaker_id, aggregate_score)| GlobalCandidate {
                normalized_probability: if speaker_id == NO_SPEAKER { 1.0 } else { 0.0 },
                speaker_id,
                aggregate_score,
            })
            .collect()
    };
    out.sort_by(GlobalCandidate::rank_cmp);
    out
}

/// Groups occurrences by canonical key and builds one [`CanonicalQuote`]
/// per group. Output is ordered by canonical text and does not depend on
/// the input order.
pub fn merge_occurrences<I>(occurrences: I) -> Vec<CanonicalQuote>
where
    I: IntoIterator<Item = QuoteOccurrence>,
{
    let mut groups: HashMap<CanonicalKey, Vec<QuoteOccurrence>> = HashMap::new();
    for occ in occurrences {
        groups.entry(canonicalize_text(&occ.raw_text)).or_default().push(occ);
    }
    let mut quotes: Vec<CanonicalQuote> = groups
        .into_iter()
        .filter_map(|(key, group)| merge_group(key, group))
        .collect();
    quotes.sort_by(|a, b| a.canonical_text.cmp(&b.canonical_text));
    quotes
}

fn merge_group(key: CanonicalKey, mut group: Vec<QuoteOccurrence>) -> Option<CanonicalQuote> {
    group.sort_by(|a, b| {
        a.date
            .cmp(&b.date)
            .then_with(|| a.occurrence_id.cmp(&b.occurrence_id))
    });
    let first = group.first()?;
    let earliest_date = first.date;
    let display_text = first.raw_text.clone();
    let latest_date = group.iter().map(|o| o.date).max()?;

    let mut urls: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for occ in &group {
        if seen.insert(occ.url.as_str()) {
            urls.push(occ.url.clone());
        }
    }

    let lists: Vec<&[SpeakerCandidate]> = group.iter().map(|o| o.candidates.as_slice()).collect();
    let global_candidates = consensus_scores(&lists);
    let top_speaker = global_candidates
        .first()
        .map(|c| c.speaker_id.clone())
        .unwrap_or_else(|| NO_SPEAKER.to_string());

    Some(CanonicalQuote {
        quote_id: key.quote_id(),
        canonical_text: key.into_string(),
        display_text,
        num_occurrences: group.len() as u32,
        earliest_date,
        latest_date,
        global_candidates,
        top_speaker,
        urls,
    })
}
