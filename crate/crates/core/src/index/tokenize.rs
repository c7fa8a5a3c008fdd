//! Tokenization and the aggregated text field.

use serde::{Deserialize, Serialize};

use crate::model::{ArticleRecord, CanonicalQuote, SpeakerProfile};

/// Position distance inserted between aggregated segments. Larger than any
/// phrase slop the engine allows (zero), so phrases never straddle segments.
pub const POSITION_GAP: u32 = 100;

/// Separator placed between segments of an aggregated field. It is Unicode
/// whitespace, so it yields no token, and the tokenizer applies
/// [`POSITION_GAP`] when it sees it.
pub const SEGMENT_SEPARATOR: &str = " \u{2029} ";
const SEGMENT_BREAK: char = '\u{2029}';

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub term: String,
    pub position: u32,
}

/// A token together with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSpan {
    pub term: String,
    pub position: u32,
    pub start: usize,
    pub end: usize,
}

fn is_joiner(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '-' | '\u{2010}' | '\u{2011}')
}

/// Splits on whitespace and punctuation, keeping apostrophes and hyphens
/// that sit between two alphanumeric characters. Terms are lowercased; no
/// stemming or stop-word removal.
pub fn tokenize(text: &str) -> Vec<Token> {
    tokenize_spans(text)
        .into_iter()
        .map(|t| Token {
            term: t.term,
            position: t.position,
        })
        .collect()
}

pub fn tokenize_spans(text: &str) -> Vec<TokenSpan> {
    let mut out: Vec<TokenSpan> = Vec::new();
    let mut next_position = 0u32;
    let mut pending_gap = false;
    let mut chars = text.char_indices().peekable();
    let mut start: Option<usize> = None;
    let mut prev_alnum = false;

    let mut flush = |start: usize, end: usize, out: &mut Vec<TokenSpan>, pending_gap: &mut bool| {
        if *pending_gap {
            if let Some(last) = out.last() {
                next_position = last.position + POSITION_GAP;
            }
            *pending_gap = false;
        }
        let term: String = text[start..end]
            .chars()
            .map(|c| if c == '\u{2019}' { '\'' } else { c })
            .flat_map(char::to_lowercase)
            .map(|c| if c == '\u{2010}' || c == '\u{2011}' { '-' } else { c })
            .collect();
        out.push(TokenSpan {
            term,
            position: next_position,
            start,
            end,
        });
        next_position += 1;
    };

    while let Some((i, c)) = chars.next() {
        if c.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
            prev_alnum = true;
            continue;
        }
        if is_joiner(c) && prev_alnum && chars.peek().is_some_and(|&(_, n)| n.is_alphanumeric()) {
            prev_alnum = false;
            continue;
        }
        if let Some(s) = start.take() {
            flush(s, i, &mut out, &mut pending_gap);
        }
        prev_alnum = false;
        if c == SEGMENT_BREAK {
            pending_gap = true;
        }
    }
    if let Some(s) = start {
        flush(s, text.len(), &mut out, &mut pending_gap);
    }
    out
}

/// A document as seen by the aggregated-field builder.
#[derive(Debug, Clone, Copy)]
pub enum FieldSource<'a> {
    Quote {
        quote: &'a CanonicalQuote,
        speaker_name: Option<&'a str>,
    },
    Article(&'a ArticleRecord),
    Speaker(&'a SpeakerProfile),
}

/// Concatenates every searchable text of a document into one field.
///
/// Quotes: canonical text, then the top speaker's name. Articles: each
/// quote text, followed by its context when `with_context` is set.
/// Speakers: name, aliases, description. Segments are joined with
/// [`SEGMENT_SEPARATOR`].
pub fn aggregate_text_fields(doc: FieldSource<'_>, with_context: bool) -> String {
    let mut segments: Vec<&str> = Vec::new();
    match doc {
        FieldSource::Quote { quote, speaker_name } => {
            segments.push(&quote.canonical_text);
            if let Some(name) = speaker_name {
                segments.push(name);
            }
        }
        FieldSource::Article(article) => {
            for occ in &article.occurrences {
                segments.push(&occ.raw_text);
                if with_context {
                    segments.push(&occ.context);
                }
            }
        }
        FieldSource::Speaker(profile) => {
            segments.push(&profile.name);
            segments.extend(profile.aliases.iter().map(String::as_str));
            segments.push(&profile.description);
        }
    }
    segments.retain(|s| !s.trim().is_empty());
    segments.join(SEGMENT_SEPARATOR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{QuoteOccurrence, SpeakerCandidate};

    fn terms(text: &str) -> Vec<(String, u32)> {
        tokenize(text).into_iter().map(|t| (t.term, t.position)).collect()
    }

    fn tp(pairs: &[(&str, u32)]) -> Vec<(String, u32)> {
        pairs.iter().map(|(t, p)| (t.to_string(), *p)).collect()
    }

    #[test]
    fn basic_rules() {
        assert_eq!(terms("Great again!"), tp(&[("great", 0), ("again", 1)]));
        assert!(terms("").is_empty());
        assert_eq!(
            terms("state-of-the-art GDPR"),
            tp(&[("state-of-the-art", 0), ("gdpr", 1)])
        );
        assert_eq!(terms("don't -x- 'quoted' o\u{2019}neil"), tp(&[("don't", 0), ("x", 1), ("quoted", 2), ("o'neil", 3)]));
        assert_eq!(terms("a--b"), tp(&[("a", 0), ("b", 1)]));
        assert_eq!(terms("Zürich, 2018."), tp(&[("zürich", 0), ("2018", 1)]));
    }

    #[test]
    fn spans_point_into_source() {
        let text = "Hi, Zoë-Ann!";
        for t in tokenize_spans(text) {
            assert_eq!(text[t.start..t.end].to_lowercase(), t.term);
        }
    }

    #[test]
    fn gap_between_segments() {
        let joined = ["a b", "c"].join(SEGMENT_SEPARATOR);
        assert_eq!(terms(&joined), tp(&[("a", 0), ("b", 1), ("c", 101)]));
        // Leading break does not shift the first token.
        assert_eq!(terms("\u{2029} x"), tp(&[("x", 0)]));
    }

    fn occurrence(text: &str, context: &str) -> QuoteOccurrence {
        QuoteOccurrence {
            occurrence_id: "a#0".into(),
            article_id: "a".into(),
            raw_text: text.into(),
            context: context.into(),
            date: "2018-05-19".parse().unwrap(),
            candidates: vec![SpeakerCandidate::no_speaker(1.0)],
            url: "u".into(),
        }
    }

    #[test]
    fn article_aggregation() {
        let art = ArticleRecord {
            article_id: "a".into(),
            url: "u".into(),
            date: "2018-05-19".parse().unwrap(),
            occurrences: vec![occurrence("a b", "about gdpr"), occurrence("c", "")],
        };
        let plain = aggregate_text_fields(FieldSource::Article(&art), false);
        assert_eq!(terms(&plain), tp(&[("a", 0), ("b", 1), ("c", 101)]));
        let ctx = aggregate_text_fields(FieldSource::Article(&art), true);
        assert_eq!(
            terms(&ctx),
            tp(&[("a", 0), ("b", 1), ("about", 101), ("gdpr", 102), ("c", 202)])
        );
    }

    #[test]
    fn quote_aggregation() {
        let q = CanonicalQuote {
            quote_id: "x".into(),
            canonical_text: "great again".into(),
            display_text: "Great again!".into(),
            num_occurrences: 1,
            earliest_date: "2016-01-01".parse().unwrap(),
            latest_date: "2016-01-01".parse().unwrap(),
            global_candidates: vec![],
            top_speaker: "Q22686".into(),
            urls: vec![],
        };
        let text = aggregate_text_fields(
            FieldSource::Quote {
                quote: &q,
                speaker_name: Some("Donald Trump"),
            },
            false,
        );
        assert_eq!(
            terms(&text),
            tp(&[("great", 0), ("again", 1), ("donald", 101), ("trump", 102)])
        );
    }
}
