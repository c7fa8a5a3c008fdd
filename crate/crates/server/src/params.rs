//! URL query strings <-> `SearchQuery`.
//!
//! The parameter set is closed: anything not listed in [`SEARCH_PARAMS`]
//! is rejected by name, so every request either becomes a validated query
//! or a list of violations.

use chrono::NaiveDate;
use qsearch_core::model::{Validate, Violation};
use qsearch_core::query::{SortOrder, Target, DEFAULT_PAGE_SIZE};
use qsearch_core::SearchQuery;
use url::form_urlencoded;

pub const SEARCH_PARAMS: &[&str] = &[
    "target",
    "text",
    "exact",
    "with_context",
    "speaker",
    "nationality",
    "occupation",
    "gender",
    "num_occurrences",
    "from_date",
    "to_date",
    "sort",
    "page",
    "page_size",
];

/// Decodes a query string (`+` and percent escapes) into name/value pairs,
/// rejecting names outside `allowed` and repeated names.
pub fn decode_params(query: &str, allowed: &[&str]) -> Result<Vec<(String, String)>, Vec<Violation>> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut violations = Vec::new();
    for (name, value) in form_urlencoded::parse(query.as_bytes()) {
        if !allowed.contains(&name.as_ref()) {
            violations.push(Violation::new(name.as_ref(), "unknown parameter"));
        } else if out.iter().any(|(n, _)| *n == name) {
            violations.push(Violation::new(name.as_ref(), "duplicate parameter"));
        } else {
            out.push((name.into_owned(), value.into_owned()));
        }
    }
    if violations.is_empty() {
        Ok(out)
    } else {
        Err(violations)
    }
}

fn parse_bool(name: &str, value: &str, v: &mut Vec<Violation>) -> bool {
    match value {
        "true" => true,
        "false" => false,
        _ => {
            v.push(Violation::new(name, "not a boolean"));
            false
        }
    }
}

fn parse_int(name: &str, value: &str, v: &mut Vec<Violation>) -> Option<u32> {
    match value.parse::<i64>() {
        Ok(n) if n < 0 => {
            v.push(Violation::new(name, "must be non-negative"));
            None
        }
        Ok(n) => match u32::try_from(n) {
            Ok(n) => Some(n),
            Err(_) => {
                v.push(Violation::new(name, "too large"));
                None
            }
        },
        Err(_) => {
            v.push(Violation::new(name, "not an integer"));
            None
        }
    }
}

fn parse_date(name: &str, value: &str, v: &mut Vec<Violation>) -> Option<NaiveDate> {
    let ok_shape = value.len() == 10
        && value.bytes().enumerate().all(|(i, c)| match i {
            4 | 7 => c == b'-',
            _ => c.is_ascii_digit(),
        });
    match NaiveDate::parse_from_str(value, "%Y-%m-%d") {
        Ok(d) if ok_shape => Some(d),
        _ => {
            v.push(Violation::new(name, "invalid date (expected YYYY-MM-DD)"));
            None
        }
    }
}

/// Parses a search query string. Empty values count as absent; missing
/// dates default to the corpus window.
pub fn parse_request(query: &str) -> Result<SearchQuery, Vec<Violation>> {
    let params = decode_params(query, SEARCH_PARAMS)?;
    let mut q = SearchQuery::default();
    let mut v = Vec::new();
    for (name, value) in &params {
        if value.is_empty() && name != "text" {
            continue;
        }
        match name.as_str() {
            "target" => match value.parse::<Target>() {
                Ok(t) => q.target = t,
                Err(e) => v.push(Violation::new("target", e)),
            },
            "text" => q.text = value.clone(),
            "exact" => q.exact = parse_bool(name, value, &mut v),
            "with_context" => q.with_context = parse_bool(name, value, &mut v),
            "speaker" => q.speaker = Some(value.clone()),
            "nationality" => q.nationality = Some(value.clone()),
            "occupation" => q.occupation = Some(value.clone()),
            "gender" => q.gender = Some(value.clone()),
            "num_occurrences" => q.min_occurrences = parse_int(name, value, &mut v),
            "from_date" => {
                if let Some(d) = parse_date(name, value, &mut v) {
                    q.date_range.from = d;
                }
            }
            "to_date" => {
                if let Some(d) = parse_date(name, value, &mut v) {
                    q.date_range.to = d;
                }
            }
            "sort" => match value.parse::<SortOrder>() {
                Ok(s) => q.sort = s,
                Err(e) => v.push(Violation::new("sort", e)),
            },
            "page" => {
                if let Some(p) = parse_int(name, value, &mut v) {
                    q.page = p;
                }
            }
            "page_size" => {
                if let Some(p) = parse_int(name, value, &mut v) {
                    q.page_size = p;
                }
            }
            _ => unreachable!("filtered by decode_params"),
        }
    }
    if v.is_empty() {
        v = q.validate();
    }
    if v.is_empty() {
        Ok(q)
    } else {
        Err(v)
    }
}

fn encode(pairs: &[(&str, String)]) -> String {
    let mut s = form_urlencoded::Serializer::new(String::new());
    for (k, v) in pairs {
        s.append_pair(k, v);
    }
    s.finish()
}

/// Shareable query string. Dates are always written; other parameters only
/// when they differ from their defaults.
pub fn to_permalink(q: &SearchQuery) -> String {
    let mut pairs: Vec<(&str, String)> = vec![("target", q.target.as_str().to_string())];
    if !q.text.is_empty() {
        pairs.push(("text", q.text.clone()));
    }
    if q.exact {
        pairs.push(("exact", "true".into()));
    }
    for (name, value) in [
        ("speaker", &q.speaker),
        ("nationality", &q.nationality),
        ("occupation", &q.occupation),
        ("gender", &q.gender),
    ] {
        if let Some(v) = value {
            pairs.push((name, v.clone()));
        }
    }
    pairs.push(("from_date", q.date_range.from.to_string()));
    pairs.push(("to_date", q.date_range.to.to_string()));
    if let Some(n) = q.min_occurrences {
        pairs.push(("num_occurrences", n.to_string()));
    }
    if q.with_context {
        pairs.push(("with_context", "true".into()));
    }
    if q.sort != SortOrder::default() {
        pairs.push(("sort", q.sort.as_str().to_string()));
    }
    if q.page != 1 {
        pairs.push(("page", q.page.to_string()));
    }
    if q.page_size != DEFAULT_PAGE_SIZE {
        pairs.push(("page_size", q.page_size.to_string()));
    }
    encode(&pairs)
}

/// Cache key: every parameter except paging, defaults written out, sorted
/// by name. Queries that differ only in page share a key.
pub fn cache_key(q: &SearchQuery) -> String {
    let opt = |v: &Option<String>| v.clone().unwrap_or_default();
    let mut pairs: Vec<(&str, String)> = vec![
        ("target", q.target.as_str().to_string()),
        ("text", q.text.clone()),
        ("exact", q.exact.to_string()),
        ("with_context", q.with_context.to_string()),
        ("speaker", opt(&q.speaker)),
        ("nationality", opt(&q.nationality)),
        ("occupation", opt(&q.occupation)),
        ("gender", opt(&q.gender)),
        ("num_occurrences", q.min_occurrences.map(|n| n.to_string()).unwrap_or_default()),
        ("from_date", q.date_range.from.to_string()),
        ("to_date", q.date_range.to.to_string()),
        ("sort", q.sort.as_str().to_string()),
    ];
    pairs.sort_by(|a, b| a.0.cmp(b.0));
    encode(&pairs)
}
