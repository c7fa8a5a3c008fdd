//! Bounded edit distance and fuzzy term expansion.

use crate::index::TextField;

/// Maximum edit distance allowed for a query token of `len` characters.
pub fn max_edits(len: usize) -> usize {
    match len {
        0..=2 => 0,
        3..=5 => 1,
        _ => 2,
    }
}

/// Damerau-Levenshtein distance in its restricted (optimal string
/// alignment) form: insertions, deletions, substitutions and transpositions
/// of adjacent characters, each substring edited at most once.
///
/// Returns `None` as soon as the distance is known to exceed `limit`.
pub fn bounded_distance(a: &[char], b: &[char], limit: usize) -> Option<usize> {
    if a.len().abs_diff(b.len()) > limit {
        return None;
    }
    if a == b {
        return Some(0);
    }
    let width = b.len() + 1;
    // Three rolling rows: i-2, i-1, i.
    let mut prev2 = vec![0usize; width];
    let mut prev: Vec<usize> = (0..width).collect();
    let mut cur = vec![0usize; width];
    for i in 1..=a.len() {
        cur[0] = i;
        let mut row_min = cur[0];
        for j in 1..=b.len() {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            let mut v = (prev[j] + 1).min(cur[j - 1] + 1).min(prev[j - 1] + cost);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                v = v.min(prev2[j - 2] + 1);
            }
            cur[j] = v;
            row_min = row_min.min(v);
        }
        if row_min > limit {
            return None;
        }
        std::mem::swap(&mut prev2, &mut prev);
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[b.len()];
    (d <= limit).then_some(d)
}

/// Dictionary indices of terms within the allowed distance of `token`.
pub fn expand_term(field: &TextField, token: &str) -> Vec<usize> {
    let q: Vec<char> = token.chars().collect();
    let limit = max_edits(q.len());
    if limit == 0 {
        return field
            .terms()
            .binary_search_by(|t| t.as_str().cmp(token))
            .map(|i| vec![i])
            .unwrap_or_default();
    }
    let mut buf: Vec<char> = Vec::new();
    field
        .terms()
        .iter()
        .enumerate()
        .filter_map(|(i, term)| {
            // Byte length bounds char length from above; cheap pre-filter.
            if term.len() + limit < q.len() {
                return None;
            }
            buf.clear();
            buf.extend(term.chars());
            bounded_distance(&q, &buf, limit).map(|_| i)
        })
        .collect()
}
