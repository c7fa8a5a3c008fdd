use std::collections::BTreeMap;

use qsearch_core::index::{tokenize, TextScope, POSITION_GAP};
use qsearch_core::ingest::Corpus;
use qsearch_core::synth::{synthesize, GeneratorConfig};
use qsearch_core::{IndexSet, IndexSnapshot, StoredDoc};

fn corpus() -> Corpus {
    let s = synthesize(&GeneratorConfig::new(42, 2_000, 300).with_quotes(10_000)).unwrap();
    Corpus::from_articles(s.articles, s.profiles)
}

/// Term -> positions for one document, rebuilt segment by segment.
fn reference_terms(segments: &[&str]) -> BTreeMap<String, Vec<u32>> {
    let mut out: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    let mut next = 0u32;
    let mut any = false;
    for seg in segments {
        let toks = tokenize(seg);
        if toks.is_empty() {
            continue;
        }
        let base = if any { next - 1 + POSITION_GAP } else { 0 };
        for (i, t) in toks.iter().enumerate() {
            out.entry(t.term.clone()).or_default().push(base + i as u32);
        }
        next = base + toks.len() as u32;
        any = true;
    }
    out
}

fn check_field(snap: &IndexSnapshot, scope: TextScope, per_doc: &[BTreeMap<String, Vec<u32>>]) {
    let field = snap.field(scope).expect("field present");
    let mut seen_pairs = 0usize;
    for (ti, term) in field.terms().iter().enumerate() {
        for (doc, positions) in field.postings_at(ti).iter() {
            let expected = per_doc[doc as usize].get(term);
            assert_eq!(expected.map(Vec::as_slice), Some(positions), "term {term:?} doc {doc}");
            seen_pairs += 1;
        }
    }
    let expected_pairs: usize = per_doc.iter().map(BTreeMap::len).sum();
    assert_eq!(seen_pairs, expected_pairs);
    for (doc, terms) in per_doc.iter().enumerate() {
        let len: usize = terms.values().map(Vec::len).sum();
        assert_eq!(field.doc_length(doc as u32) as usize, len);
    }
}

#[test]
fn every_posting_matches_retokenization() {
    let corpus = corpus();
    assert_eq!(corpus.quotes.len(), 10_000);
    let set = IndexSet::build(&corpus).unwrap();

    let quote_terms: Vec<_> = set
        .quotes
        .docs()
        .iter()
        .map(|d| match d {
            StoredDoc::Quote(q) => {
                let name = corpus.catalog.get(&q.top_speaker).map(|p| p.name.as_str()).unwrap_or("");
                reference_terms(&[&q.canonical_text, name])
            }
            _ => unreachable!(),
        })
        .collect();
    check_field(&set.quotes, TextScope::Primary, &quote_terms);

    let (plain, ctx): (Vec<_>, Vec<_>) = set
        .articles
        .docs()
        .iter()
        .map(|d| match d {
            StoredDoc::Article(a) => {
                let plain: Vec<&str> = a.occurrences.iter().map(|o| o.raw_text.as_str()).collect();
                let ctx: Vec<&str> = a
                    .occurrences
                    .iter()
                    .flat_map(|o| [o.raw_text.as_str(), o.context.as_str()])
                    .collect();
                (reference_terms(&plain), reference_terms(&ctx))
            }
            _ => unreachable!(),
        })
        .unzip();
    check_field(&set.articles, TextScope::Primary, &plain);
    check_field(&set.articles, TextScope::WithContext, &ctx);

    let speaker_terms: Vec<_> = set
        .speakers
        .docs()
        .iter()
        .map(|d| match d {
            StoredDoc::Speaker(p) => {
                let mut segs: Vec<&str> = vec![&p.name];
                segs.extend(p.aliases.iter().map(String::as_str));
                segs.push(&p.description);
                reference_terms(&segs)
            }
            _ => unreachable!(),
        })
        .collect();
    check_field(&set.speakers, TextScope::Primary, &speaker_terms);
}
