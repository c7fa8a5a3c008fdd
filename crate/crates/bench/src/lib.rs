//! Shared fixtures for the benchmarks.

use qsearch_core::ingest::Corpus;
use qsearch_core::synth::{synthesize, GeneratorConfig};
use qsearch_core::SearchQuery;

/// Seeded synthetic corpus with `quotes` distinct quotes.
pub fn corpus(quotes: usize) -> Corpus {
    let articles = (quotes / 2).max(1);
    let speakers = (quotes / 20).max(10);
    let s = synthesize(&GeneratorConfig::new(17, articles, speakers).with_quotes(quotes)).expect("valid config");
    Corpus::from_articles(s.articles, s.profiles)
}

/// Named queries covering the main execution paths.
pub fn query_mix() -> Vec<(&'static str, SearchQuery)> {
    vec![
        ("fuzzy_word", SearchQuery::quotation("economy")),
        ("fuzzy_typo", SearchQuery::quotation("econmy progres")),
        (
            "exact_phrase",
            SearchQuery {
                exact: true,
                ..SearchQuery::quotation("great again")
            },
        ),
        (
            "facet_only",
            SearchQuery {
                gender: Some("Q6581072".into()),
                ..SearchQuery::default()
            },
        ),
        ("match_all", SearchQuery::default()),
        (
            "article_context",
            SearchQuery {
                with_context: true,
                ..SearchQuery::article("gdpr")
            },
        ),
    ]
}
