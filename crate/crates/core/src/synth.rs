//! Seeded synthetic corpora for desk-scale testing.
//!
//! Quote texts come from a small template grammar. A few phrases ("great
//! again", "gdpr") appear at configurable rates, and arbitrary phrases can
//! be planted into an exact number of quotes. Every distinct quote gets at
//! least one occurrence, so the ingested corpus has exactly `n_quotes`
//! quotes; each quote's occurrences land in distinct articles.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use chrono::{Duration, NaiveDate};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aggregate::canonicalize_text;
use crate::ingest::{write_article_dump, write_json, write_profiles, IngestError, ARTICLES_FILE, SPEAKERS_FILE};
use crate::model::{
    ArticleRecord, LabeledId, QuoteOccurrence, SpeakerCandidate, SpeakerProfile, Validate, Violation, CORPUS_END,
    CORPUS_START,
};

pub const MANIFEST_FILE: &str = "manifest.json";

pub const ANCHOR_SPEAKER: &str = "Q22686";
pub const DREAM_QUOTE: &str = "You have to dream before your dreams can come true";

pub const OCCUPATIONS: &[(&str, &str)] = &[
    ("Q10833314", "tennis player"),
    ("Q1930187", "journalist"),
    ("Q82955", "politician"),
    ("Q33999", "actor"),
    ("Q901", "scientist"),
    ("Q43845", "businessperson"),
    ("Q36180", "writer"),
];

/// (id, label, adjective)
pub const NATIONALITIES: &[(&str, &str, &str)] = &[
    ("Q39", "Switzerland", "Swiss"),
    ("Q30", "United States of America", "American"),
    ("Q145", "United Kingdom", "British"),
    ("Q183", "Germany", "German"),
    ("Q142", "France", "French"),
    ("Q668", "India", "Indian"),
    ("Q16", "Canada", "Canadian"),
];

pub const GENDERS: &[(&str, &str)] = &[("Q6581097", "male"), ("Q6581072", "female"), ("Q48270", "non-binary")];

const FIRST_NAMES: &[&str] = &[
    "Anna", "Ben", "Clara", "David", "Elena", "Felix", "Greta", "Hugo", "Ines", "Jonas", "Karin", "Lukas", "Maya",
    "Nico", "Olga", "Pablo", "Quinn", "Rosa", "Samir", "Tara", "Urs", "Vera", "Wale", "Xenia", "Yusuf", "Zoe",
    "Priya", "Marc", "Lea", "Tom",
];

const LAST_NAMES: &[&str] = &[
    "Meier", "Smith", "Dubois", "Kumar", "Novak", "Rossi", "Schmid", "Brown", "Keller", "Patel", "Weber", "Martin",
    "Fischer", "Taylor", "Bernard", "Singh", "Huber", "Clark", "Moreau", "Wagner", "Lee", "Baker", "Roux", "Gerber",
    "Iyer", "Walker", "Lambert", "Frei", "Hill", "Young",
];

const OPENERS: &[&str] = &[
    "I think", "Honestly,", "We know that", "Frankly,", "I believe", "Let me be clear:", "In my view", "Today",
    "As always,", "Once again", "Sometimes", "For me", "Of course", "Look,", "Right now", "In the end", "Clearly",
    "To be fair,", "At this point", "Believe me,",
];

const SUBJECTS: &[&str] = &[
    "the team", "our country", "the market", "this match", "the government", "the economy", "my family",
    "the players", "the people", "this company", "the press", "science", "the climate", "the city", "our fans",
    "the coach", "the board", "the voters", "the industry", "the tournament", "the research", "the crowd",
    "the season", "the election", "our partners", "the council", "the studio", "the lab", "the league", "the border",
];

const VERBS: &[&str] = &[
    "needs", "deserves", "wants", "expects", "will build", "has earned", "can win", "must protect", "will change",
    "is losing", "has found", "will fight for", "cannot ignore", "should support", "keeps asking for", "is ready for",
    "will never forget", "has to accept", "is proud of", "will deliver", "must avoid", "is chasing", "will remember",
    "cannot afford", "is talking about", "wants to see", "has missed", "will defend", "is building", "will reward",
];

const OBJECTS: &[&str] = &[
    "a fair deal", "real progress", "more time", "a better plan", "strong leadership", "new ideas", "the truth",
    "a second chance", "better results", "more respect", "clear rules", "fresh energy", "some patience",
    "a big victory", "honest answers", "more investment", "real change", "a strong finish", "new jobs",
    "a safer future", "good science", "open borders", "lower taxes", "better serves", "quiet confidence",
    "bold reforms", "long rallies", "more funding", "a title", "public trust", "a new stadium", "cleaner air",
    "more data", "stronger growth", "a peace deal", "a clean slate", "higher wages", "fewer mistakes",
    "better hospitals", "a fresh start",
];

const TAILS: &[&str] = &[
    "", "right now", "this year", "in the long run", "no matter what", "every single day", "for everyone",
    "before it is too late", "next season", "on the court", "at home", "in Europe", "around the world",
    "for the next generation", "without excuses", "step by step", "together", "very soon", "at any cost",
    "once and for all",
];

const CITIES: &[&str] = &[
    "Basel", "Geneva", "Zurich", "London", "Paris", "Berlin", "Mumbai", "Toronto", "New York", "Washington",
];

const GREAT_AGAIN_TEXTS: &[&str] = &[
    "We will make America great again!",
    "Together, we will make America great again",
    "We are going to make our country great again, believe me",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPhrase {
    pub text: String,
    /// Number of distinct quotes that receive the phrase.
    pub quotes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_articles: usize,
    pub n_speakers: usize,
    /// Distinct quotes; `None` means twice the article count. Always zero
    /// when there are no articles.
    pub n_quotes: Option<usize>,
    /// Share of grammar quotes built around "great again".
    pub great_again_rate: f64,
    /// Share of grammar quotes mentioning "gdpr".
    pub gdpr_quote_rate: f64,
    /// Share of occurrences whose context mentions the GDPR.
    pub gdpr_context_rate: f64,
    pub planted: Vec<PlantedPhrase>,
}

impl GeneratorConfig {
    pub fn new(seed: u64, n_articles: usize, n_speakers: usize) -> Self {
        GeneratorConfig {
            seed,
            n_articles,
            n_speakers,
            n_quotes: None,
            great_again_rate: 0.01,
            gdpr_quote_rate: 0.005,
            gdpr_context_rate: 0.01,
            planted: Vec::new(),
        }
    }

    pub fn with_quotes(mut self, n_quotes: usize) -> Self {
        self.n_quotes = Some(n_quotes);
        self
    }

    pub fn quote_count(&self) -> usize {
        if self.n_articles == 0 {
            0
        } else {
            self.n_quotes.unwrap_or(2 * self.n_articles)
        }
    }
}

impl Validate for GeneratorConfig {
    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n_speakers < 1 {
            out.push(Violation::new("n_speakers", "must be at least 1"));
        }
        for (name, rate) in [
            ("great_again_rate", self.great_again_rate),
            ("gdpr_quote_rate", self.gdpr_quote_rate),
            ("gdpr_context_rate", self.gdpr_context_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                out.push(Violation::new(name, "must be within [0, 1]"));
            }
        }
        let planted: usize = self.planted.iter().map(|p| p.quotes).sum();
        if planted > self.quote_count() {
            out.push(Violation::new("planted", "more planted quotes than quotes"));
        }
        if self.planted.iter().any(|p| canonicalize_text(&p.text).as_str().is_empty()) {
            out.push(Violation::new("planted", "empty phrase"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorManifest {
    pub seed: u64,
    pub n_articles: usize,
    pub n_speakers: usize,
    pub n_quotes: usize,
    pub total_occurrences: u64,
    /// Quote occurrences per article, in dump order.
    pub article_quote_counts: Vec<u32>,
    /// Distinct quotes containing each tracked phrase.
    pub phrase_quotes: BTreeMap<String, usize>,
    /// Occurrences whose context mentions the GDPR.
    pub gdpr_contexts: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub articles: Vec<ArticleRecord>,
    pub profiles: Vec<SpeakerProfile>,
    pub manifest: GeneratorManifest,
}

struct PoolQuote {
    text: String,
    owner: usize,
    occurrences: usize,
}

fn speaker_id(i: usize) -> String {
    if i == 0 {
        ANCHOR_SPEAKER.to_string()
    } else {
        format!("Q{}", 1_000_000 + i)
    }
}

fn make_profiles(rng: &mut ChaCha8Rng, n: usize) -> Vec<SpeakerProfile> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i == 0 {
            out.push(SpeakerProfile {
                speaker_id: ANCHOR_SPEAKER.into(),
                name: "Donald Trump".into(),
                aliases: vec!["Donald J. Trump".into()],
                description: "45th president of the United States".into(),
                occupations: vec![LabeledId::new("Q82955", "politician"), LabeledId::new("Q43845", "businessperson")],
                nationalities: vec![LabeledId::new("Q30", "United States of America")],
                gender: Some(LabeledId::new("Q6581097", "male")),
                quote_count: 0,
            });
            continue;
        }
        let first = FIRST_NAMES[rng.gen_range(0..FIRST_NAMES.len())];
        let last = LAST_NAMES[rng.gen_range(0..LAST_NAMES.len())];
        let (occ_id, occ_label) = OCCUPATIONS[rng.gen_range(0..OCCUPATIONS.len())];
        let (nat_id, nat_label, adjective) = NATIONALITIES[rng.gen_range(0..NATIONALITIES.len())];
        let mut occupations = vec![LabeledId::new(occ_id, occ_label)];
        if rng.gen_bool(0.15) {
            let (id, label) = OCCUPATIONS[rng.gen_range(0..OCCUPATIONS.len())];
            occupations.push(LabeledId::new(id, label));
        }
        let gender = match rng.gen_range(0..100) {
            0..=54 => Some(GENDERS[0]),
            55..=92 => Some(GENDERS[1]),
            93..=96 => Some(GENDERS[2]),
            _ => None,
        };
        let aliases = if rng.gen_bool(0.2) {
            vec![format!("{}. {last}", &first[..1])]
        } else {
            Vec::new()
        };
        let mut p = SpeakerProfile {
            speaker_id: speaker_id(i),
            name: format!("{first} {last}"),
            aliases,
            description: format!("{adjective} {occ_label}"),
            occupations,
            nationalities: vec![LabeledId::new(nat_id, nat_label)],
            gender: gender.map(|(id, label)| LabeledId::new(id, label)),
            quote_count: 0,
        };
        p.dedup_attributes();
        out.push(p);
    }
    out
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words[rng.gen_range(0..words.len())]
}

fn grammar_quote(rng: &mut ChaCha8Rng, great_again: bool, gdpr: bool) -> String {
    let subject = pick(rng, SUBJECTS);
    let mut words: Vec<&str> = vec![pick(rng, OPENERS)];
    if great_again {
        words.extend([subject, "will be great again", pick(rng, TAILS)]);
    } else if gdpr {
        words.extend([subject, pick(rng, VERBS), "the gdpr", pick(rng, TAILS)]);
    } else {
        words.extend([subject, pick(rng, VERBS), pick(rng, OBJECTS), pick(rng, TAILS)]);
    }
    words.retain(|w| !w.is_empty());
    let mut text = words.join(" ");
    if let Some(first) = text.get(..1) {
        let upper = first.to_uppercase();
        text.replace_range(..1, &upper);
    }
    text
}

/// Zipf-like owner choice: low indices are far more popular.
fn popular_speaker(rng: &mut ChaCha8Rng, n: usize) -> usize {
    let u: f64 = rng.gen();
    ((u * u * u) * n as f64) as usize % n
}

fn occurrence_count(rng: &mut ChaCha8Rng) -> usize {
    if rng.gen_bool(0.7) {
        1
    } else {
        let u: f64 = rng.gen();
        2 + (u * u * u * 30.0) as usize
    }
}

fn surface_variant(rng: &mut ChaCha8Rng, text: &str) -> String {
    let variant = match rng.gen_range(0..6) {
        0 => format!("\u{201C}{text}\u{201D}"),
        1 => format!("{text}."),
        2 => text.to_lowercase(),
        3 => format!("\"{text}!\""),
        4 => text.replace(' ', "  "),
        _ => text.to_string(),
    };
    if canonicalize_text(&variant) == canonicalize_text(text) {
        variant
    } else {
        text.to_string()
    }
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn candidates(rng: &mut ChaCha8Rng, owner: usize, n_speakers: usize) -> Vec<SpeakerCandidate> {
    // Occasionally someone else is the local favourite.
    let top = if n_speakers > 1 && rng.gen_bool(0.05) {
        (owner + 1 + rng.gen_range(0..n_speakers - 1)) % n_speakers
    } else {
        owner
    };
    let p_top = round3(rng.gen_range(0.45..0.95));
    let mut out = vec![SpeakerCandidate::new(speaker_id(top), p_top)];
    let mut rest = round3(1.0 - p_top);
    if n_speakers > 1 && rng.gen_bool(0.5) {
        let other = (top + 1 + rng.gen_range(0..n_speakers - 1)) % n_speakers;
        let p = round3(rest * rng.gen_range(0.0..1.0));
        if p > 0.0 && other != top {
            out.push(SpeakerCandidate::new(speaker_id(other), p));
            rest = round3(rest - p);
        }
    }
    if rest > 0.0 {
        out.push(SpeakerCandidate::no_speaker(rest));
    }
    out.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    out
}

fn context(rng: &mut ChaCha8Rng, name: &str, gdpr: bool) -> String {
    let city = pick(rng, CITIES);
    if gdpr {
        format!("{name} spoke in {city} as the GDPR rules on data protection took effect.")
    } else {
        let when = pick(rng, &["on Monday", "on Friday", "last week", "after the meeting", "in an interview"]);
        format!("{name} told reporters in {city} {when}.")
    }
}

/// Generates a corpus in memory.
pub fn synthesize(config: &GeneratorConfig) -> Result<SyntheticCorpus, Vec<Violation>> {
    let violations = config.validate();
    if !violations.is_empty() {
        return Err(violations);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let profiles = make_profiles(&mut rng, config.n_speakers);
    let n_speakers = config.n_speakers;
    let n_articles = config.n_articles;
    let n_quotes = config.quote_count();

    // Quote pool.
    let mut pool: Vec<PoolQuote> = Vec::with_capacity(n_quotes);
    let mut keys: HashSet<String> = HashSet::with_capacity(n_quotes);
    let popular = |rng: &mut ChaCha8Rng| 500 + rng.gen_range(0..300);
    if n_quotes >= 50 {
        for text in GREAT_AGAIN_TEXTS {
            keys.insert(canonicalize_text(text).into_string());
            pool.push(PoolQuote {
                text: text.to_string(),
                owner: 0,
                occurrences: popular(&mut rng),
            });
        }
        keys.insert(canonicalize_text(DREAM_QUOTE).into_string());
        pool.push(PoolQuote {
            text: DREAM_QUOTE.to_string(),
            owner: 1 % n_speakers,
            occurrences: 120 + rng.gen_range(0..80),
        });
    }
    let mut planted_left: Vec<(usize, usize)> = config.planted.iter().map(|p| p.quotes).enumerate().collect();
    let mut attempts = 0usize;
    while pool.len() < n_quotes {
        attempts += 1;
        assert!(attempts < 50 * n_quotes + 1000, "template grammar exhausted");
        let great_again = rng.gen_bool(config.great_again_rate);
        let gdpr = !great_again && rng.gen_bool(config.gdpr_quote_rate);
        let mut text = grammar_quote(&mut rng, great_again, gdpr);
        let plant = planted_left.iter().position(|&(_, left)| left > 0);
        if let Some(slot) = plant {
            let phrase = &config.planted[planted_left[slot].0].text;
            text = format!("{text}, {phrase}");
        }
        if !keys.insert(canonicalize_text(&text).into_string()) {
            continue;
        }
        if let Some(slot) = plant {
            planted_left[slot].1 -= 1;
        }
        let owner = if great_again && rng.gen_bool(0.7) {
            0
        } else {
            popular_speaker(&mut rng, n_speakers)
        };
        pool.push(PoolQuote {
            text,
            owner,
            occurrences: occurrence_count(&mut rng),
        });
    }

    // Article skeletons, then occurrences spread over distinct articles.
    let span = (CORPUS_END - CORPUS_START).num_days();
    let dates: Vec<NaiveDate> = (0..n_articles)
        .map(|_| CORPUS_START + Duration::days(rng.gen_range(0..=span)))
        .collect();
    let mut slots: Vec<Vec<usize>> = vec![Vec::new(); n_articles];
    for (qi, q) in pool.iter_mut().enumerate() {
        q.occurrences = q.occurrences.min(n_articles).max(1);
        for a in index::sample(&mut rng, n_articles, q.occurrences) {
            slots[a].push(qi);
        }
    }

    let mut gdpr_contexts = 0u64;
    let mut articles = Vec::with_capacity(n_articles);
    for (ai, (date, mut quote_ids)) in dates.into_iter().zip(slots).enumerate() {
        quote_ids.shuffle(&mut rng);
        let article_id = format!("a{ai:07}");
        let url = format!(
            "https://news{}.example.com/{}/{article_id}",
            rng.gen_range(1..=40),
            date.format("%Y/%m/%d")
        );
        let occurrences = quote_ids
            .into_iter()
            .enumerate()
            .map(|(k, qi)| {
                let q = &pool[qi];
                let cands = candidates(&mut rng, q.owner, n_speakers);
                let gdpr = rng.gen_bool(config.gdpr_context_rate);
                gdpr_contexts += u64::from(gdpr);
                QuoteOccurrence {
                    occurrence_id: format!("{article_id}#{k}"),
                    article_id: article_id.clone(),
                    raw_text: surface_variant(&mut rng, &q.text),
                    context: context(&mut rng, &profiles[q.owner].name, gdpr),
                    date,
                    candidates: cands,
                    url: url.clone(),
                }
            })
            .collect();
        articles.push(ArticleRecord {
            article_id,
            url,
            date,
            occurrences,
        });
    }

    let mut phrase_quotes = BTreeMap::new();
    let canon: Vec<String> = pool.iter().map(|q| canonicalize_text(&q.text).into_string()).collect();
    let mut tracked: Vec<String> = vec!["great again".into(), "gdpr".into()];
    tracked.extend(config.planted.iter().map(|p| canonicalize_text(&p.text).into_string()));
    for phrase in tracked {
        let n = canon.iter().filter(|c| c.contains(phrase.as_str())).count();
        phrase_quotes.insert(phrase, n);
    }
    let article_quote_counts: Vec<u32> = articles.iter().map(|a| a.occurrences.len() as u32).collect();
    let manifest = GeneratorManifest {
        seed: config.seed,
        n_articles,
        n_speakers,
        n_quotes: pool.len(),
        total_occurrences: article_quote_counts.iter().map(|&c| u64::from(c)).sum(),
        article_quote_counts,
        phrase_quotes,
        gdpr_contexts,
    };
    Ok(SyntheticCorpus {
        articles,
        profiles,
        manifest,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error("invalid generator config: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Io(#[from] IngestError),
}

/// Generates a corpus and writes `articles.jsonl`, `speakers.jsonl` and
/// `manifest.json` into `out_dir`.
pub fn generate_synthetic_corpus(config: &GeneratorConfig, out_dir: &Path) -> Result<GeneratorManifest, GenerateError> {
    let corpus = synthesize(config).map_err(GenerateError::Invalid)?;
    std::fs::create_dir_all(out_dir).map_err(|e| IngestError::io(out_dir, e))?;
    write_article_dump(&out_dir.join(ARTICLES_FILE), &corpus.articles)?;
    write_profiles(&out_dir.join(SPEAKERS_FILE), &corpus.profiles)?;
    write_json(&out_dir.join(MANIFEST_FILE), &corpus.manifest)?;
    Ok(corpus.manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_corpus() {
        let c = synthesize(&GeneratorConfig::new(1, 0, 3)).unwrap();
        assert!(c.articles.is_empty());
        assert_eq!(c.profiles.len(), 3);
        assert_eq!(c.manifest.total_occurrences, 0);
        assert_eq!(c.profiles[0].speaker_id, ANCHOR_SPEAKER);
    }

    #[test]
    fn rejects_zero_speakers() {
        assert!(synthesize(&GeneratorConfig::new(1, 10, 0)).is_err());
    }

    #[test]
    fn deterministic() {
        let cfg = GeneratorConfig::new(7, 300, 20);
        assert_eq!(synthesize(&cfg).unwrap(), synthesize(&cfg).unwrap());
        let other = GeneratorConfig::new(8, 300, 20);
        assert_ne!(synthesize(&cfg).unwrap().articles, synthesize(&other).unwrap().articles);
    }

    #[test]
    fn records_are_valid_and_in_window() {
        let c = synthesize(&GeneratorConfig::new(3, 400, 30)).unwrap();
        for a in &c.articles {
            assert!(a.is_valid(), "{:?}", a.validate());
            assert!(CORPUS_START <= a.date && a.date <= CORPUS_END);
            for o in &a.occurrences {
                let total: f64 = o.candidates.iter().map(|c| c.probability).sum();
                assert!(total <= 1.0 + 1e-9);
            }
        }
        for p in &c.profiles {
            assert!(p.is_valid());
        }
    }

    #[test]
    fn exact_quote_count_and_planting() {
        let mut cfg = GeneratorConfig::new(5, 200, 10).with_quotes(900);
        cfg.planted.push(PlantedPhrase {
            text: "zorblax quintessence".into(),
            quotes: 150,
        });
        let c = synthesize(&cfg).unwrap();
        let keys: HashSet<String> = c
            .articles
            .iter()
            .flat_map(|a| a.occurrences.iter().map(|o| canonicalize_text(&o.raw_text).into_string()))
            .collect();
        assert_eq!(keys.len(), 900);
        assert_eq!(keys.iter().filter(|k| k.contains("zorblax quintessence")).count(), 150);
        assert_eq!(c.manifest.phrase_quotes["zorblax quintessence"], 150);
        assert!(c.manifest.phrase_quotes["great again"] >= 3);
    }

    #[test]
    fn occurrences_use_distinct_articles() {
        let c = synthesize(&GeneratorConfig::new(11, 150, 5)).unwrap();
        for a in &c.articles {
            let keys: HashSet<String> = a.occurrences.iter().map(|o| canonicalize_text(&o.raw_text).into_string()).collect();
            assert_eq!(keys.len(), a.occurrences.len());
        }
    }
}
