//! JSON-lines dumps: article-level and quote-level corpora, speaker
//! profiles, and the ingest pipeline that turns an article dump into the
//! quote corpus plus an enriched speaker catalog.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{canonicalize_text, consensus_scores, merge_occurrences};
use crate::model::{
    is_entity_id, ArticleRecord, CanonicalQuote, LabeledId, QuoteOccurrence, SpeakerCandidate, SpeakerCatalog,
    SpeakerProfile, Validate, Violation, NO_SPEAKER,
};

pub const DUMP_SCHEMA_VERSION: &str = "qsearch-dump/1";

pub const ARTICLES_FILE: &str = "articles.jsonl";
pub const QUOTES_FILE: &str = "quotes.jsonl";
pub const SPEAKERS_FILE: &str = "speakers.jsonl";
pub const REPORT_FILE: &str = "ingest_report.json";
pub const FORMAT_FILE: &str = "format.json";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        IngestError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DumpStage {
    Article,
    Quote,
    Speaker,
}

/// Describes one dump file of an ingested corpus directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpFormatDescriptor {
    pub stage: DumpStage,
    pub schema_version: String,
}

impl DumpFormatDescriptor {
    pub fn new(stage: DumpStage) -> Self {
        DumpFormatDescriptor {
            stage,
            schema_version: DUMP_SCHEMA_VERSION.to_string(),
        }
    }
}

impl Validate for DumpFormatDescriptor {
    fn validate(&self) -> Vec<Violation> {
        if self.schema_version == DUMP_SCHEMA_VERSION {
            Vec::new()
        } else {
            vec![Violation::new(
                "schema_version",
                format!("unsupported schema version {:?}", self.schema_version),
            )]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineIssue {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub source: String,
    pub total_lines: usize,
    pub accepted: usize,
    pub skipped: usize,
    /// One entry per skipped line.
    pub errors: Vec<LineIssue>,
    /// Accepted lines with something worth flagging.
    pub warnings: Vec<LineIssue>,
    /// Speaker ids referenced by quotes but absent from the profile file.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_speakers: Vec<String>,
}

/// A line parser: either a value, with optional warnings, or a reason for
/// skipping the line.
type LineParser<T> = fn(&str) -> Result<(T, Vec<String>), String>;

/// Streams values out of a JSON-lines file. Malformed lines are skipped and
/// recorded in the report, which is available once iteration is done.
pub struct DumpReader<T> {
    reader: Box<dyn BufRead>,
    parse: LineParser<T>,
    report: IngestReport,
    buf: Vec<u8>,
    failed: Option<io::Error>,
}

impl<T> DumpReader<T> {
    fn open(path: &Path, parse: LineParser<T>) -> Result<Self, IngestError> {
        let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
        Ok(Self::from_reader(BufReader::new(file), path.display().to_string(), parse))
    }

    fn from_reader<R: BufRead + 'static>(reader: R, source: String, parse: LineParser<T>) -> Self {
        DumpReader {
            reader: Box::new(reader),
            parse,
            report: IngestReport {
                source,
                ..IngestReport::default()
            },
            buf: Vec::new(),
            failed: None,
        }
    }

    pub fn report(&self) -> &IngestReport {
        &self.report
    }

    /// Ends the stream, returning its report, or the read error that cut it
    /// short.
    pub fn finish(self) -> io::Result<IngestReport> {
        match self.failed {
            Some(e) => Err(e),
            None => Ok(self.report),
        }
    }

    fn skip(&mut self, reason: String) {
        self.report.skipped += 1;
        self.report.errors.push(LineIssue {
            line: self.report.total_lines,
            reason,
        });
    }
}

impl<T> Iterator for DumpReader<T> {
    type Item = T;

    fn next(&mut self) -> Option<T> {
        loop {
            if self.failed.is_some() {
                return None;
            }
            self.buf.clear();
            match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.failed = Some(e);
                    return None;
                }
            }
            self.report.total_lines += 1;
            let line = match std::str::from_utf8(&self.buf) {
                Ok(s) => s.trim_end_matches(['\n', '\r']),
                Err(_) => {
                    self.skip("invalid UTF-8".into());
                    continue;
                }
            };
            if line.trim().is_empty() {
                self.skip("empty line".into());
                continue;
            }
            match (self.parse)(line) {
                Ok((value, warnings)) => {
                    self.report.accepted += 1;
                    let line_no = self.report.total_lines;
                    self.report
                        .warnings
                        .extend(warnings.into_iter().map(|reason| LineIssue { line: line_no, reason }));
                    return Some(value);
                }
                Err(reason) => self.skip(reason),
            }
        }
    }
}

/// Parses `YYYY-MM-DD`; longer timestamps (`YYYY-MM-DDTHH:MM:SS...` or with
/// a space) are truncated to their date.
pub fn parse_dump_date(s: &str) -> Result<NaiveDate, String> {
    let date = match s.len() {
        10 => s,
        n if n > 10 && matches!(s.as_bytes()[10], b'T' | b' ') => &s[..10],
        _ => return Err(format!("invalid date {s:?}")),
    };
    let b = date.as_bytes();
    let shape_ok = b.iter().enumerate().all(|(i, &c)| match i {
        4 | 7 => c == b'-',
        _ => c.is_ascii_digit(),
    });
    if !shape_ok {
        return Err(format!("invalid date {s:?}"));
    }
    NaiveDate::parse_from_str(date, "%Y-%m-%d").map_err(|_| format!("invalid date {s:?}"))
}

fn reason_from(violations: &[Violation]) -> String {
    let mut seen = BTreeSet::new();
    violations
        .iter()
        .filter(|v| seen.insert(v.message.as_str()))
        .map(|v| v.message.as_str())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Serialize, Deserialize)]
struct ArticleLine {
    #[serde(rename = "articleID")]
    article_id: String,
    url: String,
    date: String,
    quotes: Vec<ArticleQuoteLine>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArticleQuoteLine {
    #[serde(rename = "quoteText")]
    quote_text: String,
    #[serde(default)]
    context: String,
    #[serde(default)]
    candidates: Vec<ProbLine>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProbLine {
    id: String,
    prob: f64,
}

fn parse_article_line(line: &str) -> Result<(ArticleRecord, Vec<String>), String> {
    let raw: ArticleLine = serde_json::from_str(line).map_err(|e| format!("malformed JSON: {e}"))?;
    if raw.article_id.is_empty() {
        return Err("missing articleID".into());
    }
    let date = parse_dump_date(&raw.date)?;
    let mut warnings = Vec::new();
    let occurrences = raw
        .quotes
        .into_iter()
        .enumerate()
        .map(|(i, q)| {
            let mut candidates: Vec<SpeakerCandidate> = q
                .candidates
                .into_iter()
                .map(|c| SpeakerCandidate::new(c.id, c.prob))
                .collect();
            if candidates.is_empty() {
                warnings.push(format!("quote {i}: no candidates, attributed to {NO_SPEAKER}"));
                candidates.push(SpeakerCandidate::no_speaker(1.0));
            }
            // Stable, so equal probabilities keep their dump order.
            candidates.sort_by(|a, b| b.probability.total_cmp(&a.probability));
            QuoteOccurrence {
                occurrence_id: format!("{}#{i}", raw.article_id),
                article_id: raw.article_id.clone(),
                raw_text: q.quote_text,
                context: q.context,
                date,
                candidates,
                url: raw.url.clone(),
            }
        })
        .collect();
    let article = ArticleRecord {
        article_id: raw.article_id,
        url: raw.url,
        date,
        occurrences,
    };
    let violations = article.validate();
    if violations.is_empty() {
        Ok((article, warnings))
    } else {
        Err(reason_from(&violations))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct QuoteLine {
    #[serde(rename = "quoteID")]
    quote_id: String,
    quotation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    speaker: Option<String>,
    num_occurrences: i64,
    date_range: DateRangeLine,
    candidates: Vec<ScoreLine>,
    #[serde(default)]
    urls: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DateRangeLine {
    from: String,
    to: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreLine {
    id: String,
    score: f64,
}

fn parse_quote_line(line: &str) -> Result<(CanonicalQuote, Vec<String>), String> {
    let raw: QuoteLine = serde_json::from_str(line).map_err(|e| format!("malformed JSON: {e}"))?;
    if raw.num_occurrences < 1 {
        return Err("num_occurrences < 1".into());
    }
    let num_occurrences = u32::try_from(raw.num_occurrences).map_err(|_| "num_occurrences too large".to_string())?;
    let mut seen = BTreeSet::new();
    if !raw.candidates.iter().all(|c| seen.insert(c.id.as_str())) {
        return Err("duplicate candidate".into());
    }
    if raw.candidates.iter().any(|c| !(c.score >= 0.0 && c.score.is_finite())) {
        return Err("invalid candidate score".into());
    }
    let lists: Vec<Vec<SpeakerCandidate>> = raw
        .candidates
        .iter()
        .map(|c| vec![SpeakerCandidate::new(c.id.clone(), c.score)])
        .collect();
    let global_candidates = consensus_scores(&lists);
    let top_speaker = global_candidates
        .first()
        .map(|c| c.speaker_id.clone())
        .unwrap_or_else(|| NO_SPEAKER.to_string());

    let key = canonicalize_text(&raw.quotation);
    let mut warnings = Vec::new();
    if let Some(stored) = &raw.speaker {
        if *stored != top_speaker {
            warnings.push(format!("stored speaker {stored} disagrees with top candidate {top_speaker}"));
        }
    }
    let quote_id = if raw.quote_id.is_empty() {
        key.quote_id()
    } else {
        if raw.quote_id != key.quote_id() {
            warnings.push("quoteID does not match the canonical text".into());
        }
        raw.quote_id
    };
    let quote = CanonicalQuote {
        quote_id,
        canonical_text: key.into_string(),
        display_text: raw.quotation,
        num_occurrences,
        earliest_date: parse_dump_date(&raw.date_range.from)?,
        latest_date: parse_dump_date(&raw.date_range.to)?,
        global_candidates,
        top_speaker,
        urls: raw.urls,
    };
    let violations = quote.validate();
    if violations.is_empty() {
        Ok((quote, warnings))
    } else {
        Err(reason_from(&violations))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileLine {
    id: String,
    name: String,
    #[serde(default)]
    aliases: Vec<String>,
    #[serde(default)]
    description: String,
    #[serde(default)]
    occupations: Vec<LabeledId>,
    #[serde(default)]
    nationalities: Vec<LabeledId>,
    #[serde(default)]
    gender: Option<LabeledId>,
}

fn parse_profile_line(line: &str) -> Result<(SpeakerProfile, Vec<String>), String> {
    let raw: ProfileLine = serde_json::from_str(line).map_err(|e| format!("malformed JSON: {e}"))?;
    if !is_entity_id(&raw.id) {
        return Err("invalid speaker id".into());
    }
    let mut profile = SpeakerProfile {
        speaker_id: raw.id,
        name: raw.name,
        aliases: raw.aliases,
        description: raw.description,
        occupations: raw.occupations,
        nationalities: raw.nationalities,
        gender: raw.gender,
        quote_count: 0,
    };
    profile.dedup_attributes();
    Ok((profile, Vec::new()))
}

pub fn read_article_dump(path: &Path) -> Result<DumpReader<ArticleRecord>, IngestError> {
    DumpReader::open(path, parse_article_line)
}

pub fn read_quote_dump(path: &Path) -> Result<DumpReader<CanonicalQuote>, IngestError> {
    DumpReader::open(path, parse_quote_line)
}

pub fn read_profiles(path: &Path) -> Result<DumpReader<SpeakerProfile>, IngestError> {
    DumpReader::open(path, parse_profile_line)
}

/// Article dump reader over in-memory or other non-file input.
pub fn article_dump_from_reader<R: BufRead + 'static>(reader: R, source: &str) -> DumpReader<ArticleRecord> {
    DumpReader::from_reader(reader, source.to_string(), parse_article_line)
}

pub fn quote_dump_from_reader<R: BufRead + 'static>(reader: R, source: &str) -> DumpReader<CanonicalQuote> {
    DumpReader::from_reader(reader, source.to_string(), parse_quote_line)
}

/// Speaker catalog for `quotes` from an in-memory profile stream.
///
/// Holds one profile per speaker id that appears among any quote's
/// candidates (never [`NO_SPEAKER`]); `quote_count` is the number of quotes
/// whose top speaker it is. Returns the catalog and the referenced ids that
/// had no profile (they get stubs). Of duplicate profiles, the first wins.
pub fn catalog_for_quotes<'a, P, Q>(profiles: P, quotes: Q) -> (SpeakerCatalog, Vec<String>)
where
    P: IntoIterator<Item = SpeakerProfile>,
    Q: IntoIterator<Item = &'a CanonicalQuote>,
{
    let referenced = referenced_speakers(quotes);
    let mut catalog = SpeakerCatalog::new();
    for profile in profiles {
        if referenced.contains_key(&profile.speaker_id) && !catalog.contains(&profile.speaker_id) {
            catalog.insert(profile);
        }
    }
    let missing = finish_catalog(&mut catalog, referenced);
    (catalog, missing)
}

fn referenced_speakers<'a, Q>(quotes: Q) -> BTreeMap<String, u32>
where
    Q: IntoIterator<Item = &'a CanonicalQuote>,
{
    let mut referenced: BTreeMap<String, u32> = BTreeMap::new();
    for q in quotes {
        for c in &q.global_candidates {
            if c.speaker_id != NO_SPEAKER {
                referenced.entry(c.speaker_id.clone()).or_insert(0);
            }
        }
        if let Some(n) = referenced.get_mut(&q.top_speaker) {
            *n += 1;
        }
    }
    referenced
}

fn finish_catalog(catalog: &mut SpeakerCatalog, referenced: BTreeMap<String, u32>) -> Vec<String> {
    let mut missing = Vec::new();
    for (id, count) in referenced {
        if !catalog.contains(&id) {
            missing.push(id.clone());
            catalog.insert(SpeakerProfile::stub(id.clone()));
        }
        if let Some(p) = catalog.get_mut(&id) {
            p.quote_count = count;
        }
    }
    missing
}

/// [`catalog_for_quotes`] reading profiles from a JSON-lines file; missing
/// speakers and duplicate profiles are listed in the report.
pub fn enrich_speakers<'a, I>(profiles_path: &Path, quotes: I) -> Result<(SpeakerCatalog, IngestReport), IngestError>
where
    I: IntoIterator<Item = &'a CanonicalQuote>,
{
    let referenced = referenced_speakers(quotes);
    let mut catalog = SpeakerCatalog::new();
    let mut reader = read_profiles(profiles_path)?;
    let mut duplicates = Vec::new();
    while let Some(profile) = reader.next() {
        if !referenced.contains_key(&profile.speaker_id) {
            continue;
        }
        if catalog.contains(&profile.speaker_id) {
            duplicates.push(LineIssue {
                line: reader.report().total_lines,
                reason: format!("duplicate profile for {}; first one kept", profile.speaker_id),
            });
            continue;
        }
        catalog.insert(profile);
    }
    let mut report = reader.finish().map_err(|e| IngestError::io(profiles_path, e))?;
    report.warnings.extend(duplicates);
    report.missing_speakers = finish_catalog(&mut catalog, referenced);
    Ok((catalog, report))
}

fn create(path: &Path) -> Result<BufWriter<File>, IngestError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| IngestError::io(path, e))
}

fn write_lines<T, I>(path: &Path, items: I) -> Result<usize, IngestError>
where
    T: Serialize,
    I: IntoIterator<Item = T>,
{
    let mut w = create(path)?;
    let mut n = 0;
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(|e| IngestError::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| IngestError::io(path, e))?;
        n += 1;
    }
    w.flush().map_err(|e| IngestError::io(path, e))?;
    Ok(n)
}

pub fn write_article_dump<'a, I>(path: &Path, articles: I) -> Result<usize, IngestError>
where
    I: IntoIterator<Item = &'a ArticleRecord>,
{
    write_lines(
        path,
        articles.into_iter().map(|a| ArticleLine {
            article_id: a.article_id.clone(),
            url: a.url.clone(),
            date: a.date.to_string(),
            quotes: a
                .occurrences
                .iter()
                .map(|o| ArticleQuoteLine {
                    quote_text: o.raw_text.clone(),
                    context: o.context.clone(),
                    candidates: o
                        .candidates
                        .iter()
                        .map(|c| ProbLine {
                            id: c.speaker_id.clone(),
                            prob: c.probability,
                        })
                        .collect(),
                })
                .collect(),
        }),
    )
}

pub fn write_quote_dump<'a, I>(path: &Path, quotes: I) -> Result<usize, IngestError>
where
    I: IntoIterator<Item = &'a CanonicalQuote>,
{
    write_lines(
        path,
        quotes.into_iter().map(|q| QuoteLine {
            quote_id: q.quote_id.clone(),
            quotation: q.display_text.clone(),
            speaker: Some(q.top_speaker.clone()),
            num_occurrences: i64::from(q.num_occurrences),
            date_range: DateRangeLine {
                from: q.earliest_date.to_string(),
                to: q.latest_date.to_string(),
            },
            candidates: q
                .global_candidates
                .iter()
                .map(|c| ScoreLine {
                    id: c.speaker_id.clone(),
                    score: c.aggregate_score,
                })
                .collect(),
            urls: q.urls.clone(),
        }),
    )
}

pub fn write_profiles<'a, I>(path: &Path, profiles: I) -> Result<usize, IngestError>
where
    I: IntoIterator<Item = &'a SpeakerProfile>,
{
    write_lines(
        path,
        profiles.into_iter().map(|p| ProfileLine {
            id: p.speaker_id.clone(),
            name: p.name.clone(),
            aliases: p.aliases.clone(),
            description: p.description.clone(),
            occupations: p.occupations.clone(),
            nationalities: p.nationalities.clone(),
            gender: p.gender.clone(),
        }),
    )
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IngestError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| IngestError::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| IngestError::io(path, e))?;
    w.flush().map_err(|e| IngestError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| IngestError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Everything the ingest step reports, written next to the dumps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub articles: IngestReport,
    pub speakers: IngestReport,
    pub article_count: usize,
    pub occurrence_count: usize,
    pub quote_count: usize,
    pub speaker_count: usize,
}

/// An ingested corpus: accepted articles, merged quotes and their speakers.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub articles: Vec<ArticleRecord>,
    pub quotes: Vec<CanonicalQuote>,
    pub catalog: SpeakerCatalog,
}

/// Reads an article dump and a profile file, merges occurrences into
/// quotes and enriches speakers. File order does not affect the quotes or
/// the catalog.
pub fn ingest(articles_path: &Path, profiles_path: &Path) -> Result<(Corpus, IngestSummary), IngestError> {
    let mut reader = read_article_dump(articles_path)?;
    let articles: Vec<ArticleRecord> = (&mut reader).collect();
    let article_report = reader.finish().map_err(|e| IngestError::io(articles_path, e))?;
    let occurrence_count = articles.iter().map(|a| a.occurrences.len()).sum();
    let quotes = merge_occurrences(articles.iter().flat_map(|a| a.occurrences.iter().cloned()));
    let (catalog, speaker_report) = enrich_speakers(profiles_path, &quotes)?;
    let summary = IngestSummary {
        articles: article_report,
        speakers: speaker_report,
        article_count: articles.len(),
        occurrence_count,
        quote_count: quotes.len(),
        speaker_count: catalog.len(),
    };
    Ok((
        Corpus {
            articles,
            quotes,
            catalog,
        },
        summary,
    ))
}

impl Corpus {
    /// Merges the occurrences of `articles` into quotes and attaches
    /// profiles, without touching the file system.
    pub fn from_articles<P>(articles: Vec<ArticleRecord>, profiles: P) -> Self
    where
        P: IntoIterator<Item = SpeakerProfile>,
    {
        let quotes = merge_occurrences(articles.iter().flat_map(|a| a.occurrences.iter().cloned()));
        let (catalog, _) = catalog_for_quotes(profiles, &quotes);
        Corpus {
            articles,
            quotes,
            catalog,
        }
    }
}

/// Writes an ingested corpus directory: the three dumps, their format
/// descriptors and the ingest report.
pub fn write_corpus(dir: &Path, corpus: &Corpus, summary: &IngestSummary) -> Result<(), IngestError> {
    std::fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;
    write_article_dump(&dir.join(ARTICLES_FILE), &corpus.articles)?;
    write_quote_dump(&dir.join(QUOTES_FILE), &corpus.quotes)?;
    write_profiles(&dir.join(SPEAKERS_FILE), corpus.catalog.iter())?;
    let formats: BTreeMap<&str, DumpFormatDescriptor> = [
        (ARTICLES_FILE, DumpFormatDescriptor::new(DumpStage::Article)),
        (QUOTES_FILE, DumpFormatDescriptor::new(DumpStage::Quote)),
        (SPEAKERS_FILE, DumpFormatDescriptor::new(DumpStage::Speaker)),
    ]
    .into_iter()
    .collect();
    write_json(&dir.join(FORMAT_FILE), &formats)?;
    write_json(&dir.join(REPORT_FILE), summary)
}

/// Loads a directory written by [`write_corpus`]. Lines that fail
/// validation are reported as a format error, since the directory is
/// expected to be the output of a previous ingest.
pub fn read_corpus(dir: &Path) -> Result<Corpus, IngestError> {
    let format_path = dir.join(FORMAT_FILE);
    let formats: BTreeMap<String, DumpFormatDescriptor> = read_json(&format_path)?;
    for (file, stage) in [
        (ARTICLES_FILE, DumpStage::Article),
        (QUOTES_FILE, DumpStage::Quote),
        (SPEAKERS_FILE, DumpStage::Speaker),
    ] {
        let ok = formats
            .get(file)
            .is_some_and(|d| d.stage == stage && d.is_valid());
        if !ok {
            return Err(IngestError::Format {
                path: format_path,
                message: format!("{file}: missing or unsupported format descriptor"),
            });
        }
    }

    fn drain<T>(path: &Path, mut reader: DumpReader<T>) -> Result<Vec<T>, IngestError> {
        let items: Vec<T> = (&mut reader).collect();
        let report = reader.finish().map_err(|e| IngestError::io(path, e))?;
        if let Some(first) = report.errors.first() {
            return Err(IngestError::Format {
                path: path.to_path_buf(),
                message: format!("line {}: {}", first.line, first.reason),
            });
        }
        Ok(items)
    }

    let articles_path = dir.join(ARTICLES_FILE);
    let quotes_path = dir.join(QUOTES_FILE);
    let speakers_path = dir.join(SPEAKERS_FILE);
    let articles = drain(&articles_path, read_article_dump(&articles_path)?)?;
    let quotes = drain(&quotes_path, read_quote_dump(&quotes_path)?)?;
    let (catalog, _) = enrich_speakers(&speakers_path, &quotes)?;
    Ok(Corpus {
        articles,
        quotes,
        catalog,
    })
}
