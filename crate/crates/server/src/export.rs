//! Download formats for a full capped result list.

use std::fmt::Write as _;
use std::str::FromStr;

use qsearch_core::model::NO_SPEAKER;
use qsearch_core::query::{ResultBlock, ResultPayload};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Txt,
}

impl ExportFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            ExportFormat::Json => "json",
            ExportFormat::Txt => "txt",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ExportFormat::Json => "application/json",
            ExportFormat::Txt => "text/plain; charset=utf-8",
        }
    }
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ExportFormat::Json),
            "txt" => Ok(ExportFormat::Txt),
            _ => Err("unknown export format (expected json or txt)".into()),
        }
    }
}

pub fn render(blocks: &[ResultBlock], format: ExportFormat) -> String {
    match format {
        ExportFormat::Json => {
            let mut s = serde_json::to_string_pretty(blocks).expect("result blocks serialize");
            s.push('\n');
            s
        }
        ExportFormat::Txt => render_txt(blocks),
    }
}

fn push_block(out: &mut String, text: &str, name: &str, id: &str, date: &str, urls: &[&str]) {
    let _ = writeln!(out, "\"{text}\"");
    let _ = writeln!(out, "-- {name} ({id}), {date}");
    for url in urls {
        let _ = writeln!(out, "{url}");
    }
    out.push('\n');
}

/// One block per quote, or per occurrence for article results. Every block
/// ends with a blank line, so a single block is `3 + urls` lines.
pub fn render_txt(blocks: &[ResultBlock]) -> String {
    let mut out = String::new();
    for block in blocks {
        let name_of = |id: &str| block.speaker_names.get(id).cloned().unwrap_or_else(|| id.to_string());
        match &block.payload {
            ResultPayload::Quote(q) => {
                let urls: Vec<&str> = q.urls.iter().map(String::as_str).collect();
                let name = name_of(&q.top_speaker);
                push_block(&mut out, &q.display_text, &name, &q.top_speaker, &q.earliest_date.to_string(), &urls);
            }
            ResultPayload::Article(a) => {
                for occ in &a.occurrences {
                    let id = occ.top_candidate().map_or(NO_SPEAKER, |c| c.speaker_id.as_str());
                    let name = name_of(id);
                    push_block(&mut out, &occ.raw_text, &name, id, &occ.date.to_string(), &[&occ.url]);
                }
            }
        }
    }
    out
}
