//! Naive index writer used only as a size reference.
//!
//! Same tokenizer and document set as the real index, but every text
//! source gets its own inverted index, postings are fixed-width `u32`
//! (doc, term frequency, then each position), the dictionary is stored
//! uncompressed, numeric columns are `i64`, and stored documents are plain
//! JSON with speaker profiles copied into each document.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::tokenize::tokenize;
use super::{FacetField, IndexError, StoredDoc};
use crate::model::{epoch_day, SpeakerCatalog, SpeakerProfile};

pub const NAIVE_FILE: &str = "naive.bin";

type FieldPostings = BTreeMap<String, BTreeMap<u32, Vec<u32>>>;

fn add_text(fields: &mut BTreeMap<&'static str, FieldPostings>, field: &'static str, ord: u32, text: &str) {
    let postings = fields.entry(field).or_default();
    for t in tokenize(text) {
        postings.entry(t.term).or_default().entry(ord).or_default().push(t.position);
    }
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    put_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

#[derive(Serialize)]
struct Denormalized<'a> {
    doc: &'a StoredDoc,
    speakers: Vec<&'a SpeakerProfile>,
}

/// Writes the naive representation of `docs` into `dir` and returns its
/// size in bytes.
pub fn write_naive_index(docs: &[StoredDoc], catalog: &SpeakerCatalog, dir: &Path) -> Result<u64, IndexError> {
    let mut fields: BTreeMap<&'static str, FieldPostings> = BTreeMap::new();
    let mut facets: BTreeMap<(FacetField, String), Vec<u32>> = BTreeMap::new();
    let mut buf = Vec::new();
    let mut stored = Vec::new();
    let mut columns = Vec::new();

    for (ord, doc) in docs.iter().enumerate() {
        let ord = ord as u32;
        let mut speaker_ids: Vec<&str> = Vec::new();
        let (date, count) = match doc {
            StoredDoc::Quote(q) => {
                add_text(&mut fields, "display_text", ord, &q.display_text);
                add_text(&mut fields, "canonical_text", ord, &q.canonical_text);
                if let Some(p) = catalog.get(&q.top_speaker) {
                    add_text(&mut fields, "speaker_name", ord, &p.name);
                }
                speaker_ids.extend(q.global_candidates.iter().map(|c| c.speaker_id.as_str()));
                (epoch_day(q.earliest_date), q.num_occurrences)
            }
            StoredDoc::Article(a) => {
                for occ in &a.occurrences {
                    add_text(&mut fields, "quote_text", ord, &occ.raw_text);
                    add_text(&mut fields, "context", ord, &occ.context);
                    speaker_ids.extend(occ.candidates.iter().map(|c| c.speaker_id.as_str()));
                }
                (epoch_day(a.date), a.occurrences.len() as u32)
            }
            StoredDoc::Speaker(p) => {
                add_text(&mut fields, "name", ord, &p.name);
                for alias in &p.aliases {
                    add_text(&mut fields, "alias", ord, alias);
                }
                add_text(&mut fields, "description", ord, &p.description);
                speaker_ids.push(&p.speaker_id);
                (0, p.quote_count)
            }
        };
        speaker_ids.sort_unstable();
        speaker_ids.dedup();
        let speakers: Vec<&SpeakerProfile> = speaker_ids.iter().filter_map(|id| catalog.get(id)).collect();
        for p in &speakers {
            facets.entry((FacetField::Speaker, p.speaker_id.clone())).or_default().push(ord);
            for n in &p.nationalities {
                facets.entry((FacetField::Nationality, n.id.clone())).or_default().push(ord);
            }
            for o in &p.occupations {
                facets.entry((FacetField::Occupation, o.id.clone())).or_default().push(ord);
            }
            if let Some(g) = &p.gender {
                facets.entry((FacetField::Gender, g.id.clone())).or_default().push(ord);
            }
        }
        columns.extend_from_slice(&i64::from(date).to_le_bytes());
        columns.extend_from_slice(&i64::from(count).to_le_bytes());
        serde_json::to_writer(&mut stored, &Denormalized { doc, speakers })
            .map_err(|e| IndexError::Corrupt(e.to_string()))?;
        stored.push(b'\n');
    }

    for (name, postings) in &fields {
        put_str(&mut buf, name);
        put_u32(&mut buf, postings.len() as u32);
        for (term, docs) in postings {
            put_str(&mut buf, term);
            put_u32(&mut buf, docs.len() as u32);
            for (doc, positions) in docs {
                put_u32(&mut buf, *doc);
                put_u32(&mut buf, positions.len() as u32);
                for &p in positions {
                    put_u32(&mut buf, p);
                }
            }
        }
    }
    for ((field, value), docs) in &facets {
        buf.push(field.id());
        put_str(&mut buf, value);
        put_u32(&mut buf, docs.len() as u32);
        for &d in docs {
            put_u32(&mut buf, d);
        }
    }
    buf.extend_from_slice(&columns);
    buf.extend_from_slice(&stored);

    fs::create_dir_all(dir)?;
    fs::write(dir.join(NAIVE_FILE), &buf)?;
    Ok(buf.len() as u64)
}
