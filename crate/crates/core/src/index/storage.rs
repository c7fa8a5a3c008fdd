//! On-disk index directory: `manifest.json` plus `data.bin`.
//!
//! `data.bin` starts with the magic `QSIX` and a little-endian u32 format
//! version, followed by sections. Each section is a one-byte tag, a
//! little-endian u64 payload length and the payload. Posting lists are
//! delta-encoded varints; stored documents are deflated in blocks. The
//! manifest records a SHA-256 per section and over the whole file. See
//! `docs/index-format.md` for the byte layout.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::varint::{self, Reader, Truncated};
use super::{FacetField, IndexError, IndexKind, IndexSnapshot, PostingList, StoredDoc, TextField, TextScope};

pub const SCHEMA_VERSION: &str = "qsearch-index/1";
const MAGIC: &[u8; 4] = b"QSIX";
const FORMAT_VERSION: u32 = 1;
const DOCS_PER_BLOCK: usize = 64;

pub(crate) const MANIFEST_FILE: &str = "manifest.json";
pub(crate) const DATA_FILE: &str = "data.bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Tag {
    DocIds = 1,
    Text = 2,
    Facets = 3,
    Columns = 4,
    Stored = 5,
    Prefixes = 6,
}

impl Tag {
    fn from_u8(b: u8) -> Option<Tag> {
        Some(match b {
            1 => Tag::DocIds,
            2 => Tag::Text,
            3 => Tag::Facets,
            4 => Tag::Columns,
            5 => Tag::Stored,
            6 => Tag::Prefixes,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Tag::DocIds => "doc_ids",
            Tag::Text => "text",
            Tag::Facets => "facets",
            Tag::Columns => "columns",
            Tag::Stored => "stored",
            Tag::Prefixes => "prefixes",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionEntry {
    pub name: String,
    pub offset: u64,
    pub length: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub schema_version: String,
    pub kind: IndexKind,
    pub doc_count: u64,
    pub data_file: String,
    pub data_length: u64,
    pub data_sha256: String,
    pub sections: Vec<SectionEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn encode_doc_ids(s: &IndexSnapshot) -> Vec<u8> {
    let mut buf = Vec::new();
    varint::write_u64(&mut buf, s.doc_ids.len() as u64);
    for id in &s.doc_ids {
        varint::write_str(&mut buf, id);
    }
    buf
}

fn encode_text(scope: TextScope, field: &TextField) -> Vec<u8> {
    let mut buf = vec![scope.id()];
    varint::write_u64(&mut buf, field.terms.len() as u64);
    // Front-coded dictionary: shared prefix length with the previous term,
    // then the remaining suffix.
    let mut prev: &[u8] = &[];
    for term in &field.terms {
        let t = term.as_bytes();
        let shared = prev.iter().zip(t).take_while(|(a, b)| a == b).count();
        // Keep cuts on char boundaries so every suffix is valid UTF-8.
        let shared = (0..=shared).rev().find(|&i| term.is_char_boundary(i)).unwrap_or(0);
        varint::write_u64(&mut buf, shared as u64);
        varint::write_bytes(&mut buf, &t[shared..]);
        prev = t;
    }
    for list in &field.postings {
        varint::write_u64(&mut buf, list.docs.len() as u64);
        let mut prev_doc = 0u32;
        for (i, &doc) in list.docs.iter().enumerate() {
            varint::write_u32(&mut buf, doc - prev_doc);
            prev_doc = doc;
            let positions = list.positions_at(i);
            varint::write_u64(&mut buf, positions.len() as u64);
            let mut prev_pos = 0u32;
            for &p in positions {
                varint::write_u32(&mut buf, p - prev_pos);
                prev_pos = p;
            }
        }
    }
    for &len in &field.doc_lengths {
        varint::write_u32(&mut buf, len);
    }
    buf
}

fn encode_facets(s: &IndexSnapshot) -> Vec<u8> {
    let mut buf = Vec::new();
    varint::write_u64(&mut buf, s.facets.len() as u64);
    for ((field, value), docs) in &s.facets {
        buf.push(field.id());
        varint::write_str(&mut buf, value);
        varint::write_sorted_u32s(&mut buf, docs);
    }
    buf
}

fn encode_columns(s: &IndexSnapshot) -> Vec<u8> {
    let mut buf = Vec::with_capacity(s.dates.len() * 8);
    for &d in &s.dates {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for &c in &s.counts {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    buf
}

fn encode_stored(s: &IndexSnapshot) -> Result<Vec<u8>, IndexError> {
    let mut buf = Vec::new();
    let blocks: Vec<&[StoredDoc]> = s.docs.chunks(DOCS_PER_BLOCK).collect();
    varint::write_u64(&mut buf, DOCS_PER_BLOCK as u64);
    varint::write_u64(&mut buf, blocks.len() as u64);
    for block in blocks {
        let mut raw = Vec::new();
        for doc in block {
            serde_json::to_writer(&mut raw, doc).map_err(|e| IndexError::Corrupt(e.to_string()))?;
            raw.push(b'\n');
        }
        let mut enc = DeflateEncoder::new(Vec::new(), Compression::new(6));
        enc.write_all(&raw)?;
        varint::write_bytes(&mut buf, &enc.finish()?);
    }
    Ok(buf)
}

fn encode_prefixes(s: &IndexSnapshot) -> Vec<u8> {
    let mut buf = Vec::new();
    varint::write_u64(&mut buf, s.prefixes.len() as u64);
    for (prefix, ords) in &s.prefixes {
        varint::write_str(&mut buf, prefix);
        varint::write_u64(&mut buf, ords.len() as u64);
        for &o in ords {
            varint::write_u32(&mut buf, o);
        }
    }
    buf
}

/// Writes `snapshot` into `dir`, creating it if needed. Output is a pure
/// function of the snapshot, so identical builds give identical bytes.
pub fn save_index(snapshot: &IndexSnapshot, dir: &Path) -> Result<IndexManifest, IndexError> {
    let mut sections: Vec<(Tag, Vec<u8>)> = vec![(Tag::DocIds, encode_doc_ids(snapshot))];
    for (scope, field) in &snapshot.fields {
        sections.push((Tag::Text, encode_text(*scope, field)));
    }
    sections.push((Tag::Facets, encode_facets(snapshot)));
    sections.push((Tag::Columns, encode_columns(snapshot)));
    sections.push((Tag::Stored, encode_stored(snapshot)?));
    sections.push((Tag::Prefixes, encode_prefixes(snapshot)));

    let mut data = Vec::new();
    data.extend_from_slice(MAGIC);
    data.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let mut entries = Vec::new();
    for (tag, payload) in &sections {
        data.push(*tag as u8);
        data.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        entries.push(SectionEntry {
            name: tag.name().to_string(),
            offset: data.len() as u64,
            length: payload.len() as u64,
            sha256: sha256_hex(payload),
        });
        data.extend_from_slice(payload);
    }

    let manifest = IndexManifest {
        schema_version: SCHEMA_VERSION.to_string(),
        kind: snapshot.kind,
        doc_count: snapshot.doc_count() as u64,
        data_file: DATA_FILE.to_string(),
        data_length: data.len() as u64,
        data_sha256: sha256_hex(&data),
        sections: entries,
    };

    fs::create_dir_all(dir)?;
    fs::write(dir.join(DATA_FILE), &data)?;
    let mut json = serde_json::to_vec_pretty(&manifest).map_err(|e| IndexError::Corrupt(e.to_string()))?;
    json.push(b'\n');
    fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

fn corrupt(_: Truncated) -> IndexError {
    IndexError::ChecksumMismatch
}

pub fn read_manifest(dir: &Path) -> Result<IndexManifest, IndexError> {
    let bytes = fs::read(dir.join(MANIFEST_FILE))?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| IndexError::Corrupt(format!("manifest: {e}")))?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_str())
        .unwrap_or("")
        .to_string();
    if found != SCHEMA_VERSION {
        return Err(IndexError::VersionMismatch {
            expected: SCHEMA_VERSION.to_string(),
            found,
        });
    }
    serde_json::from_value(value).map_err(|e| IndexError::Corrupt(format!("manifest: {e}")))
}

/// Loads a snapshot written by [`save_index`]. Refuses on version or
/// checksum mismatch, including truncated files.
pub fn load_index(dir: &Path) -> Result<IndexSnapshot, IndexError> {
    let manifest = read_manifest(dir)?;
    let data = fs::read(dir.join(&manifest.data_file))?;
    if data.len() as u64 != manifest.data_length || sha256_hex(&data) != manifest.data_sha256 {
        return Err(IndexError::ChecksumMismatch);
    }
    let mut r = Reader::new(&data);
    if r.bytes(4).map_err(corrupt)? != MAGIC {
        return Err(IndexError::Corrupt("bad magic".into()));
    }
    let version = r.u32_le().map_err(corrupt)?;
    if version != FORMAT_VERSION {
        return Err(IndexError::VersionMismatch {
            expected: FORMAT_VERSION.to_string(),
            found: version.to_string(),
        });
    }

    let mut doc_ids = Vec::new();
    let mut fields = BTreeMap::new();
    let mut facets = BTreeMap::new();
    let mut dates = Vec::new();
    let mut counts = Vec::new();
    let mut docs = Vec::new();
    let mut prefixes = BTreeMap::new();
    let mut section_idx = 0usize;

    while !r.is_empty() {
        let tag = Tag::from_u8(r.u8().map_err(corrupt)?).ok_or_else(|| IndexError::Corrupt("unknown section".into()))?;
        let len = usize::try_from(r.u64_le().map_err(corrupt)?).map_err(|_| IndexError::ChecksumMismatch)?;
        let payload = r.bytes(len).map_err(corrupt)?;
        let entry = manifest.sections.get(section_idx).ok_or(IndexError::ChecksumMismatch)?;
        if entry.name != tag.name() || entry.length != len as u64 || entry.sha256 != sha256_hex(payload) {
            return Err(IndexError::ChecksumMismatch);
        }
        section_idx += 1;
        let mut p = Reader::new(payload);
        match tag {
            Tag::DocIds => {
                let n = p.len().map_err(corrupt)?;
                doc_ids = (0..n).map(|_| p.string()).collect::<Result<_, _>>().map_err(corrupt)?;
            }
            Tag::Text => {
                let (scope, field) = decode_text(&mut p, manifest.doc_count as usize).map_err(corrupt)?;
                fields.insert(scope, field);
            }
            Tag::Facets => {
                let n = p.len().map_err(corrupt)?;
                for _ in 0..n {
                    let field = FacetField::from_id(p.u8().map_err(corrupt)?)
                        .ok_or_else(|| IndexError::Corrupt("unknown facet".into()))?;
                    let value = p.string().map_err(corrupt)?;
                    let list = p.sorted_u32s().map_err(corrupt)?;
                    facets.insert((field, value), list);
                }
            }
            Tag::Columns => {
                let n = manifest.doc_count as usize;
                dates = (0..n).map(|_| p.i32_le()).collect::<Result<_, _>>().map_err(corrupt)?;
                counts = (0..n).map(|_| p.u32_le()).collect::<Result<_, _>>().map_err(corrupt)?;
            }
            Tag::Stored => {
                docs = decode_stored(&mut p)?;
            }
            Tag::Prefixes => {
                let n = p.len().map_err(corrupt)?;
                for _ in 0..n {
                    let prefix = p.string().map_err(corrupt)?;
                    let k = p.len().map_err(corrupt)?;
                    let ords = (0..k).map(|_| p.u32()).collect::<Result<Vec<_>, _>>().map_err(corrupt)?;
                    prefixes.insert(prefix, ords);
                }
            }
        }
    }
    if section_idx != manifest.sections.len() {
        return Err(IndexError::ChecksumMismatch);
    }
    let n = manifest.doc_count as usize;
    if doc_ids.len() != n || docs.len() != n || dates.len() != n {
        return Err(IndexError::Corrupt("section sizes disagree with doc_count".into()));
    }
    Ok(IndexSnapshot::from_parts(
        manifest.kind,
        doc_ids,
        fields,
        facets,
        dates,
        counts,
        docs,
        prefixes,
    ))
}

fn decode_text(p: &mut Reader<'_>, doc_count: usize) -> Result<(TextScope, TextField), Truncated> {
    let scope = TextScope::from_id(p.u8()?).ok_or(Truncated)?;
    let n_terms = p.len()?;
    let mut terms: Vec<String> = Vec::with_capacity(n_terms.min(1 << 20));
    for _ in 0..n_terms {
        let shared = p.len()?;
        let suffix = p.prefixed_bytes()?;
        let prev = terms.last().map_or("", String::as_str);
        let head = prev.get(..shared).ok_or(Truncated)?;
        let mut term = String::with_capacity(shared + suffix.len());
        term.push_str(head);
        term.push_str(std::str::from_utf8(suffix).map_err(|_| Truncated)?);
        terms.push(term);
    }
    let mut postings = Vec::with_capacity(n_terms.min(1 << 20));
    for _ in 0..n_terms {
        let n_docs = p.len()?;
        let mut list = PostingList::default();
        let mut doc = 0u32;
        let mut positions = Vec::new();
        for _ in 0..n_docs {
            doc = doc.checked_add(p.u32()?).ok_or(Truncated)?;
            let n_pos = p.len()?;
            positions.clear();
            let mut pos = 0u32;
            for _ in 0..n_pos {
                pos = pos.checked_add(p.u32()?).ok_or(Truncated)?;
                positions.push(pos);
            }
            list.push(doc, &positions);
        }
        postings.push(list);
    }
    let doc_lengths = (0..doc_count).map(|_| p.u32()).collect::<Result<Vec<_>, _>>()?;
    Ok((scope, TextField::from_parts(terms, postings, doc_lengths)))
}

fn decode_stored(p: &mut Reader<'_>) -> Result<Vec<StoredDoc>, IndexError> {
    let _per_block = p.len().map_err(corrupt)?;
    let n_blocks = p.len().map_err(corrupt)?;
    let mut docs = Vec::new();
    for _ in 0..n_blocks {
        let compressed = p.prefixed_bytes().map_err(corrupt)?;
        let mut raw = Vec::new();
        DeflateDecoder::new(compressed).read_to_end(&mut raw)?;
        for line in raw.split(|&b| b == b'\n').filter(|l| !l.is_empty()) {
            docs.push(serde_json::from_slice(line).map_err(|e| IndexError::Corrupt(e.to_string()))?);
        }
    }
    Ok(docs)
}

/// Total size in bytes of all files in an index directory.
pub fn directory_size(dir: &Path) -> std::io::Result<u64> {
    let mut total = 0;
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let meta = entry.metadata()?;
        total += if meta.is_dir() {
            directory_size(&entry.path())?
        } else {
            meta.len()
        };
    }
    Ok(total)
}
