//! Transport-independent request handling.
//!
//! [`AppState::handle`] maps a path and raw query string to a complete
//! response. The HTTP layer and the one-shot CLI query both go through it,
//! so they produce identical bodies.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use parking_lot::{Mutex, RwLock};
use qsearch_core::index::IndexError;
use qsearch_core::model::Violation;
use qsearch_core::query::{autocomplete, materialize, ExecOptions, QueryError, RankedResults, DEFAULT_SUGGESTIONS};
use qsearch_core::{IndexSet, SearchQuery};
use serde::Serialize;
use serde_json::json;
use url::form_urlencoded;

use crate::cache::{CacheStats, QueryCache};
use crate::config::ServerConfig;
use crate::export::{render, ExportFormat};
use crate::params::{cache_key, decode_params, parse_request, SEARCH_PARAMS};

pub const JSON: &str = "application/json";

#[derive(Debug, Clone, PartialEq)]
pub struct ApiResponse {
    pub status: u16,
    pub content_type: &'static str,
    pub body: String,
    /// `Some` only for endpoints that consult the cache.
    pub cache_hit: Option<bool>,
    pub headers: Vec<(&'static str, String)>,
}

impl ApiResponse {
    fn json<T: Serialize>(status: u16, value: &T) -> Self {
        ApiResponse {
            status,
            content_type: JSON,
            body: serde_json::to_string(value).expect("response serializes"),
            cache_hit: None,
            headers: Vec::new(),
        }
    }

    pub fn bad_request(violations: Vec<Violation>) -> Self {
        let error = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        Self::json(400, &json!({ "error": error, "violations": violations }))
    }

    pub fn not_found() -> Self {
        Self::json(404, &json!({ "error": "not found" }))
    }

    fn unavailable() -> Self {
        Self::json(503, &json!({ "error": "index unavailable" }))
    }

    fn internal(message: String) -> Self {
        Self::json(500, &json!({ "error": message }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DocCounts {
    pub quote: usize,
    pub article: usize,
    pub speaker: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stats {
    pub doc_counts: Option<DocCounts>,
    pub cache: CacheStats,
    pub uptime_s: f64,
    pub snapshot_epoch: u64,
    pub requests: u64,
}

#[derive(Serialize)]
struct LogLine<'a> {
    path: &'a str,
    params: serde_json::Map<String, serde_json::Value>,
    status: u16,
    query_time_s: f64,
    cache_hit: Option<bool>,
}

type Live = (Arc<IndexSet>, u64);

pub struct AppState {
    index: RwLock<Option<Live>>,
    epoch: AtomicU64,
    cache: QueryCache,
    config: ServerConfig,
    started: Instant,
    requests: AtomicU64,
    log: Option<Mutex<Box<dyn Write + Send>>>,
}

impl AppState {
    pub fn new(config: ServerConfig) -> Self {
        AppState {
            index: RwLock::new(None),
            epoch: AtomicU64::new(0),
            cache: QueryCache::new(config.cache_capacity),
            config,
            started: Instant::now(),
            requests: AtomicU64::new(0),
            log: None,
        }
    }

    pub fn with_index(config: ServerConfig, index: IndexSet) -> Self {
        let state = Self::new(config);
        state.swap_index(index);
        state
    }

    /// Sends one JSON line per request to `sink`.
    pub fn with_log(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.log = Some(Mutex::new(sink));
        self
    }

    pub fn load_index(&self, dir: &Path) -> Result<u64, IndexError> {
        let set = IndexSet::load(dir)?;
        Ok(self.swap_index(set))
    }

    /// Installs a new snapshot and returns its epoch. Cached entries from
    /// earlier epochs are dropped lazily on lookup.
    pub fn swap_index(&self, index: IndexSet) -> u64 {
        let mut slot = self.index.write();
        let epoch = self.epoch.fetch_add(1, Ordering::SeqCst) + 1;
        *slot = Some((Arc::new(index), epoch));
        epoch
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    pub fn cache(&self) -> &QueryCache {
        &self.cache
    }

    fn live(&self) -> Option<Live> {
        self.index.read().clone()
    }

    fn exec_options(&self) -> ExecOptions {
        ExecOptions {
            result_cap: self.config.result_cap,
        }
    }

    pub fn stats(&self) -> Stats {
        let live = self.live();
        Stats {
            doc_counts: live.as_ref().map(|(set, _)| DocCounts {
                quote: set.quotes.doc_count(),
                article: set.articles.doc_count(),
                speaker: set.speakers.doc_count(),
            }),
            cache: self.cache.stats(),
            uptime_s: self.started.elapsed().as_secs_f64(),
            snapshot_epoch: live.map_or(0, |(_, e)| e),
            requests: self.requests.load(Ordering::Relaxed),
        }
    }

    /// Routes `path` (e.g. `/api/search`) with raw query string `qs`.
    pub fn handle(&self, path: &str, qs: &str) -> ApiResponse {
        let started = Instant::now();
        self.requests.fetch_add(1, Ordering::Relaxed);
        let response = match path {
            "/api/search" => self.search(qs, started),
            "/api/export" => self.export(qs),
            "/api/autocomplete" => self.autocomplete(qs),
            "/api/stats" => ApiResponse::json(200, &self.stats()),
            "/api/health" => self.health(),
            _ => ApiResponse::not_found(),
        };
        self.log_request(path, qs, &response, started.elapsed().as_secs_f64());
        response
    }

    fn log_request(&self, path: &str, qs: &str, response: &ApiResponse, elapsed: f64) {
        let Some(sink) = &self.log else {
            return;
        };
        let params = form_urlencoded::parse(qs.as_bytes())
            .map(|(k, v)| (k.into_owned(), serde_json::Value::String(v.into_owned())))
            .collect();
        let line = LogLine {
            path,
            params,
            status: response.status,
            query_time_s: elapsed,
            cache_hit: response.cache_hit,
        };
        let mut sink = sink.lock();
        // Logging must never fail a request.
        let _ = serde_json::to_writer(&mut *sink, &line);
        let _ = sink.write_all(b"\n");
        let _ = sink.flush();
    }

    fn health(&self) -> ApiResponse {
        match self.live() {
            Some((_, epoch)) => ApiResponse::json(200, &json!({ "status": "ok", "snapshot_epoch": epoch })),
            None => ApiResponse::unavailable(),
        }
    }

    /// Capped ranking for `query`, from the cache when possible.
    fn ranked(&self, set: &IndexSet, epoch: u64, query: &SearchQuery) -> Result<(Arc<RankedResults>, bool), ApiResponse> {
        let key = cache_key(query);
        if let Some(hit) = self.cache.get(&key, epoch) {
            return Ok((hit, true));
        }
        let ranked = set.rank(query, self.exec_options()).map_err(|e| match e {
            QueryError::Invalid(v) => ApiResponse::bad_request(v),
            other => ApiResponse::internal(other.to_string()),
        })?;
        let ranked = Arc::new(ranked);
        self.cache.insert(key, Arc::clone(&ranked), epoch);
        Ok((ranked, false))
    }

    fn search(&self, qs: &str, started: Instant) -> ApiResponse {
        let query = match parse_request(qs) {
            Ok(q) => q,
            Err(v) => return ApiResponse::bad_request(v),
        };
        let Some((set, epoch)) = self.live() else {
            return ApiResponse::unavailable();
        };
        let (ranked, hit) = match self.ranked(&set, epoch, &query) {
            Ok(r) => r,
            Err(resp) => return resp,
        };
        let mut response = set.respond(&ranked, &query, 0.0);
        response.query_time_s = started.elapsed().as_secs_f64();
        let mut out = ApiResponse::json(200, &response);
        out.cache_hit = Some(hit);
        out.headers.push(("x-cache", if hit { "hit" } else { "miss" }.to_string()));
        out
    }

    fn export(&self, qs: &str) -> ApiResponse {
        let mut allowed = SEARCH_PARAMS.to_vec();
        allowed.push("format");
        let pairs = match decode_params(qs, &allowed) {
            Ok(p) => p,
            Err(v) => return ApiResponse::bad_request(v),
        };
        let mut format = ExportFormat::Json;
        let mut rest = form_urlencoded::Serializer::new(String::new());
        for (name, value) in &pairs {
            if name == "format" {
                match value.parse() {
                    Ok(f) => format = f,
                    Err(e) => return ApiResponse::bad_request(vec![Violation::new("format", e)]),
                }
            } else {
                rest.append_pair(name, value);
            }
        }
        let query = match parse_request(&rest.finish()) {
            Ok(q) => q,
            Err(v) => return ApiResponse::bad_request(v),
        };
        let Some((set, epoch)) = self.live() else {
            return ApiResponse::unavailable();
        };
        let (ranked, hit) = match self.ranked(&set, epoch, &query) {
            Ok(r) => r,
            Err(resp) => return resp,
        };
        let blocks = export_blocks(&set, &ranked, &query);
        let filename = format!("qsearch-results.{}", format.as_str());
        ApiResponse {
            status: 200,
            content_type: format.content_type(),
            body: render(&blocks, format),
            cache_hit: Some(hit),
            headers: vec![
                ("x-cache", if hit { "hit" } else { "miss" }.to_string()),
                ("content-disposition", format!("attachment; filename=\"{filename}\"")),
            ],
        }
    }

    fn autocomplete(&self, qs: &str) -> ApiResponse {
        let pairs = match decode_params(qs, &["prefix", "k"]) {
            Ok(p) => p,
            Err(v) => return ApiResponse::bad_request(v),
        };
        let mut prefix = String::new();
        let mut k = DEFAULT_SUGGESTIONS;
        for (name, value) in pairs {
            match name.as_str() {
                "prefix" => prefix = value,
                _ if value.is_empty() => {}
                _ => match value.parse::<usize>() {
                    Ok(n) => k = n,
                    Err(_) => return ApiResponse::bad_request(vec![Violation::new("k", "not an integer")]),
                },
            }
        }
        let Some((set, _)) = self.live() else {
            return ApiResponse::unavailable();
        };
        match autocomplete(&prefix, &set.speakers, k) {
            Ok(s) => ApiResponse::json(200, &s),
            Err(QueryError::Invalid(v)) => ApiResponse::bad_request(v),
            Err(e) => ApiResponse::internal(e.to_string()),
        }
    }
}

/// All capped results as result blocks, paging ignored.
pub fn export_blocks(set: &IndexSet, ranked: &RankedResults, query: &SearchQuery) -> Vec<qsearch_core::query::ResultBlock> {
    materialize(ranked, 0..ranked.hits.len(), query, set.for_target(query.target), Some(&set.speakers))
}
