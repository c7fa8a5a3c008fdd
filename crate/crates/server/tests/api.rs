mod common;

use std::io::Write;
use std::sync::{Arc, Mutex};

use common::{get, index, without_time, TestServer};
use proptest::prelude::*;
use qsearch_core::query::ResultBlock;
use qsearch_server::{AppState, ServerConfig};

fn config(capacity: usize) -> ServerConfig {
    ServerConfig {
        cache_capacity: capacity,
        ..ServerConfig::default()
    }
}

fn small_state() -> AppState {
    AppState::with_index(config(64), index(7, 600, 80, 1_500))
}

const GREAT: &str = "/api/search?target=quotation&text=great+again&speaker=Q22686";

#[test]
fn repeated_query_is_served_from_cache() {
    let server = TestServer::start(small_state());
    let a = server.get(GREAT);
    let b = server.get(GREAT);
    assert_eq!((a.status, b.status), (200, 200));
    assert_eq!(a.header("x-cache"), Some("miss"));
    assert_eq!(b.header("x-cache"), Some("hit"));
    assert_eq!(a.header("content-type"), Some("application/json"));
    assert_eq!(without_time(&a.body), without_time(&b.body));
    let v = a.json();
    assert!(v["total_matched"].as_u64().unwrap() >= 3);
    assert!(v["query_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["applied_query"]["speaker"], "Q22686");

    let stats = server.get("/api/stats").json();
    assert_eq!(stats["cache"]["hits"], 1);
    assert_eq!(stats["cache"]["misses"], 1);
    assert_eq!(stats["cache"]["hit_rate"], 0.5);
}

#[test]
fn permalinks_resolve_over_http() {
    let server = TestServer::start(small_state());
    let r = server.get("/api/search?target=quotation&text=great+again&speaker=Q22686&from_date=2008-09-01&to_date=2020-04-17&num_occurrences=500");
    assert_eq!(r.status, 200);
    let q = &r.json()["applied_query"];
    assert_eq!(q["text"], "great again");
    assert_eq!(q["min_occurrences"], 500);
    let r = server.get("/api/search?target=article&text=gdpr&from_date=2018-05-19&to_date=2018-05-19&with_context=true");
    assert_eq!(r.status, 200);
    assert_eq!(r.json()["applied_query"]["with_context"], true);
}

#[test]
fn validation_errors_name_the_parameter() {
    let server = TestServer::start(small_state());
    let r = server.get("/api/search?target=quotation&num_occurrences=abc");
    assert_eq!(r.status, 400);
    let v = r.json();
    assert_eq!(v["error"], "num_occurrences: not an integer");
    assert_eq!(v["violations"][0]["field"], "num_occurrences");

    let r = server.get("/api/search?text=x&drop_table=1&target=poem");
    assert_eq!(r.status, 400);
    let fields: Vec<_> = r.json()["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["field"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(fields, vec!["drop_table"]);

    assert_eq!(server.get("/api/search?from_date=2020-13-01").status, 400);
    assert_eq!(server.get("/api/export?text=x&format=csv").status, 400);
    assert_eq!(server.get("/api/nope").status, 404);
}

#[test]
fn empty_result_still_has_histogram() {
    let server = TestServer::start(small_state());
    let v = server.get("/api/search?text=zzqqxxv").json();
    assert_eq!(v["total_matched"], 0);
    assert_eq!(v["returned"], 0);
    assert!(v["results"].as_array().unwrap().is_empty());
    let bins = v["histogram"].as_array().unwrap();
    assert!(!bins.is_empty());
    assert!(bins.iter().all(|b| b["count"] == 0));
}

fn blocks(v: &serde_json::Value) -> Vec<ResultBlock> {
    serde_json::from_value(v["results"].clone()).unwrap()
}

#[test]
fn pages_concatenate_to_export() {
    let server = TestServer::start(small_state());
    let base = "target=quotation&text=the";
    let first = server.get(&format!("/api/search?{base}")).json();
    let returned = first["returned"].as_u64().unwrap() as usize;
    assert!(returned > 25, "fixture too sparse: {returned}");

    let mut concatenated = Vec::new();
    let mut page = 1;
    loop {
        let v = server.get(&format!("/api/search?{base}&page={page}&page_size=25")).json();
        let b = blocks(&v);
        if b.is_empty() {
            break;
        }
        concatenated.extend(b);
        page += 1;
    }
    assert_eq!(concatenated.len(), returned);
    let ranks: Vec<usize> = concatenated.iter().map(|b| b.rank).collect();
    assert_eq!(ranks, (1..=returned).collect::<Vec<_>>());

    let page2 = blocks(&server.get(&format!("/api/search?{base}&page=2&page_size=10")).json());
    assert_eq!(page2, concatenated[10..20]);

    let export = server.get(&format!("/api/export?{base}&format=json&page=3"));
    assert_eq!(export.status, 200);
    assert!(export.header("content-disposition").unwrap().starts_with("attachment"));
    let exported: Vec<ResultBlock> = serde_json::from_str(&export.body).unwrap();
    assert_eq!(exported, concatenated);

    let txt = server.get(&format!("/api/export?{base}&format=txt"));
    assert_eq!(txt.header("content-type"), Some("text/plain; charset=utf-8"));
    assert_eq!(txt.body.matches("\n-- ").count(), returned);
    assert!(txt.body.ends_with("\n\n"));
}

#[test]
fn empty_exports_over_http() {
    let server = TestServer::start(small_state());
    let txt = server.get("/api/export?text=zzqqxxv&format=txt");
    assert_eq!((txt.status, txt.body.as_str()), (200, ""));
    let json = server.get("/api/export?text=zzqqxxv&format=json");
    assert_eq!(json.json(), serde_json::json!([]));
}

#[test]
fn autocomplete_endpoint() {
    let server = TestServer::start(small_state());
    let v = server.get("/api/autocomplete?prefix=dona").json();
    let list = v.as_array().unwrap();
    assert!(list.iter().any(|s| s["speaker_id"] == "Q22686"));
    assert!(list.iter().all(|s| s.get("description").is_some()));
    assert_eq!(server.get("/api/autocomplete?prefix=zzzz").json(), serde_json::json!([]));
    assert_eq!(server.get("/api/autocomplete?prefix=d&k=1").json().as_array().unwrap().len(), 1);
    assert_eq!(server.get("/api/autocomplete?prefix=").status, 400);
    assert_eq!(server.get("/api/autocomplete?prefix=d&k=x").status, 400);
    assert_eq!(server.get("/api/autocomplete?prefix=d&limit=3").status, 400);
}

#[test]
fn stats_and_health() {
    let corpus = common::corpus(7, 600, 80, 1_500);
    let set = qsearch_core::IndexSet::build(&corpus).unwrap();
    let server = TestServer::start(AppState::with_index(config(8), set));
    let v = server.get("/api/stats").json();
    assert_eq!(v["cache"]["hit_rate"], 0.0);
    assert!(v["uptime_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["doc_counts"]["quote"], corpus.quotes.len());
    assert_eq!(v["doc_counts"]["article"], corpus.articles.len());
    assert_eq!(v["doc_counts"]["speaker"], corpus.catalog.len());
    assert_eq!(v["snapshot_epoch"], 1);
    assert_eq!(server.get("/api/health").status, 200);
    let later = server.get("/api/stats").json();
    assert!(later["requests"].as_u64() > v["requests"].as_u64());
    assert!(later["uptime_s"].as_f64() >= v["uptime_s"].as_f64());
}

#[test]
fn no_index_means_unavailable() {
    let server = TestServer::start(AppState::new(config(8)));
    let r = server.get("/api/health");
    assert_eq!(r.status, 503);
    assert_eq!(r.json()["error"], "index unavailable");
    assert_eq!(server.get("/api/search?text=x").status, 503);
    // Validation still comes first.
    assert_eq!(server.get("/api/search?bogus=1").status, 400);
    assert_eq!(server.get("/api/stats").status, 200);
}

#[test]
fn swap_invalidates_cached_entries() {
    let state = AppState::with_index(config(8), index(7, 200, 30, 400));
    let a = state.handle("/api/search", "text=great+again");
    assert_eq!(a.cache_hit, Some(false));
    assert_eq!(state.handle("/api/search", "text=great+again").cache_hit, Some(true));
    let epoch = state.swap_index(index(8, 300, 30, 600));
    assert_eq!(epoch, 2);
    let b = state.handle("/api/search", "text=great+again");
    assert_eq!(b.cache_hit, Some(false));
    assert_ne!(without_time(&a.body), without_time(&b.body));
}

#[test]
fn cache_stays_bounded_under_concurrency() {
    let server = TestServer::start(AppState::with_index(config(5), index(7, 200, 30, 400)));
    let addr = server.addr;
    let words = ["great", "again", "team", "dream", "trust", "crowd", "season", "truth", "jobs", "deal"];
    std::thread::scope(|s| {
        for t in 0..4 {
            s.spawn(move || {
                for i in 0..20 {
                    let w = words[(t * 3 + i) % words.len()];
                    assert_eq!(get(addr, &format!("/api/search?text={w}")).status, 200);
                }
            });
        }
    });
    let c = server.state.cache().stats();
    assert!(c.size <= 5);
    assert_eq!(c.hits + c.misses, 80);
    // Most recent key is at the front after one more lookup.
    server.get("/api/search?text=deal");
    let keys = server.state.cache().keys();
    assert!(keys[0].contains("text=deal"));
}

#[derive(Clone, Default)]
struct SharedLog(Arc<Mutex<Vec<u8>>>);

impl Write for SharedLog {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[test]
fn one_log_line_per_request() {
    let log = SharedLog::default();
    let state = AppState::with_index(config(8), index(7, 200, 30, 400)).with_log(Box::new(log.clone()));
    state.handle("/api/search", "text=great&page=2");
    state.handle("/api/search", "text=great");
    state.handle("/api/search", "num_occurrences=abc");
    state.handle("/api/stats", "");
    let text = String::from_utf8(log.0.lock().unwrap().clone()).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0]["path"], "/api/search");
    assert_eq!(lines[0]["params"]["page"], "2");
    assert_eq!(lines[0]["cache_hit"], false);
    assert_eq!(lines[1]["cache_hit"], true);
    assert_eq!(lines[2]["status"], 400);
    assert_eq!(lines[3]["cache_hit"], serde_json::Value::Null);
    assert!(lines.iter().all(|l| l["query_time_s"].as_f64().unwrap() >= 0.0));
}

fn shared_states() -> &'static (AppState, AppState) {
    static STATES: std::sync::OnceLock<(AppState, AppState)> = std::sync::OnceLock::new();
    STATES.get_or_init(|| {
        let set = index(11, 300, 40, 700);
        (AppState::with_index(config(16), set.clone()), AppState::with_index(config(0), set))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cache_is_transparent(
        word in prop::sample::select(vec!["great", "again", "gdpr", "team", "dream", "grate", "the", ""]),
        exact in any::<bool>(),
        article in any::<bool>(),
        sort in prop::sample::select(vec!["relevance", "date_asc", "date_desc", "occurrences_desc"]),
        page in 1u32..4,
        repeats in 1usize..3,
    ) {
        let (cached, uncached) = shared_states();
        let target = if article { "article" } else { "quotation" };
        let qs = format!("target={target}&text={word}&exact={exact}&sort={sort}&page={page}");
        let reference = uncached.handle("/api/search", &qs);
        prop_assert_eq!(reference.status, 200);
        for _ in 0..repeats {
            let r = cached.handle("/api/search", &qs);
            prop_assert_eq!(r.status, 200);
            prop_assert_eq!(without_time(&r.body), without_time(&reference.body));
        }
        prop_assert!(cached.cache().len() <= 16);
    }
}
