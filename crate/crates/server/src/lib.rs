//! HTTP front end for the quotation index: permalink-compatible query
//! parsing, a result cache keyed by normalized query, JSON and text export,
//! and operational stats.

pub mod app;
pub mod cache;
pub mod config;
pub mod export;
pub mod http;
pub mod params;

pub use app::{ApiResponse, AppState};
pub use config::ServerConfig;
pub use http::{router, serve, serve_with_shutdown};
pub use params::{cache_key, parse_request, to_permalink};
