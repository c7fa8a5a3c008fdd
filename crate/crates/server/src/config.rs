use std::net::{IpAddr, Ipv4Addr};
use std::path::{Path, PathBuf};

use qsearch_core::query::DEFAULT_RESULT_CAP;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_CACHE_CAPACITY: usize = 1024;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{var}: {message}")]
    Env { var: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub port: u16,
    pub bind: IpAddr,
    pub index_dir: Option<PathBuf>,
    pub cache_capacity: usize,
    pub result_cap: usize,
    /// Request log destination; stderr when unset.
    pub request_log: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            port: DEFAULT_PORT,
            bind: IpAddr::V4(Ipv4Addr::UNSPECIFIED),
            index_dir: None,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            result_cap: DEFAULT_RESULT_CAP,
            request_log: None,
        }
    }
}

fn parse_env<T: std::str::FromStr>(var: &'static str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::Env {
        var,
        message: format!("cannot parse {value:?}"),
    })
}

impl ServerConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Applies `QS_PORT`, `QS_INDEX_DIR`, `QS_CACHE_CAPACITY` and
    /// `QS_RESULT_CAP` from `lookup` (normally `std::env::var`).
    pub fn apply_env<F>(mut self, lookup: F) -> Result<Self, ConfigError>
    where
        F: Fn(&str) -> Option<String>,
    {
        if let Some(v) = lookup("QS_PORT") {
            self.port = parse_env("QS_PORT", &v)?;
        }
        if let Some(v) = lookup("QS_INDEX_DIR") {
            self.index_dir = Some(PathBuf::from(v));
        }
        if let Some(v) = lookup("QS_CACHE_CAPACITY") {
            self.cache_capacity = parse_env("QS_CACHE_CAPACITY", &v)?;
        }
        if let Some(v) = lookup("QS_RESULT_CAP") {
            self.result_cap = parse_env("QS_RESULT_CAP", &v)?;
            if self.result_cap == 0 {
                return Err(ConfigError::Env {
                    var: "QS_RESULT_CAP",
                    message: "must be at least 1".into(),
                });
            }
        }
        Ok(self)
    }

    /// File (if any) then process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let base = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        base.apply_env(|k| std::env::var(k).ok())
    }
}
