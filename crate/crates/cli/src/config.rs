//! Run configuration: a TOML file, then `STORECOST_*` environment variables,
//! then command-line flags, each layer overriding the one before.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use storecost::eval::FilterConfig;
use storecost::lm_client::{Endpoint, ServerConfig, DEFAULT_MAX_INFLIGHT, DEFAULT_TIMEOUT_MS};
use storecost::prob_backends::DEFAULT_ALPHA;
use storecost::Error;

pub const DEFAULT_NGRAM_ORDER: usize = 3;
pub const BUNDLED_PREFIX: &str = "bundled:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Exact,
    Ngram,
    Server,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "exact" => Ok(BackendKind::Exact),
            "ngram" => Ok(BackendKind::Ngram),
            "server" => Ok(BackendKind::Server),
            other => Err(Error::Usage(format!(
                "unknown backend {other:?}; expected exact, ngram or server"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<BackendKind>,
    /// Joint table file, or `bundled:<name>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_inflight: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_distance: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rt_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rt_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_practice: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclude_sentence_edges: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclude_punctuation: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub server: ServerSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub filter: FilterSection,
}

/// A fully resolved backend choice.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendChoice {
    Exact {
        joint: String,
    },
    Ngram {
        corpus: PathBuf,
        order: usize,
        alpha: f64,
    },
    Server(ServerConfig),
}

fn absolute(base: &Path, p: &Path) -> Result<PathBuf, Error> {
    let joined = if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    };
    std::path::absolute(&joined)
        .map_err(|e| Error::io(format!("resolving {}", joined.display()), e))
}

fn parse_env<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, Error> {
    value.trim().parse().map_err(|_| {
        Error::Usage(format!(
            "environment variable {name}={value:?} is not valid"
        ))
    })
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Usage(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads a config file and anchors its relative paths at the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base)?;
        Ok(cfg)
    }

    /// Makes every path absolute relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) -> Result<(), Error> {
        if let Some(j) = &self.backend.joint {
            if !j.starts_with(BUNDLED_PREFIX) {
                self.backend.joint =
                    Some(absolute(base, Path::new(j))?.to_string_lossy().into_owned());
            }
        }
        if let Some(c) = &self.backend.corpus {
            self.backend.corpus = Some(absolute(base, c)?);
        }
        if let Some(c) = &self.run.cache_dir {
            self.run.cache_dir = Some(absolute(base, c)?);
        }
        Ok(())
    }

    /// Applies `STORECOST_*` variables from `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), Error> {
        if let Some(v) = lookup("STORECOST_BACKEND") {
            self.backend.kind = Some(v.parse()?);
        }
        if let Some(v) = lookup("STORECOST_LM_ENDPOINT") {
            self.server.endpoint = Some(v);
        }
        if let Some(v) = lookup("STORECOST_LM_TIMEOUT_MS") {
            self.server.timeout_ms = Some(parse_env("STORECOST_LM_TIMEOUT_MS", &v)?);
        }
        if let Some(v) = lookup("STORECOST_LM_TOP_K") {
            self.server.top_k = Some(parse_env("STORECOST_LM_TOP_K", &v)?);
        }
        if let Some(v) = lookup("STORECOST_SEED") {
            self.run.seed = Some(parse_env("STORECOST_SEED", &v)?);
        }
        if let Some(v) = lookup("STORECOST_WORKERS") {
            self.run.workers = Some(parse_env("STORECOST_WORKERS", &v)?);
        }
        if let Some(v) = lookup("STORECOST_CACHE_DIR") {
            let cwd = std::env::current_dir().map_err(|e| Error::io("current directory", e))?;
            self.run.cache_dir = Some(absolute(&cwd, Path::new(&v))?);
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.run.seed.unwrap_or(0)
    }

    /// The single configured backend. An explicit `kind` wins; otherwise it
    /// is inferred from which backend's settings are present, and exactly
    /// one must be.
    pub fn backend_choice(&self) -> Result<BackendChoice, Error> {
        let b = &self.backend;
        let present: Vec<BackendKind> = [
            (BackendKind::Exact, b.joint.is_some()),
            (BackendKind::Ngram, b.corpus.is_some()),
            (BackendKind::Server, self.server.endpoint.is_some()),
        ]
        .into_iter()
        .filter_map(|(k, on)| on.then_some(k))
        .collect();
        let kind = match (b.kind, present.as_slice()) {
            (Some(k), _) => k,
            (None, [one]) => *one,
            (None, []) => {
                return Err(Error::Usage(
                    "no backend configured; give --joint, --corpus or --lm-endpoint".into(),
                ))
            }
            (None, _) => {
                return Err(Error::Usage(
                    "several backends configured; choose one with --backend".into(),
                ))
            }
        };
        match kind {
            BackendKind::Exact => Ok(BackendChoice::Exact {
                joint: b
                    .joint
                    .clone()
                    .ok_or_else(|| Error::Usage("exact backend needs --joint".into()))?,
            }),
            BackendKind::Ngram => Ok(BackendChoice::Ngram {
                corpus: b
                    .corpus
                    .clone()
                    .ok_or_else(|| Error::Usage("ngram backend needs --corpus".into()))?,
                order: b.order.unwrap_or(DEFAULT_NGRAM_ORDER),
                alpha: b.alpha.unwrap_or(DEFAULT_ALPHA),
            }),
            BackendKind::Server => {
                let s = &self.server;
                let endpoint: Endpoint = s
                    .endpoint
                    .as_deref()
                    .ok_or_else(|| Error::Usage("server backend needs --lm-endpoint".into()))?
                    .parse()?;
                let config = ServerConfig {
                    endpoint,
                    timeout_ms: s.timeout_ms.unwrap_or(DEFAULT_TIMEOUT_MS),
                    top_k: s.top_k,
                    max_inflight: s.max_inflight.unwrap_or(DEFAULT_MAX_INFLIGHT),
                };
                config.validate()?;
                Ok(BackendChoice::Server(config))
            }
        }
    }

    pub fn filter_config(&self) -> Result<FilterConfig, Error> {
        let f = &self.filter;
        let mut out = match &f.preset {
            Some(name) => FilterConfig::preset(name).ok_or_else(|| {
                Error::Usage(format!(
                    "unknown filter preset {name:?}; expected spr, maze or eye-tracking"
                ))
            })?,
            None => FilterConfig::default(),
        };
        if f.rt_min.is_some() {
            out.rt_min = f.rt_min;
        }
        if f.rt_max.is_some() {
            out.rt_max = f.rt_max;
        }
        if f.min_accuracy.is_some() {
            out.min_accuracy = f.min_accuracy;
        }
        if let Some(v) = f.drop_practice {
            out.drop_practice = v;
        }
        if let Some(v) = f.exclude_sentence_edges {
            out.exclude_sentence_edges = v;
        }
        if let Some(v) = f.exclude_punctuation {
            out.exclude_punctuation = v;
        }
        Ok(out)
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
