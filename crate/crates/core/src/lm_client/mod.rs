//! Client for an external masked-LM server speaking newline-delimited JSON.

mod client;
mod server;
mod wire;

use std::fmt;
use std::str::FromStr;

use crate::prob_backends::ModelError;

pub use client::LmClient;
pub use server::{handle_line, serve_stream, serve_tcp, ServeOptions};
pub use wire::{IncomingRequest, TokenizeRequest, WireRequest, WireResponse, WIRE_TOLERANCE};

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;
pub const DEFAULT_MAX_INFLIGHT: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// `host:port`
    Tcp(String),
    /// `stdio:<program> [args...]`, a child process speaking on its pipes.
    Stdio(Vec<String>),
}

impl FromStr for Endpoint {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        if let Some(cmd) = s.strip_prefix("stdio:") {
            let argv: Vec<String> = cmd.split_whitespace().map(String::from).collect();
            if argv.is_empty() {
                return Err(ModelError::Parameter(
                    "stdio endpoint needs a command".into(),
                ));
            }
            return Ok(Endpoint::Stdio(argv));
        }
        match s.rsplit_once(':') {
            Some((host, port)) if !host.is_empty() && port.parse::<u16>().is_ok() => {
                Ok(Endpoint::Tcp(s.to_string()))
            }
            _ => Err(ModelError::Parameter(format!(
                "endpoint {s:?} is neither host:port nor stdio:<command>"
            ))),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Tcp(a) => f.write_str(a),
            Endpoint::Stdio(argv) => write!(f, "stdio:{}", argv.join(" ")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerConfig {
    pub endpoint: Endpoint,
    pub timeout_ms: u64,
    pub top_k: Option<usize>,
    pub max_inflight: usize,
}

impl ServerConfig {
    pub fn new(endpoint: Endpoint) -> Self {
        ServerConfig {
            endpoint,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            top_k: None,
            max_inflight: DEFAULT_MAX_INFLIGHT,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.timeout_ms == 0 {
            return Err(ModelError::Parameter("timeout_ms must be positive".into()));
        }
        if self.top_k.is_some_and(|k| k < 2) {
            return Err(ModelError::Parameter("top_k must be at least 2".into()));
        }
        if self.max_inflight == 0 {
            return Err(ModelError::Parameter(
                "max_inflight must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints() {
        assert_eq!(
            "localhost:7000".parse::<Endpoint>().unwrap(),
            Endpoint::Tcp("localhost:7000".into())
        );
        assert_eq!(
            "stdio:python3 serve.py --stdio"
                .parse::<Endpoint>()
                .unwrap(),
            Endpoint::Stdio(vec!["python3".into(), "serve.py".into(), "--stdio".into()])
        );
        assert!("localhost".parse::<Endpoint>().is_err());
        assert!("stdio:".parse::<Endpoint>().is_err());
        assert_eq!(
            "stdio:a b".parse::<Endpoint>().unwrap().to_string(),
            "stdio:a b"
        );
    }

    #[test]
    fn config_invariants() {
        let mut c = ServerConfig::new(Endpoint::Tcp("h:1".into()));
        assert!(c.validate().is_ok());
        c.top_k = Some(1);
        assert!(c.validate().is_err());
        c.top_k = Some(2);
        c.timeout_ms = 0;
        assert!(c.validate().is_err());
    }
}
