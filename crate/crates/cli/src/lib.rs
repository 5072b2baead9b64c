//! The `storecost` command line.

pub mod backend;
pub mod cache;
pub mod commands;
pub mod config;
pub mod input;
pub mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use storecost::{Error, ErrorKind};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "storecost",
    version,
    about = "Information-theoretic and DLT storage cost pipelines"
)]
pub struct Cli {
    /// TOML run configuration; STORECOST_* variables and flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: one per core).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Master seed for every random stream.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Manifest location (default: beside the first output file).
    #[arg(long, global = true, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Predictive-potential matrices and storage profiles for sentences.
    Storage(commands::storage::StorageArgs),
    /// DLT storage cost from CoNLL-U trees.
    Dlt(commands::dlt::DltArgs),
    /// Center-embedding and relative-clause stimuli.
    #[command(subcommand)]
    Stimuli(commands::stimuli::StimuliCommand),
    /// Mean predictive potential as a function of distance.
    Decay(commands::decay::DecayArgs),
    /// Regression, correlation and multiple-comparison analyses.
    #[command(subcommand)]
    Eval(commands::eval::EvalCommand),
    /// Oracle identities on exact joint tables.
    Verify(commands::verify::VerifyArgs),
    /// Serve an in-process backend over the masked-LM wire protocol.
    Serve(commands::serve::ServeArgs),
    /// Print the effective configuration as TOML.
    Config,
}

/// Backend selection flags shared by the model-dependent subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct BackendArgs {
    /// exact, ngram or server; inferred when only one backend is configured.
    #[arg(long, value_name = "KIND")]
    pub backend: Option<String>,
    /// Joint table (`seq<TAB>prob` lines) or sequence list, or bundled:<name>.
    #[arg(long, value_name = "FILE")]
    pub joint: Option<String>,
    /// Training text for the masked n-gram backend, one sentence per line.
    #[arg(long, value_name = "FILE")]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub order: Option<usize>,
    /// Additive smoothing for the n-gram backend.
    #[arg(long, value_name = "X")]
    pub alpha: Option<f64>,
    /// Masked-LM server, `host:port` or `stdio:<command>`.
    #[arg(long, value_name = "ADDR")]
    pub lm_endpoint: Option<String>,
    #[arg(long, value_name = "MS")]
    pub lm_timeout_ms: Option<u64>,
    /// Request top-k distributions instead of the full vocabulary.
    #[arg(long, value_name = "K")]
    pub lm_top_k: Option<usize>,
    #[arg(long, value_name = "N")]
    pub lm_max_inflight: Option<usize>,
}

impl BackendArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), Error> {
        if let Some(k) = &self.backend {
            cfg.backend.kind = Some(k.parse()?);
        }
        if let Some(j) = &self.joint {
            cfg.backend.joint = Some(j.clone());
        }
        if let Some(c) = &self.corpus {
            cfg.backend.corpus = Some(c.clone());
        }
        if self.order.is_some() {
            cfg.backend.order = self.order;
        }
        if self.alpha.is_some() {
            cfg.backend.alpha = self.alpha;
        }
        if let Some(e) = &self.lm_endpoint {
            cfg.server.endpoint = Some(e.clone());
        }
        if self.lm_timeout_ms.is_some() {
            cfg.server.timeout_ms = self.lm_timeout_ms;
        }
        if self.lm_top_k.is_some() {
            cfg.server.top_k = self.lm_top_k;
        }
        if self.lm_max_inflight.is_some() {
            cfg.server.max_inflight = self.lm_max_inflight;
        }
        Ok(())
    }
}

/// Distance window and cache flags for storage computations.
#[derive(Debug, Clone, Default, Args)]
pub struct WindowArgs {
    /// Only score pairs with k - i <= N.
    #[arg(long, value_name = "N")]
    pub max_distance: Option<usize>,
    /// Reuse per-sentence storage results stored here.
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
}

impl WindowArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if self.max_distance.is_some() {
            cfg.run.max_distance = self.max_distance;
        }
        if let Some(d) = &self.cache_dir {
            cfg.run.cache_dir = Some(d.clone());
        }
    }
}

pub struct Context {
    pub config: RunConfig,
    pub manifest_path: Option<PathBuf>,
}

/// Failure as reported to the user: a class for the exit code plus text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub kind: ErrorKind,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl Failure {
    pub fn data(message: impl Into<String>) -> Self {
        Failure {
            kind: ErrorKind::Data,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(self.kind)
    }
}

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Backend => 3,
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    kind: &'static str,
    exit_code: i32,
    message: &'a str,
}

/// One-line JSON error record for stderr.
pub fn error_record(f: &Failure) -> String {
    let kind = match f.kind {
        ErrorKind::Usage => "usage",
        ErrorKind::Data => "data",
        ErrorKind::Backend => "backend",
    };
    let rec = serde_json::json!({ "error": ErrorRecord { kind, exit_code: f.exit_code(), message: &f.message } });
    serde_json::to_string(&rec).expect("record serializes")
}

fn build_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_env(|k| std::env::var(k).ok())?;
    if cli.seed.is_some() {
        cfg.run.seed = cli.seed;
    }
    if cli.workers.is_some() {
        cfg.run.workers = cli.workers;
    }
    match &cli.command {
        Command::Storage(a) => {
            a.backend.apply(&mut cfg)?;
            a.window.apply(&mut cfg);
        }
        Command::Decay(a) => {
            a.backend.apply(&mut cfg)?;
            a.window.apply(&mut cfg);
        }
        Command::Stimuli(commands::stimuli::StimuliCommand::Profile(a)) => {
            a.backend.apply(&mut cfg)?;
            a.window.apply(&mut cfg);
        }
        Command::Serve(a) => a.backend.apply(&mut cfg)?,
        Command::Eval(commands::eval::EvalCommand::Ingest(a)) => a.filter.apply(&mut cfg),
        _ => {}
    }
    let cwd = std::env::current_dir().map_err(|e| Error::io("current directory", e))?;
    cfg.resolve_paths(&cwd)?;
    if cfg.run.workers == Some(0) {
        return Err(Error::Usage("--workers must be positive".into()));
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let config = build_config(&cli)?;
    if let Some(n) = config.run.workers {
        // only fails if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let cwd_abs = |p: &PathBuf| std::path::absolute(p).unwrap_or_else(|_| p.clone());
    let ctx = Context {
        config,
        manifest_path: cli.manifest.as_ref().map(cwd_abs),
    };
    match cli.command {
        Command::Storage(a) => commands::storage::run(&ctx, a),
        Command::Dlt(a) => commands::dlt::run(&ctx, a),
        Command::Stimuli(c) => commands::stimuli::run(&ctx, c),
        Command::Decay(a) => commands::decay::run(&ctx, a),
        Command::Eval(c) => commands::eval::run(&ctx, c),
        Command::Verify(a) => commands::verify::run(&ctx, a),
        Command::Serve(a) => commands::serve::run(&ctx, a),
        Command::Config => {
            print!("{}", ctx.config.to_toml());
            Ok(())
        }
    }
}
