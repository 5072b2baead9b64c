use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use storecost::verify::{verify_suite, DEFAULT_RANDOM_MODELS, DEFAULT_SENTENCES_PER_MODEL};
use storecost::Error;

use super::sink;
use crate::manifest::{finish, Manifest, Payload};
use crate::{Context, Failure};

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Random joint tables checked in addition to the bundled ones.
    #[arg(long, default_value_t = DEFAULT_RANDOM_MODELS)]
    pub random_models: usize,
    /// Support sentences drawn from each random table.
    #[arg(long, default_value_t = DEFAULT_SENTENCES_PER_MODEL)]
    pub sentences_per_model: usize,
    /// Report JSON (default: stdout).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

pub fn run(ctx: &Context, args: VerifyArgs) -> Result<(), Failure> {
    let seed = ctx.config.seed();
    let report =
        verify_suite(args.random_models, args.sentences_per_model, seed).map_err(Error::from)?;
    let failed: Vec<&str> = report
        .models
        .iter()
        .filter(|m| !m.passed())
        .map(|m| m.name.as_str())
        .collect();
    for m in &report.models {
        log::info!("{}: {}", m.name, if m.passed() { "ok" } else { "FAILED" });
    }
    let mut manifest = Manifest::new("verify", &ctx.config);
    manifest.parameters = json!({
        "random_models": args.random_models,
        "sentences_per_model": args.sentences_per_model,
        "tolerance": report.tolerance,
    });
    let body = serde_json::to_value(&report).expect("report serializes");
    finish(
        manifest,
        vec![(sink(args.out.as_deref()), Payload::Json(body))],
        ctx.manifest_path.as_deref(),
    )?;
    if !report.passed {
        return Err(Failure::data(format!(
            "identity checks failed for {}",
            failed.join(", ")
        )));
    }
    Ok(())
}
