use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde_json::json;
use storecost::storage::{storage_profile, PotentialSource};
use storecost::Error;

use super::{abs, sink};
use crate::backend::Backend;
use crate::cache::{Cache, CachedResult};
use crate::input::{parse_sentences, InputSentence};
use crate::manifest::{finish, read_input, Manifest, Payload};
use crate::{BackendArgs, Context, Failure, WindowArgs};

#[derive(Debug, Args)]
pub struct StorageArgs {
    /// Sentences, one per line (optionally `id<TAB>text`), or a stimulus file.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// JSONL output (default: stdout).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub window: WindowArgs,
}

/// Scores one sentence, consulting the cache first.
pub(crate) fn score_sentence(
    source: &dyn PotentialSource,
    identity: &str,
    sentence: &InputSentence,
    max_distance: Option<usize>,
    cache: Option<&Cache>,
) -> Result<CachedResult, Error> {
    if let Some(hit) = cache.and_then(|c| c.get(identity, &sentence.words, max_distance)) {
        log::debug!("cache hit for {}", sentence.id);
        return Ok(hit);
    }
    let tokens = source.tokenize(&sentence.words)?;
    let result = storage_profile(source, &tokens, max_distance).inspect_err(|f| {
        log::error!("sentence {}: {f}", sentence.id);
    })?;
    let entry = CachedResult {
        identity: identity.to_string(),
        max_distance,
        words: sentence.words.clone(),
        pp_matrix: result.matrix.entries().collect(),
        storage: result.profile.per_position,
        approximate: result.matrix.approximate(),
        windowed: result.windowed,
    };
    if let Some(c) = cache {
        c.put(&entry);
    }
    Ok(entry)
}

pub fn run(ctx: &Context, args: StorageArgs) -> Result<(), Failure> {
    let cfg = &ctx.config;
    let mut manifest = Manifest::new("storage", cfg);
    let text = read_input(&mut manifest, &abs(&args.input))?;
    let sentences = parse_sentences(&text)?;
    let backend = Backend::build(&cfg.backend_choice()?, &mut manifest)?;
    let source = backend.potential_source();
    let identity = source.identity();
    let cache = cfg.run.cache_dir.as_deref().map(Cache::new);
    let max_distance = cfg.run.max_distance;

    let scored: Vec<Result<CachedResult, Error>> = sentences
        .par_iter()
        .map(|s| score_sentence(source.as_ref(), &identity, s, max_distance, cache.as_ref()))
        .collect();
    let mut rows = Vec::with_capacity(sentences.len());
    for (sentence, result) in sentences.iter().zip(scored) {
        let r = result?;
        manifest.approximate |= r.approximate;
        manifest.windowed |= r.windowed;
        rows.push(json!({
            "sentence_id": sentence.id,
            "words": sentence.words,
            "pp_matrix": r.pp_matrix,
            "storage": r.storage,
            "approximate": r.approximate,
            "windowed": r.windowed,
        }));
    }
    manifest.backend = Some(identity);
    manifest.parameters = json!({ "max_distance": max_distance, "sentences": sentences.len() });
    finish(
        manifest,
        vec![(sink(args.out.as_deref()), Payload::JsonLines(rows))],
        ctx.manifest_path.as_deref(),
    )?;
    Ok(())
}
