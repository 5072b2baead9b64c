use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use storecost::dlt::{
    dlt_storage, parse_conllu_str, token_tsv, word_tsv, ExclusionSet, DEFAULT_EXCLUDED,
};

use super::{abs, sink};
use crate::manifest::{finish, read_input, Manifest, Payload};
use crate::{Context, Failure};

#[derive(Debug, Args)]
pub struct DltArgs {
    /// CoNLL-U treebank.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Relations that do not count as dependencies, comma separated.
    #[arg(long, value_name = "LABELS", default_value_t = DEFAULT_EXCLUDED.join(","))]
    pub exclude: String,
    /// Per-token TSV (default: stdout).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also write counts summed over whitespace words.
    #[arg(long, value_name = "FILE")]
    pub words_out: Option<PathBuf>,
}

pub fn run(ctx: &Context, args: DltArgs) -> Result<(), Failure> {
    let mut manifest = Manifest::new("dlt", &ctx.config);
    let text = read_input(&mut manifest, &abs(&args.input))?;
    let trees = parse_conllu_str(&text).map_err(storecost::Error::from)?;
    let excluded = ExclusionSet::parse(&args.exclude);
    let scored: Vec<_> = trees
        .into_iter()
        .map(|t| {
            let p = dlt_storage(&t, &excluded);
            (t, p)
        })
        .collect();
    let mut outputs = vec![(
        sink(args.out.as_deref()),
        Payload::Delimited(token_tsv(&scored)),
    )];
    if let Some(w) = &args.words_out {
        let words = word_tsv(&scored).map_err(storecost::Error::from)?;
        outputs.push((sink(Some(w)), Payload::Delimited(words)));
    }
    manifest.parameters = json!({
        "excluded": excluded.labels().collect::<Vec<_>>(),
        "sentences": scored.len(),
    });
    finish(manifest, outputs, ctx.manifest_path.as_deref())?;
    Ok(())
}
