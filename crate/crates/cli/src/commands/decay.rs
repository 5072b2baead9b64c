use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use storecost::storage::{decay_curve, SentenceTokens, DEFAULT_DECAY_DISTANCE};
use storecost::Error;

use super::{abs, sink};
use crate::backend::Backend;
use crate::input::parse_sentences;
use crate::manifest::{finish, read_input, Manifest, Payload};
use crate::{BackendArgs, Context, Failure, WindowArgs};

#[derive(Debug, Args)]
pub struct DecayArgs {
    /// Sentences, one per line, or a stimulus file.
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// JSON curve (default: stdout).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also write `distance,mean_bits,count` rows.
    #[arg(long, value_name = "FILE")]
    pub csv_out: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub window: WindowArgs,
}

pub fn run(ctx: &Context, args: DecayArgs) -> Result<(), Failure> {
    let cfg = &ctx.config;
    let max_distance = cfg.run.max_distance.unwrap_or(DEFAULT_DECAY_DISTANCE);
    let mut manifest = Manifest::new("decay", cfg);
    let text = read_input(&mut manifest, &abs(&args.input))?;
    let sentences = parse_sentences(&text)?;
    let backend = Backend::build(&cfg.backend_choice()?, &mut manifest)?;
    let source = backend.potential_source();
    let corpus: Vec<SentenceTokens> = sentences
        .iter()
        .map(|s| source.tokenize(&s.words))
        .collect::<Result<_, _>>()
        .map_err(Error::from)?;
    let curve = decay_curve(source.as_ref(), &corpus, max_distance).map_err(Error::from)?;

    manifest.backend = Some(source.identity());
    manifest.approximate = curve.approximate;
    manifest.parameters = json!({ "max_distance": max_distance, "sentences": corpus.len() });
    let mut outputs = vec![(
        sink(args.out.as_deref()),
        Payload::Json(
            json!({ "max_distance": max_distance, "approximate": curve.approximate, "bins": curve.bins }),
        ),
    )];
    if let Some(p) = &args.csv_out {
        let mut csv = String::from("distance,mean_bits,count\n");
        for b in &curve.bins {
            let mean = b.mean.map_or_else(|| "NA".to_string(), |m| m.to_string());
            csv.push_str(&format!("{},{},{}\n", b.distance, mean, b.count));
        }
        outputs.push((sink(Some(p)), Payload::Delimited(csv)));
    }
    finish(manifest, outputs, ctx.manifest_path.as_deref())?;
    Ok(())
}
