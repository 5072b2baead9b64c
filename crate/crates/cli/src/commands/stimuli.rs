use std::path::PathBuf;

use clap::{Args, Subcommand};
use serde_json::json;
use storecost::stimuli::{
    generate_pair, item_totals_csv, per_position_csv, plot_json, profile_conditions,
    render_fixture, ConditionPair, Lexicon,
};
use storecost::Error;

use super::{abs, sink};
use crate::backend::Backend;
use crate::manifest::{finish, read_input, Manifest, Payload};
use crate::{BackendArgs, Context, Failure, WindowArgs};

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum StimuliCommand {
    /// Write the item set for a condition pair.
    Generate(GenerateArgs),
    /// Per-position storage profiles for a condition pair.
    Profile(ProfileArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// ce-rb or src-orc.
    #[arg(long, value_name = "PAIR")]
    pub condition: String,
    /// Slot fillers (default: the bundled lexicon).
    #[arg(long, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,
    /// Item TSV (default: stdout).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// ce-rb or src-orc.
    #[arg(long, value_name = "PAIR")]
    pub condition: String,
    #[arg(long, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,
    /// Receives per_position.csv, item_totals.csv, plot.json and summary.json.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub window: WindowArgs,
}

fn lexicon(
    manifest: &mut Manifest,
    pair: ConditionPair,
    path: Option<&PathBuf>,
) -> Result<Lexicon, Error> {
    match path {
        Some(p) => Ok(Lexicon::parse_tsv(&read_input(manifest, &abs(p))?)?),
        None => Ok(Lexicon::bundled(pair)),
    }
}

pub fn run(ctx: &Context, command: StimuliCommand) -> Result<(), Failure> {
    match command {
        StimuliCommand::Generate(a) => generate(ctx, a),
        StimuliCommand::Profile(a) => profile(ctx, a),
    }
}

fn generate(ctx: &Context, args: GenerateArgs) -> Result<(), Failure> {
    let pair: ConditionPair = args.condition.parse().map_err(Error::from)?;
    let mut manifest = Manifest::new("stimuli generate", &ctx.config);
    let lex = lexicon(&mut manifest, pair, args.lexicon.as_ref())?;
    let items = generate_pair(pair, &lex).map_err(Error::from)?;
    manifest.parameters = json!({ "condition": pair.as_str(), "items": items.len() });
    finish(
        manifest,
        vec![(
            sink(args.out.as_deref()),
            Payload::Delimited(render_fixture(&items)),
        )],
        ctx.manifest_path.as_deref(),
    )?;
    Ok(())
}

fn profile(ctx: &Context, args: ProfileArgs) -> Result<(), Failure> {
    let cfg = &ctx.config;
    let pair: ConditionPair = args.condition.parse().map_err(Error::from)?;
    let mut manifest = Manifest::new("stimuli profile", cfg);
    let lex = lexicon(&mut manifest, pair, args.lexicon.as_ref())?;
    let items = generate_pair(pair, &lex).map_err(Error::from)?;
    let backend = Backend::build(&cfg.backend_choice()?, &mut manifest)?;
    let source = backend.potential_source();
    let report =
        profile_conditions(source.as_ref(), &items, cfg.run.max_distance).map_err(Error::from)?;
    if report.summaries.iter().all(|s| s.n_items == 0) {
        return Err(Failure::data(format!(
            "every item failed; first error: {}",
            report.excluded.first().map_or("none", |e| e.2.as_str())
        )));
    }
    manifest.backend = Some(report.source.clone());
    manifest.approximate = report.approximate;
    manifest.windowed = cfg.run.max_distance.is_some();
    manifest.parameters = json!({
        "condition": pair.as_str(),
        "max_distance": cfg.run.max_distance,
        "excluded_items": report.excluded.len(),
    });
    let dir = abs(&args.out_dir);
    let summary = serde_json::to_value(&report).expect("report serializes");
    let outputs = vec![
        (
            sink(Some(&dir.join("per_position.csv"))),
            Payload::Delimited(per_position_csv(&report)),
        ),
        (
            sink(Some(&dir.join("item_totals.csv"))),
            Payload::Delimited(item_totals_csv(&report)),
        ),
        (
            sink(Some(&dir.join("plot.json"))),
            Payload::Json(plot_json(&report)),
        ),
        (
            sink(Some(&dir.join("summary.json"))),
            Payload::Json(summary),
        ),
    ];
    let manifest_path = ctx
        .manifest_path
        .clone()
        .unwrap_or_else(|| dir.join("manifest.json"));
    finish(manifest, outputs, Some(&manifest_path))?;
    Ok(())
}
