use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use serde::Serialize;
use serde_json::json;
use storecost::eval::{
    benjamini_hochberg, bins_csv, correlate, ingest_reading_data, parse_raw_tsv, run_conditions,
    CvConfig, EvalError, FoldScheme, PermutationMode, PredictorTable, RegressConfig, DEFAULT_ALPHA,
    DEFAULT_MIN_BIN_COUNT, DEFAULT_PERMUTATIONS,
};
use storecost::Error;

use super::{abs, sink};
use crate::config::RunConfig;
use crate::manifest::{finish, read_input, Manifest, Payload};
use crate::{Context, Failure};

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Cross-validated delta log-likelihood for the four storage conditions.
    Regress(RegressArgs),
    /// Pearson and Spearman correlation of the two storage measures.
    Correlate(CorrelateArgs),
    /// Benjamini-Hochberg correction across result files or p-value lists.
    Bh(BhArgs),
    /// Attach filtered per-word reading times to a predictor table.
    Ingest(IngestArgs),
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    /// Predictor TSV with text_id, word_index, rt_target and predictor columns.
    #[arg(long, value_name = "FILE")]
    pub table: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Sign-flip permutations per condition.
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    pub perms: usize,
    /// auto, sampled or exhaustive.
    #[arg(long, default_value = "auto")]
    pub permutation_mode: String,
    /// rows (shuffled word rows) or texts (whole texts per fold).
    #[arg(long, default_value = "rows")]
    pub fold_scheme: String,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Fewest usable rows accepted (default: 50 per fold).
    #[arg(long, value_name = "N")]
    pub min_rows: Option<usize>,
    /// Results JSON (default: stdout).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[arg(long, value_name = "FILE")]
    pub table: PathBuf,
    #[arg(long, default_value = "info_stor")]
    pub info_column: String,
    #[arg(long, default_value = "dlt_stor")]
    pub dlt_column: String,
    /// Bins with fewer words are left out of the display and the line fit.
    #[arg(long, default_value_t = DEFAULT_MIN_BIN_COUNT)]
    pub min_bin_count: usize,
    /// Correlation JSON (default: stdout).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Binned means CSV for plotting.
    #[arg(long, value_name = "FILE")]
    pub bins_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BhArgs {
    /// `eval regress` outputs, or text files of `p` or `label<TAB>p` lines.
    #[arg(long, value_name = "FILE", required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Args)]
pub struct FilterArgs {
    /// spr, maze or eye-tracking.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    #[arg(long, value_name = "MS")]
    pub rt_min: Option<f64>,
    #[arg(long, value_name = "MS")]
    pub rt_max: Option<f64>,
    #[arg(long, value_name = "FRACTION")]
    pub min_accuracy: Option<f64>,
    #[arg(long, value_name = "BOOL")]
    pub drop_practice: Option<bool>,
    #[arg(long, value_name = "BOOL")]
    pub exclude_sentence_edges: Option<bool>,
    #[arg(long, value_name = "BOOL")]
    pub exclude_punctuation: Option<bool>,
}

impl FilterArgs {
    pub(crate) fn apply(&self, cfg: &mut RunConfig) {
        let f = &mut cfg.filter;
        if self.preset.is_some() {
            f.preset.clone_from(&self.preset);
        }
        macro_rules! take {
            ($($field:ident),*) => {$(
                if self.$field.is_some() {
                    f.$field = self.$field;
                }
            )*};
        }
        take!(
            rt_min,
            rt_max,
            min_accuracy,
            drop_practice,
            exclude_sentence_edges,
            exclude_punctuation
        );
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Predictor TSV to fill.
    #[arg(long, value_name = "FILE")]
    pub predictors: PathBuf,
    /// Per-participant measurements.
    #[arg(long, value_name = "FILE")]
    pub raw: PathBuf,
    #[command(flatten)]
    pub filter: FilterArgs,
    /// Predictor TSV with rt_target and usable filled (default: stdout).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

pub fn run(ctx: &Context, command: EvalCommand) -> Result<(), Failure> {
    match command {
        EvalCommand::Regress(a) => regress(ctx, a),
        EvalCommand::Correlate(a) => correlation(ctx, a),
        EvalCommand::Bh(a) => bh(ctx, a),
        EvalCommand::Ingest(a) => ingest(ctx, a),
    }
}

fn load_table(manifest: &mut Manifest, path: &Path) -> Result<PredictorTable, Error> {
    let text = read_input(manifest, &abs(path))?;
    Ok(PredictorTable::from_tsv(&text)?)
}

fn dataset_name(path: &Path) -> String {
    path.file_stem().map_or_else(
        || path.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

fn regress(ctx: &Context, args: RegressArgs) -> Result<(), Failure> {
    let usage = |m: String| Failure::from(Error::Usage(m));
    let scheme = match args.fold_scheme.as_str() {
        "rows" => FoldScheme::Rows,
        "texts" => FoldScheme::Texts,
        other => {
            return Err(usage(format!(
                "unknown fold scheme {other:?}; expected rows or texts"
            )))
        }
    };
    let mode = match args.permutation_mode.as_str() {
        "auto" => PermutationMode::Auto,
        "sampled" => PermutationMode::Sampled,
        "exhaustive" => PermutationMode::Exhaustive,
        other => return Err(usage(format!("unknown permutation mode {other:?}"))),
    };
    if args.folds < 2 {
        return Err(usage("--folds must be at least 2".into()));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(usage("--alpha must lie in (0, 1)".into()));
    }
    let mut manifest = Manifest::new("eval regress", &ctx.config);
    let mut table = load_table(&mut manifest, &args.table)?;
    table.add_spillover();
    let config = RegressConfig {
        cv: CvConfig {
            folds: args.folds,
            seed: ctx.config.seed(),
            scheme,
            min_rows: args.min_rows,
        },
        permutations: args.perms,
        permutation_mode: mode,
        alpha: args.alpha,
    };
    let report = run_conditions(&table, &config).map_err(Error::from)?;
    manifest.parameters = serde_json::to_value(&config).expect("config serializes");
    let body = json!({
        "dataset": dataset_name(&args.table),
        "metadata": report.metadata,
        "results": report.results,
    });
    finish(
        manifest,
        vec![(sink(args.out.as_deref()), Payload::Json(body))],
        ctx.manifest_path.as_deref(),
    )?;
    Ok(())
}

fn correlation(ctx: &Context, args: CorrelateArgs) -> Result<(), Failure> {
    let mut manifest = Manifest::new("eval correlate", &ctx.config);
    let table = load_table(&mut manifest, &args.table)?;
    let info = table.column(&args.info_column).map_err(Error::from)?;
    let dlt = table.column(&args.dlt_column).map_err(Error::from)?;
    let rows: Vec<usize> = (0..table.len())
        .filter(|&r| table.usable[r] && info[r].is_finite() && dlt[r].is_finite())
        .collect();
    let x: Vec<f64> = rows.iter().map(|&r| info[r]).collect();
    let y: Vec<f64> = rows.iter().map(|&r| dlt[r]).collect();
    let result = correlate(&x, &y, args.min_bin_count).map_err(Error::from)?;
    manifest.parameters = json!({
        "info_column": args.info_column,
        "dlt_column": args.dlt_column,
        "min_bin_count": args.min_bin_count,
    });
    let mut outputs = vec![(
        sink(args.out.as_deref()),
        Payload::Json(serde_json::to_value(&result).expect("result serializes")),
    )];
    if let Some(p) = &args.bins_out {
        outputs.push((sink(Some(p)), Payload::Delimited(bins_csv(&result))));
    }
    finish(manifest, outputs, ctx.manifest_path.as_deref())?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Test {
    source: String,
    label: String,
    p_value: f64,
    bh_significant: bool,
}

/// `(label, p)` pairs from a regress result file or a plain list.
fn read_p_values(text: &str) -> Result<Vec<(String, f64)>, Error> {
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(text) {
        let results = v
            .get("results")
            .and_then(|r| r.as_array())
            .ok_or_else(|| EvalError::InvalidInput("JSON input has no results array".into()))?;
        return results
            .iter()
            .map(|r| {
                let label = r
                    .get("condition")
                    .and_then(|c| c.as_str())
                    .unwrap_or("")
                    .to_string();
                let p = r.get("p_value").and_then(|p| p.as_f64()).ok_or_else(|| {
                    EvalError::InvalidInput(format!("result {label:?} has no p_value"))
                })?;
                Ok((label, p))
            })
            .collect();
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(idx, line)| {
            let (label, p) = match line.split_once('\t') {
                Some((l, p)) => (l.trim().to_string(), p),
                None => (String::new(), line),
            };
            let p: f64 = p.trim().parse().map_err(|_| EvalError::Parse {
                line: idx + 1,
                message: format!("not a p-value: {:?}", p.trim()),
            })?;
            Ok((label, p))
        })
        .collect()
}

fn bh(ctx: &Context, args: BhArgs) -> Result<(), Failure> {
    let mut manifest = Manifest::new("eval bh", &ctx.config);
    let mut tests = Vec::new();
    for path in &args.input {
        let text = read_input(&mut manifest, &abs(path))?;
        for (label, p) in read_p_values(&text)? {
            tests.push(Test {
                source: dataset_name(path),
                label,
                p_value: p,
                bh_significant: false,
            });
        }
    }
    if tests.is_empty() {
        return Err(Error::from(EvalError::EmptyInput).into());
    }
    let flags = benjamini_hochberg(
        &tests.iter().map(|t| t.p_value).collect::<Vec<_>>(),
        args.alpha,
    )
    .map_err(Error::from)?;
    for (t, f) in tests.iter_mut().zip(flags) {
        t.bh_significant = f;
    }
    manifest.parameters = json!({ "alpha": args.alpha, "tests": tests.len() });
    let body = json!({ "alpha": args.alpha, "tests": tests });
    finish(
        manifest,
        vec![(sink(args.out.as_deref()), Payload::Json(body))],
        ctx.manifest_path.as_deref(),
    )?;
    Ok(())
}

fn ingest(ctx: &Context, args: IngestArgs) -> Result<(), Failure> {
    let filter = ctx.config.filter_config()?;
    let mut manifest = Manifest::new("eval ingest", &ctx.config);
    let predictors = load_table(&mut manifest, &args.predictors)?;
    let raw_text = read_input(&mut manifest, &abs(&args.raw))?;
    let raw = parse_raw_tsv(&raw_text).map_err(Error::from)?;
    let (table, summary) = ingest_reading_data(&raw, &predictors, &filter).map_err(Error::from)?;
    log::info!(
        "dropped {} participants and {} trials; excluded {} words",
        summary.participants_dropped,
        summary.trials_dropped,
        summary.words_excluded
    );
    manifest.parameters = json!({ "filter": filter, "summary": summary });
    finish(
        manifest,
        vec![(
            sink(args.out.as_deref()),
            Payload::Delimited(table.to_tsv()),
        )],
        ctx.manifest_path.as_deref(),
    )?;
    Ok(())
}
