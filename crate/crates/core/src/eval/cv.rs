//! Cross-validated held-out log-likelihood comparison of nested regressions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::regression::{design_rows, gaussian_ll, ols_fit, zscore_fit};
use super::stats::{
    benjamini_hochberg, permutation_test, PermutationMode, DEFAULT_ALPHA, DEFAULT_PERMUTATIONS,
};
use super::table::{spillover_name, BASELINE_COLUMNS};
use super::{EvalError, PredictorTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    Info,
    Dlt,
    InfoOnDlt,
    DltOnInfo,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Info,
        Condition::Dlt,
        Condition::InfoOnDlt,
        Condition::DltOnInfo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Info => "Info",
            Condition::Dlt => "Dlt",
            Condition::InfoOnDlt => "InfoOnDlt",
            Condition::DltOnInfo => "DltOnInfo",
        }
    }

    fn added_column(self) -> &'static str {
        match self {
            Condition::Info | Condition::InfoOnDlt => "info_stor",
            Condition::Dlt | Condition::DltOnInfo => "dlt_stor",
        }
    }

    fn control_column(self) -> Option<&'static str> {
        match self {
            Condition::Info | Condition::Dlt => None,
            Condition::InfoOnDlt => Some("dlt_stor"),
            Condition::DltOnInfo => Some("info_stor"),
        }
    }

    /// Comparison model terms and the terms the target model adds.
    pub fn formulas(self) -> (Vec<String>, Vec<String>) {
        let mut baseline = baseline_formula();
        if let Some(c) = self.control_column() {
            baseline.extend(storage_terms(c));
        }
        (baseline, storage_terms(self.added_column()))
    }
}

/// Positions, word length, both surprisals, and spillover of the last three.
pub fn baseline_formula() -> Vec<String> {
    let mut f: Vec<String> = BASELINE_COLUMNS.iter().map(|s| s.to_string()).collect();
    f.extend(
        ["wlen", "unisurp", "gpt2_surp"]
            .iter()
            .map(|c| spillover_name(c)),
    );
    f
}

/// A storage measure at the current word and its spillover copy.
pub fn storage_terms(column: &str) -> Vec<String> {
    vec![column.to_string(), spillover_name(column)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FoldScheme {
    /// Rows are shuffled and dealt round-robin into folds.
    #[default]
    Rows,
    /// Whole texts are shuffled and dealt into folds.
    Texts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
    pub scheme: FoldScheme,
    /// Fewest usable rows accepted; `None` means `50 * folds`.
    pub min_rows: Option<usize>,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 10,
            seed: 0,
            scheme: FoldScheme::Rows,
            min_rows: None,
        }
    }
}

impl CvConfig {
    fn min_rows(&self) -> usize {
        self.min_rows.unwrap_or(50 * self.folds)
    }
}

/// Fold id for each of `rows` (table row indices in canonical order).
pub fn assign_folds(table: &PredictorTable, rows: &[usize], config: &CvConfig) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    match config.scheme {
        FoldScheme::Rows => {
            let mut labels: Vec<usize> = (0..rows.len()).map(|i| i % config.folds).collect();
            labels.shuffle(&mut rng);
            labels
        }
        FoldScheme::Texts => {
            let mut texts: Vec<&str> = rows.iter().map(|&r| table.text_id[r].as_str()).collect();
            texts.dedup();
            texts.sort_unstable();
            texts.dedup();
            texts.shuffle(&mut rng);
            let fold_of =
                |t: &str| texts.iter().position(|x| *x == t).expect("known text") % config.folds;
            rows.iter().map(|&r| fold_of(&table.text_id[r])).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub n_test: usize,
    pub mean_dll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvOutcome {
    /// Table rows analysed, in canonical order.
    pub rows: Vec<usize>,
    pub fold_of: Vec<usize>,
    /// Held-out ΔLL for each analysed row, aligned with `rows`.
    pub per_word_dll: Vec<f64>,
    pub mean_dll: f64,
    pub folds: Vec<FoldSummary>,
    /// Target-model coefficients of the added terms, averaged over folds.
    pub added_coefficients: Vec<(String, f64)>,
}

struct FoldOutput {
    test_positions: Vec<usize>,
    dll: Vec<f64>,
    added: Vec<f64>,
}

fn run_fold(
    table: &PredictorTable,
    rows: &[usize],
    fold_of: &[usize],
    fold: usize,
    baseline: &[&str],
    added: &[&str],
) -> Result<FoldOutput, EvalError> {
    let fail = |e: EvalError| EvalError::Fold {
        fold,
        message: e.to_string(),
    };
    let train: Vec<usize> = rows
        .iter()
        .zip(fold_of)
        .filter(|(_, f)| **f != fold)
        .map(|(r, _)| *r)
        .collect();
    let test_positions: Vec<usize> = (0..rows.len()).filter(|&i| fold_of[i] == fold).collect();
    let test: Vec<usize> = test_positions.iter().map(|&i| rows[i]).collect();
    let target: Vec<&str> = baseline.iter().chain(added).copied().collect();

    let mut scaled = PredictorTable::new(table.text_id.clone(), table.word_index.clone());
    for &c in &target {
        let values = table.column(c).map_err(fail)?;
        let fit: Vec<f64> = train.iter().map(|&r| values[r]).collect();
        let z = zscore_fit(c, &fit).map_err(fail)?;
        scaled.set_column(c, values.iter().map(|&v| z.apply(v)).collect());
    }
    let y_train: Vec<f64> = train.iter().map(|&r| table.rt_target[r]).collect();
    let y_test: Vec<f64> = test.iter().map(|&r| table.rt_target[r]).collect();
    let names = |cols: &[&str]| cols.iter().map(|s| s.to_string()).collect::<Vec<_>>();

    let base_fit = ols_fit(
        &names(baseline),
        &design_rows(&scaled, baseline, &train).map_err(fail)?,
        &y_train,
    )
    .map_err(fail)?;
    let target_fit = ols_fit(
        &names(&target),
        &design_rows(&scaled, &target, &train).map_err(fail)?,
        &y_train,
    )
    .map_err(fail)?;
    let ll_base = gaussian_ll(
        &base_fit,
        &design_rows(&scaled, baseline, &test).map_err(fail)?,
        &y_test,
    );
    let ll_target = gaussian_ll(
        &target_fit,
        &design_rows(&scaled, &target, &test).map_err(fail)?,
        &y_test,
    );
    let dll = ll_target.iter().zip(&ll_base).map(|(t, b)| t - b).collect();
    let added_coefs = added
        .iter()
        .map(|c| target_fit.coefficient(c).expect("added term fitted"))
        .collect();
    Ok(FoldOutput {
        test_positions,
        dll,
        added: added_coefs,
    })
}

/// Held-out ΔLL of `baseline + added` over `baseline` on the given rows.
///
/// Predictors are z-scored with training-fold statistics; both models of a
/// fold share the same training rows.
pub fn cv_delta_ll_on(
    table: &PredictorTable,
    rows: &[usize],
    baseline: &[&str],
    added: &[&str],
    config: &CvConfig,
) -> Result<CvOutcome, EvalError> {
    if config.folds < 2 {
        return Err(EvalError::InvalidInput(format!(
            "need at least 2 folds, got {}",
            config.folds
        )));
    }
    if rows.len() < config.min_rows() {
        return Err(EvalError::InsufficientRows {
            needed: config.min_rows(),
            got: rows.len(),
        });
    }
    let fold_of = assign_folds(table, rows, config);
    let outputs: Vec<FoldOutput> = (0..config.folds)
        .into_par_iter()
        .map(|f| run_fold(table, rows, &fold_of, f, baseline, added))
        .collect::<Result<_, _>>()?;

    let mut per_word_dll = vec![0.0; rows.len()];
    let mut folds = Vec::with_capacity(config.folds);
    let mut coef_sums = vec![0.0; added.len()];
    for (f, out) in outputs.iter().enumerate() {
        for (&pos, &d) in out.test_positions.iter().zip(&out.dll) {
            per_word_dll[pos] = d;
        }
        let n_test = out.dll.len();
        folds.push(FoldSummary {
            fold: f,
            n_test,
            mean_dll: if n_test == 0 {
                0.0
            } else {
                out.dll.iter().sum::<f64>() / n_test as f64
            },
        });
        for (s, c) in coef_sums.iter_mut().zip(&out.added) {
            *s += c;
        }
    }
    let mean_dll = per_word_dll.iter().sum::<f64>() / rows.len() as f64;
    Ok(CvOutcome {
        rows: rows.to_vec(),
        fold_of,
        per_word_dll,
        mean_dll,
        folds,
        added_coefficients: added
            .iter()
            .zip(coef_sums)
            .map(|(c, s)| (c.to_string(), s / config.folds as f64))
            .collect(),
    })
}

/// [`cv_delta_ll_on`] over every analysable row of the table.
pub fn cv_delta_ll(
    table: &PredictorTable,
    baseline: &[&str],
    added: &[&str],
    config: &CvConfig,
) -> Result<CvOutcome, EvalError> {
    let all: Vec<&str> = baseline.iter().chain(added).copied().collect();
    let rows = table.analysis_rows(&all)?;
    cv_delta_ll_on(table, &rows, baseline, added, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressConfig {
    pub cv: CvConfig,
    pub permutations: usize,
    pub permutation_mode: PermutationMode,
    pub alpha: f64,
}

impl Default for RegressConfig {
    fn default() -> Self {
        RegressConfig {
            cv: CvConfig::default(),
            permutations: DEFAULT_PERMUTATIONS,
            permutation_mode: PermutationMode::Auto,
            alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StorageCoefficients {
    pub current: f64,
    pub spillover: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DllResult {
    pub condition: Condition,
    #[serde(skip)]
    pub per_word_dll: Vec<f64>,
    pub mean_dll: f64,
    pub p_value: f64,
    pub bh_significant: bool,
    pub coefficients: StorageCoefficients,
    pub n_rows: usize,
    pub folds: Vec<FoldSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressMetadata {
    pub permutation_scheme: &'static str,
    pub permutation_exhaustive: bool,
    pub permutations: usize,
    pub fold_scheme: FoldScheme,
    pub folds: usize,
    pub seed: u64,
    pub alpha: f64,
    pub zscore: &'static str,
    pub likelihood: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressReport {
    pub metadata: RegressMetadata,
    pub results: Vec<DllResult>,
}

/// Seed for the permutation draws of one condition; distinct per condition
/// and fixed by the master seed.
pub fn permutation_seed(seed: u64, condition: Condition) -> u64 {
    let idx = Condition::ALL
        .iter()
        .position(|c| *c == condition)
        .expect("listed") as u64;
    seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(idx + 1)
}

/// All four conditions on one shared set of rows, then a sign-flip test per
/// condition and Benjamini–Hochberg across the four.
pub fn run_conditions(
    table: &PredictorTable,
    config: &RegressConfig,
) -> Result<RegressReport, EvalError> {
    let mut every: Vec<String> = baseline_formula();
    every.extend(storage_terms("dlt_stor"));
    every.extend(storage_terms("info_stor"));
    let every_ref: Vec<&str> = every.iter().map(String::as_str).collect();
    let rows = table.analysis_rows(&every_ref)?;

    let mut results = Vec::new();
    let mut exhaustive = false;
    for condition in Condition::ALL {
        let (baseline, added) = condition.formulas();
        let b: Vec<&str> = baseline.iter().map(String::as_str).collect();
        let a: Vec<&str> = added.iter().map(String::as_str).collect();
        let cv = cv_delta_ll_on(table, &rows, &b, &a, &config.cv)?;
        let perm = permutation_test(
            &cv.per_word_dll,
            config.permutations,
            permutation_seed(config.cv.seed, condition),
            config.permutation_mode,
        )?;
        exhaustive |= perm.exhaustive;
        results.push(DllResult {
            condition,
            mean_dll: cv.mean_dll,
            p_value: perm.p_value,
            bh_significant: false,
            coefficients: StorageCoefficients {
                current: cv.added_coefficients[0].1,
                spillover: cv.added_coefficients[1].1,
            },
            n_rows: cv.rows.len(),
            folds: cv.folds,
            per_word_dll: cv.per_word_dll,
        });
    }
    let flags = benjamini_hochberg(
        &results.iter().map(|r| r.p_value).collect::<Vec<_>>(),
        config.alpha,
    )?;
    for (r, f) in results.iter_mut().zip(flags) {
        r.bh_significant = f;
    }
    Ok(RegressReport {
        metadata: RegressMetadata {
            permutation_scheme: "sign-flip of per-word delta-LL, one-sided on the mean",
            permutation_exhaustive: exhaustive,
            permutations: config.permutations,
            fold_scheme: config.cv.scheme,
            folds: config.cv.folds,
            seed: config.cv.seed,
            alpha: config.alpha,
            zscore: "fit on training folds",
            likelihood: "gaussian, ML residual variance",
        },
        results,
    })
}
