use rayon::prelude::*;

use super::{PredictivePotentialMatrix, SentenceTokens, StorageError, StorageProfile};

/// Tolerated negative float noise before clamping. Anything below this is
/// a real estimator defect rather than rounding.
pub(crate) const NEGATIVE_NOISE: f64 = 1e-9;

/// A predictive potential after clamping at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    pub bits: f64,
    /// Value before clamping.
    pub raw: f64,
    pub approximate: bool,
}

impl Potential {
    pub fn clamped(raw: f64, approximate: bool) -> Self {
        if raw < 0.0 {
            if raw < -NEGATIVE_NOISE {
                log::warn!("predictive potential {raw:e} below the noise floor, clamped to 0");
            } else {
                log::debug!("clamped predictive potential {raw:e} to 0");
            }
        }
        Potential {
            bits: raw.max(0.0),
            raw,
            approximate,
        }
    }
}

/// Anything that can evaluate predictive potentials column by column.
///
/// A column is a fixed position `k` and several targets `i < k`; grouping by
/// column lets estimators reuse the "target visible" input across targets.
pub trait PotentialSource: Sync {
    fn potentials_at(
        &self,
        sentence: &SentenceTokens,
        k: usize,
        targets: &[usize],
    ) -> Result<Vec<Potential>, StorageError>;

    fn identity(&self) -> String;

    /// Splits words into the units this source scores. One unit per word
    /// unless the backend has its own tokenizer.
    fn tokenize(&self, words: &[String]) -> Result<SentenceTokens, StorageError> {
        Ok(SentenceTokens::from_words(words.to_vec()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageResult {
    pub matrix: PredictivePotentialMatrix,
    pub profile: StorageProfile,
    /// True when a distance window left some pairs uncomputed.
    pub windowed: bool,
}

/// A sentence aborted by a backend error, with every column that did finish.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileFailure {
    pub partial: PredictivePotentialMatrix,
    pub error: StorageError,
}

impl std::fmt::Display for ProfileFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} ({} of {} pairs completed)",
            self.error,
            self.partial.entries().count(),
            self.partial.n() * self.partial.n().saturating_sub(1) / 2
        )
    }
}

impl std::error::Error for ProfileFailure {}

/// Fills the potential matrix for all pairs with `k - i <= max_distance`
/// (every pair when `None`) and sums it into a storage profile.
///
/// Columns are evaluated in parallel; each entry lands in a fixed cell and
/// all sums run in index order, so the result does not depend on scheduling.
pub fn storage_profile<S: PotentialSource + ?Sized>(
    source: &S,
    sentence: &SentenceTokens,
    max_distance: Option<usize>,
) -> Result<StorageResult, ProfileFailure> {
    let n = sentence.len();
    if n == 0 {
        return Err(ProfileFailure {
            partial: PredictivePotentialMatrix::new(0),
            error: StorageError::EmptySentence,
        });
    }
    let columns: Vec<(usize, Vec<usize>)> = (1..n)
        .map(|k| {
            let first = max_distance.map_or(0, |d| k.saturating_sub(d));
            (k, (first..k).collect())
        })
        .collect();
    let results: Vec<Result<Vec<Potential>, StorageError>> = columns
        .par_iter()
        .map(|(k, targets)| source.potentials_at(sentence, *k, targets))
        .collect();

    let mut matrix = PredictivePotentialMatrix::new(n);
    let mut first_error = None;
    for ((k, targets), result) in columns.iter().zip(results) {
        match result {
            Ok(values) => {
                for (&i, p) in targets.iter().zip(values) {
                    matrix.set(i, *k, p);
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(error) = first_error {
        return Err(ProfileFailure {
            partial: matrix,
            error,
        });
    }
    let windowed = max_distance.is_some_and(|d| d + 1 < n);
    let profile = StorageProfile::from_matrix(&matrix);
    Ok(StorageResult {
        matrix,
        profile,
        windowed,
    })
}
