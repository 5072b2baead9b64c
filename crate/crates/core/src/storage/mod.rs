//! Information storage: predictive potentials and their sums.
//!
//! The predictive potential of word `i` at position `k` is the KL divergence,
//! in bits, between the distributions over the rest of the sentence with and
//! without `w_i` in the context. It is computed either exactly from an
//! [`ExactJointModel`](crate::ExactJointModel) ([`exact`]) or with the
//! conditional-independence estimator over masked-LM slot distributions
//! ([`estimator`]). Information storage at `k` sums the potentials of all
//! preceding words.
//!
//! Positions are 0-based throughout: a sentence of `n` words has potentials
//! for `0 <= i < k < n`, and `Stor(0) = 0`.

pub mod decay;
pub mod estimator;
pub mod exact;
mod kl;
mod profile;

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prob_backends::ModelError;

pub use decay::{decay_curve, DecayBin, DecayCurve, DEFAULT_DECAY_DISTANCE};
pub use estimator::{predictive_potential_estimated, IndependenceEstimator};
pub use exact::{
    contextualized_pmi_exact, predictive_potential_exact, predictive_potential_kl,
    verify_chain_rule, ChainRuleReport, ExactPotential,
};
pub use kl::{kl_bits_probs, kl_divergence_bits};
pub use profile::{storage_profile, Potential, PotentialSource, ProfileFailure, StorageResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StorageError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("infinite divergence: q assigns zero probability to outcome {0} that p supports")]
    InfiniteDivergence(usize),
    #[error("distribution mismatch: {0}")]
    Mismatch(String),
    #[error("invalid position pair i={i}, k={k} for a sentence of {n}")]
    InvalidPair { i: usize, k: usize, n: usize },
    #[error("sentence is empty")]
    EmptySentence,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid alignment: {0}")]
    Alignment(String),
}

/// Words of a sentence, their backend tokens, and the word → token ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceTokens {
    pub words: Vec<String>,
    pub tokens: Vec<String>,
    pub word_to_tokens: Vec<Range<usize>>,
}

impl SentenceTokens {
    /// One token per word.
    pub fn from_words(words: Vec<String>) -> Self {
        let word_to_tokens = (0..words.len()).map(|i| i..i + 1).collect();
        SentenceTokens {
            tokens: words.clone(),
            words,
            word_to_tokens,
        }
    }

    pub fn from_text(text: &str) -> Self {
        Self::from_words(text.split_whitespace().map(String::from).collect())
    }

    pub fn new(
        words: Vec<String>,
        tokens: Vec<String>,
        word_to_tokens: Vec<Range<usize>>,
    ) -> Result<Self, StorageError> {
        if word_to_tokens.len() != words.len() {
            return Err(StorageError::Alignment(format!(
                "{} words but {} ranges",
                words.len(),
                word_to_tokens.len()
            )));
        }
        let mut next = 0;
        for (w, r) in word_to_tokens.iter().enumerate() {
            if r.start != next || r.end <= r.start {
                return Err(StorageError::Alignment(format!(
                    "word {w} maps to {r:?}; ranges must be nonempty and contiguous from {next}"
                )));
            }
            next = r.end;
        }
        if next != tokens.len() {
            return Err(StorageError::Alignment(format!(
                "ranges cover {next} of {} tokens",
                tokens.len()
            )));
        }
        Ok(SentenceTokens {
            words,
            tokens,
            word_to_tokens,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Strictly upper-triangular matrix of predictive potentials in bits.
/// Entries outside an active distance window are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictivePotentialMatrix {
    n: usize,
    values: Vec<Option<f64>>,
    approximate: bool,
}

impl PredictivePotentialMatrix {
    pub fn new(n: usize) -> Self {
        PredictivePotentialMatrix {
            n,
            values: vec![None; n * n],
            approximate: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Whether any entry relied on top-k tail lumping.
    pub fn approximate(&self) -> bool {
        self.approximate
    }

    pub fn get(&self, i: usize, k: usize) -> Option<f64> {
        if i < k && k < self.n {
            self.values[i * self.n + k]
        } else {
            None
        }
    }

    pub fn set(&mut self, i: usize, k: usize, potential: Potential) {
        assert!(
            i < k && k < self.n,
            "({i}, {k}) outside strict upper triangle"
        );
        self.values[i * self.n + k] = Some(potential.bits);
        self.approximate |= potential.approximate;
    }

    /// `(i, k, bits)` for every defined entry, in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (i + 1..self.n).filter_map(move |k| self.get(i, k).map(|v| (i, k, v)))
        })
    }
}

/// Information storage per position and its total, in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageProfile {
    pub per_position: Vec<f64>,
    pub total: f64,
}

impl StorageProfile {
    /// Column sums of the matrix, accumulated in increasing `i`.
    pub fn from_matrix(matrix: &PredictivePotentialMatrix) -> Self {
        let per_position: Vec<f64> = (0..matrix.n())
            .map(|k| {
                (0..k)
                    .filter_map(|i| matrix.get(i, k))
                    .fold(0.0, |a, b| a + b)
            })
            .collect();
        let total = per_position.iter().fold(0.0, |a, b| a + b);
        StorageProfile {
            per_position,
            total,
        }
    }

    /// Sums per-unit values within each group, e.g. units → whitespace words.
    pub fn aggregate(&self, groups: &[Range<usize>]) -> StorageProfile {
        let per_position: Vec<f64> = groups
            .iter()
            .map(|r| self.per_position[r.clone()].iter().fold(0.0, |a, b| a + b))
            .collect();
        let total = per_position.iter().fold(0.0, |a, b| a + b);
        StorageProfile {
            per_position,
            total,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alignment_must_partition() {
        let w = vec!["a".into(), "b".into()];
        let t = vec!["a".into(), "b1".into(), "b2".into()];
        assert!(SentenceTokens::new(w.clone(), t.clone(), vec![0..1, 1..3]).is_ok());
        assert!(SentenceTokens::new(w.clone(), t.clone(), vec![0..1, 2..3]).is_err());
        assert!(SentenceTokens::new(w.clone(), t.clone(), vec![0..1, 1..2]).is_err());
        assert!(SentenceTokens::new(w, t, vec![0..0, 0..3]).is_err());
    }

    #[test]
    fn profile_is_column_sums() {
        let mut m = PredictivePotentialMatrix::new(3);
        let p = |bits| Potential {
            bits,
            raw: bits,
            approximate: false,
        };
        m.set(0, 1, p(1.0));
        m.set(0, 2, p(0.5));
        m.set(1, 2, p(0.25));
        let prof = StorageProfile::from_matrix(&m);
        assert_eq!(prof.per_position, vec![0.0, 1.0, 0.75]);
        assert_eq!(prof.total, 1.75);
        assert_eq!(m.entries().count(), 3);
        let agg = prof.aggregate(&[0..2, 2..3]);
        assert_eq!(agg.per_position, vec![1.0, 0.75]);
    }
}
