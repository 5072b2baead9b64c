//! Probability-model abstraction consumed by the storage computations.
//!
//! Every backend answers [`MaskedQuery`]s: a token sequence in which some
//! positions hold the [`MASK`] sentinel. The answer is one
//! [`TokenDistribution`] per masked slot. Two backends live here:
//! [`ExactJointModel`], an explicit table over all sequences of a fixed length
//! that serves as a brute-force oracle, and [`MaskedNgramModel`], a smoothed
//! count model used as a deterministic stand-in for a neural masked LM. The
//! network client in [`crate::lm_client`] implements the same trait.

mod distribution;
mod exact;
mod ngram;
mod query;
mod vocab;

use thiserror::Error;

use crate::storage::SentenceTokens;

pub use distribution::{LogBase, Support, TokenDistribution, NORMALIZATION_TOLERANCE};
pub use exact::{ExactJointModel, MAX_EXACT_LENGTH, MAX_EXACT_VOCAB};
pub use ngram::{MaskedNgramModel, DEFAULT_ALPHA};
pub use query::MaskedQuery;
pub use vocab::Vocabulary;

/// Reserved mask sentinel. It is never a vocabulary symbol and never carries
/// probability mass.
pub const MASK: &str = "[MASK]";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("token {0:?} is not in the vocabulary")]
    UnknownToken(String),
    #[error("shape mismatch: expected {expected} tokens, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("conditioning context has zero probability")]
    UndefinedConditional,
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("malformed query: {0}")]
    InvalidQuery(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid joint table: {0}")]
    InvalidTable(String),
    #[error("input of {len} tokens exceeds the backend context of {max}")]
    ContextLength { len: usize, max: usize },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("server reported: {0}")]
    Server(String),
}

/// A masked-prediction backend.
///
/// Implementations are immutable after construction, so `predict_masked` can
/// be called from any number of threads at once.
pub trait ProbabilityModel: Send + Sync {
    /// One distribution per entry of `query.mask_positions`, in order.
    fn predict_masked(&self, query: &MaskedQuery) -> Result<Vec<TokenDistribution>, ModelError>;

    /// Stable description used in manifests and cache keys.
    fn identity(&self) -> String;

    /// Splits whitespace words into backend tokens. Whole-token backends map
    /// each word to exactly one token.
    fn tokenize(&self, words: &[String]) -> Result<SentenceTokens, ModelError> {
        Ok(SentenceTokens::from_words(words.to_vec()))
    }

    /// Longest token sequence the backend accepts, if bounded.
    fn max_tokens(&self) -> Option<usize> {
        None
    }
}

impl<M: ProbabilityModel + ?Sized> ProbabilityModel for &M {
    fn predict_masked(&self, query: &MaskedQuery) -> Result<Vec<TokenDistribution>, ModelError> {
        (**self).predict_masked(query)
    }
    fn identity(&self) -> String {
        (**self).identity()
    }
    fn tokenize(&self, words: &[String]) -> Result<SentenceTokens, ModelError> {
        (**self).tokenize(words)
    }
    fn max_tokens(&self) -> Option<usize> {
        (**self).max_tokens()
    }
}

impl<M: ProbabilityModel + ?Sized> ProbabilityModel for Box<M> {
    fn predict_masked(&self, query: &MaskedQuery) -> Result<Vec<TokenDistribution>, ModelError> {
        (**self).predict_masked(query)
    }
    fn identity(&self) -> String {
        (**self).identity()
    }
    fn tokenize(&self, words: &[String]) -> Result<SentenceTokens, ModelError> {
        (**self).tokenize(words)
    }
    fn max_tokens(&self) -> Option<usize> {
        (**self).max_tokens()
    }
}
