//! Storage cost for incremental sentence processing.
//!
//! Two measures of how much a comprehender must hold in memory while reading:
//!
//! * **information storage**, the summed predictive potential (a KL divergence,
//!   in bits) that every preceding word carries about the unseen rest of the
//!   sentence, estimated from a masked language model or computed exactly from
//!   a small joint distribution;
//! * **DLT storage**, the number of unseen tokens whose syntactic co-dependents
//!   have already been read, computed from CoNLL-U dependency trees.
//!
//! The [`eval`] module compares both measures against reading-time data with
//! cross-validated log-likelihood, sign-flip permutation tests and
//! Benjamini-Hochberg correction.

pub mod align;
pub mod dlt;
pub mod error;
pub mod eval;
pub mod lm_client;
pub mod prob_backends;
pub mod stimuli;
pub mod storage;
pub mod verify;

pub use error::{Error, ErrorKind};
pub use prob_backends::{
    ExactJointModel, MaskedNgramModel, MaskedQuery, ModelError, ProbabilityModel,
    TokenDistribution, Vocabulary, MASK,
};
pub use storage::{SentenceTokens, StorageProfile};
