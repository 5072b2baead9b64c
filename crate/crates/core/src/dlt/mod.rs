//! Dependency-based (DLT-style) storage cost from CoNLL-U trees.
//!
//! At position `k` the cost is the number of unseen tokens `t > k` that
//! share a non-excluded head–dependent arc, in either direction, with some
//! token already read (`<= k`). Each unseen token counts once no matter how
//! many seen co-dependents it has.

mod conllu;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::align::{align_to_words, sum_by_word, AlignError};

pub use conllu::{
    parse_conllu, parse_conllu_str, write_conllu, DependencyTree, MultiwordToken, TreeToken,
};

/// Relations that never create a pending prediction.
pub const DEFAULT_EXCLUDED: [&str; 4] = ["punct", "root", "dep", "reparandum"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DltError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("sentence {sentence_id}: {message}")]
    InvalidTree {
        sentence_id: String,
        message: String,
    },
    #[error(transparent)]
    Alignment(#[from] AlignError),
}

/// Relation labels to ignore. A label matches if it equals an entry or its
/// universal part (before `:`) does, so `dep` also drops `dep:foo`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExclusionSet(BTreeSet<String>);

impl ExclusionSet {
    pub fn new<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ExclusionSet(labels.into_iter().map(Into::into).collect())
    }

    pub fn parse(list: &str) -> Self {
        Self::new(list.split(',').map(str::trim).filter(|s| !s.is_empty()))
    }

    pub fn excludes(&self, deprel: &str) -> bool {
        let universal = deprel.split(':').next().unwrap_or(deprel);
        self.0.contains(deprel) || self.0.contains(universal)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl Default for ExclusionSet {
    fn default() -> Self {
        Self::new(DEFAULT_EXCLUDED)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DltProfile {
    pub per_token: Vec<u32>,
}

impl DltProfile {
    pub fn total(&self) -> u64 {
        self.per_token.iter().map(|&c| c as u64).sum()
    }

    /// Sums counts within each whitespace word of `raw_text`.
    pub fn word_align<S: AsRef<str>>(
        &self,
        forms: &[S],
        raw_text: &str,
    ) -> Result<Vec<u32>, DltError> {
        let words = align_to_words(forms, raw_text)?;
        Ok(sum_by_word(&self.per_token, &words))
    }
}

/// Undirected token–token arcs (0-based) that survive the exclusion set.
fn kept_arcs<'a>(
    tree: &'a DependencyTree,
    excluded: &'a ExclusionSet,
) -> impl Iterator<Item = (usize, usize)> + 'a {
    tree.tokens
        .iter()
        .enumerate()
        .filter(move |(_, t)| t.head != 0 && !excluded.excludes(&t.deprel))
        .map(|(d, t)| (d, t.head - 1))
}

/// DLT storage cost per token.
///
/// A token with earliest co-dependent at position `u < t` is pending for
/// every `k` in `u..t`, so the profile is a sum of such intervals.
pub fn dlt_storage(tree: &DependencyTree, excluded: &ExclusionSet) -> DltProfile {
    let n = tree.tokens.len();
    let mut earliest: Vec<Option<usize>> = vec![None; n];
    for (a, b) in kept_arcs(tree, excluded) {
        let (early, late) = if a < b { (a, b) } else { (b, a) };
        let slot = &mut earliest[late];
        *slot = Some(slot.map_or(early, |e| e.min(early)));
    }
    let mut delta = vec![0i64; n + 1];
    for (t, e) in earliest.iter().enumerate() {
        if let Some(u) = e {
            delta[*u] += 1;
            delta[t] -= 1;
        }
    }
    let mut running = 0i64;
    let per_token = delta[..n]
        .iter()
        .map(|d| {
            running += d;
            running as u32
        })
        .collect();
    DltProfile { per_token }
}

/// TSV rows `sentence_id, token_index, form, dlt_storage` (1-based index).
pub fn token_tsv(trees: &[(DependencyTree, DltProfile)]) -> String {
    let mut out = String::from("sentence_id\ttoken_index\tform\tdlt_storage\n");
    for (tree, profile) in trees {
        for (idx, (tok, c)) in tree.tokens.iter().zip(&profile.per_token).enumerate() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                tree.sentence_id,
                idx + 1,
                tok.form,
                c
            );
        }
    }
    out
}

/// TSV rows `sentence_id, word_index, word, dlt_storage` over whitespace words.
pub fn word_tsv(trees: &[(DependencyTree, DltProfile)]) -> Result<String, DltError> {
    let mut out = String::from("sentence_id\tword_index\tword\tdlt_storage\n");
    for (tree, profile) in trees {
        let text = tree.surface_text();
        let counts = profile.word_align(&tree.forms(), &text)?;
        for (idx, (word, c)) in text.split_whitespace().zip(counts).enumerate() {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", tree.sentence_id, idx + 1, word, c);
        }
    }
    Ok(out)
}
