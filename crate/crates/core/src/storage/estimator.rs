//! Conditional-independence estimator over masked-LM slot distributions.
//!
//! For a pair `(i, k)` two inputs are built from the same sentence: every
//! token of words `k..n` is replaced by a mask, and in the second input the
//! tokens of word `i` are masked as well. The estimate is
//! `Σ_m KL(q⁺_m ‖ q⁻_m)` over the future mask slots `m`.

use super::{kl_divergence_bits, Potential, PotentialSource, SentenceTokens, StorageError};
use crate::prob_backends::{MaskedQuery, ModelError, ProbabilityModel, MASK};

/// Input with the future from word `k` masked, and word `target` too if given.
pub fn masked_input(sentence: &SentenceTokens, target: Option<usize>, k: usize) -> MaskedQuery {
    let future_start = sentence.word_to_tokens[k].start;
    let target_range = target.map(|i| sentence.word_to_tokens[i].clone());
    let mut tokens = sentence.tokens.clone();
    let mut mask_positions = Vec::new();
    for (pos, tok) in tokens.iter_mut().enumerate() {
        let masked = pos >= future_start || target_range.as_ref().is_some_and(|r| r.contains(&pos));
        if masked {
            *tok = MASK.to_string();
            mask_positions.push(pos);
        }
    }
    MaskedQuery {
        tokens,
        mask_positions,
    }
}

fn check_context(
    model: &impl ProbabilityModel,
    sentence: &SentenceTokens,
) -> Result<(), StorageError> {
    if let Some(max) = model.max_tokens() {
        if sentence.tokens.len() > max {
            return Err(ModelError::ContextLength {
                len: sentence.tokens.len(),
                max,
            }
            .into());
        }
    }
    Ok(())
}

fn summed_kl(
    with: &[crate::TokenDistribution],
    without_future: &[crate::TokenDistribution],
) -> Result<Potential, StorageError> {
    if with.len() != without_future.len() {
        return Err(StorageError::Mismatch(format!(
            "{} future slots with target, {} without",
            with.len(),
            without_future.len()
        )));
    }
    let mut raw = 0.0;
    let mut approximate = false;
    for (p, q) in with.iter().zip(without_future) {
        raw += kl_divergence_bits(p, q)?;
        approximate |= p.is_approximate() || q.is_approximate();
    }
    Ok(Potential::clamped(raw, approximate))
}

/// Estimated predictive potential of word `i` at word position `k`.
pub fn predictive_potential_estimated<M: ProbabilityModel>(
    model: &M,
    sentence: &SentenceTokens,
    i: usize,
    k: usize,
) -> Result<Potential, StorageError> {
    IndependenceEstimator::new(model)
        .potentials_at(sentence, k, &[i])
        .map(|mut v| v.remove(0))
}

/// [`PotentialSource`] backed by any masked-prediction model.
pub struct IndependenceEstimator<M> {
    model: M,
}

impl<M: ProbabilityModel> IndependenceEstimator<M> {
    pub fn new(model: M) -> Self {
        IndependenceEstimator { model }
    }

    pub fn model(&self) -> &M {
        &self.model
    }
}

impl<M: ProbabilityModel> PotentialSource for IndependenceEstimator<M> {
    fn potentials_at(
        &self,
        sentence: &SentenceTokens,
        k: usize,
        targets: &[usize],
    ) -> Result<Vec<Potential>, StorageError> {
        let n = sentence.len();
        if let Some(&i) = targets.iter().find(|&&i| !(i < k && k < n)) {
            return Err(StorageError::InvalidPair { i, k, n });
        }
        if targets.is_empty() {
            return Ok(Vec::new());
        }
        check_context(&self.model, sentence)?;
        let with = self
            .model
            .predict_masked(&masked_input(sentence, None, k))?;
        targets
            .iter()
            .map(|&i| {
                let without = self
                    .model
                    .predict_masked(&masked_input(sentence, Some(i), k))?;
                let target_tokens = sentence.word_to_tokens[i].len();
                let future = without.get(target_tokens..).unwrap_or(&[]);
                summed_kl(&with, future)
            })
            .collect()
    }

    fn identity(&self) -> String {
        format!("independence/{}", self.model.identity())
    }

    fn tokenize(&self, words: &[String]) -> Result<SentenceTokens, StorageError> {
        Ok(self.model.tokenize(words)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob_backends::{ExactJointModel, TokenDistribution, Vocabulary};
    use crate::storage::predictive_potential_kl;

    /// Ignores context entirely.
    struct Flat;

    impl ProbabilityModel for Flat {
        fn predict_masked(&self, q: &MaskedQuery) -> Result<Vec<TokenDistribution>, ModelError> {
            q.validate()?;
            Ok(q.mask_positions
                .iter()
                .map(|_| TokenDistribution::from_probs(&[0.3, 0.7]).unwrap())
                .collect())
        }
        fn identity(&self) -> String {
            "flat".into()
        }
        fn max_tokens(&self) -> Option<usize> {
            Some(5)
        }
    }

    #[test]
    fn masked_inputs_cover_subwords() {
        let s = SentenceTokens::new(
            vec!["un".into(), "believable".into(), "tale".into()],
            vec!["un".into(), "believ".into(), "##able".into(), "tale".into()],
            vec![0..1, 1..3, 3..4],
        )
        .unwrap();
        let plus = masked_input(&s, None, 2);
        assert_eq!(plus.mask_positions, vec![3]);
        let minus = masked_input(&s, Some(1), 2);
        assert_eq!(minus.mask_positions, vec![1, 2, 3]);
        minus.validate().unwrap();
        let minus0 = masked_input(&s, Some(0), 1);
        assert_eq!(minus0.tokens, vec![MASK, MASK, MASK, MASK]);
    }

    #[test]
    fn context_free_backend_gives_zero() {
        let s = SentenceTokens::from_text("a b c d");
        for k in 1..4 {
            for i in 0..k {
                let p = predictive_potential_estimated(&Flat, &s, i, k).unwrap();
                assert_eq!(p.bits, 0.0);
            }
        }
    }

    #[test]
    fn context_length_guard() {
        let s = SentenceTokens::from_text("a b c d e f");
        assert!(matches!(
            predictive_potential_estimated(&Flat, &s, 0, 1),
            Err(StorageError::Model(ModelError::ContextLength {
                len: 6,
                max: 5
            }))
        ));
    }

    #[test]
    fn single_future_slot_is_exact() {
        // with one future word the product assumption is vacuous
        let m = ExactJointModel::from_fn(Vocabulary::new(["a", "b", "c"]).unwrap(), 3, |s| {
            1.0 + (s[0] * 3 + s[1] * 2 + s[2] * s[0]) as f64
        })
        .unwrap();
        let s = SentenceTokens::from_text("a c b");
        for i in 0..2 {
            let est = predictive_potential_estimated(&m, &s, i, 2).unwrap();
            let exact = predictive_potential_kl(&m, &[0, 2, 1], i, 2).unwrap();
            assert!((est.raw - exact).abs() < 1e-12);
        }
    }
}
