//! Exact predictive potentials on an explicit joint table.
//!
//! Sentences are vocabulary indices; only `sentence[..k]` is read when
//! evaluating position `k`. The future is always the rest of the sentence up
//! to the model length.

use serde::Serialize;

use super::{kl_bits_probs, Potential, PotentialSource, SentenceTokens, StorageError};
use crate::prob_backends::{ExactJointModel, ModelError};

fn check_pair(
    model: &ExactJointModel,
    sentence: &[usize],
    i: usize,
    k: usize,
) -> Result<(), StorageError> {
    let n = model.length();
    if !(i < k && k < n && sentence.len() >= k) {
        return Err(StorageError::InvalidPair { i, k, n });
    }
    Ok(())
}

fn context_pattern(sentence: &[usize], k: usize, drop: Option<usize>) -> Vec<Option<usize>> {
    sentence[..k]
        .iter()
        .enumerate()
        .map(|(j, &t)| if Some(j) == drop { None } else { Some(t) })
        .collect()
}

/// `log2 P(future | w_[0,k)) / P(future | w_[0,k) \ w_i)`.
///
/// Returns `-inf` for a future that is impossible given the full context.
pub fn contextualized_pmi_exact(
    model: &ExactJointModel,
    sentence: &[usize],
    i: usize,
    k: usize,
    future: &[usize],
) -> Result<f64, StorageError> {
    check_pair(model, sentence, i, k)?;
    if future.len() != model.length() - k {
        return Err(ModelError::Shape {
            expected: model.length() - k,
            got: future.len(),
        }
        .into());
    }
    let with = model.future_prob(&sentence[..k], future)?;

    let mut without_ctx = context_pattern(sentence, k, Some(i));
    let ctx_mass = model.mass(&without_ctx);
    if ctx_mass <= 0.0 {
        return Err(ModelError::UndefinedConditional.into());
    }
    without_ctx.extend(future.iter().copied().map(Some));
    let without = model.mass(&without_ctx) / ctx_mass;

    if with == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(with.log2() - without.log2())
}

/// Predictive potential as the expectation of contextualized PMI over every
/// future the full context allows.
pub fn predictive_potential_exact(
    model: &ExactJointModel,
    sentence: &[usize],
    i: usize,
    k: usize,
) -> Result<f64, StorageError> {
    check_pair(model, sentence, i, k)?;
    let v = model.vocab_size();
    let horizon = model.length() - k;
    let mut future = vec![0usize; horizon];
    let mut total = 0.0;
    for idx in 0..v.pow(horizon as u32) {
        let mut rem = idx;
        for slot in future.iter_mut().rev() {
            *slot = rem % v;
            rem /= v;
        }
        let p = model.future_prob(&sentence[..k], &future)?;
        if p > 0.0 {
            total += p * contextualized_pmi_exact(model, sentence, i, k, &future)?;
        }
    }
    Ok(total)
}

/// `P(w_[k,N) | pattern)` as a vector indexed by the future's base-V code.
fn future_distribution(
    model: &ExactJointModel,
    pattern: &[Option<usize>],
    k: usize,
) -> Result<Vec<f64>, StorageError> {
    let futures = model.vocab_size().pow((model.length() - k) as u32);
    let mut dist = vec![0.0; futures];
    let mut total = 0.0;
    model.for_each_completion(pattern, |idx, _| {
        let p = model.table()[idx];
        dist[idx % futures] += p;
        total += p;
    });
    if total <= 0.0 {
        return Err(ModelError::UndefinedConditional.into());
    }
    dist.iter_mut().for_each(|p| *p /= total);
    Ok(dist)
}

/// Predictive potential as the sequence-level KL divergence between the
/// future distributions with and without `w_i`.
pub fn predictive_potential_kl(
    model: &ExactJointModel,
    sentence: &[usize],
    i: usize,
    k: usize,
) -> Result<f64, StorageError> {
    check_pair(model, sentence, i, k)?;
    let with = future_distribution(model, &context_pattern(sentence, k, None), k)?;
    let without = future_distribution(model, &context_pattern(sentence, k, Some(i)), k)?;
    kl_bits_probs(&with, &without)
}

/// Chain-rule decomposition of `PP(i, k)` over the next word:
/// `PP(i,k) = KL(P(w_k | ctx) ‖ P(w_k | ctx \ i)) + E_{w_k}[PP(i, k+1)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainRuleReport {
    pub potential: f64,
    pub next_word_kl: f64,
    pub expected_next_potential: f64,
}

impl ChainRuleReport {
    pub fn residual(&self) -> f64 {
        self.potential - (self.next_word_kl + self.expected_next_potential)
    }

    pub fn holds(&self, tolerance: f64) -> bool {
        self.residual().abs() <= tolerance
    }

    /// Non-increase in expectation over the next word.
    pub fn decays(&self, tolerance: f64) -> bool {
        self.expected_next_potential <= self.potential + tolerance
    }
}

/// Requires `i < k < N - 1` so that position `k + 1` still has a future.
pub fn verify_chain_rule(
    model: &ExactJointModel,
    sentence: &[usize],
    i: usize,
    k: usize,
) -> Result<ChainRuleReport, StorageError> {
    let n = model.length();
    if k + 1 >= n {
        return Err(StorageError::InvalidPair { i, k, n });
    }
    check_pair(model, sentence, i, k)?;
    let v = model.vocab_size();
    let with_ctx = context_pattern(sentence, k, None);
    let without_ctx = context_pattern(sentence, k, Some(i));
    let with_mass = model.mass(&with_ctx);
    let without_mass = model.mass(&without_ctx);
    if with_mass <= 0.0 || without_mass <= 0.0 {
        return Err(ModelError::UndefinedConditional.into());
    }

    let mut next_with = vec![0.0; v];
    let mut next_without = vec![0.0; v];
    for w in 0..v {
        let mut a = with_ctx.clone();
        a.push(Some(w));
        next_with[w] = model.mass(&a) / with_mass;
        let mut b = without_ctx.clone();
        b.push(Some(w));
        next_without[w] = model.mass(&b) / without_mass;
    }
    let next_word_kl = kl_bits_probs(&next_with, &next_without)?;

    let mut extended = sentence[..k].to_vec();
    extended.push(0);
    let mut expected_next_potential = 0.0;
    for (w, &p) in next_with.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        extended[k] = w;
        expected_next_potential += p * predictive_potential_kl(model, &extended, i, k + 1)?;
    }

    Ok(ChainRuleReport {
        potential: predictive_potential_kl(model, sentence, i, k)?,
        next_word_kl,
        expected_next_potential,
    })
}

/// Exact potentials of a full-length sentence of vocabulary tokens.
pub struct ExactPotential<'a> {
    model: &'a ExactJointModel,
}

impl<'a> ExactPotential<'a> {
    pub fn new(model: &'a ExactJointModel) -> Self {
        ExactPotential { model }
    }
}

impl PotentialSource for ExactPotential<'_> {
    fn potentials_at(
        &self,
        sentence: &SentenceTokens,
        k: usize,
        targets: &[usize],
    ) -> Result<Vec<Potential>, StorageError> {
        if sentence.tokens.len() != sentence.words.len() {
            return Err(StorageError::Alignment(
                "exact potentials need one token per word".into(),
            ));
        }
        if sentence.len() != self.model.length() {
            return Err(ModelError::Shape {
                expected: self.model.length(),
                got: sentence.len(),
            }
            .into());
        }
        let encoded = self.model.vocabulary().encode(&sentence.words)?;
        targets
            .iter()
            .map(|&i| {
                let raw = predictive_potential_kl(self.model, &encoded, i, k)?;
                Ok(Potential::clamped(raw, false))
            })
            .collect()
    }

    fn identity(&self) -> String {
        use crate::prob_backends::ProbabilityModel;
        format!("exact-kl/{}", self.model.identity())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob_backends::Vocabulary;

    fn copy_joint() -> ExactJointModel {
        ExactJointModel::parse_table("a a\t0.5\nb b\t0.5\n").unwrap()
    }

    fn independent_uniform() -> ExactJointModel {
        ExactJointModel::from_fn(Vocabulary::new(["a", "b"]).unwrap(), 3, |_| 1.0).unwrap()
    }

    #[test]
    fn copy_joint_pmi_is_one_bit() {
        let m = copy_joint();
        let pmi = contextualized_pmi_exact(&m, &[0], 0, 1, &[0]).unwrap();
        assert!((pmi - 1.0).abs() < 1e-15);
        assert!((predictive_potential_exact(&m, &[0], 0, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!((predictive_potential_kl(&m, &[0], 0, 1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn impossible_future_has_negative_infinite_pmi() {
        let m = copy_joint();
        assert_eq!(
            contextualized_pmi_exact(&m, &[0], 0, 1, &[1]).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn independence_gives_zero() {
        let m = independent_uniform();
        for (i, k) in [(0, 1), (0, 2), (1, 2)] {
            assert_eq!(
                predictive_potential_exact(&m, &[0, 1, 0], i, k).unwrap(),
                0.0
            );
            assert_eq!(predictive_potential_kl(&m, &[0, 1, 0], i, k).unwrap(), 0.0);
        }
        assert_eq!(
            contextualized_pmi_exact(&m, &[1, 1, 0], 0, 1, &[1, 0]).unwrap(),
            0.0
        );
        let r = verify_chain_rule(&m, &[0, 1, 0], 0, 1).unwrap();
        assert_eq!(
            (r.potential, r.next_word_kl, r.expected_next_potential),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn copy_chain_rule() {
        // w1 copied into both later slots
        let m = ExactJointModel::parse_table("a a a\t0.5\nb b b\t0.5\n").unwrap();
        let r = verify_chain_rule(&m, &[0, 0, 0], 0, 1).unwrap();
        // w2 is known given w1, and once w2 is seen w1 adds nothing about w3
        assert!((r.potential - 1.0).abs() < 1e-15);
        assert!((r.next_word_kl - 1.0).abs() < 1e-15);
        assert!(r.expected_next_potential.abs() < 1e-15);
        assert!(r.holds(1e-12));
    }

    #[test]
    fn invalid_pairs() {
        let m = copy_joint();
        assert!(predictive_potential_kl(&m, &[0, 0], 1, 1).is_err());
        assert!(predictive_potential_kl(&m, &[0, 0], 0, 2).is_err());
        assert!(verify_chain_rule(&m, &[0, 0], 0, 1).is_err());
        assert!(contextualized_pmi_exact(&m, &[0], 0, 1, &[0, 0]).is_err());
    }

    #[test]
    fn zero_probability_context() {
        let m = copy_joint();
        // "b a" never occurs, but k=1 only conditions on "b"
        assert!(predictive_potential_kl(&m, &[1, 0], 0, 1).is_ok());
        let m3 = ExactJointModel::parse_table("a a a\t0.5\nb b b\t0.5\n").unwrap();
        assert!(matches!(
            predictive_potential_kl(&m3, &[0, 1, 0], 0, 2),
            Err(StorageError::Model(ModelError::UndefinedConditional))
        ));
    }
}
