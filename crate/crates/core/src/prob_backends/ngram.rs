use std::collections::BTreeSet;

use super::{
    LogBase, MaskedQuery, ModelError, ProbabilityModel, TokenDistribution, Vocabulary, MASK,
};

pub const DEFAULT_ALPHA: f64 = 0.5;

/// Count-based masked language model.
///
/// A masked slot is predicted from the corpus positions whose window of
/// `order - 1` tokens on each side agrees with the visible tokens of the
/// query window. Masked neighbours and positions beyond the sentence edge are
/// unobserved and match anything. When no corpus position matches, the
/// window radius shrinks by one until it does; radius zero is the unigram
/// distribution. Counts are add-α smoothed over the vocabulary, so every
/// returned probability is strictly positive.
#[derive(Debug, Clone)]
pub struct MaskedNgramModel {
    vocab: Vocabulary,
    order: usize,
    alpha: f64,
    corpus: Vec<Vec<usize>>,
    /// For each symbol, every `(sentence, position)` where it occurs.
    postings: Vec<Vec<(u32, u32)>>,
    unigram: Vec<u64>,
}

impl MaskedNgramModel {
    pub fn fit<S: AsRef<str>>(
        corpus: &[Vec<S>],
        order: usize,
        alpha: f64,
    ) -> Result<Self, ModelError> {
        if order < 1 {
            return Err(ModelError::Parameter(
                "n-gram order must be at least 1".into(),
            ));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(ModelError::Parameter(format!(
                "smoothing alpha must be positive, got {alpha}"
            )));
        }
        if corpus.iter().all(|s| s.is_empty()) {
            return Err(ModelError::Parameter("corpus is empty".into()));
        }
        if corpus.iter().flatten().any(|t| t.as_ref() == MASK) {
            return Err(ModelError::Parameter(format!("corpus contains {MASK}")));
        }
        let symbols: BTreeSet<&str> = corpus.iter().flatten().map(|t| t.as_ref()).collect();
        let vocab = Vocabulary::new(symbols)?;
        let encoded: Vec<Vec<usize>> = corpus
            .iter()
            .map(|s| vocab.encode(s))
            .collect::<Result<_, _>>()?;
        let mut postings = vec![Vec::new(); vocab.size()];
        let mut unigram = vec![0u64; vocab.size()];
        for (si, sent) in encoded.iter().enumerate() {
            for (pi, &t) in sent.iter().enumerate() {
                postings[t].push((si as u32, pi as u32));
                unigram[t] += 1;
            }
        }
        Ok(MaskedNgramModel {
            vocab,
            order,
            alpha,
            corpus: encoded,
            postings,
            unigram,
        })
    }

    /// Fits on whitespace-tokenized lines.
    pub fn fit_text(text: &str, order: usize, alpha: f64) -> Result<Self, ModelError> {
        let corpus: Vec<Vec<&str>> = text
            .lines()
            .map(|l| l.split_whitespace().collect::<Vec<_>>())
            .filter(|l| !l.is_empty())
            .collect();
        Self::fit(&corpus, order, alpha)
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Raw symbol counts behind the prediction at `slot`, plus the radius
    /// that produced a non-empty match set.
    fn slot_counts(&self, visible: &[Option<usize>], slot: usize) -> (Vec<u64>, usize) {
        let n = visible.len() as isize;
        for radius in (1..self.order).rev() {
            let r = radius as isize;
            let constraints: Vec<(isize, usize)> = (-r..=r)
                .filter(|&o| o != 0)
                .filter_map(|o| {
                    let p = slot as isize + o;
                    if p < 0 || p >= n {
                        return None;
                    }
                    visible[p as usize].map(|t| (o, t))
                })
                .collect();
            if constraints.is_empty() {
                continue;
            }
            // anchor on the rarest constraint
            let &(anchor_off, anchor_tok) = constraints
                .iter()
                .min_by_key(|(_, t)| self.postings[*t].len())
                .expect("nonempty");
            let mut counts = vec![0u64; self.vocab.size()];
            let mut matched = 0u64;
            for &(si, pi) in &self.postings[anchor_tok] {
                let sent = &self.corpus[si as usize];
                let center = pi as isize - anchor_off;
                if center < 0 || center >= sent.len() as isize {
                    continue;
                }
                let ok = constraints.iter().all(|&(o, t)| {
                    let p = center + o;
                    p >= 0 && (p as usize) < sent.len() && sent[p as usize] == t
                });
                if ok {
                    counts[sent[center as usize]] += 1;
                    matched += 1;
                }
            }
            if matched > 0 {
                return (counts, radius);
            }
        }
        (self.unigram.clone(), 0)
    }
}

impl ProbabilityModel for MaskedNgramModel {
    fn predict_masked(&self, query: &MaskedQuery) -> Result<Vec<TokenDistribution>, ModelError> {
        query.validate()?;
        let visible: Vec<Option<usize>> = query
            .tokens
            .iter()
            .enumerate()
            .map(|(pos, tok)| {
                if query.is_masked(pos) {
                    Ok(None)
                } else {
                    self.vocab.index_of(tok).map(Some)
                }
            })
            .collect::<Result<_, _>>()?;
        let v = self.vocab.size() as f64;
        query
            .mask_positions
            .iter()
            .map(|&slot| {
                let (counts, _) = self.slot_counts(&visible, slot);
                let total = counts.iter().sum::<u64>() as f64;
                let denom = (total + self.alpha * v).ln();
                let log_probs = counts
                    .iter()
                    .map(|&c| (c as f64 + self.alpha).ln() - denom)
                    .collect();
                TokenDistribution::from_log_probs(log_probs, LogBase::E)
            })
            .collect()
    }

    fn identity(&self) -> String {
        let tokens: usize = self.corpus.iter().map(Vec::len).sum();
        format!(
            "ngram:order={},alpha={},vocab={},tokens={},sentences={}",
            self.order,
            self.alpha,
            self.vocab.size(),
            tokens,
            self.corpus.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(model: &MaskedNgramModel, tokens: &[&str]) -> Vec<Vec<f64>> {
        model
            .predict_masked(&MaskedQuery::from_tokens(tokens.iter().copied()))
            .unwrap()
            .iter()
            .map(|d| d.probs().unwrap())
            .collect()
    }

    #[test]
    fn tiny_alpha_single_symbol() {
        let m = MaskedNgramModel::fit(&[vec!["a", "a"]], 1, 1e-9).unwrap();
        let p = probs(&m, &[MASK, MASK]);
        assert!(p.iter().all(|d| (d[0] - 1.0).abs() < 1e-9));
    }

    #[test]
    fn bigram_add_one() {
        let m = MaskedNgramModel::fit(&[vec!["a", "b"], vec!["a", "b"]], 2, 1.0).unwrap();
        let p = probs(&m, &["a", MASK]);
        // vocab order is sorted: a, b; counts after "a": b=2
        assert!((p[0][1] - 0.75).abs() < 1e-12);
        assert!((p[0][0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn empty_context_is_unigram() {
        let m = MaskedNgramModel::fit(&[vec!["a", "b", "b"]], 3, 0.5).unwrap();
        let p = probs(&m, &[MASK, MASK]);
        // unigram counts a=1 b=2, (c + 0.5) / (3 + 1)
        for d in &p {
            assert!((d[0] - 1.5 / 4.0).abs() < 1e-12);
            assert!((d[1] - 2.5 / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_neighbour_is_a_wildcard() {
        let corpus = vec![vec!["x", "a", "c"], vec!["y", "b", "d"]];
        let m = MaskedNgramModel::fit(&corpus, 3, 0.01).unwrap();
        // slot 2 sees "x" two positions back through a masked neighbour
        let p = probs(&m, &["x", MASK, MASK]);
        let c = m.vocabulary().index_of("c").unwrap();
        assert!(p[1][c] > 0.9);
    }

    #[test]
    fn backs_off_when_window_unseen() {
        let m = MaskedNgramModel::fit(&[vec!["a", "b"], vec!["c", "b"]], 2, 1.0).unwrap();
        // "b" never precedes anything, so the slot falls back to unigram
        let p = probs(&m, &["b", MASK]);
        let uni = probs(&m, &[MASK]);
        assert_eq!(p, uni);
    }

    #[test]
    fn errors() {
        assert!(MaskedNgramModel::fit(&[vec!["a"]], 0, 0.5).is_err());
        assert!(MaskedNgramModel::fit(&[vec!["a"]], 1, 0.0).is_err());
        assert!(MaskedNgramModel::fit::<&str>(&[vec![]], 1, 0.5).is_err());
        let m = MaskedNgramModel::fit(&[vec!["a"]], 2, 0.5).unwrap();
        assert!(matches!(
            m.predict_masked(&MaskedQuery::from_tokens(["q", MASK])),
            Err(ModelError::UnknownToken(_))
        ));
    }

    #[test]
    fn deterministic() {
        let m =
            MaskedNgramModel::fit_text("the cat sat\nthe dog sat\nthe cat ran\n", 2, 0.5).unwrap();
        let q = MaskedQuery::from_tokens(["the", MASK, MASK]);
        assert_eq!(m.predict_masked(&q).unwrap(), m.predict_masked(&q).unwrap());
    }
}
