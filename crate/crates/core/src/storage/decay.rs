use serde::Serialize;

use super::{storage_profile, PotentialSource, ProfileFailure, SentenceTokens, StorageError};

pub const DEFAULT_DECAY_DISTANCE: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayBin {
    pub distance: usize,
    /// `None` when no pair in the corpus has this distance.
    pub mean: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayCurve {
    pub bins: Vec<DecayBin>,
    pub approximate: bool,
}

/// Mean predictive potential as a function of `d = k - i` for
/// `d in 1..=max_distance`, pooled over every pair of every sentence.
pub fn decay_curve<S: PotentialSource + ?Sized>(
    source: &S,
    corpus: &[SentenceTokens],
    max_distance: usize,
) -> Result<DecayCurve, ProfileFailure> {
    if corpus.is_empty() {
        return Err(ProfileFailure {
            partial: super::PredictivePotentialMatrix::new(0),
            error: StorageError::EmptyCorpus,
        });
    }
    let mut sums = vec![0.0; max_distance + 1];
    let mut counts = vec![0usize; max_distance + 1];
    let mut approximate = false;
    for sentence in corpus {
        let result = storage_profile(source, sentence, Some(max_distance))?;
        approximate |= result.matrix.approximate();
        for (i, k, bits) in result.matrix.entries() {
            sums[k - i] += bits;
            counts[k - i] += 1;
        }
    }
    let bins = (1..=max_distance)
        .map(|d| DecayBin {
            distance: d,
            mean: (counts[d] > 0).then(|| sums[d] / counts[d] as f64),
            count: counts[d],
        })
        .collect();
    Ok(DecayCurve { bins, approximate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob_backends::{ExactJointModel, Vocabulary};
    use crate::storage::ExactPotential;

    #[test]
    fn two_word_sentence_has_one_bin() {
        let m = ExactJointModel::parse_table("a a\t0.5\nb b\t0.5\n").unwrap();
        let curve = decay_curve(
            &ExactPotential::new(&m),
            &[SentenceTokens::from_text("a a")],
            3,
        )
        .unwrap();
        assert_eq!(curve.bins[0].count, 1);
        assert!((curve.bins[0].mean.unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(curve.bins[1].mean, None);
    }

    #[test]
    fn independent_joint_is_flat_zero() {
        let m = ExactJointModel::from_fn(Vocabulary::new(["a", "b"]).unwrap(), 4, |_| 1.0).unwrap();
        let corpus: Vec<_> = ["a b a b", "b b a a"]
            .iter()
            .map(|s| SentenceTokens::from_text(s))
            .collect();
        let curve = decay_curve(&ExactPotential::new(&m), &corpus, 3).unwrap();
        assert!(curve.bins.iter().all(|b| b.mean == Some(0.0)));
        assert_eq!(
            curve.bins.iter().map(|b| b.count).collect::<Vec<_>>(),
            vec![6, 4, 2]
        );
    }

    #[test]
    fn empty_corpus() {
        let m = ExactJointModel::parse_table("a\t1\n").unwrap();
        assert!(decay_curve(&ExactPotential::new(&m), &[], 3).is_err());
    }
}
