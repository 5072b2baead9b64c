use serde::{Deserialize, Serialize};

use super::ModelError;

/// Default tolerance on `|sum(p) - 1|` for internally produced distributions.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Logarithm base of stored log-probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogBase {
    #[serde(rename = "e")]
    E,
    #[serde(rename = "2")]
    Two,
}

impl LogBase {
    fn to_log2_factor(self) -> f64 {
        match self {
            LogBase::E => std::f64::consts::LOG2_E,
            LogBase::Two => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    /// Log-probability of every vocabulary entry.
    Dense(Vec<f64>),
    /// Only the listed `(index, log_prob)` entries are known; everything else
    /// is lumped into a single REST bucket of probability `rest_mass`.
    TopK {
        vocab_size: usize,
        entries: Vec<(usize, f64)>,
        rest_mass: f64,
    },
}

/// Categorical distribution over a vocabulary, stored as log-probabilities
/// with an explicit base tag.
///
/// Entries may be `-inf` only for backends that can produce exact zeros (the
/// joint-table oracle). Smoothed and server backends are zero-free.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    base: LogBase,
    support: Support,
}

fn check_log_prob(lp: f64) -> Result<(), ModelError> {
    if lp.is_nan() || lp == f64::INFINITY || lp > 1e-9 {
        return Err(ModelError::InvalidDistribution(format!(
            "log-probability {lp} is not a valid log of a probability"
        )));
    }
    Ok(())
}

fn check_sum(sum: f64, tolerance: f64) -> Result<(), ModelError> {
    if (sum - 1.0).abs() > tolerance {
        return Err(ModelError::InvalidDistribution(format!(
            "probabilities sum to {sum}, outside 1±{tolerance}"
        )));
    }
    Ok(())
}

impl TokenDistribution {
    pub fn from_log_probs(log_probs: Vec<f64>, base: LogBase) -> Result<Self, ModelError> {
        Self::from_log_probs_with_tolerance(log_probs, base, NORMALIZATION_TOLERANCE)
    }

    pub fn from_log_probs_with_tolerance(
        log_probs: Vec<f64>,
        base: LogBase,
        tolerance: f64,
    ) -> Result<Self, ModelError> {
        if log_probs.is_empty() {
            return Err(ModelError::InvalidDistribution("empty distribution".into()));
        }
        let mut sum = 0.0;
        for &lp in &log_probs {
            check_log_prob(lp)?;
            sum += (lp * base.to_log2_factor()).exp2();
        }
        check_sum(sum, tolerance)?;
        Ok(TokenDistribution {
            base,
            support: Support::Dense(log_probs),
        })
    }

    /// Builds a base-2 distribution from plain probabilities.
    pub fn from_probs(probs: &[f64]) -> Result<Self, ModelError> {
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(ModelError::InvalidDistribution(format!("probability {p}")));
        }
        Self::from_log_probs(probs.iter().map(|p| p.log2()).collect(), LogBase::Two)
    }

    pub fn top_k(
        vocab_size: usize,
        entries: Vec<(usize, f64)>,
        rest_mass: f64,
        base: LogBase,
        tolerance: f64,
    ) -> Result<Self, ModelError> {
        if !(0.0..=1.0 + tolerance).contains(&rest_mass) || rest_mass.is_nan() {
            return Err(ModelError::InvalidDistribution(format!(
                "rest mass {rest_mass} outside [0, 1]"
            )));
        }
        let mut seen = std::collections::HashSet::new();
        let mut sum = rest_mass;
        for &(index, lp) in &entries {
            if index >= vocab_size {
                return Err(ModelError::InvalidDistribution(format!(
                    "top-k index {index} outside vocabulary of {vocab_size}"
                )));
            }
            if !seen.insert(index) {
                return Err(ModelError::InvalidDistribution(format!(
                    "top-k index {index} listed twice"
                )));
            }
            check_log_prob(lp)?;
            sum += (lp * base.to_log2_factor()).exp2();
        }
        check_sum(sum, tolerance)?;
        Ok(TokenDistribution {
            base,
            support: Support::TopK {
                vocab_size,
                entries,
                rest_mass,
            },
        })
    }

    pub fn base(&self) -> LogBase {
        self.base
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn vocab_size(&self) -> usize {
        match &self.support {
            Support::Dense(lp) => lp.len(),
            Support::TopK { vocab_size, .. } => *vocab_size,
        }
    }

    /// True when the tail has been lumped into a REST bucket.
    pub fn is_approximate(&self) -> bool {
        matches!(self.support, Support::TopK { .. })
    }

    /// Log2-probability of vocabulary entry `index`, when known.
    pub fn log2_prob(&self, index: usize) -> Option<f64> {
        let factor = self.base.to_log2_factor();
        match &self.support {
            Support::Dense(lp) => lp.get(index).map(|v| v * factor),
            Support::TopK { entries, .. } => entries
                .iter()
                .find(|(i, _)| *i == index)
                .map(|(_, v)| v * factor),
        }
    }

    pub fn prob(&self, index: usize) -> Option<f64> {
        self.log2_prob(index).map(f64::exp2)
    }

    /// Dense probability vector; `None` for truncated distributions.
    pub fn probs(&self) -> Option<Vec<f64>> {
        match &self.support {
            Support::Dense(lp) => {
                let factor = self.base.to_log2_factor();
                Some(lp.iter().map(|v| (v * factor).exp2()).collect())
            }
            Support::TopK { .. } => None,
        }
    }

    /// Listed entries as `(index, log2_prob)` plus the REST probability
    /// (zero for dense distributions).
    pub fn listed_log2(&self) -> (Vec<(usize, f64)>, f64) {
        let factor = self.base.to_log2_factor();
        match &self.support {
            Support::Dense(lp) => (
                lp.iter()
                    .enumerate()
                    .map(|(i, v)| (i, v * factor))
                    .collect(),
                0.0,
            ),
            Support::TopK {
                entries, rest_mass, ..
            } => (
                entries.iter().map(|(i, v)| (*i, v * factor)).collect(),
                *rest_mass,
            ),
        }
    }

    pub fn to_base2(&self) -> TokenDistribution {
        if self.base == LogBase::Two {
            return self.clone();
        }
        let factor = self.base.to_log2_factor();
        let support = match &self.support {
            Support::Dense(lp) => Support::Dense(lp.iter().map(|v| v * factor).collect()),
            Support::TopK {
                vocab_size,
                entries,
                rest_mass,
            } => Support::TopK {
                vocab_size: *vocab_size,
                entries: entries.iter().map(|(i, v)| (*i, v * factor)).collect(),
                rest_mass: *rest_mass,
            },
        };
        TokenDistribution {
            base: LogBase::Two,
            support,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_roundtrip_between_bases() {
        let d = TokenDistribution::from_log_probs(vec![0.25f64.ln(), 0.75f64.ln()], LogBase::E)
            .unwrap();
        let d2 = d.to_base2();
        assert_eq!(d2.base(), LogBase::Two);
        assert!((d2.prob(1).unwrap() - 0.75).abs() < 1e-15);
        assert!((d.prob(0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(TokenDistribution::from_probs(&[0.5, 0.4]).is_err());
        assert!(TokenDistribution::from_probs(&[0.5, f64::NAN]).is_err());
        assert!(TokenDistribution::from_probs(&[1.5, -0.5]).is_err());
        assert!(TokenDistribution::from_log_probs(vec![], LogBase::Two).is_err());
    }

    #[test]
    fn exact_zero_is_representable() {
        let d = TokenDistribution::from_probs(&[1.0, 0.0]).unwrap();
        assert_eq!(d.log2_prob(1), Some(f64::NEG_INFINITY));
    }

    #[test]
    fn top_k_mass_accounting() {
        let d = TokenDistribution::top_k(
            10,
            vec![(3, 0.5f64.ln()), (1, 0.2f64.ln()), (7, 0.1f64.ln())],
            0.2,
            LogBase::E,
            1e-4,
        )
        .unwrap();
        assert!(d.is_approximate());
        assert_eq!(d.vocab_size(), 10);
        assert!(d.prob(2).is_none());
        assert!(
            TokenDistribution::top_k(10, vec![(3, 0.5f64.ln())], 0.2, LogBase::E, 1e-4).is_err()
        );
        assert!(TokenDistribution::top_k(2, vec![(3, 0.0)], 0.0, LogBase::E, 1e-4).is_err());
    }
}
