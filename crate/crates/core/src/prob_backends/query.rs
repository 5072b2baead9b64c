use super::{ModelError, MASK};

/// Token sequence with designated masked slots.
///
/// Fields are public so callers can express malformed queries; every backend
/// calls [`MaskedQuery::validate`] before answering.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskedQuery {
    pub tokens: Vec<String>,
    pub mask_positions: Vec<usize>,
}

impl MaskedQuery {
    pub fn new(tokens: Vec<String>, mask_positions: Vec<usize>) -> Result<Self, ModelError> {
        let q = MaskedQuery {
            tokens,
            mask_positions,
        };
        q.validate()?;
        Ok(q)
    }

    /// Masks are read off the sentinel positions in `tokens`.
    pub fn from_tokens<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let mask_positions = tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.as_str() == MASK)
            .map(|(i, _)| i)
            .collect();
        MaskedQuery {
            tokens,
            mask_positions,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.tokens.is_empty() {
            return Err(ModelError::InvalidQuery("empty token list".into()));
        }
        let mut previous: Option<usize> = None;
        for &pos in &self.mask_positions {
            if pos >= self.tokens.len() {
                return Err(ModelError::InvalidQuery(format!(
                    "mask position {pos} outside sequence of {}",
                    self.tokens.len()
                )));
            }
            if previous.is_some_and(|p| p >= pos) {
                return Err(ModelError::InvalidQuery(
                    "mask positions must be strictly increasing".into(),
                ));
            }
            if self.tokens[pos] != MASK {
                return Err(ModelError::InvalidQuery(format!(
                    "position {pos} holds {:?}, not {MASK}",
                    self.tokens[pos]
                )));
            }
            previous = Some(pos);
        }
        let masks = self.tokens.iter().filter(|t| t.as_str() == MASK).count();
        if masks != self.mask_positions.len() {
            return Err(ModelError::InvalidQuery(format!(
                "{MASK} appears at a position not listed in mask_positions"
            )));
        }
        Ok(())
    }

    pub fn is_masked(&self, position: usize) -> bool {
        self.tokens.get(position).is_some_and(|t| t == MASK)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_tokens_finds_masks() {
        let q = MaskedQuery::from_tokens(["a", MASK, "b", MASK]);
        assert_eq!(q.mask_positions, vec![1, 3]);
        q.validate().unwrap();
    }

    #[test]
    fn validation_errors() {
        let bad_order = MaskedQuery {
            tokens: vec![MASK.into(), MASK.into()],
            mask_positions: vec![1, 0],
        };
        assert!(bad_order.validate().is_err());
        let not_sentinel = MaskedQuery {
            tokens: vec!["a".into()],
            mask_positions: vec![0],
        };
        assert!(not_sentinel.validate().is_err());
        let unlisted = MaskedQuery {
            tokens: vec![MASK.into(), MASK.into()],
            mask_positions: vec![0],
        };
        assert!(unlisted.validate().is_err());
        assert!(MaskedQuery::new(vec![], vec![]).is_err());
    }
}
