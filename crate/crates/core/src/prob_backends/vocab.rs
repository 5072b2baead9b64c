use std::collections::HashMap;

use super::{ModelError, MASK};

/// Ordered set of distinct token strings with a bijective index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new<I, S>(symbols: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(ModelError::Parameter("vocabulary must not be empty".into()));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if s == MASK {
                return Err(ModelError::Parameter(format!("{MASK} is reserved")));
            }
            if index.insert(s.clone(), i).is_some() {
                return Err(ModelError::Parameter(format!("duplicate symbol {s:?}")));
            }
        }
        Ok(Vocabulary { symbols, index })
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> Option<&str> {
        self.symbols.get(index).map(String::as_str)
    }

    pub fn index_of(&self, token: &str) -> Result<usize, ModelError> {
        self.index
            .get(token)
            .copied()
            .ok_or_else(|| ModelError::UnknownToken(token.to_string()))
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<usize>, ModelError> {
        tokens.iter().map(|t| self.index_of(t.as_ref())).collect()
    }

    pub fn decode(&self, indices: &[usize]) -> Vec<String> {
        indices.iter().map(|&i| self.symbols[i].clone()).collect()
    }
}
