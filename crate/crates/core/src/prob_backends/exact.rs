use std::collections::{BTreeSet, HashMap};

use super::{MaskedQuery, ModelError, ProbabilityModel, TokenDistribution, Vocabulary};

pub const MAX_EXACT_LENGTH: usize = 8;
pub const MAX_EXACT_VOCAB: usize = 8;

const TABLE_SUM_TOLERANCE: f64 = 1e-12;
const LOADED_SUM_TOLERANCE: f64 = 1e-6;

/// Explicit probability table over every sequence of a fixed length.
///
/// Sequences are indexed in base `vocab.size()` with position 0 as the most
/// significant digit. Conditionals and marginals are computed by enumerating
/// the table, so they are exactly consistent with it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactJointModel {
    vocab: Vocabulary,
    length: usize,
    table: Vec<f64>,
    strides: Vec<usize>,
}

impl ExactJointModel {
    pub fn new(vocab: Vocabulary, length: usize, table: Vec<f64>) -> Result<Self, ModelError> {
        check_shape(&vocab, length)?;
        let expected = vocab.size().pow(length as u32);
        if table.len() != expected {
            return Err(ModelError::InvalidTable(format!(
                "table has {} entries, expected {expected}",
                table.len()
            )));
        }
        if let Some(p) = table.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(ModelError::InvalidTable(format!("invalid probability {p}")));
        }
        let sum: f64 = table.iter().sum();
        if (sum - 1.0).abs() > TABLE_SUM_TOLERANCE {
            return Err(ModelError::InvalidTable(format!("table sums to {sum}")));
        }
        let v = vocab.size();
        let strides = (0..length)
            .map(|j| v.pow((length - 1 - j) as u32))
            .collect();
        Ok(ExactJointModel {
            vocab,
            length,
            table,
            strides,
        })
    }

    /// Normalizes arbitrary non-negative weights into a joint table.
    pub fn from_weights(
        vocab: Vocabulary,
        length: usize,
        weights: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(ModelError::InvalidTable(format!("invalid weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(ModelError::InvalidTable("weights sum to zero".into()));
        }
        let table = weights.into_iter().map(|w| w / total).collect();
        Self::new(vocab, length, table)
    }

    /// Builds a table by evaluating `weight` on every sequence.
    pub fn from_fn(
        vocab: Vocabulary,
        length: usize,
        mut weight: impl FnMut(&[usize]) -> f64,
    ) -> Result<Self, ModelError> {
        check_shape(&vocab, length)?;
        let v = vocab.size();
        let size = v.pow(length as u32);
        let mut seq = vec![0usize; length];
        let mut weights = Vec::with_capacity(size);
        for idx in 0..size {
            decode_into(idx, v, &mut seq);
            weights.push(weight(&seq));
        }
        Self::from_weights(vocab, length, weights)
    }

    /// Parses `sequence<TAB>probability` lines. Blank lines and `#` comments
    /// are ignored; unlisted sequences get probability zero. The vocabulary
    /// is the sorted set of tokens that appear.
    pub fn parse_table(text: &str) -> Result<Self, ModelError> {
        let mut rows: Vec<(Vec<String>, f64)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (seq, prob) = line.split_once('\t').ok_or_else(|| {
                ModelError::InvalidTable(format!(
                    "line {}: expected sequence<TAB>probability",
                    lineno + 1
                ))
            })?;
            let prob: f64 = prob.trim().parse().map_err(|_| {
                ModelError::InvalidTable(format!("line {}: bad probability {prob:?}", lineno + 1))
            })?;
            let tokens: Vec<String> = seq.split_whitespace().map(String::from).collect();
            rows.push((tokens, prob));
        }
        let sum: f64 = rows.iter().map(|(_, p)| p).sum();
        if (sum - 1.0).abs() > LOADED_SUM_TOLERANCE {
            return Err(ModelError::InvalidTable(format!(
                "probabilities sum to {sum}"
            )));
        }
        Self::from_rows(rows)
    }

    /// Empirical joint over equal-length sequences.
    pub fn from_sequences<S: AsRef<str>>(sequences: &[Vec<S>]) -> Result<Self, ModelError> {
        let rows = sequences
            .iter()
            .map(|s| (s.iter().map(|t| t.as_ref().to_string()).collect(), 1.0))
            .collect::<Vec<_>>();
        let mut merged: HashMap<Vec<String>, f64> = HashMap::new();
        for (seq, w) in rows {
            *merged.entry(seq).or_default() += w;
        }
        let mut rows: Vec<_> = merged.into_iter().collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        Self::from_rows(rows)
    }

    /// Parses whitespace-separated sequences, one per line.
    pub fn parse_sequences(text: &str) -> Result<Self, ModelError> {
        let seqs: Vec<Vec<&str>> = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|l| l.split_whitespace().collect())
            .collect();
        if seqs.is_empty() {
            return Err(ModelError::InvalidTable("no sequences".into()));
        }
        Self::from_sequences(&seqs)
    }

    fn from_rows(rows: Vec<(Vec<String>, f64)>) -> Result<Self, ModelError> {
        let length = rows
            .first()
            .map(|(s, _)| s.len())
            .ok_or_else(|| ModelError::InvalidTable("no rows".into()))?;
        let symbols: BTreeSet<&str> = rows
            .iter()
            .flat_map(|(s, _)| s.iter().map(String::as_str))
            .collect();
        let vocab = Vocabulary::new(symbols)?;
        check_shape(&vocab, length)?;
        let mut weights = vec![0.0; vocab.size().pow(length as u32)];
        let mut seen = vec![false; weights.len()];
        for (seq, p) in &rows {
            if seq.len() != length {
                return Err(ModelError::Shape {
                    expected: length,
                    got: seq.len(),
                });
            }
            let idx = encode_index(&vocab.encode(seq)?, vocab.size());
            if std::mem::replace(&mut seen[idx], true) {
                return Err(ModelError::InvalidTable(format!(
                    "sequence {:?} listed twice",
                    seq.join(" ")
                )));
            }
            weights[idx] = *p;
        }
        Self::from_weights(vocab, length, weights)
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.size()
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn sequence_index(&self, seq: &[usize]) -> usize {
        seq.iter().zip(&self.strides).map(|(t, s)| t * s).sum()
    }

    pub fn decode_index(&self, index: usize) -> Vec<usize> {
        let mut seq = vec![0; self.length];
        decode_into(index, self.vocab.size(), &mut seq);
        seq
    }

    pub fn probability(&self, seq: &[usize]) -> f64 {
        self.table[self.sequence_index(seq)]
    }

    /// Total probability of all sequences matching `pattern`, where `None`
    /// is a wildcard. Patterns shorter than the model length are padded with
    /// wildcards.
    pub fn mass(&self, pattern: &[Option<usize>]) -> f64 {
        let mut total = 0.0;
        self.for_each_completion(pattern, |idx, _| total += self.table[idx]);
        total
    }

    /// Calls `visit(index, wildcard_values)` for every sequence matching
    /// `pattern`, in increasing table order.
    pub(crate) fn for_each_completion(
        &self,
        pattern: &[Option<usize>],
        mut visit: impl FnMut(usize, &[usize]),
    ) {
        let v = self.vocab.size();
        let mut base = 0;
        let mut wild: Vec<usize> = Vec::new();
        for j in 0..self.length {
            match pattern.get(j).copied().flatten() {
                Some(t) => base += t * self.strides[j],
                None => wild.push(j),
            }
        }
        let mut values = vec![0usize; wild.len()];
        loop {
            let idx = base
                + wild
                    .iter()
                    .zip(&values)
                    .map(|(j, t)| t * self.strides[*j])
                    .sum::<usize>();
            visit(idx, &values);
            // odometer with the last wildcard as the fastest digit
            let mut d = values.len();
            loop {
                if d == 0 {
                    return;
                }
                d -= 1;
                values[d] += 1;
                if values[d] < v {
                    break;
                }
                values[d] = 0;
            }
        }
    }

    /// `P(future | prefix)` on vocabulary indices.
    pub fn future_prob(&self, prefix: &[usize], future: &[usize]) -> Result<f64, ModelError> {
        if prefix.len() + future.len() != self.length {
            return Err(ModelError::Shape {
                expected: self.length,
                got: prefix.len() + future.len(),
            });
        }
        let prefix_pattern: Vec<Option<usize>> = prefix.iter().copied().map(Some).collect();
        let denom = self.mass(&prefix_pattern);
        if denom <= 0.0 {
            return Err(ModelError::UndefinedConditional);
        }
        let full: Vec<usize> = prefix.iter().chain(future).copied().collect();
        Ok(self.probability(&full) / denom)
    }

    /// `P(future | prefix)` on token strings.
    pub fn joint_future_prob<S: AsRef<str>>(
        &self,
        prefix: &[S],
        future: &[S],
    ) -> Result<f64, ModelError> {
        self.future_prob(&self.vocab.encode(prefix)?, &self.vocab.encode(future)?)
    }

    fn table_hash(&self) -> u64 {
        // FNV-1a over the vocabulary and the table bits
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for s in self.vocab.symbols() {
            eat(s.as_bytes());
            eat(&[0]);
        }
        for p in &self.table {
            eat(&p.to_bits().to_le_bytes());
        }
        h
    }
}

impl ProbabilityModel for ExactJointModel {
    fn predict_masked(&self, query: &MaskedQuery) -> Result<Vec<TokenDistribution>, ModelError> {
        query.validate()?;
        if query.tokens.len() != self.length {
            return Err(ModelError::Shape {
                expected: self.length,
                got: query.tokens.len(),
            });
        }
        let mut pattern = Vec::with_capacity(self.length);
        for (pos, tok) in query.tokens.iter().enumerate() {
            pattern.push(if query.is_masked(pos) {
                None
            } else {
                Some(self.vocab.index_of(tok)?)
            });
        }
        let v = self.vocab.size();
        let slots = query.mask_positions.len();
        let mut marginals = vec![vec![0.0; v]; slots];
        let mut total = 0.0;
        self.for_each_completion(&pattern, |idx, values| {
            let p = self.table[idx];
            total += p;
            for (slot, value) in values.iter().enumerate() {
                marginals[slot][*value] += p;
            }
        });
        if total <= 0.0 {
            return Err(ModelError::UndefinedConditional);
        }
        marginals
            .into_iter()
            .map(|m| {
                let probs: Vec<f64> = m.into_iter().map(|p| p / total).collect();
                TokenDistribution::from_probs(&probs)
            })
            .collect()
    }

    fn identity(&self) -> String {
        format!(
            "exact:n={},v={},table={:016x}",
            self.length,
            self.vocab.size(),
            self.table_hash()
        )
    }
}

fn check_shape(vocab: &Vocabulary, length: usize) -> Result<(), ModelError> {
    if length == 0 || length > MAX_EXACT_LENGTH {
        return Err(ModelError::Parameter(format!(
            "exact joint length must be in 1..={MAX_EXACT_LENGTH}, got {length}"
        )));
    }
    if vocab.size() > MAX_EXACT_VOCAB {
        return Err(ModelError::Parameter(format!(
            "exact joint vocabulary must have at most {MAX_EXACT_VOCAB} symbols, got {}",
            vocab.size()
        )));
    }
    Ok(())
}

fn encode_index(seq: &[usize], v: usize) -> usize {
    seq.iter().fold(0, |acc, t| acc * v + t)
}

fn decode_into(mut index: usize, v: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = index % v;
        index /= v;
    }
}
