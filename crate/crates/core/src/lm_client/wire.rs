//! Newline-delimited JSON messages exchanged with a masked-LM server.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::prob_backends::{LogBase, MaskedQuery, ModelError, TokenDistribution};
use crate::storage::SentenceTokens;

/// Tolerance on the total mass of each response slot.
pub const WIRE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub id: String,
    pub tokens: Vec<String>,
    pub mask_positions: Vec<usize>,
    pub top_k: Option<usize>,
}

impl WireRequest {
    pub fn new(id: String, query: &MaskedQuery, top_k: Option<usize>) -> Self {
        WireRequest {
            id,
            tokens: query.tokens.clone(),
            mask_positions: query.mask_positions.clone(),
            top_k,
        }
    }

    pub fn query(&self) -> MaskedQuery {
        MaskedQuery {
            tokens: self.tokens.clone(),
            mask_positions: self.mask_positions.clone(),
        }
    }
}

/// Word-splitting request; answered with tokens and per-word ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizeRequest {
    pub id: String,
    pub op: String,
    pub words: Vec<String>,
}

impl TokenizeRequest {
    pub fn new(id: String, words: &[String]) -> Self {
        TokenizeRequest {
            id,
            op: "tokenize".into(),
            words: words.to_vec(),
        }
    }
}

/// Any request a server may receive.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum IncomingRequest {
    Tokenize(TokenizeRequest),
    Predict(WireRequest),
}

/// Union of every response shape; which fields are set decides the kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<LogBase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_probs: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top: Option<Vec<Vec<(usize, f64)>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rest_mass: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl WireResponse {
    pub fn error(id: String, message: impl Into<String>) -> Self {
        WireResponse {
            id,
            error: Some(message.into()),
            ..Default::default()
        }
    }

    /// Encodes distributions as natural-log values, dense or top-k.
    pub fn from_distributions(
        id: String,
        dists: &[TokenDistribution],
        top_k: Option<usize>,
    ) -> Result<Self, ModelError> {
        let vocab_size = dists.first().map_or(0, TokenDistribution::vocab_size);
        let ln = |log2: f64| log2 * std::f64::consts::LN_2;
        let mut resp = WireResponse {
            id,
            vocab_size: Some(vocab_size),
            base: Some(LogBase::E),
            ..Default::default()
        };
        let listed: Vec<(Vec<(usize, f64)>, f64)> =
            dists.iter().map(TokenDistribution::listed_log2).collect();
        if listed
            .iter()
            .flat_map(|(e, _)| e)
            .any(|(_, v)| !v.is_finite())
        {
            return Err(ModelError::Data(
                "zero probabilities cannot be sent over the wire".into(),
            ));
        }
        match top_k {
            None => {
                if dists.iter().any(TokenDistribution::is_approximate) {
                    return Err(ModelError::Data(
                        "backend returned a truncated distribution".into(),
                    ));
                }
                resp.log_probs = Some(
                    listed
                        .iter()
                        .map(|(e, _)| e.iter().map(|(_, v)| ln(*v)).collect())
                        .collect(),
                );
            }
            Some(k) => {
                let mut top = Vec::with_capacity(dists.len());
                let mut rest = Vec::with_capacity(dists.len());
                for (mut entries, rest_mass) in listed {
                    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                    let omitted: f64 =
                        entries.iter().skip(k).map(|(_, v)| v.exp2()).sum::<f64>() + rest_mass;
                    entries.truncate(k);
                    top.push(entries.into_iter().map(|(i, v)| (i, ln(v))).collect());
                    rest.push(omitted);
                }
                resp.top = Some(top);
                resp.rest_mass = Some(rest);
            }
        }
        Ok(resp)
    }

    /// Decodes and validates a prediction response for `expected_slots`
    /// mask positions. Server errors and schema problems are reported, not
    /// repaired.
    pub fn into_distributions(
        self,
        expected_slots: usize,
    ) -> Result<Vec<TokenDistribution>, ModelError> {
        if let Some(e) = self.error {
            return Err(ModelError::Server(e));
        }
        let vocab_size = self
            .vocab_size
            .ok_or_else(|| ModelError::Protocol("response without vocab_size".into()))?;
        let base = self.base.unwrap_or(LogBase::E);
        let bad = |slot: usize, e: ModelError| ModelError::Data(format!("slot {slot}: {e}"));
        let finite = |slot: usize, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(ModelError::Data(format!(
                    "slot {slot}: non-finite log-probability"
                )))
            }
        };
        let dists: Vec<TokenDistribution> = match (self.log_probs, self.top, self.rest_mass) {
            (Some(rows), None, _) => rows
                .into_iter()
                .enumerate()
                .map(|(slot, row)| {
                    if row.len() != vocab_size {
                        return Err(ModelError::Data(format!(
                            "slot {slot}: {} log-probs for vocab_size {vocab_size}",
                            row.len()
                        )));
                    }
                    row.iter().try_for_each(|v| finite(slot, *v))?;
                    TokenDistribution::from_log_probs_with_tolerance(row, base, WIRE_TOLERANCE)
                        .map_err(|e| bad(slot, e))
                })
                .collect::<Result<_, _>>()?,
            (None, Some(top), Some(rest)) => {
                if top.len() != rest.len() {
                    return Err(ModelError::Protocol(format!(
                        "{} top lists, {} rest masses",
                        top.len(),
                        rest.len()
                    )));
                }
                top.into_iter()
                    .zip(rest)
                    .enumerate()
                    .map(|(slot, (entries, rest_mass))| {
                        entries.iter().try_for_each(|(_, v)| finite(slot, *v))?;
                        TokenDistribution::top_k(
                            vocab_size,
                            entries,
                            rest_mass,
                            base,
                            WIRE_TOLERANCE,
                        )
                        .map_err(|e| bad(slot, e))
                    })
                    .collect::<Result<_, _>>()?
            }
            (None, Some(_), None) => {
                return Err(ModelError::Protocol(
                    "top-k response without rest_mass".into(),
                ))
            }
            _ => {
                return Err(ModelError::Protocol(
                    "response needs exactly one of log_probs or top".into(),
                ))
            }
        };
        if dists.len() != expected_slots {
            return Err(ModelError::Protocol(format!(
                "{} slots returned for {expected_slots} mask positions",
                dists.len()
            )));
        }
        Ok(dists)
    }

    pub fn from_tokens(id: String, sentence: &SentenceTokens) -> Self {
        WireResponse {
            id,
            tokens: Some(sentence.tokens.clone()),
            alignment: Some(
                sentence
                    .word_to_tokens
                    .iter()
                    .map(|r| (r.start, r.end))
                    .collect(),
            ),
            ..Default::default()
        }
    }

    pub fn into_tokens(self, words: &[String]) -> Result<SentenceTokens, ModelError> {
        if let Some(e) = self.error {
            return Err(ModelError::Server(e));
        }
        let (tokens, alignment) = match (self.tokens, self.alignment) {
            (Some(t), Some(a)) => (t, a),
            _ => {
                return Err(ModelError::Protocol(
                    "tokenize response needs tokens and alignment".into(),
                ))
            }
        };
        let ranges: Vec<Range<usize>> = alignment.into_iter().map(|(s, e)| s..e).collect();
        SentenceTokens::new(words.to_vec(), tokens, ranges)
            .map_err(|e| ModelError::Data(e.to_string()))
    }
}
