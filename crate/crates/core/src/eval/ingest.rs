//! Per-participant reading measurements to per-word mean reading times.
//!
//! Filters apply in three stages: participants, then individual trials,
//! then words. Surviving trials are averaged per word.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{EvalError, PredictorTable};

/// One measurement of one word by one participant.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMeasurement {
    pub participant: String,
    pub text_id: String,
    pub sentence_id: String,
    pub word_index: i64,
    pub word: String,
    pub rt: f64,
    /// Comprehension accuracy of the participant, in `[0, 1]`.
    pub accuracy: Option<f64>,
    pub practice: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Inclusive bounds; values equal to a bound are kept.
    pub rt_min: Option<f64>,
    pub rt_max: Option<f64>,
    /// Participants strictly below this accuracy are dropped.
    pub min_accuracy: Option<f64>,
    pub drop_practice: bool,
    pub exclude_sentence_edges: bool,
    pub exclude_punctuation: bool,
}

impl FilterConfig {
    /// Self-paced reading: 100 to 3000 ms, at least 5 of 6 questions right.
    pub fn spr() -> Self {
        FilterConfig {
            rt_min: Some(100.0),
            rt_max: Some(3000.0),
            min_accuracy: Some(5.0 / 6.0),
            drop_practice: false,
            exclude_sentence_edges: true,
            exclude_punctuation: true,
        }
    }

    /// A-maze: participants under 80% accuracy are dropped.
    pub fn maze() -> Self {
        FilterConfig {
            rt_min: None,
            rt_max: None,
            min_accuracy: Some(0.8),
            drop_practice: false,
            exclude_sentence_edges: true,
            exclude_punctuation: true,
        }
    }

    /// Eye-tracking: durations within 0 to 2000 ms, practice trials removed.
    pub fn eye_tracking() -> Self {
        FilterConfig {
            rt_min: Some(0.0),
            rt_max: Some(2000.0),
            min_accuracy: None,
            drop_practice: true,
            exclude_sentence_edges: true,
            exclude_punctuation: true,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "spr" => Some(Self::spr()),
            "maze" | "a-maze" => Some(Self::maze()),
            "eye" | "onestop" | "eye-tracking" => Some(Self::eye_tracking()),
            _ => None,
        }
    }

    fn keeps_rt(&self, rt: f64) -> bool {
        rt.is_finite()
            && self.rt_min.is_none_or(|lo| rt >= lo)
            && self.rt_max.is_none_or(|hi| rt <= hi)
    }
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self::spr()
    }
}

pub fn contains_punctuation(word: &str) -> bool {
    word.chars().any(|c| {
        c.is_ascii_punctuation()
            || matches!(
                c,
                '\u{2018}'
                    | '\u{2019}'
                    | '\u{201C}'
                    | '\u{201D}'
                    | '\u{2013}'
                    | '\u{2014}'
                    | '\u{2026}'
                    | '\u{00AB}'
                    | '\u{00BB}'
            )
    })
}

const ACCURACY_SLACK: f64 = 1e-9;

/// Reads the raw TSV. Required columns: `participant`, `text_id`,
/// `sentence_id`, `word_index`, `word`, `rt`. Optional: `accuracy`,
/// `practice` (0/1).
pub fn parse_raw_tsv(text: &str) -> Result<Vec<RawMeasurement>, EvalError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or(EvalError::EmptyInput)?;
    let names: Vec<&str> = header.split('\t').map(str::trim).collect();
    let find = |n: &str| names.iter().position(|h| *h == n);
    let need = |n: &str| find(n).ok_or_else(|| EvalError::MissingColumn(n.to_string()));
    let (p, t, s, w, word, rt) = (
        need("participant")?,
        need("text_id")?,
        need("sentence_id")?,
        need("word_index")?,
        need("word")?,
        need("rt")?,
    );
    let acc = find("accuracy");
    let practice = find("practice");
    lines
        .map(|(idx, line)| {
            let err = |message: String| EvalError::Parse {
                line: idx + 1,
                message,
            };
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != names.len() {
                return Err(err(format!(
                    "{} cells, header has {}",
                    cells.len(),
                    names.len()
                )));
            }
            let num = |c: usize| -> Result<f64, EvalError> {
                cells[c]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| err(format!("not a number: {:?}", cells[c])))
            };
            Ok(RawMeasurement {
                participant: cells[p].to_string(),
                text_id: cells[t].to_string(),
                sentence_id: cells[s].to_string(),
                word_index: cells[w]
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad word_index {:?}", cells[w])))?,
                word: cells[word].to_string(),
                rt: num(rt)?,
                accuracy: acc.map(num).transpose()?,
                practice: practice
                    .is_some_and(|c| matches!(cells[c].trim(), "1" | "true" | "TRUE")),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestSummary {
    pub participants_dropped: usize,
    pub trials_dropped: usize,
    pub words_excluded: usize,
}

/// Fills `rt_target` of `predictors` with the per-word mean over surviving
/// measurements and marks excluded words unusable. Words without any
/// surviving measurement get a missing target.
pub fn ingest_reading_data(
    raw: &[RawMeasurement],
    predictors: &PredictorTable,
    config: &FilterConfig,
) -> Result<(PredictorTable, IngestSummary), EvalError> {
    let mut summary = IngestSummary::default();

    let mut accuracy: BTreeMap<&str, f64> = BTreeMap::new();
    for m in raw {
        if let Some(a) = m.accuracy {
            accuracy.entry(&m.participant).or_insert(a);
        }
    }
    let dropped: BTreeSet<&str> = match config.min_accuracy {
        Some(min) => {
            if raw.iter().any(|m| m.accuracy.is_none()) {
                return Err(EvalError::MissingColumn("accuracy".into()));
            }
            accuracy
                .iter()
                .filter(|(_, a)| **a + ACCURACY_SLACK < min)
                .map(|(p, _)| *p)
                .collect()
        }
        None => BTreeSet::new(),
    };
    summary.participants_dropped = dropped.len();

    // sentence extents over all words seen in the raw data
    let mut extent: BTreeMap<(&str, &str), (i64, i64)> = BTreeMap::new();
    let mut sentence_of: BTreeMap<(&str, i64), &str> = BTreeMap::new();
    let mut word_of: BTreeMap<(&str, i64), &str> = BTreeMap::new();
    for m in raw {
        let e = extent
            .entry((&m.text_id, &m.sentence_id))
            .or_insert((m.word_index, m.word_index));
        e.0 = e.0.min(m.word_index);
        e.1 = e.1.max(m.word_index);
        sentence_of.insert((&m.text_id, m.word_index), &m.sentence_id);
        word_of.insert((&m.text_id, m.word_index), &m.word);
    }

    let mut sums: BTreeMap<(&str, i64), (f64, usize)> = BTreeMap::new();
    for m in raw {
        if dropped.contains(m.participant.as_str()) {
            continue;
        }
        if (config.drop_practice && m.practice) || !config.keeps_rt(m.rt) {
            summary.trials_dropped += 1;
            continue;
        }
        let e = sums.entry((&m.text_id, m.word_index)).or_insert((0.0, 0));
        e.0 += m.rt;
        e.1 += 1;
    }

    let mut table = predictors.clone();
    for r in 0..table.len() {
        let key = (table.text_id[r].as_str(), table.word_index[r]);
        table.rt_target[r] = sums.get(&key).map_or(f64::NAN, |(s, c)| s / *c as f64);
        let word = word_of
            .get(&key)
            .copied()
            .unwrap_or(table.word[r].as_str())
            .to_string();
        if table.word[r].is_empty() {
            table.word[r] = word.clone();
        }
        let edge = config.exclude_sentence_edges
            && sentence_of.get(&key).is_some_and(|s| {
                let (lo, hi) = extent[&(key.0, *s)];
                key.1 == lo || key.1 == hi
            });
        let punct = config.exclude_punctuation && contains_punctuation(&word);
        if edge || punct {
            summary.words_excluded += usize::from(table.usable[r]);
            table.usable[r] = false;
        }
    }
    Ok((table, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(p: &str, idx: i64, word: &str, rt: f64, acc: f64) -> RawMeasurement {
        RawMeasurement {
            participant: p.into(),
            text_id: "t".into(),
            sentence_id: "s1".into(),
            word_index: idx,
            word: word.into(),
            rt,
            accuracy: Some(acc),
            practice: false,
        }
    }

    fn words(n: i64) -> PredictorTable {
        PredictorTable::new(vec!["t".into(); n as usize], (1..=n).collect())
    }

    #[test]
    fn mean_over_participants() {
        let raw = vec![m("a", 2, "dog", 300.0, 1.0), m("b", 2, "dog", 500.0, 1.0)];
        let (t, _) = ingest_reading_data(&raw, &words(3), &FilterConfig::spr()).unwrap();
        assert_eq!(t.rt_target[1], 400.0);
        assert!(t.rt_target[0].is_nan());
    }

    #[test]
    fn rt_bounds_are_inclusive() {
        let raw = vec![
            m("a", 2, "dog", 99.0, 1.0),
            m("b", 2, "dog", 100.0, 1.0),
            m("c", 2, "dog", 3000.0, 1.0),
            m("d", 2, "dog", 3000.5, 1.0),
        ];
        let (t, s) = ingest_reading_data(&raw, &words(3), &FilterConfig::spr()).unwrap();
        assert_eq!(t.rt_target[1], 1550.0);
        assert_eq!(s.trials_dropped, 2);
    }

    #[test]
    fn low_accuracy_participants_dropped_before_averaging() {
        let raw = vec![
            m("a", 2, "dog", 300.0, 4.0 / 6.0),
            m("b", 2, "dog", 500.0, 5.0 / 6.0),
        ];
        let (t, s) = ingest_reading_data(&raw, &words(3), &FilterConfig::spr()).unwrap();
        assert_eq!(t.rt_target[1], 500.0);
        assert_eq!(s.participants_dropped, 1);
    }

    #[test]
    fn word_exclusions() {
        let raw = vec![
            m("a", 1, "The", 300.0, 1.0),
            m("a", 2, "end.", 300.0, 1.0),
            m("a", 3, "dog", 300.0, 1.0),
            m("a", 4, "ran", 300.0, 1.0),
        ];
        let (t, _) = ingest_reading_data(&raw, &words(4), &FilterConfig::spr()).unwrap();
        assert_eq!(t.usable, vec![false, false, true, false]);
        assert!(contains_punctuation("don't"));
        assert!(!contains_punctuation("dont"));
    }

    #[test]
    fn practice_trials_and_missing_columns() {
        let mut p = m("a", 2, "dog", 300.0, 1.0);
        p.practice = true;
        let raw = vec![p, m("a", 2, "dog", 500.0, 1.0)];
        let (t, _) = ingest_reading_data(&raw, &words(3), &FilterConfig::eye_tracking()).unwrap();
        assert_eq!(t.rt_target[1], 500.0);
        assert_eq!(
            parse_raw_tsv("participant\ttext_id\tword_index\tword\trt\n"),
            Err(EvalError::MissingColumn("sentence_id".into()))
        );
    }
}
