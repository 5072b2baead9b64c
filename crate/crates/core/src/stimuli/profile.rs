use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{StimuliError, StimulusItem, TemplateId, TemplateSpec};
use crate::storage::{storage_profile, PotentialSource};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileSummary {
    pub condition: TemplateId,
    pub per_position_mean: Vec<f64>,
    /// Half-width of the normal-approximation interval; `None` below two items.
    pub per_position_ci95: Vec<Option<f64>>,
    pub total_mean: f64,
    pub total_sd: Option<f64>,
    pub n_items: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemTotal {
    pub item_id: u32,
    pub condition: TemplateId,
    pub total_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileReport {
    pub summaries: Vec<ProfileSummary>,
    pub item_totals: Vec<ItemTotal>,
    /// Items dropped after a backend failure, with the error message.
    pub excluded: Vec<(u32, TemplateId, String)>,
    pub approximate: bool,
    pub source: String,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
fn sd(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

fn summarize(condition: TemplateId, profiles: &[Vec<f64>], totals: &[f64]) -> ProfileSummary {
    let positions = TemplateSpec::of(condition).len();
    let n = profiles.len();
    let mut per_position_mean = Vec::with_capacity(positions);
    let mut per_position_ci95 = Vec::with_capacity(positions);
    for p in 0..positions {
        let column: Vec<f64> = profiles.iter().map(|v| v[p]).collect();
        per_position_mean.push(if n == 0 { 0.0 } else { mean(&column) });
        per_position_ci95.push(sd(&column).map(|s| 1.96 * s / (n as f64).sqrt()));
    }
    ProfileSummary {
        condition,
        per_position_mean,
        per_position_ci95,
        total_mean: if n == 0 { 0.0 } else { mean(totals) },
        total_sd: sd(totals),
        n_items: n,
    }
}

/// Word-level storage profiles for every item, summarized per condition.
///
/// Items are scored independently and aggregated in input order. An item
/// whose backend call fails is logged and left out of its condition's
/// summary.
pub fn profile_conditions<S: PotentialSource + ?Sized>(
    source: &S,
    items: &[StimulusItem],
    max_distance: Option<usize>,
) -> Result<ProfileReport, StimuliError> {
    for item in items {
        let expected = TemplateSpec::of(item.condition).len();
        if item.sentence.len() != expected {
            return Err(StimuliError::Items(format!(
                "item {} ({}) has {} words, template has {expected}",
                item.item_id,
                item.condition,
                item.sentence.len()
            )));
        }
    }
    let scored: Vec<Result<(Vec<f64>, bool), String>> = items
        .par_iter()
        .map(|item| {
            let tokens = source.tokenize(&item.sentence).map_err(|e| e.to_string())?;
            let result =
                storage_profile(source, &tokens, max_distance).map_err(|e| e.to_string())?;
            Ok((result.profile.per_position, result.matrix.approximate()))
        })
        .collect();

    let mut conditions: Vec<TemplateId> = Vec::new();
    for item in items {
        if !conditions.contains(&item.condition) {
            conditions.push(item.condition);
        }
    }
    let mut report = ProfileReport {
        summaries: Vec::new(),
        item_totals: Vec::new(),
        excluded: Vec::new(),
        approximate: false,
        source: source.identity(),
    };
    let mut grouped: Vec<(Vec<Vec<f64>>, Vec<f64>)> =
        vec![(Vec::new(), Vec::new()); conditions.len()];
    for (item, result) in items.iter().zip(scored) {
        match result {
            Ok((profile, approximate)) => {
                let total: f64 = profile.iter().fold(0.0, |a, b| a + b);
                report.approximate |= approximate;
                report.item_totals.push(ItemTotal {
                    item_id: item.item_id,
                    condition: item.condition,
                    total_bits: total,
                });
                let slot = conditions
                    .iter()
                    .position(|c| *c == item.condition)
                    .expect("seen");
                grouped[slot].0.push(profile);
                grouped[slot].1.push(total);
            }
            Err(message) => {
                log::warn!(
                    "item {} ({}) excluded: {message}",
                    item.item_id,
                    item.condition
                );
                report
                    .excluded
                    .push((item.item_id, item.condition, message));
            }
        }
    }
    report.summaries = conditions
        .iter()
        .zip(&grouped)
        .map(|(c, (profiles, totals))| summarize(*c, profiles, totals))
        .collect();
    Ok(report)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| format!("{v}"))
}

/// `condition, position, word_slot, mean_bits, ci95` with 1-based positions.
pub fn per_position_csv(report: &ProfileReport) -> String {
    let mut out = String::from("condition,position,word_slot,mean_bits,ci95\n");
    for s in &report.summaries {
        let spec = TemplateSpec::of(s.condition);
        for (p, (m, ci)) in s
            .per_position_mean
            .iter()
            .zip(&s.per_position_ci95)
            .enumerate()
        {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.condition,
                p + 1,
                spec.word_slot(p),
                m,
                fmt_opt(*ci)
            );
        }
    }
    out
}

pub fn item_totals_csv(report: &ProfileReport) -> String {
    let mut out = String::from("item,condition,total_bits\n");
    for t in &report.item_totals {
        let _ = writeln!(out, "{},{},{}", t.item_id, t.condition, t.total_bits);
    }
    out
}

/// One series per condition: x positions, word-slot labels, means and
/// interval bounds, in the shape of a line plot with error bars.
pub fn plot_json(report: &ProfileReport) -> serde_json::Value {
    let series: Vec<serde_json::Value> = report
        .summaries
        .iter()
        .map(|s| {
            let spec = TemplateSpec::of(s.condition);
            let labels: Vec<&str> = (0..spec.len()).map(|p| spec.word_slot(p)).collect();
            let bound = |sign: f64| -> Vec<Option<f64>> {
                s.per_position_mean
                    .iter()
                    .zip(&s.per_position_ci95)
                    .map(|(m, ci)| ci.map(|c| m + sign * c))
                    .collect()
            };
            serde_json::json!({
                "condition": s.condition,
                "x": (1..=spec.len()).collect::<Vec<_>>(),
                "labels": labels,
                "mean": s.per_position_mean,
                "lower": bound(-1.0),
                "upper": bound(1.0),
                "total_mean": s.total_mean,
                "total_sd": s.total_sd,
                "n_items": s.n_items,
            })
        })
        .collect();
    serde_json::json!({
        "series": series,
        "approximate": report.approximate,
        "source": report.source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimuli::{generate_pair, ConditionPair, Lexicon};
    use crate::storage::{Potential, SentenceTokens, StorageError};

    struct Constant(f64);

    impl PotentialSource for Constant {
        fn potentials_at(
            &self,
            s: &SentenceTokens,
            _k: usize,
            t: &[usize],
        ) -> Result<Vec<Potential>, StorageError> {
            if s.words[1] == "thief" {
                return Err(StorageError::Mismatch("backend down".into()));
            }
            Ok(t.iter()
                .map(|_| Potential::clamped(self.0, false))
                .collect())
        }
        fn identity(&self) -> String {
            format!("constant:{}", self.0)
        }
    }

    #[test]
    fn zero_backend_gives_zero_everywhere() {
        let items = generate_pair(
            ConditionPair::SrcOrc,
            &Lexicon::bundled(ConditionPair::SrcOrc),
        )
        .unwrap();
        let report = profile_conditions(&Constant(0.0), &items, None).unwrap();
        assert_eq!(report.summaries.len(), 2);
        for s in &report.summaries {
            assert!(s.per_position_mean.iter().all(|&m| m == 0.0));
            assert!(s.per_position_ci95.iter().all(|&c| c == Some(0.0)));
            assert_eq!(s.total_mean, 0.0);
            assert_eq!(s.total_sd, Some(0.0));
        }
    }

    #[test]
    fn constant_potential_counts_pairs() {
        // every word k receives k units, so the total is n(n-1)/2
        let items = generate_pair(
            ConditionPair::SrcOrc,
            &Lexicon::bundled(ConditionPair::SrcOrc),
        )
        .unwrap();
        let report = profile_conditions(&Constant(1.0), &items, None).unwrap();
        let s = &report.summaries[0];
        assert_eq!(
            s.per_position_mean,
            (0..9).map(|k| k as f64).collect::<Vec<_>>()
        );
        assert_eq!(s.total_mean, 36.0);
        // the one item with "thief" as N1 is dropped in both conditions
        assert_eq!(report.excluded.len(), 2);
        assert_eq!(s.n_items, 29);
        let windowed = profile_conditions(&Constant(1.0), &items, Some(1)).unwrap();
        assert_eq!(windowed.summaries[0].total_mean, 8.0);
    }

    #[test]
    fn sd_uses_sample_denominator() {
        assert_eq!(sd(&[1.0, 3.0]), Some(2f64.sqrt()));
        assert_eq!(sd(&[1.0]), None);
    }

    #[test]
    fn csv_layout() {
        let items = generate_pair(
            ConditionPair::SrcOrc,
            &Lexicon::bundled(ConditionPair::SrcOrc),
        )
        .unwrap();
        let report = profile_conditions(&Constant(0.0), &items[..2], None).unwrap();
        let csv = per_position_csv(&report);
        assert_eq!(csv.lines().nth(1), Some("SRC,1,The,0,NA"));
        assert_eq!(csv.lines().count(), 1 + 18);
        assert_eq!(item_totals_csv(&report).lines().nth(2), Some("1,ORC,0"));
        assert_eq!(plot_json(&report)["series"][1]["labels"][4], "N2");
    }
}
