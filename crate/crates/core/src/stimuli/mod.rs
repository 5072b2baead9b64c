//! Center-embedding / right-branching and subject / object relative-clause
//! stimulus sets, generated from slot templates and a lexicon table.

mod profile;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use profile::{
    item_totals_csv, per_position_csv, plot_json, profile_conditions, ItemTotal, ProfileReport,
    ProfileSummary,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StimuliError {
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("item {item}: no fill for slot {slot}")]
    MissingSlot { item: u32, slot: Slot },
    #[error("unknown condition {0:?} (expected ce-rb or src-orc)")]
    UnknownCondition(String),
    #[error("{0}")]
    Items(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Slot {
    N1,
    N2,
    N3,
    N4,
    V1,
    V2,
    V3,
}

impl Slot {
    pub const ALL: [Slot; 7] = [
        Slot::N1,
        Slot::N2,
        Slot::N3,
        Slot::N4,
        Slot::V1,
        Slot::V2,
        Slot::V3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Slot::N1 => "N1",
            Slot::N2 => "N2",
            Slot::N3 => "N3",
            Slot::N4 => "N4",
            Slot::V1 => "V1",
            Slot::V2 => "V2",
            Slot::V3 => "V3",
        }
    }

    pub fn is_noun(self) -> bool {
        matches!(self, Slot::N1 | Slot::N2 | Slot::N3 | Slot::N4)
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Slot {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Slot::ALL
            .into_iter()
            .find(|slot| slot.as_str() == s)
            .ok_or_else(|| format!("unknown slot {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TemplateId {
    Ce,
    Rb,
    Src,
    Orc,
}

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Ce => "CE",
            TemplateId::Rb => "RB",
            TemplateId::Src => "SRC",
            TemplateId::Orc => "ORC",
        }
    }

    fn pattern(self) -> &'static str {
        match self {
            TemplateId::Ce => "The N1 who the N2 who the N3 V3 V2 V1 the N4",
            TemplateId::Rb => "The N3 V3 the N2 who V2 the N1 who V1 the N4",
            TemplateId::Src => "The N1 who V2 the N2 V1 the N3",
            TemplateId::Orc => "The N1 who the N2 V2 V1 the N3",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "CE" => Ok(TemplateId::Ce),
            "RB" => Ok(TemplateId::Rb),
            "SRC" => Ok(TemplateId::Src),
            "ORC" => Ok(TemplateId::Orc),
            _ => Err(format!("unknown template {s:?}")),
        }
    }
}

/// The two matched condition pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionPair {
    CeRb,
    SrcOrc,
}

impl ConditionPair {
    pub fn templates(self) -> [TemplateId; 2] {
        match self {
            ConditionPair::CeRb => [TemplateId::Ce, TemplateId::Rb],
            ConditionPair::SrcOrc => [TemplateId::Src, TemplateId::Orc],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConditionPair::CeRb => "ce-rb",
            ConditionPair::SrcOrc => "src-orc",
        }
    }

    /// Slots a lexicon row for this pair must fill.
    pub fn slots(self) -> Vec<Slot> {
        TemplateSpec::of(self.templates()[0]).slots
    }

    /// The item listing in the fixture format.
    pub fn bundled_fixture(self) -> &'static str {
        match self {
            ConditionPair::CeRb => include_str!("../../data/items_ce_rb.tsv"),
            ConditionPair::SrcOrc => include_str!("../../data/items_src_orc.tsv"),
        }
    }

    pub fn bundled_lexicon_tsv(self) -> &'static str {
        match self {
            ConditionPair::CeRb => include_str!("../../data/lexicon_ce_rb.tsv"),
            ConditionPair::SrcOrc => include_str!("../../data/lexicon_src_orc.tsv"),
        }
    }
}

impl FromStr for ConditionPair {
    type Err = StimuliError;
    fn from_str(s: &str) -> Result<Self, StimuliError> {
        match s.to_ascii_lowercase().as_str() {
            "ce-rb" => Ok(ConditionPair::CeRb),
            "src-orc" => Ok(ConditionPair::SrcOrc),
            _ => Err(StimuliError::UnknownCondition(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternToken {
    Literal(&'static str),
    Slot(Slot),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSpec {
    pub template_id: TemplateId,
    /// Distinct slots in order of first appearance in the N/V numbering.
    pub slots: Vec<Slot>,
    pub surface_pattern: Vec<PatternToken>,
}

impl TemplateSpec {
    pub fn of(template_id: TemplateId) -> Self {
        let surface_pattern: Vec<PatternToken> = template_id
            .pattern()
            .split(' ')
            .map(|w| {
                w.parse()
                    .map_or(PatternToken::Literal(w), PatternToken::Slot)
            })
            .collect();
        let mut slots: Vec<Slot> = surface_pattern
            .iter()
            .filter_map(|t| match t {
                PatternToken::Slot(s) => Some(*s),
                PatternToken::Literal(_) => None,
            })
            .collect();
        slots.sort();
        slots.dedup();
        TemplateSpec {
            template_id,
            slots,
            surface_pattern,
        }
    }

    pub fn len(&self) -> usize {
        self.surface_pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surface_pattern.is_empty()
    }

    /// Label for a word position: the slot name, or the literal word.
    pub fn word_slot(&self, position: usize) -> &'static str {
        match &self.surface_pattern[position] {
            PatternToken::Literal(w) => w,
            PatternToken::Slot(s) => s.as_str(),
        }
    }

    pub fn instantiate(
        &self,
        item: u32,
        fills: &BTreeMap<Slot, String>,
    ) -> Result<Vec<String>, StimuliError> {
        self.surface_pattern
            .iter()
            .map(|t| match t {
                PatternToken::Literal(w) => Ok(w.to_string()),
                PatternToken::Slot(s) => fills
                    .get(s)
                    .cloned()
                    .ok_or(StimuliError::MissingSlot { item, slot: *s }),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconRow {
    pub item_id: u32,
    pub fills: BTreeMap<Slot, String>,
}

/// Slot-fill table, one row per item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    pub rows: Vec<LexiconRow>,
}

impl Lexicon {
    /// Reads a TSV with an `item` column and one column per slot. Empty cells
    /// are left unfilled so that generation reports the missing slot.
    pub fn parse_tsv(text: &str) -> Result<Self, StimuliError> {
        let err = |line, message: String| StimuliError::Lexicon { line, message };
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty lexicon".into()))?;
        let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
        if columns.first() != Some(&"item") {
            return Err(err(1, "first column must be `item`".into()));
        }
        let slots: Vec<Slot> = columns[1..]
            .iter()
            .map(|c| c.parse().map_err(|e| err(1, e)))
            .collect::<Result<_, _>>()?;
        let mut rows: Vec<LexiconRow> = Vec::new();
        for (idx, line) in lines {
            let cells: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cells.len() > columns.len() {
                return Err(err(
                    idx + 1,
                    format!("{} cells, header has {}", cells.len(), columns.len()),
                ));
            }
            let item_id: u32 = cells[0]
                .parse()
                .map_err(|_| err(idx + 1, format!("bad item id {:?}", cells[0])))?;
            if rows.iter().any(|r| r.item_id == item_id) {
                return Err(err(idx + 1, format!("duplicate item {item_id}")));
            }
            let fills = slots
                .iter()
                .zip(cells[1..].iter())
                .filter(|(_, w)| !w.is_empty())
                .map(|(s, w)| (*s, w.to_string()))
                .collect();
            rows.push(LexiconRow { item_id, fills });
        }
        Ok(Lexicon { rows })
    }

    pub fn bundled(pair: ConditionPair) -> Self {
        Self::parse_tsv(pair.bundled_lexicon_tsv()).expect("bundled lexicon parses")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StimulusItem {
    pub item_id: u32,
    pub condition: TemplateId,
    pub sentence: Vec<String>,
    pub lexicon_choices: BTreeMap<Slot, String>,
}

impl StimulusItem {
    pub fn text(&self) -> String {
        self.sentence.join(" ")
    }

    /// Words filling noun or verb slots, sorted.
    pub fn content_words(&self) -> Vec<&str> {
        let mut words: Vec<&str> = TemplateSpec::of(self.condition)
            .slots
            .iter()
            .filter_map(|s| self.lexicon_choices.get(s).map(String::as_str))
            .collect();
        words.sort_unstable();
        words
    }
}

/// Instantiates one template for every lexicon row, in row order.
pub fn generate(
    template_id: TemplateId,
    lexicon: &Lexicon,
) -> Result<Vec<StimulusItem>, StimuliError> {
    let spec = TemplateSpec::of(template_id);
    lexicon
        .rows
        .iter()
        .map(|row| {
            let sentence = spec.instantiate(row.item_id, &row.fills)?;
            let lexicon_choices = spec
                .slots
                .iter()
                .map(|s| (*s, row.fills[s].clone()))
                .collect();
            Ok(StimulusItem {
                item_id: row.item_id,
                condition: template_id,
                sentence,
                lexicon_choices,
            })
        })
        .collect()
}

/// Both conditions of a pair, interleaved per item.
pub fn generate_pair(
    pair: ConditionPair,
    lexicon: &Lexicon,
) -> Result<Vec<StimulusItem>, StimuliError> {
    let [a, b] = pair.templates();
    let first = generate(a, lexicon)?;
    let second = generate(b, lexicon)?;
    Ok(first
        .into_iter()
        .zip(second)
        .flat_map(|(x, y)| [x, y])
        .collect())
}

/// The `item, condition, sentence` TSV the fixtures are stored in.
pub fn render_fixture(items: &[StimulusItem]) -> String {
    let mut out = String::from("item\tcondition\tsentence\n");
    for item in items {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            item.item_id,
            item.condition,
            item.text()
        ));
    }
    out
}

/// Reads the fixture TSV back into `(item, condition, words)` triples.
pub fn parse_fixture(text: &str) -> Result<Vec<(u32, TemplateId, Vec<String>)>, StimuliError> {
    let err = |line: usize, message: String| StimuliError::Items(format!("line {line}: {message}"));
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .skip(1)
        .map(|(idx, line)| {
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != 3 {
                return Err(err(
                    idx + 1,
                    format!("expected 3 columns, found {}", cells.len()),
                ));
            }
            let item = cells[0]
                .parse()
                .map_err(|_| err(idx + 1, format!("bad item {:?}", cells[0])))?;
            let cond = cells[1].parse().map_err(|e| err(idx + 1, e))?;
            Ok((
                item,
                cond,
                cells[2].split_whitespace().map(String::from).collect(),
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_items_match_listing() {
        let ce = generate(TemplateId::Ce, &Lexicon::bundled(ConditionPair::CeRb)).unwrap();
        assert_eq!(
            ce[0].text(),
            "The actor who the doctor who the reporter watched visited called the dancer"
        );
        let src = generate(TemplateId::Src, &Lexicon::bundled(ConditionPair::SrcOrc)).unwrap();
        assert_eq!(
            src[0].text(),
            "The actor who called the doctor praised the reporter"
        );
        assert_eq!(ce.len(), 30);
        assert_eq!(src.len(), 30);
    }

    #[test]
    fn template_lengths() {
        assert_eq!(TemplateSpec::of(TemplateId::Ce).len(), 13);
        assert_eq!(TemplateSpec::of(TemplateId::Rb).len(), 13);
        assert_eq!(TemplateSpec::of(TemplateId::Src).len(), 9);
        assert_eq!(TemplateSpec::of(TemplateId::Orc).len(), 9);
        assert_eq!(
            ConditionPair::SrcOrc.slots(),
            vec![Slot::N1, Slot::N2, Slot::N3, Slot::V1, Slot::V2]
        );
        assert_eq!(TemplateSpec::of(TemplateId::Ce).word_slot(9), "V2");
        assert_eq!(TemplateSpec::of(TemplateId::Ce).word_slot(3), "the");
    }

    #[test]
    fn pairs_share_content_words() {
        for pair in [ConditionPair::CeRb, ConditionPair::SrcOrc] {
            let items = generate_pair(pair, &Lexicon::bundled(pair)).unwrap();
            for two in items.chunks(2) {
                assert_eq!(two[0].item_id, two[1].item_id);
                assert_eq!(two[0].content_words(), two[1].content_words());
            }
        }
    }

    #[test]
    fn missing_slot_is_reported() {
        let lex = Lexicon::parse_tsv("item\tN1\tN2\tN3\tV1\tV2\n7\ta\tb\t\tc\td\n").unwrap();
        assert_eq!(
            generate(TemplateId::Src, &lex),
            Err(StimuliError::MissingSlot {
                item: 7,
                slot: Slot::N3
            })
        );
    }

    #[test]
    fn malformed_lexicon() {
        assert!(Lexicon::parse_tsv("").is_err());
        assert!(Lexicon::parse_tsv("id\tN1\n").is_err());
        assert!(Lexicon::parse_tsv("item\tX9\n").is_err());
        assert!(Lexicon::parse_tsv("item\tN1\n1\ta\n1\tb\n").is_err());
    }

    #[test]
    fn fixture_round_trip() {
        for pair in [ConditionPair::CeRb, ConditionPair::SrcOrc] {
            let parsed = parse_fixture(pair.bundled_fixture()).unwrap();
            assert_eq!(parsed.len(), 60);
        }
        assert!("xx-yy".parse::<ConditionPair>().is_err());
    }
}
