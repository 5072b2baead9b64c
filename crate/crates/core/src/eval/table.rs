use std::fmt::Write as _;

use super::EvalError;

pub const BASELINE_COLUMNS: [&str; 5] = ["zone", "position", "wlen", "unisurp", "gpt2_surp"];
pub const STORAGE_COLUMNS: [&str; 2] = ["dlt_stor", "info_stor"];
/// Columns that get a previous-word copy named `<col>_s1`.
pub const SPILLOVER_BASES: [&str; 5] = ["wlen", "unisurp", "gpt2_surp", "dlt_stor", "info_stor"];

pub fn spillover_name(column: &str) -> String {
    format!("{column}_s1")
}

fn parse_value(cell: &str) -> Result<f64, String> {
    match cell.trim() {
        "" | "NA" | "NaN" | "nan" | "na" => Ok(f64::NAN),
        s => s.parse::<f64>().map_err(|_| format!("not a number: {s:?}")),
    }
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v}")
    }
}

/// Word-level predictors keyed by `(text_id, word_index)`.
///
/// Missing values are NaN. `usable` carries word-level exclusions; a row is
/// analysed only if it is usable and every column the analysis needs is
/// finite.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorTable {
    pub text_id: Vec<String>,
    pub word_index: Vec<i64>,
    pub word: Vec<String>,
    pub rt_target: Vec<f64>,
    pub usable: Vec<bool>,
    columns: Vec<(String, Vec<f64>)>,
}

impl PredictorTable {
    pub fn new(text_id: Vec<String>, word_index: Vec<i64>) -> Self {
        let n = text_id.len();
        assert_eq!(word_index.len(), n, "key columns differ in length");
        PredictorTable {
            text_id,
            word_index,
            word: vec![String::new(); n],
            rt_target: vec![f64::NAN; n],
            usable: vec![true; n],
            columns: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.text_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text_id.is_empty()
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|(n, _)| n.as_str())
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|(n, _)| n == name)
    }

    pub fn column(&self, name: &str) -> Result<&[f64], EvalError> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| EvalError::MissingColumn(name.to_string()))
    }

    pub fn set_column(&mut self, name: &str, values: Vec<f64>) {
        assert_eq!(
            values.len(),
            self.len(),
            "column {name} has the wrong length"
        );
        match self.columns.iter_mut().find(|(n, _)| n == name) {
            Some((_, v)) => *v = values,
            None => self.columns.push((name.to_string(), values)),
        }
    }

    /// Sorts rows by `(text_id, word_index)`; every statistic downstream is
    /// computed in this order, so input row order never matters.
    pub fn sort_canonical(&mut self) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            (self.text_id[a].as_str(), self.word_index[a])
                .cmp(&(self.text_id[b].as_str(), self.word_index[b]))
        });
        let pick_s = |v: &[String]| order.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
        self.text_id = pick_s(&self.text_id);
        self.word = pick_s(&self.word);
        self.word_index = order.iter().map(|&i| self.word_index[i]).collect();
        self.rt_target = order.iter().map(|&i| self.rt_target[i]).collect();
        self.usable = order.iter().map(|&i| self.usable[i]).collect();
        for (_, values) in &mut self.columns {
            *values = order.iter().map(|&i| values[i]).collect();
        }
    }

    /// Index of the row holding the previous word of the same text, if the
    /// table contains it. Assumes canonical order.
    fn previous_row(&self, r: usize) -> Option<usize> {
        (r > 0
            && self.text_id[r - 1] == self.text_id[r]
            && self.word_index[r - 1] + 1 == self.word_index[r])
            .then(|| r - 1)
    }

    pub fn is_canonical(&self) -> bool {
        (1..self.len()).all(|r| {
            (self.text_id[r - 1].as_str(), self.word_index[r - 1])
                < (self.text_id[r].as_str(), self.word_index[r])
        })
    }

    /// Adds `<col>_s1` for every base column present and not already
    /// supplied. Rows whose previous word is missing or excluded become
    /// unusable; nothing is imputed.
    pub fn add_spillover(&mut self) {
        if !self.is_canonical() {
            self.sort_canonical();
        }
        let prev: Vec<Option<usize>> = (0..self.len()).map(|r| self.previous_row(r)).collect();
        let mut added = false;
        for base in SPILLOVER_BASES {
            let name = spillover_name(base);
            if self.has_column(&name) {
                continue;
            }
            let Ok(values) = self.column(base) else {
                continue;
            };
            let shifted: Vec<f64> = prev
                .iter()
                .map(|p| p.map_or(f64::NAN, |q| values[q]))
                .collect();
            self.set_column(&name, shifted);
            added = true;
        }
        if added {
            let keep: Vec<bool> = (0..self.len())
                .map(|r| self.usable[r] && prev[r].is_some_and(|q| self.usable[q]))
                .collect();
            self.usable = keep;
        }
    }

    /// Usable rows with a finite target and finite values in `columns`.
    pub fn analysis_rows(&self, columns: &[&str]) -> Result<Vec<usize>, EvalError> {
        let cols: Vec<&[f64]> = columns
            .iter()
            .map(|c| self.column(c))
            .collect::<Result<_, _>>()?;
        Ok((0..self.len())
            .filter(|&r| {
                self.usable[r]
                    && self.rt_target[r].is_finite()
                    && cols.iter().all(|c| c[r].is_finite())
            })
            .collect())
    }

    /// Parses a TSV with `text_id` and `word_index` columns. `word`,
    /// `rt_target` and `usable` (0/1) are optional; every other column is
    /// read as a numeric predictor.
    pub fn from_tsv(text: &str) -> Result<Self, EvalError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or(EvalError::EmptyInput)?;
        let names: Vec<&str> = header.split('\t').map(str::trim).collect();
        let find = |n: &str| names.iter().position(|h| *h == n);
        let text_col = find("text_id").ok_or_else(|| EvalError::MissingColumn("text_id".into()))?;
        let index_col =
            find("word_index").ok_or_else(|| EvalError::MissingColumn("word_index".into()))?;
        let word_col = find("word");
        let rt_col = find("rt_target");
        let usable_col = find("usable");
        let special = [
            Some(text_col),
            Some(index_col),
            word_col,
            rt_col,
            usable_col,
        ];
        let value_cols: Vec<usize> = (0..names.len())
            .filter(|c| !special.contains(&Some(*c)))
            .collect();

        let mut table = PredictorTable::new(Vec::new(), Vec::new());
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); value_cols.len()];
        for (idx, line) in lines {
            let line_no = idx + 1;
            let err = |message: String| EvalError::Parse {
                line: line_no,
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
            table.text_id.push(cells[text_col].trim().to_string());
            table.word_index.push(
                cells[index_col]
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad word_index {:?}", cells[index_col])))?,
            );
            table
                .word
                .push(word_col.map_or(String::new(), |c| cells[c].to_string()));
            table.rt_target.push(match rt_col {
                Some(c) => parse_value(cells[c]).map_err(err)?,
                None => f64::NAN,
            });
            table.usable.push(match usable_col {
                Some(c) => match cells[c].trim() {
                    "1" | "true" | "TRUE" => true,
                    "0" | "false" | "FALSE" => false,
                    other => return Err(err(format!("bad usable flag {other:?}"))),
                },
                None => true,
            });
            for (slot, &c) in value_cols.iter().enumerate() {
                values[slot].push(parse_value(cells[c]).map_err(err)?);
            }
        }
        for (slot, &c) in value_cols.iter().enumerate() {
            table
                .columns
                .push((names[c].to_string(), std::mem::take(&mut values[slot])));
        }
        table.sort_canonical();
        Ok(table)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("text_id\tword_index\tword\trt_target\tusable");
        for (name, _) in &self.columns {
            out.push('\t');
            out.push_str(name);
        }
        out.push('\n');
        for r in 0..self.len() {
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                self.text_id[r],
                self.word_index[r],
                self.word[r],
                format_value(self.rt_target[r]),
                u8::from(self.usable[r])
            );
            for (_, v) in &self.columns {
                out.push('\t');
                out.push_str(&format_value(v[r]));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TSV: &str = "text_id\tword_index\tword\trt_target\twlen\tinfo_stor\n\
t2\t1\tc\t300\t1\t0.5\n\
t1\t2\tb\t310\t2\t1.5\n\
t1\t1\ta\t290\t3\tNA\n\
t1\t3\td\t305\t4\t2.5\n";

    #[test]
    fn parses_and_sorts() {
        let t = PredictorTable::from_tsv(TSV).unwrap();
        assert_eq!(t.text_id, vec!["t1", "t1", "t1", "t2"]);
        assert_eq!(t.word_index, vec![1, 2, 3, 1]);
        assert_eq!(t.column("wlen").unwrap(), &[3.0, 2.0, 4.0, 1.0]);
        assert!(t.column("info_stor").unwrap()[0].is_nan());
        assert!(matches!(t.column("zone"), Err(EvalError::MissingColumn(_))));
    }

    #[test]
    fn spillover_shifts_within_text() {
        let mut t = PredictorTable::from_tsv(TSV).unwrap();
        t.add_spillover();
        let s1 = t.column("wlen_s1").unwrap();
        assert!(s1[0].is_nan());
        assert_eq!(&s1[1..3], &[3.0, 2.0]);
        assert!(s1[3].is_nan(), "no carry-over across texts");
        assert_eq!(t.usable, vec![false, true, true, false]);
        assert_eq!(
            t.analysis_rows(&["wlen_s1", "info_stor_s1"]).unwrap(),
            vec![2]
        );
    }

    #[test]
    fn tsv_round_trip() {
        let mut t = PredictorTable::from_tsv(TSV).unwrap();
        t.add_spillover();
        let again = PredictorTable::from_tsv(&t.to_tsv()).unwrap();
        assert_eq!(again.to_tsv(), t.to_tsv());
    }

    #[test]
    fn missing_key_column() {
        assert_eq!(
            PredictorTable::from_tsv("text_id\tx\n"),
            Err(EvalError::MissingColumn("word_index".into()))
        );
        assert!(matches!(
            PredictorTable::from_tsv("text_id\tword_index\tx\nt\t1\n"),
            Err(EvalError::Parse { line: 2, .. })
        ));
    }
}
