//! Minimal CoNLL-U reader and writer.
//!
//! Only ID, FORM, HEAD, DEPREL and MISC are kept. Multiword token ranges are
//! recorded for surface-text reconstruction but the tree is built over their
//! parts; empty nodes (`5.1`) are dropped.

use std::fmt::Write as _;
use std::io::BufRead;

use super::DltError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeToken {
    pub form: String,
    /// 1-based head id, 0 for the root attachment.
    pub head: usize,
    pub deprel: String,
    pub misc: String,
}

impl TreeToken {
    pub fn space_after(&self) -> bool {
        !misc_has_no_space(&self.misc)
    }
}

/// A multiword surface token covering ids `first..=last`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiwordToken {
    pub first: usize,
    pub last: usize,
    pub form: String,
    pub misc: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyTree {
    pub sentence_id: String,
    pub text: Option<String>,
    pub tokens: Vec<TreeToken>,
    pub multiword: Vec<MultiwordToken>,
}

fn misc_has_no_space(misc: &str) -> bool {
    misc.split('|').any(|f| f == "SpaceAfter=No")
}

impl DependencyTree {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn forms(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.form.as_str()).collect()
    }

    /// Checks head range, root presence, self-loops and acyclicity.
    pub fn validate(&self) -> Result<(), DltError> {
        let n = self.tokens.len();
        let invalid = |msg: String| DltError::InvalidTree {
            sentence_id: self.sentence_id.clone(),
            message: msg,
        };
        if n == 0 {
            return Err(invalid("no tokens".into()));
        }
        for (idx, tok) in self.tokens.iter().enumerate() {
            if tok.head > n {
                return Err(invalid(format!(
                    "token {} has head {} > {n}",
                    idx + 1,
                    tok.head
                )));
            }
            if tok.head == idx + 1 {
                return Err(invalid(format!("token {} is its own head", idx + 1)));
            }
        }
        if !self.tokens.iter().any(|t| t.head == 0) {
            return Err(invalid("no token attaches to the root".into()));
        }
        for start in 0..n {
            let mut node = start + 1;
            let mut steps = 0;
            while node != 0 {
                node = self.tokens[node - 1].head;
                steps += 1;
                if steps > n {
                    return Err(invalid(format!("cycle through token {}", start + 1)));
                }
            }
        }
        Ok(())
    }

    /// `# text` when present, otherwise the forms joined by their
    /// `SpaceAfter` metadata (multiword tokens contribute their surface form).
    pub fn surface_text(&self) -> String {
        if let Some(t) = &self.text {
            return t.clone();
        }
        let mut out = String::new();
        let mut id = 1;
        while id <= self.tokens.len() {
            let (form, no_space, next) = match self.multiword.iter().find(|m| m.first == id) {
                Some(m) => (m.form.as_str(), misc_has_no_space(&m.misc), m.last + 1),
                None => {
                    let t = &self.tokens[id - 1];
                    (t.form.as_str(), !t.space_after(), id + 1)
                }
            };
            out.push_str(form);
            if !no_space && next <= self.tokens.len() {
                out.push(' ');
            }
            id = next;
        }
        out
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> DltError {
    DltError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Default)]
struct Pending {
    id: Option<String>,
    text: Option<String>,
    tokens: Vec<TreeToken>,
    multiword: Vec<MultiwordToken>,
    started: bool,
}

impl Pending {
    fn finish(&mut self, count: usize, out: &mut Vec<DependencyTree>) -> Result<(), DltError> {
        if !self.started {
            // a block of comments alone, such as a file header
            *self = Pending::default();
            return Ok(());
        }
        let p = std::mem::take(self);
        let tree = DependencyTree {
            sentence_id: p.id.unwrap_or_else(|| format!("s{}", count + 1)),
            text: p.text,
            tokens: p.tokens,
            multiword: p.multiword,
        };
        tree.validate()?;
        out.push(tree);
        Ok(())
    }
}

/// Parses every sentence of a CoNLL-U stream.
pub fn parse_conllu<R: BufRead>(reader: R) -> Result<Vec<DependencyTree>, DltError> {
    let mut trees = Vec::new();
    let mut cur = Pending::default();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| parse_error(lineno, e.to_string()))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            let count = trees.len();
            cur.finish(count, &mut trees)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "sent_id" => cur.id = Some(value.trim().to_string()),
                    "text" => cur.text = Some(value.trim().to_string()),
                    _ => {}
                }
            }
            continue;
        }
        cur.started = true;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(parse_error(
                lineno,
                format!("expected 10 columns, found {}", cols.len()),
            ));
        }
        let id = cols[0];
        if id.contains('.') {
            continue;
        }
        if let Some((a, b)) = id.split_once('-') {
            let first: usize = a
                .parse()
                .map_err(|_| parse_error(lineno, format!("bad range id {id:?}")))?;
            let last: usize = b
                .parse()
                .map_err(|_| parse_error(lineno, format!("bad range id {id:?}")))?;
            if last < first {
                return Err(parse_error(lineno, format!("empty range {id:?}")));
            }
            cur.multiword.push(MultiwordToken {
                first,
                last,
                form: cols[1].to_string(),
                misc: cols[9].to_string(),
            });
            continue;
        }
        let id: usize = id
            .parse()
            .map_err(|_| parse_error(lineno, format!("bad token id {id:?}")))?;
        if id != cur.tokens.len() + 1 {
            return Err(parse_error(
                lineno,
                format!(
                    "token id {id} out of sequence; expected {}",
                    cur.tokens.len() + 1
                ),
            ));
        }
        let head: usize = cols[6]
            .parse()
            .map_err(|_| parse_error(lineno, format!("non-integer head {:?}", cols[6])))?;
        cur.tokens.push(TreeToken {
            form: cols[1].to_string(),
            head,
            deprel: cols[7].to_string(),
            misc: cols[9].to_string(),
        });
    }
    let count = trees.len();
    cur.finish(count, &mut trees)?;
    Ok(trees)
}

pub fn parse_conllu_str(text: &str) -> Result<Vec<DependencyTree>, DltError> {
    parse_conllu(text.as_bytes())
}

/// Writes trees back as CoNLL-U with unused columns set to `_`.
pub fn write_conllu(trees: &[DependencyTree]) -> String {
    let mut out = String::new();
    for tree in trees {
        let _ = writeln!(out, "# sent_id = {}", tree.sentence_id);
        if let Some(text) = &tree.text {
            let _ = writeln!(out, "# text = {text}");
        }
        for (idx, tok) in tree.tokens.iter().enumerate() {
            let id = idx + 1;
            for m in tree.multiword.iter().filter(|m| m.first == id) {
                let _ = writeln!(
                    out,
                    "{}-{}\t{}\t_\t_\t_\t_\t_\t_\t_\t{}",
                    m.first, m.last, m.form, m.misc
                );
            }
            let _ = writeln!(
                out,
                "{id}\t{}\t_\t_\t_\t_\t{}\t{}\t_\t{}",
                tok.form, tok.head, tok.deprel, tok.misc
            );
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "# sent_id = a\n# text = Mary met John.\n\
1\tMary\tMary\tPROPN\t_\t_\t2\tnsubj\t_\t_\n\
2\tmet\tmeet\tVERB\t_\t_\t0\troot\t_\t_\n\
3\tJohn\tJohn\tPROPN\t_\t_\t2\tobj\t_\tSpaceAfter=No\n\
4\t.\t.\tPUNCT\t_\t_\t2\tpunct\t_\t_\n\
\n\
# sent_id = b\n\
1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n\
1\tdo\tdo\tAUX\t_\t_\t3\taux\t_\t_\n\
2\tn't\tnot\tPART\t_\t_\t3\tadvmod\t_\t_\n\
3\tgo\tgo\tVERB\t_\t_\t0\troot\t_\t_\n\
3.1\tgo\tgo\tVERB\t_\t_\t_\t_\t3:conj\t_\n";

    #[test]
    fn empty_input() {
        assert!(parse_conllu_str("").unwrap().is_empty());
        assert!(parse_conllu_str("\n\n").unwrap().is_empty());
        assert!(parse_conllu_str("# header only\n").unwrap().is_empty());
    }

    #[test]
    fn header_block_is_not_a_sentence() {
        let trees = parse_conllu_str(&format!("# newdoc\n# sent_id = stale\n\n{TWO}")).unwrap();
        assert_eq!(trees.len(), 2);
        assert_eq!(trees[0].sentence_id, "a");
    }

    #[test]
    fn two_sentences() {
        let trees = parse_conllu_str(TWO).unwrap();
        assert_eq!(trees.len(), 2);
        assert_eq!(trees[0].len(), 4);
        assert_eq!(trees[1].len(), 3);
        assert_eq!(trees[0].sentence_id, "a");
        assert_eq!(trees[1].multiword.len(), 1);
        assert_eq!(trees[1].surface_text(), "don't go");
        assert_eq!(trees[0].tokens[2].head, 2);
    }

    #[test]
    fn round_trip() {
        let trees = parse_conllu_str(TWO).unwrap();
        let again = parse_conllu_str(&write_conllu(&trees)).unwrap();
        assert_eq!(trees, again);
    }

    #[test]
    fn reconstructs_text_from_space_after() {
        let mut trees = parse_conllu_str(TWO).unwrap();
        trees[0].text = None;
        assert_eq!(trees[0].surface_text(), "Mary met John.");
    }

    #[test]
    fn malformed_lines() {
        let e = parse_conllu_str("1\tMary\t_\t_\n").unwrap_err();
        assert!(matches!(e, DltError::Parse { line: 1, .. }));
        let e = parse_conllu_str("1\ta\t_\t_\t_\t_\tx\troot\t_\t_\n").unwrap_err();
        assert!(matches!(e, DltError::Parse { line: 1, .. }));
        let e = parse_conllu_str("# c\n2\ta\t_\t_\t_\t_\t0\troot\t_\t_\n").unwrap_err();
        assert!(matches!(e, DltError::Parse { line: 2, .. }));
    }

    #[test]
    fn invalid_trees() {
        let cyc = "1\ta\t_\t_\t_\t_\t2\tx\t_\t_\n2\tb\t_\t_\t_\t_\t1\tx\t_\t_\n";
        assert!(matches!(
            parse_conllu_str(cyc),
            Err(DltError::InvalidTree { .. })
        ));
        let selfloop = "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n2\tb\t_\t_\t_\t_\t2\tx\t_\t_\n";
        assert!(parse_conllu_str(selfloop).is_err());
        let far = "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n2\tb\t_\t_\t_\t_\t7\tx\t_\t_\n";
        assert!(parse_conllu_str(far).is_err());
    }
}
