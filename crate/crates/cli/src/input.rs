//! Sentence inputs: plain text, `id<TAB>text` lines, or stimulus fixtures.

use storecost::stimuli::parse_fixture;
use storecost::storage::StorageError;
use storecost::Error;

const FIXTURE_HEADER: &str = "item\tcondition\tsentence";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputSentence {
    pub id: String,
    pub words: Vec<String>,
}

/// Blank lines and `#` comments are skipped. Unlabelled sentences are
/// numbered `s1`, `s2`, ... in file order.
pub fn parse_sentences(text: &str) -> Result<Vec<InputSentence>, Error> {
    let mut lines = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let sentences: Vec<InputSentence> =
        if lines.next().is_some_and(|l| l.trim_end() == FIXTURE_HEADER) {
            parse_fixture(text)?
                .into_iter()
                .map(|(item, cond, words)| InputSentence {
                    id: format!("{item}-{cond}"),
                    words,
                })
                .collect()
        } else {
            text.lines()
                .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
                .enumerate()
                .map(|(n, line)| match line.split_once('\t') {
                    Some((id, rest)) => InputSentence {
                        id: id.trim().to_string(),
                        words: rest.split_whitespace().map(String::from).collect(),
                    },
                    None => InputSentence {
                        id: format!("s{}", n + 1),
                        words: line.split_whitespace().map(String::from).collect(),
                    },
                })
                .collect()
        };
    if sentences.is_empty() {
        return Err(StorageError::EmptyCorpus.into());
    }
    if let Some(s) = sentences.iter().find(|s| s.words.is_empty()) {
        log::error!("sentence {} has no words", s.id);
        return Err(StorageError::EmptySentence.into());
    }
    Ok(sentences)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_and_labelled() {
        let s = parse_sentences("# corpus\nthe cat sat\n\nq7\ta dog\n").unwrap();
        assert_eq!(s[0].id, "s1");
        assert_eq!(s[0].words, vec!["the", "cat", "sat"]);
        assert_eq!(s[1].id, "q7");
        assert_eq!(s[1].words, vec!["a", "dog"]);
    }

    #[test]
    fn fixture_header_is_detected() {
        let s =
            parse_sentences("item\tcondition\tsentence\n1\tSRC\tThe actor who called\n").unwrap();
        assert_eq!(s[0].id, "1-SRC");
        assert_eq!(s[0].words.len(), 4);
    }

    #[test]
    fn empty_input() {
        assert!(parse_sentences("# nothing\n\n").is_err());
        assert!(parse_sentences("x\t \n").is_err());
    }
}
