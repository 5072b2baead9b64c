//! Alignment of token sequences onto whitespace-delimited words.

use std::ops::Range;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlignError {
    #[error("token {index} ({form:?}) does not match the text at character {offset}")]
    Mismatch {
        index: usize,
        form: String,
        offset: usize,
    },
    #[error("token {index} ({form:?}) spans more than one whitespace word")]
    SpansWords { index: usize, form: String },
    #[error("token {index} is empty")]
    EmptyToken { index: usize },
    #[error("text continues after the last token: {rest:?}")]
    TrailingText { rest: String },
}

/// Groups consecutive tokens into the whitespace words of `text`.
///
/// The concatenated token forms must spell out `text` with whitespace
/// removed, and no token may cross a word boundary. Returns one token range
/// per word; the ranges partition `0..forms.len()`.
pub fn align_to_words<S: AsRef<str>>(
    forms: &[S],
    text: &str,
) -> Result<Vec<Range<usize>>, AlignError> {
    // (char, word index) for every non-whitespace character of the text
    let chars: Vec<(char, usize)> = text
        .split_whitespace()
        .enumerate()
        .flat_map(|(w, word)| word.chars().map(move |c| (c, w)))
        .collect();
    let mut pos = 0;
    let mut word_of_token = Vec::with_capacity(forms.len());
    for (index, form) in forms.iter().enumerate() {
        let form = form.as_ref();
        let mut word = None;
        let mut any = false;
        for c in form.chars().filter(|c| !c.is_whitespace()) {
            any = true;
            match chars.get(pos) {
                Some(&(t, w)) if t == c => {
                    if word.is_some_and(|prev| prev != w) {
                        return Err(AlignError::SpansWords {
                            index,
                            form: form.to_string(),
                        });
                    }
                    word = Some(w);
                    pos += 1;
                }
                _ => {
                    return Err(AlignError::Mismatch {
                        index,
                        form: form.to_string(),
                        offset: pos,
                    })
                }
            }
        }
        if !any {
            return Err(AlignError::EmptyToken { index });
        }
        word_of_token.push(word.expect("nonempty token"));
    }
    if pos < chars.len() {
        return Err(AlignError::TrailingText {
            rest: chars[pos..].iter().map(|(c, _)| c).collect(),
        });
    }
    let mut ranges: Vec<Range<usize>> = Vec::new();
    for (t, &w) in word_of_token.iter().enumerate() {
        if w == ranges.len() {
            ranges.push(t..t + 1);
        } else {
            ranges.last_mut().expect("word already opened").end = t + 1;
        }
    }
    Ok(ranges)
}

/// Sums token values within each word range.
pub fn sum_by_word<T>(values: &[T], words: &[Range<usize>]) -> Vec<T>
where
    T: Copy + std::iter::Sum<T>,
{
    words
        .iter()
        .map(|r| values[r.clone()].iter().copied().sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_token_per_word() {
        let r = align_to_words(&["Mary", "met", "John"], "Mary met John").unwrap();
        assert_eq!(r, vec![0..1, 1..2, 2..3]);
        assert_eq!(sum_by_word(&[1u32, 1, 0], &r), vec![1, 1, 0]);
    }

    #[test]
    fn contraction_sums() {
        let r = align_to_words(&["I", "do", "n't"], "I don't").unwrap();
        assert_eq!(r, vec![0..1, 1..3]);
        assert_eq!(sum_by_word(&[0u32, 1, 2], &r), vec![0, 3]);
    }

    #[test]
    fn trailing_punctuation_joins_previous_word() {
        let r = align_to_words(&["It", "ended", "."], "It ended.").unwrap();
        assert_eq!(r, vec![0..1, 1..3]);
        assert_eq!(sum_by_word(&[1.5, 0.5, 0.25], &r), vec![1.5, 0.75]);
    }

    #[test]
    fn errors_name_the_token() {
        assert_eq!(
            align_to_words(&["a", "x"], "a b"),
            Err(AlignError::Mismatch {
                index: 1,
                form: "x".into(),
                offset: 1
            })
        );
        assert_eq!(
            align_to_words(&["ab"], "a b"),
            Err(AlignError::SpansWords {
                index: 0,
                form: "ab".into()
            })
        );
        assert!(matches!(
            align_to_words(&["a"], "a b"),
            Err(AlignError::TrailingText { .. })
        ));
        assert!(matches!(
            align_to_words(&["a", ""], "a"),
            Err(AlignError::EmptyToken { index: 1 })
        ));
    }
}
