//! Title/abstract normalization applied before text reaches an encoder.
//!
//! The pipeline is: trim both fields, join them with a period separator,
//! lowercase, then replace every digit-bearing word with [`NUM_TOKEN`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::PubRecord;

/// Literal mask emitted in place of numbers. Kept uppercase after lowercasing.
pub const NUM_TOKEN: &str = "<NUM>";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PrepError {
    #[error("title is empty after trimming")]
    EmptyTitle,
    #[error("abstract is empty or absent")]
    EmptyAbstract,
}

/// Text exactly as handed to an encoder, tagged with the record it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedText {
    pub source_pmid: u64,
    pub text: String,
}

impl NormalizedText {
    pub fn from_record(record: &PubRecord) -> Result<Self, PrepError> {
        let abstract_text = record.abstract_text.as_deref().unwrap_or("");
        Ok(NormalizedText {
            source_pmid: record.pmid,
            text: normalize(&record.title, abstract_text)?,
        })
    }
}

/// Joins title and abstract, lowercases, and masks numbers.
///
/// A title that already ends in `.`, `!` or `?` is followed by a single space
/// instead of `". "`.
pub fn normalize(title: &str, abstract_text: &str) -> Result<String, PrepError> {
    let title = title.trim();
    let abstract_text = abstract_text.trim();
    if title.is_empty() {
        return Err(PrepError::EmptyTitle);
    }
    if abstract_text.is_empty() {
        return Err(PrepError::EmptyAbstract);
    }

    let separator = if title.ends_with(['.', '!', '?']) {
        " "
    } else {
        ". "
    };
    let joined = format!("{title}{separator}{abstract_text}");
    Ok(mask_numbers(&joined.to_lowercase()))
}

/// Replaces every digit-bearing word with [`NUM_TOKEN`].
///
/// A word is a maximal run of alphanumeric characters, where a single `.` or
/// `,` between two alphanumerics stays inside the word (so `0.05` and
/// `10,000` are one word each). A run of comparison operators directly in
/// front of a digit-bearing word belongs to the number and is masked with
/// it (`p<0.05` becomes `p<NUM>`). Everything else (whitespace, brackets,
/// trailing punctuation) is copied through untouched. Only ASCII digits
/// trigger masking.
pub fn mask_numbers(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_alphanumeric() {
            out.push(chars[i]);
            i += 1;
            continue;
        }

        let start = i;
        let mut has_digit = false;
        loop {
            while i < chars.len() && chars[i].is_alphanumeric() {
                has_digit |= chars[i].is_ascii_digit();
                i += 1;
            }
            let joins = i + 1 < chars.len()
                && matches!(chars[i], '.' | ',')
                && chars[i + 1].is_alphanumeric();
            if !joins {
                break;
            }
            i += 1;
        }

        if has_digit {
            let mut op = start;
            while op > 0 && is_comparison(chars[op - 1]) {
                op -= 1;
            }
            let strip: usize = chars[op..start].iter().map(|c| c.len_utf8()).sum();
            out.truncate(out.len() - strip);
            out.push_str(NUM_TOKEN);
        } else {
            out.extend(&chars[start..i]);
        }
    }
    out
}

fn is_comparison(c: char) -> bool {
    matches!(c, '<' | '>' | '=' | '~' | '±' | '≤' | '≥' | '≈')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize("Deep Learning", "We studied 12 patients.").unwrap(),
            "deep learning. we studied <NUM> patients."
        );
        assert_eq!(normalize("A?", "B").unwrap(), "a? b");
        assert_eq!(normalize("X", "Y").unwrap(), "x. y");
        assert_eq!(normalize("  Title.  ", " Body ").unwrap(), "title. body");
    }

    #[test]
    fn normalize_rejects_empty_fields() {
        assert_eq!(normalize("  ", "abstract"), Err(PrepError::EmptyTitle));
        assert_eq!(normalize("title", "\n\t"), Err(PrepError::EmptyAbstract));
    }

    #[test]
    fn mask_examples() {
        assert_eq!(mask_numbers("p<0.05)."), "p<NUM>).");
        assert_eq!(mask_numbers("no digits here"), "no digits here");
        assert_eq!(mask_numbers("10,000 samples"), "<NUM> samples");
        assert_eq!(mask_numbers("n = 12, r=0.4"), "n = <NUM>, r<NUM>");
        assert_eq!(mask_numbers("a < b"), "a < b");
    }

    #[test]
    fn mask_is_idempotent_on_mask_token() {
        assert_eq!(mask_numbers("<NUM>"), "<NUM>");
        assert_eq!(mask_numbers("a <NUM>, b"), "a <NUM>, b");
    }

    #[test]
    fn record_without_abstract_is_rejected() {
        let record = PubRecord {
            pmid: 1,
            title: "Only a title".into(),
            abstract_text: None,
            journal: "J".into(),
            year: None,
        };
        assert_eq!(
            NormalizedText::from_record(&record),
            Err(PrepError::EmptyAbstract)
        );
    }
}
