use std::collections::HashMap;
use std::io::{self, BufRead};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WordVectorError {
    #[error("bad header line {0:?}, expected \"<count> <dim>\"")]
    BadHeader(String),
    #[error("line {line}: expected {expected} values, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: {value:?} is not a finite number")]
    BadValue { line: usize, value: String },
    #[error("header declares {declared} words, file has {found}")]
    Truncated { declared: usize, found: usize },
    #[error("line {line}: more entries than the {declared} declared")]
    Excess { line: usize, declared: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Static word vectors keyed by surface form.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WordVectorTable {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl WordVectorTable {
    pub fn new(dim: usize) -> Self {
        WordVectorTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    /// Adds `word` unless already present. Returns whether it was inserted.
    ///
    /// # Panics
    /// If `vector.len()` differs from the table dimension.
    pub fn insert(&mut self, word: &str, vector: Vec<f32>) -> bool {
        assert_eq!(vector.len(), self.dim, "word vector dimension");
        if self.vectors.contains_key(word) {
            return false;
        }
        self.vectors.insert(word.to_string(), vector);
        true
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// `None` marks an out-of-vocabulary word.
    pub fn lookup(&self, word: &str) -> Option<&[f32]> {
        self.vectors.get(word).map(Vec::as_slice)
    }
}

/// Parses the text interchange format: a `"<count> <dim>"` header, then one
/// word and its values per line. Duplicate words keep their first vector.
pub fn load_word_vectors<R: BufRead>(source: R) -> Result<WordVectorTable, WordVectorError> {
    let mut lines = source.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| WordVectorError::BadHeader(String::new()))?;
    let mut parts = header.split_whitespace();
    let parsed = (
        parts.next().and_then(|c| c.parse::<usize>().ok()),
        parts.next().and_then(|d| d.parse::<usize>().ok()),
        parts.next(),
    );
    let (declared, dim) = match parsed {
        (Some(count), Some(dim), None) if dim > 0 => (count, dim),
        _ => return Err(WordVectorError::BadHeader(header)),
    };

    let mut table = WordVectorTable::new(dim);
    let mut entries = 0;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if entries == declared {
            return Err(WordVectorError::Excess {
                line: line_no,
                declared,
            });
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-empty line");
        let values = fields
            .map(|v| match v.parse::<f32>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(WordVectorError::BadValue {
                    line: line_no,
                    value: v.to_string(),
                }),
            })
            .collect::<Result<Vec<f32>, _>>()?;
        if values.len() != dim {
            return Err(WordVectorError::DimensionMismatch {
                line: line_no,
                expected: dim,
                found: values.len(),
            });
        }
        table.insert(word, values);
        entries += 1;
    }
    if entries != declared {
        return Err(WordVectorError::Truncated {
            declared,
            found: entries,
        });
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "3 4\n\
        neuron 0.5 -1.25 2 0\n\
        cortex 1 1 1 1\n\
        spike -0.125 0 0 3.5\n";

    #[test]
    fn three_word_fixture() {
        let table = load_word_vectors(FIXTURE.as_bytes()).unwrap();
        assert_eq!(table.len(), 3);
        assert_eq!(table.dim(), 4);
        assert_eq!(table.lookup("neuron").unwrap(), &[0.5, -1.25, 2.0, 0.0]);
        assert_eq!(table.lookup("cortex").unwrap(), &[1.0; 4]);
        assert_eq!(table.lookup("spike").unwrap(), &[-0.125, 0.0, 0.0, 3.5]);
        assert_eq!(table.lookup("missing"), None);
    }

    #[test]
    fn truncated_file() {
        let text = "5 2\na 1 2\nb 1 2\nc 1 2\nd 1 2\n";
        assert!(matches!(
            load_word_vectors(text.as_bytes()),
            Err(WordVectorError::Truncated {
                declared: 5,
                found: 4
            })
        ));
    }

    #[test]
    fn dimension_error_names_line() {
        let text = "2 3\na 1 2 3\nb 1 2\n";
        assert!(matches!(
            load_word_vectors(text.as_bytes()),
            Err(WordVectorError::DimensionMismatch { line: 3, .. })
        ));
    }

    #[test]
    fn duplicates_keep_first() {
        let text = "2 1\nw 1\nw 2\n";
        let table = load_word_vectors(text.as_bytes()).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table.lookup("w").unwrap(), &[1.0]);
    }

    #[test]
    fn bad_header_and_excess() {
        assert!(matches!(
            load_word_vectors("three 4\n".as_bytes()),
            Err(WordVectorError::BadHeader(_))
        ));
        assert!(matches!(
            load_word_vectors("1 1\na 1\nb 2\n".as_bytes()),
            Err(WordVectorError::Excess { line: 3, .. })
        ));
    }
}
