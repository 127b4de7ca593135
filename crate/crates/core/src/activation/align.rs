/// WordPiece-style continuation prefix.
pub const DEFAULT_CONTINUATION_MARKER: &str = "##";

/// Contiguous groups of token indices, one per surface word.
/// Special tokens belong to no group.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WordAlignment {
    pub groups: Vec<Vec<usize>>,
}

impl WordAlignment {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

/// Groups subword tokens into words.
///
/// A regular token starting with `marker` extends the group of the token
/// immediately before it; any other regular token opens a new group. A
/// continuation token that follows a special token (or starts the sequence)
/// opens its own group, which keeps every group contiguous.
pub fn align_subwords(tokens: &[String], special_mask: &[bool], marker: &str) -> WordAlignment {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut previous_regular = false;
    for (i, (token, &special)) in tokens.iter().zip(special_mask).enumerate() {
        if special {
            previous_regular = false;
            continue;
        }
        let continues = !marker.is_empty() && token.starts_with(marker);
        match groups.last_mut() {
            Some(group) if continues && previous_regular => group.push(i),
            _ => groups.push(vec![i]),
        }
        previous_regular = true;
    }
    WordAlignment { groups }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(tokens: &[&str]) -> Vec<String> {
        tokens.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn wordpiece_example() {
        let tokens = s(&["[CLS]", "neuro", "##physiology", "of", "[SEP]"]);
        let mask = [true, false, false, false, true];
        assert_eq!(
            align_subwords(&tokens, &mask, "##").groups,
            vec![vec![1, 2], vec![3]]
        );
    }

    #[test]
    fn all_special_gives_no_groups() {
        let tokens = s(&["[CLS]", "[SEP]"]);
        assert!(align_subwords(&tokens, &[true, true], "##").is_empty());
    }

    #[test]
    fn no_continuations_gives_singletons() {
        let tokens = s(&["a", "b", "c"]);
        assert_eq!(
            align_subwords(&tokens, &[false; 3], "##").groups,
            vec![vec![0], vec![1], vec![2]]
        );
    }

    #[test]
    fn orphan_continuations_open_groups() {
        let tokens = s(&["##x", "[SEP]", "##y", "##z"]);
        assert_eq!(
            align_subwords(&tokens, &[false, true, false, false], "##").groups,
            vec![vec![0], vec![2, 3]]
        );
    }

    #[test]
    fn custom_marker() {
        let tokens = s(&["▁neuro", "physio", "▁of"]);
        // sentencepiece marks word starts, not continuations; with an empty
        // marker nothing continues
        assert_eq!(align_subwords(&tokens, &[false; 3], "").len(), 3);
        let tokens = s(&["neuro", "@@phys", "of"]);
        assert_eq!(
            align_subwords(&tokens, &[false; 3], "@@").groups,
            vec![vec![0, 1], vec![2]]
        );
    }
}
