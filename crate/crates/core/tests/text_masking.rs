mod common;

use common::{oracle_mask, rng, MASK_TABLE};
use proptest::prelude::*;
use rand::Rng;
use semmap::text::{mask_numbers, normalize, NUM_TOKEN};

const ALPHABET: &[char] = &[
    'a', 'b', 'z', 'e', 'n', 'p', 'A', 'Q', 'É', 'é', 'β', 'ß', '0', '1', '5', '9', '٣', '１', ' ', ' ',
    '\t', '\n', '.', ',', '-', '+', '(', ')', '[', '%', ':', '/', '^', '<', '>', '=', '~', '±', '≤', '≥',
    '≈', '#', '\'', '"', '?', '!',
];

fn random_text(r: &mut impl Rng, max_len: usize) -> String {
    let n = r.random_range(0..=max_len);
    (0..n).map(|_| ALPHABET[r.random_range(0..ALPHABET.len())]).collect()
}

#[test]
fn hand_labeled_table() {
    assert_eq!(MASK_TABLE.len(), 50);
    for (input, expected) in MASK_TABLE {
        assert_eq!(mask_numbers(input), *expected, "input {input:?}");
    }
}

#[test]
fn regex_restatement_agrees_on_table_and_fuzz() {
    for (input, _) in MASK_TABLE {
        assert_eq!(mask_numbers(input), oracle_mask(input), "input {input:?}");
    }
    let mut r = rng(11);
    for _ in 0..20_000 {
        let s = random_text(&mut r, 40);
        assert_eq!(mask_numbers(&s), oracle_mask(&s), "input {s:?}");
    }
}

#[test]
fn fuzzed_normalize_output_has_no_ascii_digit() {
    let mut r = rng(7);
    let mut checked = 0;
    while checked < 100_000 {
        let title = random_text(&mut r, 30);
        let abstract_text = random_text(&mut r, 60);
        let Ok(out) = normalize(&title, &abstract_text) else {
            continue;
        };
        checked += 1;
        assert!(
            !out.bytes().any(|b| b.is_ascii_digit()),
            "{title:?} / {abstract_text:?} -> {out:?}"
        );
        assert_eq!(mask_numbers(&out), out, "not idempotent: {out:?}");
    }
}

#[test]
fn normalize_lowercases_and_joins() {
    assert_eq!(
        normalize("Effects of 5 Drugs", "We found P<0.05.").unwrap(),
        "effects of <NUM> drugs. we found p<NUM>."
    );
    assert_eq!(normalize("Done?", "Yes.").unwrap(), "done? yes.");
    assert!(normalize("  ", "x").is_err());
    assert!(normalize("x", "\n").is_err());
}

proptest! {
    #[test]
    fn masking_is_idempotent(s in "[a-zA-Z0-9 .,<>=±%()-]{0,40}") {
        let once = mask_numbers(&s);
        prop_assert_eq!(mask_numbers(&once), once.clone());
        prop_assert!(!once.bytes().any(|b| b.is_ascii_digit()));
    }

    #[test]
    fn digit_free_text_passes_through(s in "[a-z ,.;()<>=-]{0,40}") {
        prop_assert_eq!(mask_numbers(&s), s);
    }

    #[test]
    fn every_number_becomes_one_token(words in prop::collection::vec(0u32..100_000, 1..8)) {
        let text = words.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" and ");
        let masked = mask_numbers(&text);
        prop_assert_eq!(masked.matches(NUM_TOKEN).count(), words.len());
    }
}
