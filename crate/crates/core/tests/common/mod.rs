//! Independent oracles and fixtures shared by the integration tests.
//!
//! Nothing here calls into the library's numeric code: every oracle is the
//! slowest, most literal reading of its definition.

#![allow(dead_code)]

use std::sync::OnceLock;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use regex::Regex;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize, d: usize, sigma: f64) -> Array2<f32> {
    Array2::from_shape_simple_fn((n, d), || {
        let z: f64 = StandardNormal.sample(rng);
        (z * sigma) as f32
    })
}

// ---------------------------------------------------------------- retrieval

/// All other rows by ascending squared L2 distance, ties by index.
pub fn oracle_ranking(v: &Array2<f32>, query: usize) -> Vec<usize> {
    let mut keyed = Vec::new();
    for i in 0..v.nrows() {
        if i == query {
            continue;
        }
        let mut s = 0.0f64;
        for j in 0..v.ncols() {
            let diff = v[[query, j]] as f64 - v[[i, j]] as f64;
            s += diff * diff;
        }
        keyed.push((s, i));
    }
    keyed.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, i)| i).collect()
}

pub fn oracle_precision(labels: &[String], ranking: &[usize], query: usize, k: usize) -> f64 {
    let mut same = 0;
    for &i in &ranking[..k] {
        if labels[i] == labels[query] {
            same += 1;
        }
    }
    same as f64 / k as f64
}

pub fn oracle_r(labels: &[String], query: usize) -> usize {
    labels.iter().filter(|l| **l == labels[query]).count() - 1
}

pub fn oracle_map_at_r(labels: &[String], ranking: &[usize], query: usize) -> f64 {
    let r = oracle_r(labels, query);
    let mut hits = 0;
    let mut total = 0.0;
    for (pos, &i) in ranking[..r].iter().enumerate() {
        if labels[i] == labels[query] {
            hits += 1;
            total += hits as f64 / (pos + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        total / hits as f64
    }
}

/// Two clusters of `n_each` rows; the second is shifted by `separation`
/// along the first axis. Labels "A" then "B".
pub fn two_clusters(seed: u64, n_each: usize, d: usize, separation: f64) -> (Array2<f32>, Vec<String>) {
    let mut r = rng(seed);
    let mut v = gaussian(&mut r, 2 * n_each, d, 1.0);
    for i in n_each..2 * n_each {
        v[[i, 0]] += separation as f32;
    }
    let labels = (0..2 * n_each)
        .map(|i| if i < n_each { "A" } else { "B" }.to_string())
        .collect();
    (v, labels)
}

// ------------------------------------------------------------------ pooling

pub struct RandomDoc {
    pub tokens: Vec<String>,
    pub mask: Vec<bool>,
    pub rows: Array2<f32>,
}

const PIECES: &[&str] = &[
    "the", "neuro", "##physiology", "cortex", "##al", "a", "##s", "hippocampus", "fmri", "##ing",
    "of", "synaptic", "β", "##ergic", "<NUM>", "plasticity", "in", "##tion",
];

/// `[CLS] tokens... [SEP]` with at least one regular token.
pub fn random_doc(rng: &mut ChaCha8Rng, max_regular: usize, d: usize) -> RandomDoc {
    let n = rng.random_range(1..=max_regular);
    let mut tokens = vec!["[CLS]".to_string()];
    for _ in 0..n {
        tokens.push(PIECES[rng.random_range(0..PIECES.len())].to_string());
    }
    tokens.push("[SEP]".to_string());
    let mut mask = vec![false; tokens.len()];
    mask[0] = true;
    *mask.last_mut().unwrap() = true;
    let rows = Array2::from_shape_simple_fn((tokens.len(), d), || rng.random_range(-3.0f32..3.0));
    RandomDoc { tokens, mask, rows }
}

fn mean_rows(rows: &Array2<f32>, idx: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0f64; rows.ncols()];
    for j in 0..rows.ncols() {
        let mut s = 0.0;
        for &i in idx {
            s += rows[[i, j]] as f64;
        }
        out[j] = s / idx.len() as f64;
    }
    out
}

pub fn oracle_mean_tokens(doc: &RandomDoc) -> Vec<f64> {
    let idx: Vec<usize> = (0..doc.tokens.len()).filter(|&i| !doc.mask[i]).collect();
    mean_rows(&doc.rows, &idx)
}

pub fn oracle_cls(doc: &RandomDoc) -> Vec<f64> {
    doc.rows.row(0).iter().map(|&x| x as f64).collect()
}

pub fn oracle_long_tokens(doc: &RandomDoc, min_chars: usize, marker: &str) -> (Vec<f64>, bool) {
    let idx: Vec<usize> = (0..doc.tokens.len())
        .filter(|&i| !doc.mask[i])
        .filter(|&i| {
            let t = &doc.tokens[i];
            let core = t.strip_prefix(marker).unwrap_or(t);
            core.chars().count() >= min_chars
        })
        .collect();
    if idx.is_empty() {
        (oracle_mean_tokens(doc), true)
    } else {
        (mean_rows(&doc.rows, &idx), false)
    }
}

pub fn oracle_cls_concat_mean(doc: &RandomDoc) -> Vec<f64> {
    let mut v = oracle_cls(doc);
    v.extend(oracle_mean_tokens(doc));
    v
}

/// Word groups: a continuation piece extends the word when the previous
/// token is a regular token, otherwise it starts a new word.
pub fn oracle_groups(tokens: &[String], mask: &[bool], marker: &str) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..tokens.len() {
        if mask[i] {
            continue;
        }
        let continues = tokens[i].starts_with(marker) && i > 0 && !mask[i - 1] && !groups.is_empty();
        if continues {
            groups.last_mut().unwrap().push(i);
        } else {
            groups.push(vec![i]);
        }
    }
    groups
}

pub fn oracle_mean_words(doc: &RandomDoc, marker: &str) -> Vec<f64> {
    let groups = oracle_groups(&doc.tokens, &doc.mask, marker);
    let words: Vec<Vec<f64>> = groups.iter().map(|g| mean_rows(&doc.rows, g)).collect();
    let d = doc.rows.ncols();
    (0..d)
        .map(|j| words.iter().map(|w| w[j]).sum::<f64>() / words.len() as f64)
        .collect()
}

/// Normalize each in-vocabulary vector, then average.
pub fn oracle_static(words: &[&str], vocab: &[(&str, Vec<f32>)]) -> Option<Vec<f64>> {
    let mut units = Vec::new();
    for w in words {
        if let Some((_, v)) = vocab.iter().find(|(k, _)| k == w) {
            let n: f64 = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
            if n > 0.0 {
                units.push(v.iter().map(|&x| x as f64 / n).collect::<Vec<f64>>());
            }
        }
    }
    if units.is_empty() {
        return None;
    }
    let d = units[0].len();
    Some(
        (0..d)
            .map(|j| units.iter().map(|u| u[j]).sum::<f64>() / units.len() as f64)
            .collect(),
    )
}

pub fn max_abs_diff(a: &[f32], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y).abs())
        .fold(0.0, f64::max)
}

// -------------------------------------------------------------------- text

/// Regex restatement of the masking rule: an optional run of comparison
/// operators, then alphanumeric runs joined by single `.` or `,`; masked
/// when it contains an ASCII digit.
pub fn oracle_mask(text: &str) -> String {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"[<>=~±≤≥≈]*[\p{Alphabetic}\p{N}]+(?:[.,][\p{Alphabetic}\p{N}]+)*").unwrap()
    });
    re.replace_all(text, |caps: &regex::Captures| {
        let m = &caps[0];
        if m.bytes().any(|b| b.is_ascii_digit()) {
            "<NUM>".to_string()
        } else {
            m.to_string()
        }
    })
    .into_owned()
}

/// Hand-labeled (input, expected) pairs for `mask_numbers`.
pub const MASK_TABLE: &[(&str, &str)] = &[
    ("p<0.05).", "p<NUM>)."),
    ("no digits here", "no digits here"),
    ("10,000 samples", "<NUM> samples"),
    ("we studied 12 patients.", "we studied <NUM> patients."),
    ("", ""),
    ("42", "<NUM>"),
    ("3.14159", "<NUM>"),
    ("-5 degrees", "-<NUM> degrees"),
    ("+3 db", "+<NUM> db"),
    ("n = 30", "n = <NUM>"),
    ("n=30", "n<NUM>"),
    ("p ≤ 0.001", "p ≤ <NUM>"),
    ("p≤0.001", "p<NUM>"),
    ("r ~ 0.8", "r ~ <NUM>"),
    ("age >65 years", "age <NUM> years"),
    ("(n = 12)", "(n = <NUM>)"),
    ("[12]", "[<NUM>]"),
    ("fig. 3a", "fig. <NUM>"),
    ("il-6 levels", "il-<NUM> levels"),
    ("covid-19", "covid-<NUM>"),
    ("5-ht receptors", "<NUM>-ht receptors"),
    ("1990s", "<NUM>"),
    ("3t mri", "<NUM> mri"),
    ("ca1 neurons", "<NUM> neurons"),
    ("h2o", "<NUM>"),
    ("50%", "<NUM>%"),
    ("1:1000 dilution", "<NUM>:<NUM> dilution"),
    ("2019/2020", "<NUM>/<NUM>"),
    ("1.5-2.0 mm", "<NUM>-<NUM> mm"),
    ("10^6 cells", "<NUM>^<NUM> cells"),
    ("1e-3", "<NUM>-<NUM>"),
    ("0.5±0.1", "<NUM><NUM>"),
    ("0.5 ± 0.1", "<NUM> ± <NUM>"),
    ("end of sentence 7.", "end of sentence <NUM>."),
    ("list: 1, 2, 3.", "list: <NUM>, <NUM>, <NUM>."),
    ("1,2,3", "<NUM>"),
    ("version 2.0.1", "version <NUM>"),
    ("a.b.c", "a.b.c"),
    ("e.g. this", "e.g. this"),
    ("<NUM> already", "<NUM> already"),
    ("<<NUM>>", "<<NUM>>"),
    ("x<<5", "x<NUM>"),
    ("a < b", "a < b"),
    ("a<b", "a<b"),
    ("tab\t9\tseparated", "tab\t<NUM>\tseparated"),
    ("line\n2", "line\n<NUM>"),
    ("β2-adrenergic", "<NUM>-adrenergic"),
    ("٣ arabic digit", "٣ arabic digit"),
    ("１２ fullwidth", "１２ fullwidth"),
    ("mid-2000s trend", "mid-<NUM> trend"),
];
