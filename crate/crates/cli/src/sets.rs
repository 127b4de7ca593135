//! `name=source` element-set specifications for the `metrics` subcommand.
//!
//! Sources:
//! - `journal:<title>`: every document of that journal embedded in `--space`
//! - `pmids:<file>`: pmids listed one per line (`#` starts a comment)
//! - `emb:<file>`: an EMB1 shard, independent of the store

use std::fs::{self, File};
use std::io::BufReader;

use anyhow::{Context, Result};
use ndarray::Array2;
use semmap::emb::{read_emb, widen};
use semmap::metrics::ElementSet;
use semmap::store::CorpusStore;

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetSource {
    Journal(String),
    Pmids(String),
    Emb(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetSpec {
    pub name: String,
    pub source: SetSource,
}

impl SetSpec {
    pub fn parse(spec: &str) -> Result<Self, UsageError> {
        let bad = || UsageError(format!("bad set {spec:?}; expected name=journal:<title>, name=pmids:<file> or name=emb:<file>"));
        let (name, source) = spec.split_once('=').ok_or_else(bad)?;
        let (kind, value) = source.split_once(':').ok_or_else(bad)?;
        if name.is_empty() || value.is_empty() {
            return Err(bad());
        }
        let source = match kind {
            "journal" => SetSource::Journal(value.to_string()),
            "pmids" => SetSource::Pmids(value.to_string()),
            "emb" => SetSource::Emb(value.to_string()),
            _ => return Err(bad()),
        };
        Ok(SetSpec {
            name: name.to_string(),
            source,
        })
    }

    pub fn needs_store(&self) -> bool {
        !matches!(self.source, SetSource::Emb(_))
    }
}

pub fn read_pmid_list(path: &str) -> Result<Vec<u64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let line = line.split('#').next().unwrap_or("").trim();
            (!line.is_empty()).then_some((i, line))
        })
        .map(|(i, line)| {
            line.parse::<u64>()
                .with_context(|| format!("{path}:{}: not a pmid: {line:?}", i + 1))
        })
        .collect()
}

/// Resolves a spec to vectors. Store-backed sources need `store` and `space`.
pub fn load_set(spec: &SetSpec, store: Option<(&CorpusStore, &str)>) -> Result<ElementSet> {
    let from_store = |pmids: Vec<u64>| -> Result<ElementSet> {
        let (store, space) = store.expect("checked by caller");
        let vectors = store.get_matrix(space, &pmids)?;
        Ok(ElementSet::new(&spec.name, vectors).with_ids(pmids))
    };
    match &spec.source {
        SetSource::Journal(title) => {
            let (store, space) = store.expect("checked by caller");
            let pmids: Vec<u64> = store
                .space_pmids(space)?
                .into_iter()
                .filter(|p| store.record(*p).is_some_and(|r| &r.journal == title))
                .collect();
            from_store(pmids)
        }
        SetSource::Pmids(path) => from_store(read_pmid_list(path)?),
        SetSource::Emb(path) => {
            let file = File::open(path).with_context(|| format!("opening {path}"))?;
            let shard = read_emb(BufReader::new(file)).with_context(|| format!("reading {path}"))?;
            let mut vectors = Array2::zeros((shard.entries.len(), shard.dim));
            let mut ids = Vec::with_capacity(shard.entries.len());
            for (mut row, (pmid, v)) in vectors.rows_mut().into_iter().zip(&shard.entries) {
                row.assign(&ndarray::ArrayView1::from(&widen(v)));
                ids.push(*pmid);
            }
            Ok(ElementSet::new(&spec.name, vectors).with_ids(ids))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_specs() {
        assert_eq!(
            SetSpec::parse("a=journal:NeuroImage: Clinical").unwrap(),
            SetSpec {
                name: "a".into(),
                source: SetSource::Journal("NeuroImage: Clinical".into())
            }
        );
        assert_eq!(
            SetSpec::parse("b=emb:x.emb").unwrap().source,
            SetSource::Emb("x.emb".into())
        );
        assert!(SetSpec::parse("noequals").is_err());
        assert!(SetSpec::parse("a=files:x").is_err());
        assert!(SetSpec::parse("=pmids:x").is_err());
    }
}
