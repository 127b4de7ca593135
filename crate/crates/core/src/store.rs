//! On-disk corpus store.
//!
//! Layout under the store root:
//!
//! ```text
//! records.jsonl          one PubRecord per line, ordered by pmid
//! manifest.json          counts and the space dimension table
//! spaces/<space_id>.emb  EMB1 shard per embedding space
//! ```
//!
//! Every file is replaced by writing a sibling temporary and renaming it, so
//! a concurrent reader only ever observes a complete file.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use half::f16;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emb::{self, EmbError};
use crate::ingest::{validate_record, PubRecord, Verdict};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("bad record on line {line} of records.jsonl: {message}")]
    BadRecord { line: usize, message: String },
    #[error("bad manifest: {0}")]
    BadManifest(String),
    #[error("shard {space_id}: {source}")]
    Shard {
        space_id: String,
        #[source]
        source: EmbError,
    },
    #[error("invalid space id {0:?} (allowed: ASCII letters, digits, '_', '-', '.')")]
    InvalidSpaceId(String),
    #[error("unknown embedding space {0:?}")]
    UnknownSpace(String),
    #[error("space {space_id} is registered with dimension {declared}, got {actual}")]
    DimensionMismatch {
        space_id: String,
        declared: usize,
        actual: usize,
    },
    #[error("embedding for pmid {pmid} is not finite at half precision")]
    NonFinite { pmid: u64 },
    #[error("{} pmid(s) have no embedding in space {space_id} (first: {})", missing.len(), missing[0])]
    Missing { space_id: String, missing: Vec<u64> },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One embedding at rest.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredEmbedding {
    pub pmid: u64,
    pub space_id: String,
    pub vector: Vec<f16>,
}

impl StoredEmbedding {
    /// Quantizes a single-precision vector to half precision.
    pub fn quantize(pmid: u64, space_id: &str, values: &[f32]) -> Result<Self, StoreError> {
        let vector = emb::quantize(values).ok_or(StoreError::NonFinite { pmid })?;
        Ok(StoredEmbedding {
            pmid,
            space_id: space_id.to_string(),
            vector,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub record_count: usize,
    pub spaces: BTreeMap<String, usize>,
    pub journals: BTreeMap<String, usize>,
    pub years: BTreeMap<String, usize>,
}

/// Record filter. `None` fields match everything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordQuery {
    pub journal: Option<String>,
    pub year: Option<i32>,
    pub require_abstract: bool,
}

impl RecordQuery {
    pub fn matches(&self, record: &PubRecord) -> bool {
        self.journal.as_ref().is_none_or(|j| &record.journal == j)
            && self.year.is_none_or(|y| record.year == Some(y))
            && (!self.require_abstract
                || validate_record(record) == Verdict::EligibleForEncoding)
    }
}

/// Result of looking one pmid up in a space.
#[derive(Debug, Clone, PartialEq)]
pub enum Lookup {
    Found(Vec<f32>),
    Missing(u64),
}

#[derive(Debug, Clone, Default)]
struct Shard {
    dim: usize,
    vectors: BTreeMap<u64, Vec<f16>>,
}

#[derive(Debug)]
pub struct CorpusStore {
    root: PathBuf,
    records: BTreeMap<u64, PubRecord>,
    shards: BTreeMap<String, Shard>,
}

pub fn valid_space_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b'.'))
}

impl CorpusStore {
    /// Opens the store at `root`, creating an empty one if nothing is there.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        let spaces_dir = root.join("spaces");
        fs::create_dir_all(&spaces_dir).map_err(io_err(&spaces_dir))?;

        let mut store = CorpusStore {
            root,
            records: BTreeMap::new(),
            shards: BTreeMap::new(),
        };
        store.load_records()?;
        store.load_shards()?;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn records_path(&self) -> PathBuf {
        self.root.join("records.jsonl")
    }

    fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    fn shard_path(&self, space_id: &str) -> PathBuf {
        self.root.join("spaces").join(format!("{space_id}.emb"))
    }

    /// Directory holding per-space artifacts (shards, fitted transforms).
    pub fn spaces_dir(&self) -> PathBuf {
        self.root.join("spaces")
    }

    fn load_records(&mut self) -> Result<(), StoreError> {
        let path = self.records_path();
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(()),
            Err(e) => return Err(io_err(&path)(e)),
        };
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(io_err(&path))?;
            if line.is_empty() {
                continue;
            }
            let record: PubRecord =
                serde_json::from_str(&line).map_err(|e| StoreError::BadRecord {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            self.records.insert(record.pmid, record);
        }
        Ok(())
    }

    fn load_shards(&mut self) -> Result<(), StoreError> {
        let path = self.manifest_path();
        let manifest: StoreManifest = match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map_err(|e| StoreError::BadManifest(e.to_string()))?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(()),
            Err(e) => return Err(io_err(&path)(e)),
        };
        for (space_id, dim) in manifest.spaces {
            if !valid_space_id(&space_id) {
                return Err(StoreError::InvalidSpaceId(space_id));
            }
            let path = self.shard_path(&space_id);
            let mut shard = Shard {
                dim,
                vectors: BTreeMap::new(),
            };
            match File::open(&path) {
                Ok(file) => {
                    let decoded = emb::read_emb(BufReader::new(file)).map_err(|source| {
                        StoreError::Shard {
                            space_id: space_id.clone(),
                            source,
                        }
                    })?;
                    if decoded.dim != dim {
                        return Err(StoreError::DimensionMismatch {
                            space_id,
                            declared: dim,
                            actual: decoded.dim,
                        });
                    }
                    shard.vectors.extend(decoded.entries);
                }
                Err(e) if e.kind() == io::ErrorKind::NotFound => {}
                Err(e) => return Err(io_err(&path)(e)),
            }
            self.shards.insert(space_id, shard);
        }
        Ok(())
    }

    fn replace_file(
        &self,
        path: &Path,
        write: impl FnOnce(&mut BufWriter<File>) -> Result<(), StoreError>,
    ) -> Result<(), StoreError> {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let tmp = path.with_file_name(format!(".{name}.tmp"));
        let file = File::create(&tmp).map_err(io_err(&tmp))?;
        let mut writer = BufWriter::new(file);
        write(&mut writer)?;
        let file = writer
            .into_inner()
            .map_err(|e| io_err(&tmp)(e.into_error()))?;
        file.sync_all().map_err(io_err(&tmp))?;
        fs::rename(&tmp, path).map_err(io_err(path))
    }

    fn commit_records(&self) -> Result<(), StoreError> {
        let path = self.records_path();
        self.replace_file(&path, |w| {
            for record in self.records.values() {
                let line = serde_json::to_string(record).expect("records serialize");
                w.write_all(line.as_bytes()).map_err(io_err(&path))?;
                w.write_all(b"\n").map_err(io_err(&path))?;
            }
            Ok(())
        })
    }

    fn commit_shard(&self, space_id: &str) -> Result<(), StoreError> {
        let shard = &self.shards[space_id];
        let path = self.shard_path(space_id);
        self.replace_file(&path, |w| {
            emb::write_emb(
                w,
                shard.dim,
                shard.vectors.iter().map(|(&p, v)| (p, v.as_slice())),
            )
            .map(|_| ())
            .map_err(|source| StoreError::Shard {
                space_id: space_id.to_string(),
                source,
            })
        })
    }

    fn commit_manifest(&self) -> Result<(), StoreError> {
        let path = self.manifest_path();
        let manifest = self.manifest();
        self.replace_file(&path, |w| {
            serde_json::to_writer_pretty(&mut *w, &manifest).expect("manifest serializes");
            w.write_all(b"\n").map_err(io_err(&path))
        })
    }

    /// Inserts or overwrites records keyed by pmid; returns how many were written.
    pub fn put_records<I>(&mut self, records: I) -> Result<usize, StoreError>
    where
        I: IntoIterator<Item = PubRecord>,
    {
        let mut written = 0;
        for record in records {
            self.records.insert(record.pmid, record);
            written += 1;
        }
        if written > 0 {
            self.commit_records()?;
            self.commit_manifest()?;
        }
        Ok(written)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, pmid: u64) -> Option<&PubRecord> {
        self.records.get(&pmid)
    }

    /// Records matching every filter in `query`, ordered by pmid.
    pub fn query(&self, query: &RecordQuery) -> Vec<&PubRecord> {
        self.records.values().filter(|r| query.matches(r)).collect()
    }

    pub fn manifest(&self) -> StoreManifest {
        let mut manifest = StoreManifest {
            record_count: self.records.len(),
            spaces: self
                .shards
                .iter()
                .map(|(id, s)| (id.clone(), s.dim))
                .collect(),
            ..Default::default()
        };
        for record in self.records.values() {
            *manifest.journals.entry(record.journal.clone()).or_default() += 1;
            let year = record
                .year
                .map_or_else(|| "unknown".to_string(), |y| y.to_string());
            *manifest.years.entry(year).or_default() += 1;
        }
        manifest
    }

    /// Declares a space and its dimension. Re-registering with the same
    /// dimension is a no-op.
    pub fn register_space(&mut self, space_id: &str, dim: usize) -> Result<(), StoreError> {
        if !valid_space_id(space_id) {
            return Err(StoreError::InvalidSpaceId(space_id.to_string()));
        }
        if let Some(shard) = self.shards.get(space_id) {
            if shard.dim != dim {
                return Err(StoreError::DimensionMismatch {
                    space_id: space_id.to_string(),
                    declared: shard.dim,
                    actual: dim,
                });
            }
            return Ok(());
        }
        self.shards.insert(
            space_id.to_string(),
            Shard {
                dim,
                vectors: BTreeMap::new(),
            },
        );
        self.commit_shard(space_id)?;
        self.commit_manifest()
    }

    pub fn space_dim(&self, space_id: &str) -> Option<usize> {
        self.shards.get(space_id).map(|s| s.dim)
    }

    pub fn space_ids(&self) -> Vec<String> {
        self.shards.keys().cloned().collect()
    }

    /// Pmids with an embedding in `space_id`, ascending.
    pub fn space_pmids(&self, space_id: &str) -> Result<Vec<u64>, StoreError> {
        let shard = self
            .shards
            .get(space_id)
            .ok_or_else(|| StoreError::UnknownSpace(space_id.to_string()))?;
        Ok(shard.vectors.keys().copied().collect())
    }

    pub fn put_embedding(&mut self, embedding: StoredEmbedding) -> Result<(), StoreError> {
        self.put_embeddings(std::iter::once(embedding)).map(|_| ())
    }

    /// Inserts a batch of embeddings, committing each touched shard once.
    /// The batch is validated in full before anything is stored.
    pub fn put_embeddings<I>(&mut self, embeddings: I) -> Result<usize, StoreError>
    where
        I: IntoIterator<Item = StoredEmbedding>,
    {
        let batch: Vec<StoredEmbedding> = embeddings.into_iter().collect();
        for e in &batch {
            let shard = self
                .shards
                .get(&e.space_id)
                .ok_or_else(|| StoreError::UnknownSpace(e.space_id.clone()))?;
            if e.vector.len() != shard.dim {
                return Err(StoreError::DimensionMismatch {
                    space_id: e.space_id.clone(),
                    declared: shard.dim,
                    actual: e.vector.len(),
                });
            }
            if !e.vector.iter().all(|h| h.is_finite()) {
                return Err(StoreError::NonFinite { pmid: e.pmid });
            }
        }
        let count = batch.len();
        let mut touched = std::collections::BTreeSet::new();
        for e in batch {
            let shard = self.shards.get_mut(&e.space_id).expect("validated above");
            shard.vectors.insert(e.pmid, e.vector);
            touched.insert(e.space_id);
        }
        for space_id in &touched {
            self.commit_shard(space_id)?;
        }
        Ok(count)
    }

    /// Looks up each pmid, widening stored values to single precision.
    pub fn get_embeddings(&self, space_id: &str, pmids: &[u64]) -> Result<Vec<Lookup>, StoreError> {
        let shard = self
            .shards
            .get(space_id)
            .ok_or_else(|| StoreError::UnknownSpace(space_id.to_string()))?;
        Ok(pmids
            .iter()
            .map(|&pmid| match shard.vectors.get(&pmid) {
                Some(v) => Lookup::Found(emb::widen(v)),
                None => Lookup::Missing(pmid),
            })
            .collect())
    }

    /// Like [`get_embeddings`](Self::get_embeddings) but as a dense matrix;
    /// any missing pmid is an error.
    pub fn get_matrix(&self, space_id: &str, pmids: &[u64]) -> Result<Array2<f32>, StoreError> {
        let dim = self
            .space_dim(space_id)
            .ok_or_else(|| StoreError::UnknownSpace(space_id.to_string()))?;
        let lookups = self.get_embeddings(space_id, pmids)?;
        let missing: Vec<u64> = lookups
            .iter()
            .filter_map(|l| match l {
                Lookup::Missing(p) => Some(*p),
                Lookup::Found(_) => None,
            })
            .collect();
        if !missing.is_empty() {
            return Err(StoreError::Missing {
                space_id: space_id.to_string(),
                missing,
            });
        }
        let mut out = Array2::zeros((pmids.len(), dim));
        for (mut row, lookup) in out.rows_mut().into_iter().zip(lookups) {
            if let Lookup::Found(v) = lookup {
                row.assign(&ndarray::ArrayView1::from(&v));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(pmid: u64, journal: &str, year: Option<i32>, abs: Option<&str>) -> PubRecord {
        PubRecord {
            pmid,
            title: format!("title {pmid}"),
            abstract_text: abs.map(Into::into),
            journal: journal.into(),
            year,
        }
    }

    #[test]
    fn empty_put_leaves_store_untouched() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = CorpusStore::open(dir.path()).unwrap();
        assert_eq!(store.put_records(Vec::new()).unwrap(), 0);
        assert!(!dir.path().join("records.jsonl").exists());
        assert!(store.is_empty());
    }

    #[test]
    fn duplicate_pmid_overwrites() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = CorpusStore::open(dir.path()).unwrap();
        store.put_records(vec![rec(1, "A", None, None)]).unwrap();
        store.put_records(vec![rec(1, "B", Some(2001), Some("x"))]).unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(store.record(1).unwrap().journal, "B");
        let reopened = CorpusStore::open(dir.path()).unwrap();
        assert_eq!(reopened.record(1).unwrap().journal, "B");
    }

    #[test]
    fn query_filters_combine() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = CorpusStore::open(dir.path()).unwrap();
        store
            .put_records(vec![
                rec(1, "A", Some(2000), Some("x")),
                rec(2, "A", Some(2001), None),
                rec(3, "B", Some(2000), Some("y")),
            ])
            .unwrap();
        let q = |journal: Option<&str>, year, require_abstract| RecordQuery {
            journal: journal.map(Into::into),
            year,
            require_abstract,
        };
        let pmids = |rs: Vec<&PubRecord>| rs.iter().map(|r| r.pmid).collect::<Vec<_>>();
        assert_eq!(pmids(store.query(&q(None, None, false))), vec![1, 2, 3]);
        assert_eq!(pmids(store.query(&q(Some("A"), None, true))), vec![1]);
        assert_eq!(pmids(store.query(&q(None, Some(2000), false))), vec![1, 3]);
        assert!(store.query(&q(Some("Nonexistent"), None, false)).is_empty());
        let manifest = store.manifest();
        assert_eq!(manifest.years["2000"], 2);
        assert_eq!(manifest.journals["A"], 2);
    }

    #[test]
    fn embedding_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = CorpusStore::open(dir.path()).unwrap();
        store.register_space("small", 100).unwrap();
        let e = StoredEmbedding::quantize(1, "small", &vec![0.5; 768]).unwrap();
        match store.put_embedding(e) {
            Err(StoreError::DimensionMismatch {
                declared, actual, ..
            }) => assert_eq!((declared, actual), (100, 768)),
            other => panic!("unexpected {other:?}"),
        }
        let e = StoredEmbedding::quantize(1, "nowhere", &[0.5]).unwrap();
        assert!(matches!(
            store.put_embedding(e),
            Err(StoreError::UnknownSpace(_))
        ));
        assert!(matches!(
            store.register_space("small", 5),
            Err(StoreError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            store.register_space("../evil", 5),
            Err(StoreError::InvalidSpaceId(_))
        ));
        assert_eq!(
            store.get_embeddings("small", &[9]).unwrap(),
            vec![Lookup::Missing(9)]
        );
    }
}
