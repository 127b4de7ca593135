use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::Command as Process;

use anyhow::{anyhow, bail, Context, Result};
use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use semmap::activation::{load_word_vectors, ActivationMatrix, ContainerReader};
use semmap::geometry::{
    anisotropy, apply_pca, demean, estimate_mean, fit_pca, sample_indices, DistanceMetric,
};
use semmap::ingest::{MedlineReader, ParseOutcome};
use semmap::metrics::{self, ElementSet, MetricRecord};
use semmap::pooling::{self, PoolOptions, Strategy};
use semmap::retrieval::{render_table, run_benchmark, BenchmarkConfig, LabeledPool};
use semmap::store::{valid_space_id, CorpusStore, RecordQuery, StoredEmbedding};
use semmap::text::NormalizedText;

use crate::artifact::{emit_json, emit_tsv, tsv_bytes, RunConfig};
use crate::sets::{load_set, SetSpec};
use crate::{
    BenchArgs, ExportMapArgs, FitSpaceArgs, IngestArgs, MapMethod, MetricChoice, MetricKind,
    MetricsArgs, PoolArgs, PrepArgs, UsageError, ValidateArgs,
};

/// Rows projected per batch when writing a fitted space.
const APPLY_CHUNK: usize = 8192;
/// Documents decoded per batch before pooling them in parallel.
const POOL_CHUNK: usize = 256;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn open_store(path: &Path) -> Result<CorpusStore> {
    CorpusStore::open(path).with_context(|| format!("opening store {}", path.display()))
}

fn read_archive(path: &Path) -> Result<ParseOutcome> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = BufReader::new(file);
    let gzip = reader.fill_buf()?.starts_with(&[0x1f, 0x8b]);
    let outcome = if gzip {
        MedlineReader::from_gzip(reader).collect_outcome()
    } else {
        MedlineReader::new(reader).collect_outcome()
    };
    outcome.with_context(|| format!("parsing {}", path.display()))
}

pub fn ingest(a: &IngestArgs) -> Result<()> {
    let mut store = open_store(&a.store)?;
    let mut archives = Vec::new();
    for path in &a.inputs {
        let outcome = read_archive(path)?;
        eprintln!("{}", outcome.summary_line(&path_str(path)));
        archives.push(json!({
            "input": path_str(path),
            "citations": outcome.citations,
            "records": outcome.records.len(),
            "skipped": outcome.skipped,
        }));
        store.put_records(outcome.records)?;
    }
    let config = RunConfig {
        store: Some(path_str(&a.store)),
        ..RunConfig::new("ingest")
    }
    .param("inputs", a.inputs.iter().map(|p| path_str(p)).collect::<Vec<_>>());
    emit_json(
        a.out.as_deref(),
        &config,
        &json!({ "archives": archives, "manifest": store.manifest() }),
    )
}

/// TSV cells cannot hold tabs or line breaks; they become spaces.
fn tsv_cell(text: &str) -> String {
    text.replace(['\t', '\n', '\r'], " ")
}

pub fn prep(a: &PrepArgs) -> Result<()> {
    let store = open_store(&a.store)?;
    let mut config = RunConfig {
        store: Some(path_str(&a.store)),
        ..RunConfig::new("prep")
    };
    if let Some(j) = &a.journal {
        config = config.param("journal", j);
    }

    if let Some(pmid) = a.pmid {
        config = config.param("pmid", pmid);
        let record = store
            .record(pmid)
            .ok_or_else(|| anyhow!("pmid {pmid} is not in the store"))?;
        let text = NormalizedText::from_record(record).with_context(|| format!("pmid {pmid}"))?;
        return emit_json(a.out.as_deref(), &config, &text);
    }

    let query = RecordQuery {
        journal: a.journal.clone(),
        year: None,
        require_abstract: true,
    };
    let rows: Vec<String> = store
        .query(&query)
        .into_iter()
        .map(|r| {
            let text = NormalizedText::from_record(r).expect("eligible records normalize");
            format!("{}\t{}", text.source_pmid, tsv_cell(&text.text))
        })
        .collect();
    emit_tsv(a.out.as_deref(), tsv_bytes(&config, &["pmid", "text"], rows))
}

#[derive(Serialize)]
struct Skipped {
    pmid: u64,
    reason: String,
}

fn store_pooled(
    store: &mut CorpusStore,
    space: &str,
    vectors: Vec<(u64, Vec<f32>)>,
) -> Result<()> {
    if let Some((_, first)) = vectors.first() {
        store.register_space(space, first.len())?;
    }
    let embeddings = vectors
        .iter()
        .map(|(pmid, v)| StoredEmbedding::quantize(*pmid, space, v))
        .collect::<Result<Vec<_>, _>>()?;
    store.put_embeddings(embeddings)?;
    Ok(())
}

pub fn pool(a: &PoolArgs) -> Result<()> {
    if !valid_space_id(&a.space) {
        return Err(usage(format!("invalid space id {:?}", a.space)));
    }
    let mut store = open_store(&a.store)?;
    let mut pooled = Vec::new();
    let mut skipped = Vec::new();
    let mut fallbacks = 0usize;
    let mut config = RunConfig {
        store: Some(path_str(&a.store)),
        space_id: Some(a.space.clone()),
        strategy: Some(a.strategy.to_string()),
        ..RunConfig::new("pool")
    };

    if a.strategy == Strategy::StaticMean {
        let path = a
            .word_vectors
            .as_ref()
            .ok_or_else(|| usage("static_mean needs --word-vectors"))?;
        if a.container.is_some() {
            return Err(usage("static_mean reads word vectors, not --container"));
        }
        config = config.param("word_vectors", path_str(path));
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let table = load_word_vectors(BufReader::new(file))
            .with_context(|| format!("reading {}", path.display()))?;
        let query = RecordQuery {
            require_abstract: true,
            ..Default::default()
        };
        for record in store.query(&query) {
            let text = NormalizedText::from_record(record)?;
            let words = pooling::surface_words(&text.text);
            match pooling::pool_static_mean(record.pmid, &words, &table) {
                Ok(p) => pooled.push((p.pmid, p.vector)),
                Err(e) => skipped.push(Skipped {
                    pmid: record.pmid,
                    reason: e.to_string(),
                }),
            }
        }
    } else {
        let path = a
            .container
            .as_ref()
            .ok_or_else(|| usage(format!("{} needs --container", a.strategy)))?;
        if a.word_vectors.is_some() {
            return Err(usage("--word-vectors only applies to static_mean"));
        }
        config = config
            .param("container", path_str(path))
            .param("min_chars", a.min_chars)
            .param("marker", &a.marker);
        let options = PoolOptions {
            min_chars: a.min_chars,
            continuation_marker: a.marker.clone(),
        };
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let mut reader = ContainerReader::new(BufReader::new(file))
            .with_context(|| format!("reading {}", path.display()))?;
        loop {
            let batch: Vec<ActivationMatrix> = reader
                .by_ref()
                .take(POOL_CHUNK)
                .collect::<Result<_, _>>()
                .with_context(|| format!("reading {}", path.display()))?;
            if batch.is_empty() {
                break;
            }
            let results: Vec<_> = batch
                .par_iter()
                .map(|m| (m.pmid(), pooling::pool(m, a.strategy, &options)))
                .collect();
            for (pmid, result) in results {
                match result {
                    Ok(p) => {
                        fallbacks += p.fallback as usize;
                        pooled.push((p.pmid, p.vector));
                    }
                    Err(e) => skipped.push(Skipped {
                        pmid,
                        reason: e.to_string(),
                    }),
                }
            }
        }
    }

    let count = pooled.len();
    let dim = pooled.first().map(|(_, v)| v.len());
    store_pooled(&mut store, &a.space, pooled)?;
    emit_json(
        a.out.as_deref(),
        &config,
        &json!({
            "space_id": a.space,
            "dim": dim,
            "pooled": count,
            "fallbacks": fallbacks,
            "skipped": skipped,
        }),
    )
}

fn column_variances(centered: ArrayView2<f32>) -> Vec<f64> {
    let n = centered.nrows();
    centered
        .axis_iter(Axis(1))
        .map(|col| {
            let mean = col.iter().map(|&x| x as f64).sum::<f64>() / n as f64;
            col.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1).max(1) as f64
        })
        .collect()
}

pub fn fit_space(a: &FitSpaceArgs) -> Result<()> {
    if !valid_space_id(&a.out_space) {
        return Err(usage(format!("invalid space id {:?}", a.out_space)));
    }
    if a.out_space == a.space {
        return Err(usage("--out-space must differ from --space"));
    }
    let mut store = open_store(&a.store)?;
    let pmids = store.space_pmids(&a.space)?;
    if pmids.is_empty() {
        bail!("space {} has no embeddings", a.space);
    }

    let picked = sample_indices(pmids.len(), a.sample, a.seed);
    let sample_pmids: Vec<u64> = picked.iter().map(|&i| pmids[i]).collect();
    let sample = store.get_matrix(&a.space, &sample_pmids)?;
    let mean = estimate_mean(sample.view())?;
    let centered = demean(sample.view(), &mean)?;
    let mut space = fit_pca(centered.view(), a.dims, &a.out_space)?;
    space.compose_mean(&mean)?;
    space.seed = Some(a.seed);

    let raw = anisotropy(sample.view(), a.anisotropy_pairs, a.seed).ok();
    let demeaned = anisotropy(centered.view(), a.anisotropy_pairs, a.seed).ok();
    let total_variance: f64 = column_variances(centered.view()).iter().sum();

    space.save(&store.spaces_dir())?;
    store.register_space(&a.out_space, a.dims)?;
    for chunk in pmids.chunks(APPLY_CHUNK) {
        let vectors = store.get_matrix(&a.space, chunk)?;
        let projected = apply_pca(&space, vectors.view())?;
        let embeddings = chunk
            .iter()
            .zip(projected.axis_iter(Axis(0)))
            .map(|(&pmid, row)| StoredEmbedding::quantize(pmid, &a.out_space, &row.to_vec()))
            .collect::<Result<Vec<_>, _>>()?;
        store.put_embeddings(embeddings)?;
    }

    let config = RunConfig {
        store: Some(path_str(&a.store)),
        space_id: Some(a.out_space.clone()),
        mean_sample: Some(a.sample),
        dims: Some(a.dims),
        seed: Some(a.seed),
        ..RunConfig::new("fit-space")
    }
    .param("source_space", &a.space)
    .param("anisotropy_pairs", a.anisotropy_pairs);
    emit_json(
        a.out.as_deref(),
        &config,
        &json!({
            "space_id": a.out_space,
            "input_dim": space.input_dim(),
            "output_dim": space.output_dim(),
            "sample_size": sample_pmids.len(),
            "vectors_written": pmids.len(),
            "explained_variance": space.explained_variance,
            "total_variance": total_variance,
            "anisotropy_raw": raw,
            "anisotropy_demeaned": demeaned,
        }),
    )
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    let labels: BTreeSet<&str> = a.labels.iter().map(|s| s.trim()).collect();
    if labels.len() < 2 {
        return Err(usage("--labels needs at least two distinct journals"));
    }
    let store = open_store(&a.store)?;
    let mut pmids = Vec::new();
    let mut row_labels = Vec::new();
    for pmid in store.space_pmids(&a.space)? {
        if let Some(r) = store.record(pmid).filter(|r| labels.contains(r.journal.as_str())) {
            pmids.push(pmid);
            row_labels.push(r.journal.clone());
        }
    }
    for label in &labels {
        if !row_labels.iter().any(|l| l == label) {
            bail!("no documents of {label:?} are embedded in space {}", a.space);
        }
    }
    let vectors = store.get_matrix(&a.space, &pmids)?;
    let pool = LabeledPool::new(vectors, row_labels, pmids)?;
    let cfg = BenchmarkConfig {
        k: a.k,
        n_queries: a.queries,
        seed: a.seed,
    };
    let report = run_benchmark(&pool, &a.space, &cfg)?;
    let table = render_table(std::slice::from_ref(&report));

    let config = RunConfig {
        store: Some(path_str(&a.store)),
        space_id: Some(a.space.clone()),
        n_queries: Some(a.queries),
        seed: Some(a.seed),
        labels: labels.iter().map(|s| s.to_string()).collect(),
        ..RunConfig::new("bench")
    }
    .param("k", a.k);
    emit_json(a.out.as_deref(), &config, &report)?;
    if let Some(path) = &a.table {
        fs::write(path, &table).with_context(|| format!("writing {}", path.display()))?;
    }
    if a.out.is_some() {
        print!("{table}");
    } else {
        eprint!("{table}");
    }
    Ok(())
}

fn record(metric: &str, inputs: &[&str], value: Value, parameters: &[(&str, Value)]) -> MetricRecord {
    MetricRecord {
        metric: metric.to_string(),
        inputs: inputs.iter().map(|s| s.to_string()).collect(),
        value,
        parameters: parameters
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect(),
    }
}

fn element_id(set: &ElementSet, row: usize) -> Value {
    match &set.ids {
        Some(ids) => json!(ids[row]),
        None => json!(row),
    }
}

fn perplexity_records(path: &Path) -> Result<Vec<MetricRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let reader = ContainerReader::new(BufReader::new(file))?;
    let mut out = Vec::new();
    for doc in reader {
        let doc = doc.with_context(|| format!("reading {}", path.display()))?;
        let losses = doc
            .losses()
            .ok_or_else(|| anyhow!("pmid {} carries no losses", doc.pmid()))?;
        let losses: Vec<f64> = losses.iter().map(|&l| l as f64).collect();
        let value = metrics::perplexity(&losses).with_context(|| format!("pmid {}", doc.pmid()))?;
        out.push(record(
            "perplexity",
            &[&doc.pmid().to_string()],
            json!(value),
            &[("tokens", json!(losses.len()))],
        ));
    }
    Ok(out)
}

pub fn metrics(a: &MetricsArgs) -> Result<()> {
    let specs = a
        .sets
        .iter()
        .map(|s| SetSpec::parse(s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen = BTreeSet::new();
    for s in &specs {
        if !seen.insert(s.name.as_str()) {
            return Err(usage(format!("set name {:?} used twice", s.name)));
        }
    }
    let store = match (&a.store, &a.space) {
        (Some(path), Some(_)) => Some(open_store(path)?),
        (None, None) => None,
        _ => return Err(usage("--store and --space go together")),
    };
    let store_space = store.as_ref().zip(a.space.as_deref());
    if store_space.is_none() && specs.iter().any(|s| s.needs_store()) {
        return Err(usage("journal: and pmids: sets need --store and --space"));
    }

    let mut config = RunConfig {
        store: a.store.as_deref().map(path_str),
        space_id: a.space.clone(),
        seed: Some(a.seed),
        ..RunConfig::new("metrics")
    }
    .param("metric", format!("{:?}", a.metric).to_lowercase())
    .param("sets", &a.sets);

    let records = if a.metric == MetricKind::Perplexity {
        let path = a
            .container
            .as_ref()
            .ok_or_else(|| usage("perplexity needs --container"))?;
        config = config.param("container", path_str(path));
        perplexity_records(path)?
    } else {
        let sets: Vec<ElementSet> = specs
            .iter()
            .map(|s| load_set(s, store_space).with_context(|| format!("set {}", s.name)))
            .collect::<Result<_>>()?;
        let by_name: BTreeMap<&str, &ElementSet> = sets.iter().map(|s| (s.name.as_str(), s)).collect();
        let lookup = |name: &str| {
            by_name
                .get(name)
                .copied()
                .ok_or_else(|| usage(format!("no set named {name:?}")))
        };
        set_metrics(a, &sets, &lookup, store_space, &mut config)?
    };
    emit_json(a.out.as_deref(), &config, &json!({ "records": records }))
}

fn set_metrics<'a>(
    a: &MetricsArgs,
    sets: &'a [ElementSet],
    lookup: &dyn Fn(&str) -> Result<&'a ElementSet>,
    store_space: Option<(&CorpusStore, &str)>,
    config: &mut RunConfig,
) -> Result<Vec<MetricRecord>> {
    let mut out = Vec::new();
    match a.metric {
        MetricKind::Breadth => {
            for s in sets {
                out.push(record("breadth_sigma", &[&s.name], json!(metrics::breadth_sigma(s)?), &[]));
                if s.len() >= 2 {
                    let v = metrics::breadth_pairwise(s)?;
                    out.push(record("breadth_pairwise", &[&s.name], json!(v), &[]));
                }
            }
        }
        MetricKind::Distance => {
            if sets.len() < 2 {
                return Err(usage("distance needs at least two sets"));
            }
            let (metric, name) = match a.distance {
                MetricChoice::L2 => (DistanceMetric::L2, "l2"),
                MetricChoice::Cosine => (DistanceMetric::Cosine, "cosine"),
            };
            *config = std::mem::take(config).param("distance", name);
            for (i, x) in sets.iter().enumerate() {
                for y in &sets[i + 1..] {
                    let d = metrics::set_distance(x, y, metric)?;
                    out.push(record("set_distance", &[&x.name, &y.name], json!(d), &[("distance", json!(name))]));
                }
            }
        }
        MetricKind::Novelty => {
            let reference = match store_space {
                Some((store, space)) => {
                    let pmids = store.space_pmids(space)?;
                    ElementSet::new(space, store.get_matrix(space, &pmids)?)
                }
                None => {
                    let dim = sets.first().map_or(0, |s| s.dim());
                    let mut all = Array2::<f32>::zeros((0, dim));
                    for s in sets {
                        all.append(Axis(0), s.vectors.view())
                            .map_err(|_| anyhow!("set {} has dimension {}, expected {dim}", s.name, s.dim()))?;
                    }
                    ElementSet::new("union", all)
                }
            };
            let sample = metrics::sample_pair_distances(&reference, a.reference_pairs, a.seed)?;
            let threshold = metrics::distance_threshold(&sample, a.percentile)?;
            *config = std::mem::take(config)
                .param("percentile", a.percentile)
                .param("reference", &reference.name)
                .param("reference_pairs", a.reference_pairs);
            let params = [
                ("threshold", json!(threshold)),
                ("percentile", json!(a.percentile)),
            ];
            out.push(record("distance_threshold", &[&reference.name], json!(threshold), &params[1..]));
            for s in sets {
                let v = metrics::novelty_fraction(s, threshold)?;
                out.push(record("novelty_fraction", &[&s.name], json!(v), &params));
            }
        }
        MetricKind::Axis => {
            if a.positive.is_empty() || a.positive.len() != a.negative.len() {
                return Err(usage("axis needs --positive and --negative lists of equal length"));
            }
            let pos = a.positive.iter().map(|n| lookup(n).cloned()).collect::<Result<Vec<_>>>()?;
            let neg = a.negative.iter().map(|n| lookup(n).cloned()).collect::<Result<Vec<_>>>()?;
            let axis = metrics::build_axis(&pos, &neg)?;
            *config = std::mem::take(config)
                .param("positive", &a.positive)
                .param("negative", &a.negative);
            let anchors: Vec<&str> = a.positive.iter().chain(&a.negative).map(String::as_str).collect();
            out.push(record("axis", &anchors, json!(axis.vector), &[]));
            for s in sets.iter().filter(|s| !anchors.contains(&s.name.as_str())) {
                let scores = s
                    .vectors
                    .axis_iter(Axis(0))
                    .enumerate()
                    .map(|(i, row)| {
                        let score = metrics::project_on_axis(&row.to_vec(), &axis)
                            .with_context(|| format!("set {} element {}", s.name, element_id(s, i)))?;
                        Ok(json!({ "id": element_id(s, i), "score": score }))
                    })
                    .collect::<Result<Vec<_>>>()?;
                out.push(record("project_on_axis", &[&s.name], json!(scores), &[]));
            }
        }
        MetricKind::Mixture => {
            if a.archetypes.len() < 2 {
                return Err(usage("mixture needs --archetypes with at least two set names"));
            }
            let archetypes = a
                .archetypes
                .iter()
                .map(|n| {
                    let c = metrics::centroid(lookup(n)?)?;
                    Ok(c.into_iter().map(|x| x as f32).collect())
                })
                .collect::<Result<Vec<Vec<f32>>>>()?;
            *config = std::mem::take(config).param("archetypes", &a.archetypes);
            for s in sets.iter().filter(|s| !a.archetypes.contains(&s.name)) {
                let mixes = s
                    .vectors
                    .axis_iter(Axis(0))
                    .enumerate()
                    .map(|(i, row)| {
                        let m = metrics::archetype_mixture(&row.to_vec(), &archetypes)?;
                        Ok(json!({
                            "id": element_id(s, i),
                            "weights": m.weights,
                            "residual": m.residual,
                            "degenerate": m.degenerate,
                        }))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let inputs: Vec<&str> = std::iter::once(s.name.as_str())
                    .chain(a.archetypes.iter().map(String::as_str))
                    .collect();
                out.push(record("archetype_mixture", &inputs, json!(mixes), &[]));
            }
        }
        MetricKind::Perplexity => unreachable!("handled by the caller"),
    }
    Ok(out)
}

fn format_coord(x: f32) -> String {
    // Display gives the shortest round-trip form; normalize negative zero.
    if x == 0.0 {
        "0".to_string()
    } else {
        x.to_string()
    }
}

fn map_rows(pmids: &[u64], coords: ArrayView2<f32>) -> Vec<String> {
    pmids
        .iter()
        .zip(coords.axis_iter(Axis(0)))
        .map(|(p, row)| format!("{p}\t{}\t{}", format_coord(row[0]), format_coord(row[1])))
        .collect()
}

fn umap_rows(a: &ExportMapArgs, store: &CorpusStore) -> Result<Vec<String>> {
    let shard = store.spaces_dir().join(format!("{}.emb", a.space));
    let out = tempfile_path(store, &a.space);
    let status = Process::new(&a.bridge)
        .arg("umap")
        .arg("--reference")
        .arg(&shard)
        .arg("--project")
        .arg(&shard)
        .arg("--seed")
        .arg(a.seed.to_string())
        .arg("--out")
        .arg(&out)
        .status()
        .with_context(|| format!("running bridge {}", a.bridge.display()))?;
    if !status.success() {
        bail!("bridge {} exited with {status}", a.bridge.display());
    }
    let text = fs::read_to_string(&out).with_context(|| format!("reading {}", out.display()))?;
    let _ = fs::remove_file(&out);
    let rows = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("pmid\t") && !l.is_empty())
        .map(str::to_string)
        .collect();
    Ok(rows)
}

fn tempfile_path(store: &CorpusStore, space: &str) -> std::path::PathBuf {
    store.spaces_dir().join(format!(".{space}.umap.{}.tsv", std::process::id()))
}

pub fn export_map(a: &ExportMapArgs) -> Result<()> {
    if a.dims != 2 {
        return Err(usage("map export writes two columns; --dims must be 2"));
    }
    let store = open_store(&a.store)?;
    let pmids = store.space_pmids(&a.space)?;
    let method = match a.method {
        MapMethod::Pca => "pca",
        MapMethod::Umap => "umap",
    };
    let mut config = RunConfig {
        store: Some(path_str(&a.store)),
        space_id: Some(a.space.clone()),
        dims: Some(a.dims),
        seed: Some(a.seed),
        ..RunConfig::new("export-map")
    }
    .param("method", method);

    let rows = match a.method {
        MapMethod::Pca => {
            let vectors = store.get_matrix(&a.space, &pmids)?;
            let fit_rows = match a.sample {
                Some(n) => {
                    config = config.param("sample", n);
                    let picked = sample_indices(pmids.len(), n, a.seed);
                    vectors.select(Axis(0), &picked)
                }
                None => vectors.clone(),
            };
            let mean = estimate_mean(fit_rows.view())?;
            let centered = demean(fit_rows.view(), &mean)?;
            let mut space = fit_pca(centered.view(), 2, &format!("{}.map", a.space))?;
            space.compose_mean(&mean)?;
            let coords = apply_pca(&space, vectors.view())?;
            map_rows(&pmids, coords.view())
        }
        MapMethod::Umap => {
            config = config.param("bridge", path_str(&a.bridge));
            umap_rows(a, &store)?
        }
    };
    emit_tsv(a.out.as_deref(), tsv_bytes(&config, &["pmid", "x", "y"], rows))
}

pub fn validate_container(a: &ValidateArgs) -> Result<()> {
    let path = &a.input;
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let context = |e: semmap::activation::ContainerError| match e.pmid() {
        Some(pmid) => anyhow!(e).context(format!("{}: invalid document pmid {pmid}", path.display())),
        None => anyhow!(e).context(format!("{}: invalid container", path.display())),
    };
    let reader = ContainerReader::new(BufReader::new(file)).map_err(context)?;
    let declared = reader.declared_count();
    let mut documents = 0u64;
    let mut with_losses = 0u64;
    let mut tokens = 0u64;
    let mut dims = BTreeSet::new();
    for doc in reader {
        let doc = doc.map_err(context)?;
        if a.strict {
            let mask = doc.special_mask();
            if !(mask.first() == Some(&true) && mask.last() == Some(&true)) {
                bail!(
                    "{}: invalid document pmid {}: first and last tokens must be special",
                    path.display(),
                    doc.pmid()
                );
            }
        }
        documents += 1;
        with_losses += doc.losses().is_some() as u64;
        tokens += doc.len() as u64;
        dims.insert(doc.dim());
    }
    let config = RunConfig::new("validate-container")
        .param("input", path_str(path))
        .param("strict", a.strict);
    emit_json(
        a.out.as_deref(),
        &config,
        &json!({
            "valid": true,
            "declared_documents": declared,
            "documents": documents,
            "documents_with_losses": with_losses,
            "tokens": tokens,
            "dims": dims,
        }),
    )
}
