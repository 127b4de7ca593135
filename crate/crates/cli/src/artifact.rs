//! Run configuration and self-describing output files.
//!
//! Every JSON artifact is `{tool, version, config, result}`; every TSV
//! artifact starts with one `#` line carrying the same envelope minus the
//! result. No timestamps, no absolute paths beyond what the caller passed,
//! so identical invocations produce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const TOOL: &str = "semmap";

/// Echoed into every artifact. Fields that a subcommand does not use stay
/// `None` and are omitted.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub store: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_sample: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_queries: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    /// Subcommand-specific inputs and parameters.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, Value>,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        RunConfig {
            command: command.to_string(),
            ..Default::default()
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        let value = serde_json::to_value(value).expect("parameter serializes");
        self.parameters.insert(key.to_string(), value);
        self
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<&'a T>,
}

fn envelope<'a, T: Serialize>(config: &'a RunConfig, result: Option<&'a T>) -> Envelope<'a, T> {
    Envelope {
        tool: TOOL,
        version: semmap::VERSION,
        config,
        result,
    }
}

pub fn json_bytes<T: Serialize>(config: &RunConfig, result: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(&envelope(config, Some(result))).expect("artifact serializes");
    bytes.push(b'\n');
    bytes
}

/// Writes the JSON artifact to `out`, or to stdout when no path is given.
pub fn emit_json<T: Serialize>(out: Option<&Path>, config: &RunConfig, result: &T) -> Result<()> {
    let bytes = json_bytes(config, result);
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => io::stdout().write_all(&bytes).context("writing stdout"),
    }
}

/// `# {envelope}` line, then `header`, then `rows`, LF-terminated.
pub fn tsv_bytes(config: &RunConfig, header: &[&str], rows: impl IntoIterator<Item = String>) -> Vec<u8> {
    let mut out = b"# ".to_vec();
    serde_json::to_writer(&mut out, &envelope::<()>(config, None)).expect("envelope serializes");
    out.push(b'\n');
    out.extend_from_slice(header.join("\t").as_bytes());
    out.push(b'\n');
    for row in rows {
        out.extend_from_slice(row.as_bytes());
        out.push(b'\n');
    }
    out
}

pub fn emit_tsv(out: Option<&Path>, bytes: Vec<u8>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => io::stdout().write_all(&bytes).context("writing stdout"),
    }
}
