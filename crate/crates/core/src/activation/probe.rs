use std::collections::{BTreeMap, BTreeSet};

use super::ActivationMatrix;

/// One occurrence of a probe token and its top-layer activation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOccurrence {
    pub pmid: u64,
    pub token_index: usize,
    pub vector: Vec<f32>,
}

/// Gathers the activation of every occurrence of every probe token, in
/// document order. Every probe gets an entry, empty if it never occurs.
pub fn collect_probe_occurrences<'a, I>(
    docs: I,
    probes: &BTreeSet<String>,
) -> BTreeMap<String, Vec<ProbeOccurrence>>
where
    I: IntoIterator<Item = &'a ActivationMatrix>,
{
    let mut out: BTreeMap<String, Vec<ProbeOccurrence>> =
        probes.iter().map(|p| (p.clone(), Vec::new())).collect();
    if probes.is_empty() {
        return out;
    }
    for doc in docs {
        for (index, token) in doc.tokens().iter().enumerate() {
            if let Some(bucket) = out.get_mut(token) {
                bucket.push(ProbeOccurrence {
                    pmid: doc.pmid(),
                    token_index: index,
                    vector: doc.rows().row(index).to_vec(),
                });
            }
        }
    }
    out
}
