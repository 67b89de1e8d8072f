use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{curated_pair, Manifest, Split, SplitAssignment, Status};
use crate::error::{Error, Result};
use crate::imaging::save_image;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub pair_id: String,
    pub scene_id: String,
    pub rainy: String,
    pub clean: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndex {
    pub split: Split,
    pub count: usize,
    pub pairs: Vec<IndexEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub counts: BTreeMap<Split, usize>,
    pub files_written: usize,
}

/// Writes `out/{split}/{scene}/{pair_id}_{rainy,clean}.png` for every
/// accepted pair plus `out/{split}/index.json`. The clean image is the
/// aligned one. Fails before writing anything if an accepted pair has no
/// split.
pub fn export_dataset(
    manifest: &Manifest,
    split: &SplitAssignment,
    root: &Path,
    out: &Path,
) -> Result<ExportSummary> {
    let accepted: Vec<_> = manifest
        .records()
        .filter(|r| r.status == Status::Accepted)
        .collect();
    let missing: Vec<&str> = accepted
        .iter()
        .filter(|r| !split.assignments.contains_key(&r.pair_id))
        .map(|r| r.pair_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Export(format!(
            "accepted pairs without a split: {}",
            missing.join(", ")
        )));
    }
    let mut indexes: BTreeMap<Split, Vec<IndexEntry>> =
        Split::ALL.iter().map(|s| (*s, Vec::new())).collect();
    let mut files = 0;
    for r in accepted {
        let s = split.assignments[&r.pair_id];
        let rel_dir = format!("{}/{}", s.as_str(), r.scene_id);
        let (rainy, clean) = curated_pair(r, root)?;
        let entry = IndexEntry {
            pair_id: r.pair_id.clone(),
            scene_id: r.scene_id.clone(),
            rainy: format!("{rel_dir}/{}_rainy.png", r.pair_id),
            clean: format!("{rel_dir}/{}_clean.png", r.pair_id),
        };
        save_image(&rainy, out.join(&entry.rainy))?;
        save_image(&clean, out.join(&entry.clean))?;
        files += 2;
        indexes.get_mut(&s).expect("all splits present").push(entry);
    }
    let mut counts = BTreeMap::new();
    for (s, pairs) in indexes {
        counts.insert(s, pairs.len());
        let idx = SplitIndex {
            split: s,
            count: pairs.len(),
            pairs,
        };
        let dir = out.join(s.as_str());
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let path = dir.join("index.json");
        std::fs::write(&path, serde_json::to_vec_pretty(&idx)?).map_err(|e| Error::io(&path, e))?;
    }
    Ok(ExportSummary {
        counts,
        files_written: files,
    })
}
