use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TIMESTAMP_FORMAT: &str = "%Y%m%dT%H%M%S";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCandidate {
    pub pair_id: String,
    pub scene_id: String,
    pub rainy_path: PathBuf,
    pub clean_path: PathBuf,
    pub rainy_time: Option<NaiveDateTime>,
    pub clean_time: Option<NaiveDateTime>,
}

impl PairCandidate {
    /// Absolute capture-time difference in minutes, when both are known.
    pub fn time_delta_minutes(&self) -> Option<f64> {
        match (self.rainy_time, self.clean_time) {
            (Some(a), Some(b)) => Some((a - b).num_seconds().abs() as f64 / 60.0),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PairingRule {
    /// Pair files whose stems agree once any timestamp suffix is removed.
    Stem,
    /// `rainy,clean` rows naming files inside the two directories.
    Csv(PathBuf),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub candidates: Vec<PairCandidate>,
    /// Unmatched files and bad rows; never fatal.
    pub errors: Vec<String>,
}

/// Splits `name_YYYYMMDDThhmmss` into `(name, time)`.
pub fn split_timestamp(stem: &str) -> (&str, Option<NaiveDateTime>) {
    if let Some((head, tail)) = stem.rsplit_once('_') {
        if tail.len() == 15 {
            if let Ok(t) = NaiveDateTime::parse_from_str(tail, TIMESTAMP_FORMAT) {
                return (head, Some(t));
            }
        }
    }
    (stem, None)
}

/// Scene id: the pair key up to its first underscore.
pub fn scene_of(pair_id: &str) -> &str {
    pair_id.split('_').next().unwrap_or(pair_id)
}

fn is_image(p: &Path) -> bool {
    matches!(
        p.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("png" | "ppm")
    )
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_image(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn keyed(
    files: Vec<PathBuf>,
    side: &str,
    errors: &mut Vec<String>,
) -> BTreeMap<String, (PathBuf, Option<NaiveDateTime>)> {
    let mut map = BTreeMap::new();
    for path in files {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let (key, time) = split_timestamp(&stem);
        if let Some((prev, _)) = map.get(key) as Option<&(PathBuf, Option<NaiveDateTime>)> {
            errors.push(format!(
                "{side}: {} duplicates key {key} of {}",
                path.display(),
                prev.display()
            ));
            continue;
        }
        map.insert(key.to_string(), (path, time));
    }
    map
}

fn candidate(
    key: &str,
    rainy: (PathBuf, Option<NaiveDateTime>),
    clean: (PathBuf, Option<NaiveDateTime>),
) -> PairCandidate {
    PairCandidate {
        pair_id: key.to_string(),
        scene_id: scene_of(key).to_string(),
        rainy_path: rainy.0,
        clean_path: clean.0,
        rainy_time: rainy.1,
        clean_time: clean.1,
    }
}

/// Lists rainy/clean pairs. Missing directories are errors; unmatched
/// files and bad CSV rows are reported alongside the candidates.
pub fn ingest_pairs(
    rainy_dir: &Path,
    clean_dir: &Path,
    rule: &PairingRule,
) -> Result<IngestReport> {
    let mut report = IngestReport::default();
    match rule {
        PairingRule::Stem => {
            let rainy = keyed(list_images(rainy_dir)?, "rainy", &mut report.errors);
            let mut clean = keyed(list_images(clean_dir)?, "clean", &mut report.errors);
            for (key, r) in rainy {
                match clean.remove(&key) {
                    Some(c) => report.candidates.push(candidate(&key, r, c)),
                    None => report
                        .errors
                        .push(format!("rainy {} has no clean partner", r.0.display())),
                }
            }
            for (_, (path, _)) in clean {
                report
                    .errors
                    .push(format!("clean {} has no rainy partner", path.display()));
            }
        }
        PairingRule::Csv(map) => {
            for d in [rainy_dir, clean_dir] {
                if !d.is_dir() {
                    return Err(Error::io(
                        d,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
                    ));
                }
            }
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .flexible(true)
                .from_path(map)
                .map_err(|e| Error::io(map, std::io::Error::other(e.to_string())))?;
            let mut seen = BTreeMap::new();
            for (i, row) in reader.records().enumerate() {
                let line = i + 2;
                let row = match row {
                    Ok(r) => r,
                    Err(e) => {
                        report.errors.push(format!("row {line}: {e}"));
                        continue;
                    }
                };
                if row.len() != 2 || row[0].trim().is_empty() || row[1].trim().is_empty() {
                    report
                        .errors
                        .push(format!("row {line}: expected two columns rainy,clean"));
                    continue;
                }
                let r = rainy_dir.join(row[0].trim());
                let c = clean_dir.join(row[1].trim());
                if let Some(missing) = [&r, &c].into_iter().find(|p| !p.is_file()) {
                    report
                        .errors
                        .push(format!("row {line}: {} not found", missing.display()));
                    continue;
                }
                let stem = r
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .to_string();
                let (key, rt) = split_timestamp(&stem);
                let cstem = c
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .to_string();
                let (_, ct) = split_timestamp(&cstem);
                if seen.insert(key.to_string(), line).is_some() {
                    report
                        .errors
                        .push(format!("row {line}: duplicate pair id {key}"));
                    continue;
                }
                report.candidates.push(candidate(key, (r, rt), (c, ct)));
            }
            report.candidates.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(dir: &Path, name: &str) {
        std::fs::write(dir.join(name), b"").unwrap();
    }

    fn dirs() -> (tempfile::TempDir, PathBuf, PathBuf) {
        let t = tempfile::tempdir().unwrap();
        let (r, c) = (t.path().join("rainy"), t.path().join("clean"));
        std::fs::create_dir_all(&r).unwrap();
        std::fs::create_dir_all(&c).unwrap();
        (t, r, c)
    }

    #[test]
    fn timestamps_and_scenes() {
        let (k, t) = split_timestamp("street_004_20240105T143000");
        assert_eq!(k, "street_004");
        assert_eq!(t.unwrap().to_string(), "2024-01-05 14:30:00");
        assert_eq!(split_timestamp("street_004"), ("street_004", None));
        assert_eq!(split_timestamp("a_2024010XT143000").1, None);
        assert_eq!(scene_of("street_004"), "street");
        assert_eq!(scene_of("plain"), "plain");
    }

    #[test]
    fn empty_and_stem_pairing() {
        let (_t, r, c) = dirs();
        assert!(ingest_pairs(&r, &c, &PairingRule::Stem)
            .unwrap()
            .candidates
            .is_empty());
        touch(&r, "a_20240101T120000.png");
        touch(&c, "a_20240101T114500.png");
        touch(&r, "b.png");
        touch(&c, "b.png");
        touch(&r, "lonely.png");
        touch(&c, "notes.txt");
        let rep = ingest_pairs(&r, &c, &PairingRule::Stem).unwrap();
        assert_eq!(rep.candidates.len(), 2);
        assert_eq!(rep.candidates[0].time_delta_minutes(), Some(15.0));
        assert_eq!(rep.candidates[1].time_delta_minutes(), None);
        assert_eq!(rep.errors.len(), 1);
        assert!(ingest_pairs(&r.join("nope"), &c, &PairingRule::Stem).is_err());
    }

    #[test]
    fn csv_with_bad_row() {
        let (t, r, c) = dirs();
        touch(&r, "x.png");
        touch(&c, "y.png");
        let map = t.path().join("map.csv");
        std::fs::write(&map, "rainy,clean\nx.png,y.png\nmissing.png,y.png\n").unwrap();
        let rep = ingest_pairs(&r, &c, &PairingRule::Csv(map)).unwrap();
        assert_eq!(rep.candidates.len(), 1);
        assert_eq!(rep.candidates[0].pair_id, "x");
        assert_eq!(rep.errors.len(), 1);
        assert!(rep.errors[0].starts_with("row 3"));
    }
}
