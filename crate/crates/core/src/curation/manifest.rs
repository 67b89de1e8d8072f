use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CorrectionMode, CriteriaReport, Thresholds};
use crate::error::{Error, Result};
use crate::imaging::{Homography, Rect};
use crate::metrics::MetricReport;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pending,
    AutoRejected,
    NeedsReview,
    Accepted,
    Rejected,
}

impl Status {
    pub const ALL: [Status; 5] = [
        Status::Pending,
        Status::AutoRejected,
        Status::NeedsReview,
        Status::Accepted,
        Status::Rejected,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pending => "pending",
            Status::AutoRejected => "auto_rejected",
            Status::NeedsReview => "needs_review",
            Status::Accepted => "accepted",
            Status::Rejected => "rejected",
        }
    }
}

impl std::str::FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Status::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown status {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

impl std::str::FromStr for Decision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accept" => Ok(Decision::Accept),
            "reject" => Ok(Decision::Reject),
            other => Err(Error::InvalidParameter(format!(
                "decision must be accept or reject, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub pair_id: String,
    pub decision: Decision,
    pub note: String,
    /// RFC 3339, UTC.
    pub decided_at: String,
    /// Set for decisions made by the pipeline rather than a reviewer.
    #[serde(default)]
    pub automatic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacSummary {
    pub matches: usize,
    pub inliers: usize,
    pub iterations: usize,
    pub mean_error: f64,
}

/// Alignment outputs; paths are relative to the output root.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignmentArtifacts {
    pub homography: Option<Homography>,
    pub homography_path: Option<String>,
    pub field_path: Option<String>,
    pub field_max_magnitude: Option<f64>,
    pub aligned_path: Option<String>,
    pub ransac: Option<RansacSummary>,
    /// Motion re-measured after the homography warp.
    pub post_warp_max_block_shift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationRecord {
    pub v: u32,
    pub pair_id: String,
    pub scene_id: String,
    /// Bumped on every superseding record for the pair.
    pub revision: u64,
    pub rainy_path: String,
    pub clean_path: String,
    pub rainy_time: Option<String>,
    pub clean_time: Option<String>,
    /// Region of the original frames everything below refers to.
    pub crop: Option<Rect>,
    /// `"full"`, `"rects"` or the mask PNG path.
    pub mask: String,
    pub criteria: Option<CriteriaReport>,
    pub correction_mode: CorrectionMode,
    pub alignment: AlignmentArtifacts,
    pub pre_metrics: Option<MetricReport>,
    pub metrics: Option<MetricReport>,
    pub status: Status,
    pub review: Option<ReviewDecision>,
    pub diagnostics: Vec<String>,
    pub thresholds: Thresholds,
}

impl CurationRecord {
    /// A pending record with no measurements.
    pub fn new(
        pair_id: impl Into<String>,
        scene_id: impl Into<String>,
        rainy_path: impl Into<String>,
        clean_path: impl Into<String>,
        thresholds: Thresholds,
    ) -> Self {
        CurationRecord {
            v: MANIFEST_VERSION,
            pair_id: pair_id.into(),
            scene_id: scene_id.into(),
            revision: 0,
            rainy_path: rainy_path.into(),
            clean_path: clean_path.into(),
            rainy_time: None,
            clean_time: None,
            crop: None,
            mask: "full".into(),
            criteria: None,
            correction_mode: CorrectionMode::None,
            alignment: AlignmentArtifacts::default(),
            pre_metrics: None,
            metrics: None,
            status: Status::Pending,
            review: None,
            diagnostics: Vec::new(),
            thresholds,
        }
    }

    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: &str| {
            Err(Error::InvalidParameter(format!(
                "record {}: {m}",
                self.pair_id
            )))
        };
        if matches!(self.status, Status::Accepted | Status::Rejected) && self.review.is_none() {
            return fail("decided status without a review decision");
        }
        if self.correction_mode.uses_elastic()
            && self.status != Status::AutoRejected
            && self.alignment.field_path.is_none()
        {
            // a failed elastic run keeps the mode but must say why
            if self.diagnostics.is_empty() {
                return fail("elastic correction without a field reference");
            }
        }
        Ok(())
    }
}

/// JSON-lines record store. Appends supersede earlier records with the
/// same `pair_id`; loading keeps the latest.
#[derive(Debug)]
pub struct Manifest {
    path: PathBuf,
    latest: BTreeMap<String, CurationRecord>,
}

impl Manifest {
    /// Loads `path`, treating a missing file as empty.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let latest = if path.exists() {
            read_latest(&path)?
        } else {
            BTreeMap::new()
        };
        Ok(Self { path, latest })
    }

    /// Loads `path`, which must exist.
    pub fn load(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let latest = read_latest(&path)?;
        Ok(Self { path, latest })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, pair_id: &str) -> Option<&CurationRecord> {
        self.latest.get(pair_id)
    }

    /// Latest records ordered by pair id.
    pub fn records(&self) -> impl Iterator<Item = &CurationRecord> {
        self.latest.values()
    }

    pub fn len(&self) -> usize {
        self.latest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latest.is_empty()
    }

    pub fn append(&mut self, record: CurationRecord) -> Result<()> {
        self.append_all(std::iter::once(record))
    }

    pub fn append_all(&mut self, records: impl IntoIterator<Item = CurationRecord>) -> Result<()> {
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut buf = Vec::new();
        let records: Vec<CurationRecord> = records.into_iter().collect();
        for r in &records {
            serde_json::to_writer(&mut buf, r)?;
            buf.push(b'\n');
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(&self.path, e))?;
        f.sync_data().map_err(|e| Error::io(&self.path, e))?;
        for r in records {
            self.latest.insert(r.pair_id.clone(), r);
        }
        Ok(())
    }

    /// The latest state as JSON lines, ordered by pair id.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in self.latest.values() {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }
}

fn read_latest(path: &Path) -> Result<BTreeMap<String, CurationRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut latest = BTreeMap::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CurationRecord =
            serde_json::from_str(&line).map_err(|e| Error::ManifestLine {
                line: i + 1,
                message: e.to_string(),
            })?;
        if record.v != MANIFEST_VERSION {
            return Err(Error::ManifestLine {
                line: i + 1,
                message: format!("unsupported schema version {}", record.v),
            });
        }
        latest.insert(record.pair_id.clone(), record);
    }
    Ok(latest)
}
