use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::{CurationRecord, Decision, Manifest, ReviewDecision, Status};
use crate::error::{Error, Result};
use crate::imaging::{load_image, ImageBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Rainy,
    Clean,
    Aligned,
    Blend,
    Diff,
}

impl std::str::FromStr for View {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rainy" => View::Rainy,
            "clean" => View::Clean,
            "aligned" => View::Aligned,
            "blend" => View::Blend,
            "diff" => View::Diff,
            other => return Err(Error::InvalidParameter(format!("unknown view {other:?}"))),
        })
    }
}

fn resolve(root: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        root.join(p)
    }
}

fn load_cropped(record: &CurationRecord, path: &str, root: &Path) -> Result<ImageBuffer> {
    let img = load_image(resolve(root, path))?;
    match record.crop {
        Some(r) if (r.w, r.h) != (img.width(), img.height()) => img.crop(r.x, r.y, r.w, r.h),
        _ => Ok(img),
    }
}

/// Rainy crop and the clean frame as aligned (unaligned when no correction ran).
pub fn curated_pair(record: &CurationRecord, root: &Path) -> Result<(ImageBuffer, ImageBuffer)> {
    let rainy = load_cropped(record, &record.rainy_path, root)?;
    let aligned = match &record.alignment.aligned_path {
        Some(p) => load_image(resolve(root, p))?,
        None => load_cropped(record, &record.clean_path, root)?,
    };
    Ok((rainy, aligned))
}

/// Renders one review view. Relative paths resolve against `root`.
pub fn render_view(record: &CurationRecord, view: View, root: &Path) -> Result<ImageBuffer> {
    match view {
        View::Rainy => load_cropped(record, &record.rainy_path, root),
        View::Clean => load_cropped(record, &record.clean_path, root),
        View::Aligned => Ok(curated_pair(record, root)?.1),
        View::Blend => {
            let (r, a) = curated_pair(record, root)?;
            r.zip_map(&a, |x, y| 0.5 * (x + y))
        }
        View::Diff => {
            let (r, a) = curated_pair(record, root)?;
            r.zip_map(&a, |x, y| ((x - y).abs() * 4.0).min(1.0))
        }
    }
}

#[derive(Debug)]
pub enum ReviewError {
    NotFound(String),
    Invalid(String),
    Conflict(String),
    Storage(Error),
}

impl std::fmt::Display for ReviewError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReviewError::NotFound(id) => write!(f, "unknown pair {id}"),
            ReviewError::Invalid(m) | ReviewError::Conflict(m) => f.write_str(m),
            ReviewError::Storage(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ReviewError {}

#[derive(Debug, Clone, PartialEq)]
pub enum ReviewOutcome {
    Updated(CurationRecord),
    /// Same decision and note as the current review; nothing written.
    Unchanged(CurationRecord),
}

impl ReviewOutcome {
    pub fn record(&self) -> &CurationRecord {
        match self {
            ReviewOutcome::Updated(r) | ReviewOutcome::Unchanged(r) => r,
        }
    }
}

/// Persists a reviewer decision as a superseding record. Decision times
/// strictly increase per pair even if the clock does not.
pub fn apply_review(
    manifest: &mut Manifest,
    pair_id: &str,
    decision: &str,
    note: &str,
    now: DateTime<Utc>,
) -> std::result::Result<ReviewOutcome, ReviewError> {
    let decision: Decision = decision
        .parse()
        .map_err(|e: Error| ReviewError::Invalid(e.to_string()))?;
    let current = manifest
        .get(pair_id)
        .ok_or_else(|| ReviewError::NotFound(pair_id.to_string()))?;
    if current.status == Status::AutoRejected {
        return Err(ReviewError::Conflict(format!(
            "pair {pair_id} was auto-rejected: {}",
            current.diagnostics.join("; ")
        )));
    }
    if let Some(prev) = &current.review {
        if !prev.automatic && prev.decision == decision && prev.note == note {
            return Ok(ReviewOutcome::Unchanged(current.clone()));
        }
    }
    let mut at = now;
    if let Some(prev) = current
        .review
        .as_ref()
        .and_then(|r| DateTime::parse_from_rfc3339(&r.decided_at).ok())
    {
        let prev = prev.with_timezone(&Utc);
        if at <= prev {
            at = prev + Duration::milliseconds(1);
        }
    }
    let mut next = current.clone();
    next.revision += 1;
    next.status = match decision {
        Decision::Accept => Status::Accepted,
        Decision::Reject => Status::Rejected,
    };
    next.review = Some(ReviewDecision {
        pair_id: pair_id.to_string(),
        decision,
        note: note.to_string(),
        decided_at: at.to_rfc3339_opts(SecondsFormat::Millis, true),
        automatic: false,
    });
    manifest
        .append(next.clone())
        .map_err(ReviewError::Storage)?;
    Ok(ReviewOutcome::Updated(next))
}

/// Record count per status; every status is present.
pub fn status_counts(manifest: &Manifest) -> BTreeMap<Status, usize> {
    let mut out: BTreeMap<Status, usize> = Status::ALL.iter().map(|s| (*s, 0)).collect();
    for r in manifest.records() {
        *out.entry(r.status).or_default() += 1;
    }
    out
}
