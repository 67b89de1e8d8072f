use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{
    align_pair, assess_criteria, ingest_pairs, AlignmentArtifacts, CorrectionMode, CurationConfig,
    CurationRecord, Decision, Manifest, ModeRequest, PairCandidate, PairingRule, ReviewDecision,
    SceneMask, Status,
};
use crate::error::{Error, Result};
use crate::imaging::{apply_mask_crop, load_image, save_image, ImageBuffer, Rect, RegionMask};
use crate::metrics::{quality_report, MetricReport};

/// Decision time used for automatic accepts when the config sets none.
pub const DEFAULT_RUN_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

/// Artifact directory of a pair, relative to the output root.
pub fn artifact_dir(pair_id: &str) -> PathBuf {
    Path::new("artifacts").join(pair_id)
}

fn rel_string(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn load_pair(c: &PairCandidate) -> Result<(ImageBuffer, ImageBuffer)> {
    let mut rainy = load_image(&c.rainy_path)?;
    let mut clean = load_image(&c.clean_path)?;
    if rainy.channels() != clean.channels() {
        rainy = rainy.to_rgb();
        clean = clean.to_rgb();
    }
    rainy.ensure_same_shape(&clean)?;
    Ok((rainy, clean))
}

fn scene_mask(m: Option<&SceneMask>, w: usize, h: usize) -> Result<(RegionMask, String)> {
    match m {
        None => Ok((RegionMask::all(w, h), "full".into())),
        Some(m) => {
            let mut mask = RegionMask::excluding(w, h, &m.exclude);
            let mut desc = if m.exclude.is_empty() {
                "full".to_string()
            } else {
                "rects".to_string()
            };
            if let Some(png) = &m.png {
                let from_png = RegionMask::from_image(&load_image(png)?);
                mask = mask.intersect(&from_png)?;
                desc = png.display().to_string();
            }
            Ok((mask, desc))
        }
    }
}

fn offset(mut r: MetricReport, by: Rect) -> MetricReport {
    r.region.x += by.x;
    r.region.y += by.y;
    r
}

fn write_artifacts(
    root: &Path,
    pair_id: &str,
    out: &super::AlignmentOutcome,
    art: &mut AlignmentArtifacts,
) -> Result<()> {
    let dir = artifact_dir(pair_id);
    std::fs::create_dir_all(root.join(&dir)).map_err(|e| Error::io(root.join(&dir), e))?;
    if let Some(h) = &out.homography {
        let p = dir.join("homography.json");
        std::fs::write(root.join(&p), serde_json::to_vec(h)?)
            .map_err(|e| Error::io(root.join(&p), e))?;
        art.homography_path = Some(rel_string(&p));
    }
    if let Some(f) = &out.field {
        let p = dir.join("field.dfield");
        f.save(root.join(&p))?;
        art.field_path = Some(rel_string(&p));
        art.field_max_magnitude = Some(f.max_magnitude());
    }
    let p = dir.join("aligned.png");
    save_image(&out.aligned, root.join(&p))?;
    art.aligned_path = Some(rel_string(&p));
    Ok(())
}

fn blank_record(c: &PairCandidate, cfg: &CurationConfig) -> CurationRecord {
    let fmt =
        |t: Option<chrono::NaiveDateTime>| t.map(|t| t.format("%Y-%m-%dT%H:%M:%S").to_string());
    let mut rec = CurationRecord::new(
        c.pair_id.clone(),
        c.scene_id.clone(),
        c.rainy_path.display().to_string(),
        c.clean_path.display().to_string(),
        cfg.thresholds,
    );
    rec.rainy_time = fmt(c.rainy_time);
    rec.clean_time = fmt(c.clean_time);
    rec
}

fn process(c: &PairCandidate, cfg: &CurationConfig, rec: &mut CurationRecord) -> Result<()> {
    let th = &cfg.thresholds;
    let (rainy, clean) = load_pair(c)?;
    let (mask, desc) = scene_mask(cfg.mask_for(&c.scene_id), rainy.width(), rainy.height())?;
    rec.mask = desc;
    let (rc, mask_c, crop) = apply_mask_crop(&rainy, &mask)?;
    let (cc, _, _) = apply_mask_crop(&clean, &mask)?;
    rec.crop = Some(crop);

    let criteria = assess_criteria(&rc, &cc, c.time_delta_minutes(), th)?;
    let failures = criteria.hard_failures();
    let illumination = criteria.illumination_shift.flagged;
    let motion = criteria.motion.clone();
    rec.criteria = Some(criteria);
    if !failures.is_empty() {
        rec.status = Status::AutoRejected;
        rec.diagnostics.extend(failures);
        return Ok(());
    }

    let out = align_pair(&rc, &cc, &motion, ModeRequest::Auto, &cfg.registration, th)?;
    rec.correction_mode = out.mode;
    rec.alignment.homography = out.homography;
    rec.alignment.ransac = out.ransac;
    rec.alignment.post_warp_max_block_shift = out.post_warp.as_ref().map(|m| m.max_block_shift);
    rec.diagnostics.extend(out.diagnostics.iter().cloned());

    let region_mask = out.valid.intersect(&mask_c)?;
    let region = region_mask.inscribed_rect().ok_or(Error::EmptyMask)?;
    let pre = quality_report(&rc, &cc, region)?;
    let post = quality_report(&rc, &out.aligned, region)?;
    if out.mode != CorrectionMode::None {
        if post.psnr_db.db() < pre.psnr_db.db() {
            rec.diagnostics.push(format!(
                "alignment increased error: PSNR {} -> {}",
                pre.psnr_db, post.psnr_db
            ));
        }
        write_artifacts(&cfg.paths.output_root, &c.pair_id, &out, &mut rec.alignment)?;
    }
    rec.pre_metrics = Some(offset(pre, crop));
    rec.metrics = Some(offset(post, crop));

    if illumination {
        rec.diagnostics
            .push("illumination shift above threshold".into());
    }
    rec.status = if out.mode != CorrectionMode::None || !rec.diagnostics.is_empty() {
        Status::NeedsReview
    } else if cfg.pipeline.auto_accept_uncorrected {
        rec.review = Some(ReviewDecision {
            pair_id: c.pair_id.clone(),
            decision: Decision::Accept,
            note: "no correction needed".into(),
            automatic: true,
            decided_at: cfg
                .pipeline
                .run_timestamp
                .clone()
                .unwrap_or_else(|| DEFAULT_RUN_TIMESTAMP.to_string()),
        });
        Status::Accepted
    } else {
        Status::Pending
    };
    Ok(())
}

/// Curates one pair. Never fails: problems surface as diagnostics, with
/// unreadable inputs auto-rejected and failed alignments sent to review.
pub fn run_pair(c: &PairCandidate, cfg: &CurationConfig) -> CurationRecord {
    let mut rec = blank_record(c, cfg);
    if let Err(e) = process(c, cfg, &mut rec) {
        rec.diagnostics.push(e.to_string());
        rec.status = match e {
            Error::Io { .. }
            | Error::UnsupportedFormat(_)
            | Error::CorruptImage(_)
            | Error::DimensionMismatch { .. }
            | Error::ChannelMismatch { .. }
            | Error::ImageTooSmall(_) => Status::AutoRejected,
            _ => Status::NeedsReview,
        };
    }
    rec
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineSummary {
    pub manifest: String,
    pub processed: usize,
    /// Pairs left untouched because a reviewer already decided them.
    pub skipped_reviewed: Vec<String>,
    pub ingest_errors: Vec<String>,
    pub status_counts: BTreeMap<Status, usize>,
}

/// Ingests the configured directories, curates every pair concurrently and
/// appends the records to the manifest in pair-id order.
pub fn run_pipeline(cfg: &CurationConfig) -> Result<PipelineSummary> {
    let rule = match &cfg.paths.pairing_csv {
        Some(p) => PairingRule::Csv(p.clone()),
        None => PairingRule::Stem,
    };
    let ingest = ingest_pairs(&cfg.paths.rainy_dir, &cfg.paths.clean_dir, &rule)?;
    let mut manifest = Manifest::open(cfg.manifest_path())?;
    let mut skipped = Vec::new();
    let todo: Vec<&PairCandidate> = ingest
        .candidates
        .iter()
        .filter(|c| {
            let human = manifest
                .get(&c.pair_id)
                .and_then(|r| r.review.as_ref())
                .is_some_and(|d| !d.automatic);
            if human {
                skipped.push(c.pair_id.clone());
            }
            !human
        })
        .collect();
    let mut records: Vec<CurationRecord> = todo.par_iter().map(|c| run_pair(c, cfg)).collect();
    for r in &mut records {
        if let Some(prev) = manifest.get(&r.pair_id) {
            r.revision = prev.revision + 1;
        }
    }
    records.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    let processed = records.len();
    manifest.append_all(records)?;
    let mut status_counts = BTreeMap::new();
    for r in manifest.records() {
        *status_counts.entry(r.status).or_insert(0) += 1;
    }
    Ok(PipelineSummary {
        manifest: cfg.manifest_path().display().to_string(),
        processed,
        skipped_reviewed: skipped,
        ingest_errors: ingest.errors,
        status_counts,
    })
}
