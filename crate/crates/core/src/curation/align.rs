use serde::Serialize;

use super::{select_correction, CorrectionMode, RansacSummary, RegistrationConfig, Thresholds};
use crate::error::{Error, Result};
use crate::imaging::{
    gaussian_blur, open_horizontal, to_grayscale, warp_displacement, warp_homography,
    DisplacementField, Homography, ImageBuffer, Interpolation, RegionMask,
};
use crate::registration::{
    alignment_residual, detect_keypoints, estimate_homography_ransac, match_descriptors,
    register_elastic, MotionReport,
};

/// Pre-smoothing applied to both frames before demons so thin rain streaks
/// do not drive the field.
const DEMONS_PRESMOOTH: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct AlignmentOutcome {
    pub mode: CorrectionMode,
    pub homography: Option<Homography>,
    pub ransac: Option<RansacSummary>,
    pub field: Option<DisplacementField>,
    /// The clean frame resampled onto the rainy frame's geometry.
    pub aligned: ImageBuffer,
    /// Pixels of `aligned` that sampled inside the clean frame.
    pub valid: RegionMask,
    pub post_warp: Option<MotionReport>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeRequest {
    Auto,
    Fixed(CorrectionMode),
}

fn gray(img: &ImageBuffer) -> Result<ImageBuffer> {
    if img.channels() == 1 {
        Ok(img.clone())
    } else {
        to_grayscale(img)
    }
}

/// Homography taking clean-frame coordinates to rainy-frame coordinates.
pub fn estimate_pair_homography(
    rainy: &ImageBuffer,
    clean: &ImageBuffer,
    cfg: &RegistrationConfig,
) -> Result<(Homography, RansacSummary)> {
    let prep = |img: &ImageBuffer| open_horizontal(&gray(img)?, cfg.streak_suppression);
    let kc = detect_keypoints(&prep(clean)?, &cfg.sift)?;
    let kr = detect_keypoints(&prep(rainy)?, &cfg.sift)?;
    let matches = match_descriptors(&kc, &kr, cfg.ratio)?;
    let r = estimate_homography_ransac(&matches, &cfg.ransac)?;
    let summary = RansacSummary {
        matches: matches.len(),
        inliers: r.inlier_count(),
        iterations: r.iterations_used,
        mean_error: r.mean_reprojection_error,
    };
    Ok((r.homography, summary))
}

/// Block residuals between `a` and `b` restricted to the largest valid rectangle.
fn residual_on_valid(
    a: &ImageBuffer,
    b: &ImageBuffer,
    valid: &RegionMask,
    block: usize,
) -> Result<MotionReport> {
    let r = valid.inscribed_rect().ok_or(Error::EmptyMask)?;
    let ca = a.crop(r.x, r.y, r.w, r.h)?;
    let cb = b.crop(r.x, r.y, r.w, r.h)?;
    alignment_residual(&ca, &cb, block)
}

/// Elastic stage: the field is estimated on smoothed luminance with invalid
/// pixels of `moving` replaced by the fixed frame so they exert no force.
fn elastic(
    rainy: &ImageBuffer,
    moving: &ImageBuffer,
    valid: &RegionMask,
    cfg: &RegistrationConfig,
) -> Result<(DisplacementField, ImageBuffer, RegionMask)> {
    let fixed = gray(rainy)?;
    let mut mov = gray(moving)?;
    for y in 0..mov.height() {
        for x in 0..mov.width() {
            if !valid.get(x, y) {
                mov.set(x, y, 0, fixed.get(x, y, 0));
            }
        }
    }
    let field = register_elastic(
        &gaussian_blur(&mov, DEMONS_PRESMOOTH)?,
        &gaussian_blur(&fixed, DEMONS_PRESMOOTH)?,
        &cfg.demons,
    )?;
    let warped = warp_displacement(moving, &field, Interpolation::Bilinear)?;
    // a pixel stays valid only if every bilinear tap was valid
    let carried = warp_displacement(&valid.to_image(), &field, Interpolation::Bilinear)?;
    let still = RegionMask::from_fn(valid.width(), valid.height(), |x, y| {
        warped.valid.get(x, y) && carried.image.get(x, y, 0) >= 1.0 - 1e-9
    });
    Ok((field, warped.image, still))
}

/// Aligns `clean` onto `rainy`. With [`ModeRequest::Auto`] the mode is
/// chosen from `motion` (and the post-warp residual); a fixed mode runs as
/// requested. Failures of individual stages are reported in `diagnostics`
/// and leave the frame as it was before that stage.
pub fn align_pair(
    rainy: &ImageBuffer,
    clean: &ImageBuffer,
    motion: &MotionReport,
    request: ModeRequest,
    cfg: &RegistrationConfig,
    th: &Thresholds,
) -> Result<AlignmentOutcome> {
    rainy.ensure_same_shape(clean)?;
    let (w, h) = (rainy.width(), rainy.height());
    let mut out = AlignmentOutcome {
        mode: CorrectionMode::None,
        homography: None,
        ransac: None,
        field: None,
        aligned: clean.clone(),
        valid: RegionMask::all(w, h),
        post_warp: None,
        diagnostics: Vec::new(),
    };
    let initial = match request {
        ModeRequest::Auto => select_correction(motion, None, th),
        ModeRequest::Fixed(m) => m,
    };
    out.mode = initial;
    if initial.uses_homography() {
        match estimate_pair_homography(rainy, clean, cfg) {
            Ok((hm, summary)) => {
                let warped = warp_homography(clean, &hm, Interpolation::Bilinear)?;
                out.homography = Some(hm);
                out.ransac = Some(summary);
                out.aligned = warped.image;
                out.valid = warped.valid;
                match residual_on_valid(rainy, &out.aligned, &out.valid, th.block_size) {
                    Ok(post) => {
                        if request == ModeRequest::Auto {
                            out.mode = select_correction(motion, Some(&post), th);
                        }
                        out.post_warp = Some(post);
                    }
                    Err(e) => out.diagnostics.push(format!("post-warp residual: {e}")),
                }
            }
            Err(e) => out
                .diagnostics
                .push(format!("homography estimation failed: {e}")),
        }
    }
    if out.mode.uses_elastic() {
        match elastic(rainy, &out.aligned, &out.valid, cfg) {
            Ok((field, image, valid)) => {
                out.field = Some(field);
                out.aligned = image;
                out.valid = valid;
            }
            Err(e) => out
                .diagnostics
                .push(format!("elastic registration failed: {e}")),
        }
    }
    Ok(out)
}
