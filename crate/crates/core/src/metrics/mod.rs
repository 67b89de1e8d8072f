//! Full-reference quality metrics.

mod psnr;
mod ssim;

use serde::{Deserialize, Serialize};

pub use psnr::{psnr, Psnr};
pub use ssim::{ms_ssim, ssim, MsSsimParams, SsimOutput, SsimParams, MS_SSIM_PUBLISHED_WEIGHTS};

use crate::error::{Error, Result};
use crate::imaging::{ImageBuffer, Rect};

/// Metrics over one region of a pair. `ms_ssim` is `None` when the region
/// is too small for every scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr_db: Psnr,
    pub ssim: f64,
    pub ms_ssim: Option<f64>,
    pub region: Rect,
}

/// PSNR (peak 1), SSIM and MS-SSIM with default parameters over `region`.
pub fn quality_report(a: &ImageBuffer, b: &ImageBuffer, region: Rect) -> Result<MetricReport> {
    a.ensure_same_shape(b)?;
    let ca = a.crop(region.x, region.y, region.w, region.h)?;
    let cb = b.crop(region.x, region.y, region.w, region.h)?;
    let ms = MsSsimParams::default();
    let ms_ssim = match ms_ssim(&ca, &cb, &ms) {
        Ok(v) => Some(v),
        Err(Error::ImageTooSmall(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricReport {
        psnr_db: psnr(&ca, &cb, 1.0)?,
        ssim: ssim(&ca, &cb, &ms.ssim)?.mean,
        ms_ssim,
        region,
    })
}
