use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::Thresholds;
use crate::error::Result;
use crate::imaging::{luminance, ImageBuffer};
use crate::registration::{alignment_residual, fft2, MotionReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExposureReport {
    pub mean: f64,
    pub p1: f64,
    pub p99: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlluminationShift {
    /// |mean luminance(rainy) − mean luminance(clean)|.
    pub mean: f64,
    /// Signed per-channel mean delta, rainy minus clean.
    pub per_channel: Vec<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub exposure_ok: bool,
    pub rainy_exposure: ExposureReport,
    pub clean_exposure: ExposureReport,
    /// Larger of the two frames' high-frequency energy ratios.
    pub noise_proxy: f64,
    pub noise_ok: bool,
    pub illumination_shift: IlluminationShift,
    pub time_delta_minutes: Option<f64>,
    pub time_ok: bool,
    pub motion: MotionReport,
}

impl CriteriaReport {
    /// Reasons that reject the pair outright.
    pub fn hard_failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, e) in [
            ("rainy", &self.rainy_exposure),
            ("clean", &self.clean_exposure),
        ] {
            if !e.ok {
                out.push(format!(
                    "exposure: {name} frame p1 {:.3}, p99 {:.3}",
                    e.p1, e.p99
                ));
            }
        }
        if !self.noise_ok {
            out.push(format!(
                "noise: high-frequency ratio {:.3}",
                self.noise_proxy
            ));
        }
        if !self.time_ok {
            out.push(format!(
                "time delta {:.1} min",
                self.time_delta_minutes.unwrap_or(f64::NAN)
            ));
        }
        out
    }
}

/// Nearest-rank percentile of an unsorted sample, `q` in `[0, 1]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let i = (q * (sorted.len() - 1) as f64).round() as usize;
    sorted[i]
}

pub fn exposure(img: &ImageBuffer, th: &Thresholds) -> ExposureReport {
    let mut v = luminance(img).into_data();
    v.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let (p1, p99) = (percentile(&v, 0.01), percentile(&v, 0.99));
    ExposureReport {
        mean,
        p1,
        p99,
        ok: p1 <= th.exposure_p1_max && p99 >= th.exposure_p99_min,
    }
}

/// Share of non-DC spectral energy beyond ¾ of Nyquist along either axis.
pub fn noise_proxy(img: &ImageBuffer) -> f64 {
    let l = luminance(img);
    let (w, h) = (l.width(), l.height());
    let mean = l.mean();
    let mut data: Vec<Complex<f64>> = l
        .data()
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .collect();
    fft2(&mut FftPlanner::new(), &mut data, w, h, false);
    // |frequency| in cycles/pixel for FFT bin k of n
    let freq = |k: usize, n: usize| (k.min(n - k)) as f64 / n as f64;
    let (mut total, mut high) = (0.0, 0.0);
    for y in 0..h {
        let fy = freq(y, h);
        for x in 0..w {
            let e = data[y * w + x].norm_sqr();
            total += e;
            if fy.max(freq(x, w)) > 0.375 {
                high += e;
            }
        }
    }
    if total > 0.0 {
        high / total
    } else {
        0.0
    }
}

/// Collection criteria for one pair of equally sized frames.
pub fn assess_criteria(
    rainy: &ImageBuffer,
    clean: &ImageBuffer,
    time_delta_minutes: Option<f64>,
    th: &Thresholds,
) -> Result<CriteriaReport> {
    rainy.ensure_same_shape(clean)?;
    let motion = alignment_residual(rainy, clean, th.block_size)?;
    let rainy_exposure = exposure(rainy, th);
    let clean_exposure = exposure(clean, th);
    let noise = noise_proxy(rainy).max(noise_proxy(clean));
    let per_channel: Vec<f64> = (0..rainy.channels())
        .map(|c| rainy.channel(c).mean() - clean.channel(c).mean())
        .collect();
    let shift = (luminance(rainy).mean() - luminance(clean).mean()).abs();
    Ok(CriteriaReport {
        exposure_ok: rainy_exposure.ok && clean_exposure.ok,
        rainy_exposure,
        clean_exposure,
        noise_proxy: noise,
        noise_ok: noise <= th.noise_max,
        illumination_shift: IlluminationShift {
            mean: shift,
            per_channel,
            flagged: shift > th.illumination_shift,
        },
        time_delta_minutes,
        time_ok: time_delta_minutes.is_none_or(|t| t <= th.max_time_delta_minutes),
        motion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CorrectionMode {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "homography")]
    Homography,
    #[serde(rename = "elastic")]
    Elastic,
    #[serde(rename = "homography+elastic")]
    HomographyElastic,
}

impl CorrectionMode {
    pub fn uses_homography(self) -> bool {
        matches!(
            self,
            CorrectionMode::Homography | CorrectionMode::HomographyElastic
        )
    }

    pub fn uses_elastic(self) -> bool {
        matches!(
            self,
            CorrectionMode::Elastic | CorrectionMode::HomographyElastic
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CorrectionMode::None => "none",
            CorrectionMode::Homography => "homography",
            CorrectionMode::Elastic => "elastic",
            CorrectionMode::HomographyElastic => "homography+elastic",
        }
    }
}

impl std::str::FromStr for CorrectionMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => CorrectionMode::None,
            "homography" => CorrectionMode::Homography,
            "elastic" => CorrectionMode::Elastic,
            "homography+elastic" => CorrectionMode::HomographyElastic,
            other => {
                return Err(crate::Error::InvalidParameter(format!(
                    "unknown correction mode {other:?}"
                )))
            }
        })
    }
}

/// Picks the correction for a pair.
///
/// A global shift of at least `t_global` calls for a homography; elastic
/// registration follows when the motion re-measured after that warp
/// (`post_warp`) still has a block at or above `t_local`. Without a global
/// shift, block residuals alone decide on elastic.
pub fn select_correction(
    report: &MotionReport,
    post_warp: Option<&MotionReport>,
    th: &Thresholds,
) -> CorrectionMode {
    if report.global_magnitude() >= th.t_global {
        match post_warp {
            Some(post) if post.max_block_shift >= th.t_local => CorrectionMode::HomographyElastic,
            _ => CorrectionMode::Homography,
        }
    } else if report.max_block_shift >= th.t_local {
        CorrectionMode::Elastic
    } else {
        CorrectionMode::None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::procedural_scene;

    fn motion(global: [f64; 2], max_block: f64) -> MotionReport {
        MotionReport {
            global_shift: global,
            global_peak: 1.0,
            block_size: 32,
            blocks: Vec::new(),
            skipped_blocks: 0,
            max_block_shift: max_block,
            mean_block_shift: max_block,
        }
    }

    #[test]
    fn identical_pair_passes() {
        let img = procedural_scene(96, 96, 3);
        let th = Thresholds::default();
        let r = assess_criteria(&img, &img, Some(0.0), &th).unwrap();
        assert!(r.exposure_ok && r.noise_ok && r.time_ok);
        assert_eq!(r.illumination_shift.mean, 0.0);
        assert!(!r.illumination_shift.flagged);
        assert!(r.hard_failures().is_empty());
        assert_eq!(
            select_correction(&r.motion, None, &th),
            CorrectionMode::None
        );
    }

    #[test]
    fn brightness_shift_flagged() {
        let clean = procedural_scene(96, 96, 4).map(|v| v * 0.7);
        let rainy = clean.map(|v| v + 0.2);
        let r = assess_criteria(&rainy, &clean, None, &Thresholds::default()).unwrap();
        assert!((r.illumination_shift.mean - 0.2).abs() < 1e-9);
        assert!(r.illumination_shift.flagged);
        assert!(r
            .illumination_shift
            .per_channel
            .iter()
            .all(|d| (d - 0.2).abs() < 1e-9));
    }

    #[test]
    fn dark_and_noisy_frames_fail() {
        let th = Thresholds::default();
        let dark = ImageBuffer::filled(64, 64, 3, 0.02).unwrap();
        let r = assess_criteria(&dark, &dark, None, &th).unwrap();
        assert!(!r.exposure_ok);
        let bright = ImageBuffer::filled(64, 64, 3, 0.9).unwrap();
        assert!(!exposure(&bright, &th).ok);
        let mut state = 1u64;
        let noise = ImageBuffer::from_fn(64, 64, 1, |_, _, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .unwrap();
        let p = noise_proxy(&noise);
        // white noise spreads energy evenly: 1 − 0.75² of the band
        assert!((p - 0.4375).abs() < 0.05, "{p}");
        assert!(noise_proxy(&procedural_scene(64, 64, 1)) < 0.05);
        let late = assess_criteria(&bright, &bright, Some(41.0), &th).unwrap();
        assert!(!late.time_ok);
    }

    #[test]
    fn selection_rules() {
        let th = Thresholds::default();
        assert_eq!(
            select_correction(&motion([0.0, 0.0], 0.2), None, &th),
            CorrectionMode::None
        );
        assert_eq!(
            select_correction(&motion([3.0, 0.0], 3.0), None, &th),
            CorrectionMode::Homography
        );
        assert_eq!(
            select_correction(
                &motion([3.0, 0.0], 3.0),
                Some(&motion([0.0, 0.0], 0.1)),
                &th
            ),
            CorrectionMode::Homography
        );
        assert_eq!(
            select_correction(
                &motion([3.0, 0.0], 3.0),
                Some(&motion([0.0, 0.0], 1.5)),
                &th
            ),
            CorrectionMode::HomographyElastic
        );
        assert_eq!(
            select_correction(&motion([0.2, 0.1], 2.0), None, &th),
            CorrectionMode::Elastic
        );
        assert_eq!(
            "homography+elastic".parse::<CorrectionMode>().unwrap(),
            CorrectionMode::HomographyElastic
        );
        assert_eq!(
            serde_json::to_string(&CorrectionMode::HomographyElastic).unwrap(),
            "\"homography+elastic\""
        );
    }
}
