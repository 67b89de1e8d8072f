use serde::{Deserialize, Serialize};

use super::{
    apply_veiling, composite_rain, render_streak_layer, StreakLayer, StreakParams, VeilParams,
};
use crate::error::Result;
use crate::imaging::{
    warp_displacement, warp_homography, DisplacementField, Homography, ImageBuffer, Interpolation,
    RegionMask,
};

/// Everything needed to regenerate a synthesized rainy frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthProvenance {
    pub v: u32,
    pub width: usize,
    pub height: usize,
    pub layers: Vec<StreakParams>,
    pub veil: VeilParams,
    pub homography: Option<Homography>,
    pub field_max_magnitude: Option<f64>,
    pub layer_energy: Vec<f64>,
    pub saturated_samples: usize,
    pub invalid_pixels: usize,
}

#[derive(Debug, Clone)]
pub struct SynthesizedPair {
    pub rainy: ImageBuffer,
    /// Pixels whose geometric perturbation sampled inside the clean frame.
    pub valid: RegionMask,
    pub layers: Vec<StreakLayer>,
    pub provenance: SynthProvenance,
}

/// Builds a rainy frame from a clean one.
///
/// The clean frame is first moved by the optional homography and
/// displacement field (motion between the two capture times), then veiled,
/// then streak layers are added.
pub fn synthesize_pair(
    clean: &ImageBuffer,
    streaks: &[StreakParams],
    veil: &VeilParams,
    warp: Option<&Homography>,
    field: Option<&DisplacementField>,
) -> Result<SynthesizedPair> {
    veil.validate()?;
    for p in streaks {
        p.validate()?;
    }
    let (w, h) = (clean.width(), clean.height());
    let mut base = clean.clone();
    let mut valid = RegionMask::all(w, h);
    if let Some(hm) = warp {
        let out = warp_homography(&base, hm, Interpolation::Bilinear)?;
        base = out.image;
        valid = valid.intersect(&out.valid)?;
    }
    if let Some(f) = field {
        let out = warp_displacement(&base, f, Interpolation::Bilinear)?;
        base = out.image;
        valid = valid.intersect(&out.valid)?;
    }
    let veiled = apply_veiling(&base, veil)?;
    let layers = streaks
        .iter()
        .map(|p| render_streak_layer(w, h, p))
        .collect::<Result<Vec<_>>>()?;
    let composite = composite_rain(&veiled, &layers)?;
    let provenance = SynthProvenance {
        v: 1,
        width: w,
        height: h,
        layers: streaks.to_vec(),
        veil: *veil,
        homography: warp.copied(),
        field_max_magnitude: field.map(DisplacementField::max_magnitude),
        layer_energy: layers.iter().map(StreakLayer::energy).collect(),
        saturated_samples: composite.saturated,
        invalid_pixels: w * h - valid.count(),
    };
    Ok(SynthesizedPair {
        rainy: composite.image,
        valid,
        layers,
        provenance,
    })
}
