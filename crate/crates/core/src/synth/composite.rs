use serde::{Deserialize, Serialize};

use super::StreakLayer;
use crate::error::{Error, Result};
use crate::imaging::{ImageBuffer, LUMA_WEIGHTS};

/// Result of adding rain layers onto a clean frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Composite {
    pub image: ImageBuffer,
    /// Samples that exceeded 1 before clamping.
    pub saturated: usize,
}

/// `I = J + Σ Sᵢ`, each layer broadcast across channels, clamped to `[0, 1]`.
pub fn composite_rain(clean: &ImageBuffer, layers: &[StreakLayer]) -> Result<Composite> {
    for layer in layers {
        if layer.width() != clean.width() || layer.height() != clean.height() {
            return Err(Error::dims(
                format!("{}x{}", clean.width(), clean.height()),
                format!("{}x{}", layer.width(), layer.height()),
            ));
        }
    }
    let ch = clean.channels();
    let mut image = clean.clone();
    for layer in layers {
        for (px, &s) in image.data_mut().chunks_exact_mut(ch).zip(layer.intensity()) {
            for v in px {
                *v += s;
            }
        }
    }
    let saturated = image.clamp();
    Ok(Composite { image, saturated })
}

/// Fog-like veiling as an alpha blend toward a uniform airlight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VeilParams {
    pub strength: f64,
    pub airlight: [f64; 3],
}

impl VeilParams {
    pub fn none() -> Self {
        Self {
            strength: 0.0,
            airlight: [1.0; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.strength) {
            return Err(Error::InvalidParameter(format!(
                "veil strength {} outside [0, 1]",
                self.strength
            )));
        }
        if self.airlight.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidParameter("airlight outside [0, 1]".into()));
        }
        Ok(())
    }
}

impl Default for VeilParams {
    fn default() -> Self {
        Self::none()
    }
}

/// `out = (1 − strength)·img + strength·airlight` per channel.
///
/// Grayscale images blend toward the luminance of the airlight color.
pub fn apply_veiling(img: &ImageBuffer, veil: &VeilParams) -> Result<ImageBuffer> {
    veil.validate()?;
    let s = veil.strength;
    if s == 0.0 {
        return Ok(img.clone());
    }
    let air: Vec<f64> = if img.channels() == 3 {
        veil.airlight.to_vec()
    } else {
        vec![veil
            .airlight
            .iter()
            .zip(LUMA_WEIGHTS)
            .map(|(a, w)| a * w)
            .sum()]
    };
    let ch = img.channels();
    let mut out = img.clone();
    for px in out.data_mut().chunks_exact_mut(ch) {
        for (v, a) in px.iter_mut().zip(&air) {
            *v = (1.0 - s) * *v + s * a;
        }
    }
    Ok(out)
}
