//! Inverse-mapping warps with zero fill and a validity mask.

use serde::{Deserialize, Serialize};

use super::{DisplacementField, Homography, ImageBuffer, RegionMask};
use crate::error::{Error, Result};

const EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Nearest,
    #[default]
    Bilinear,
}

/// A resampled image plus the pixels whose source sample was in bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Warped {
    pub image: ImageBuffer,
    pub valid: RegionMask,
}

/// Samples every channel of `img` at `(x, y)` into `out`.
///
/// Returns `false` (leaving `out` untouched) when the sample falls outside
/// the image.
#[inline]
pub fn sample_into(
    img: &ImageBuffer,
    x: f64,
    y: f64,
    interp: Interpolation,
    out: &mut [f64],
) -> bool {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    if w == 0 || h == 0 || !x.is_finite() || !y.is_finite() {
        return false;
    }
    let data = img.data();
    match interp {
        Interpolation::Nearest => {
            let (xi, yi) = (x.round(), y.round());
            if xi < 0.0 || yi < 0.0 || xi > (w - 1) as f64 || yi > (h - 1) as f64 {
                return false;
            }
            let base = (yi as usize * w + xi as usize) * ch;
            out[..ch].copy_from_slice(&data[base..base + ch]);
            true
        }
        Interpolation::Bilinear => {
            let (maxx, maxy) = ((w - 1) as f64, (h - 1) as f64);
            if x < -EDGE_EPS || y < -EDGE_EPS || x > maxx + EDGE_EPS || y > maxy + EDGE_EPS {
                return false;
            }
            let x = x.clamp(0.0, maxx);
            let y = y.clamp(0.0, maxy);
            let (x0, y0) = (x.floor() as usize, y.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (x - x0 as f64, y - y0 as f64);
            let i00 = (y0 * w + x0) * ch;
            let i10 = (y0 * w + x1) * ch;
            let i01 = (y1 * w + x0) * ch;
            let i11 = (y1 * w + x1) * ch;
            for c in 0..ch {
                let top = (1.0 - fx) * data[i00 + c] + fx * data[i10 + c];
                let bottom = (1.0 - fx) * data[i01 + c] + fx * data[i11 + c];
                out[c] = (1.0 - fy) * top + fy * bottom;
            }
            true
        }
    }
}

fn warp_by(
    img: &ImageBuffer,
    interp: Interpolation,
    mut source_of: impl FnMut(usize, usize) -> Option<(f64, f64)>,
) -> Warped {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut out = ImageBuffer::new(w, h, ch).expect("channel count already validated");
    let mut valid = RegionMask::none(w, h);
    let mut px = [0.0; 3];
    for y in 0..h {
        for x in 0..w {
            if let Some((sx, sy)) = source_of(x, y) {
                if sample_into(img, sx, sy, interp, &mut px) {
                    let base = (y * w + x) * ch;
                    out.data_mut()[base..base + ch].copy_from_slice(&px[..ch]);
                    valid.set(x, y, true);
                }
            }
        }
    }
    Warped { image: out, valid }
}

/// Output pixel `p` takes the value of `img` at `h⁻¹·p`.
pub fn warp_homography(img: &ImageBuffer, h: &Homography, interp: Interpolation) -> Result<Warped> {
    let det = h.matrix().determinant();
    if det.abs() <= 1e-12 {
        return Err(Error::SingularHomography(det));
    }
    let inv = h.inverse();
    Ok(warp_by(img, interp, |x, y| inv.apply(x as f64, y as f64)))
}

/// Output pixel `p` takes the value of `img` at `p + field(p)`.
pub fn warp_displacement(
    img: &ImageBuffer,
    field: &DisplacementField,
    interp: Interpolation,
) -> Result<Warped> {
    if field.width() != img.width() || field.height() != img.height() {
        return Err(Error::dims(
            format!("{}x{}", img.width(), img.height()),
            format!("{}x{}", field.width(), field.height()),
        ));
    }
    Ok(warp_by(img, interp, |x, y| {
        let d = field.get(x, y);
        Some((x as f64 + d[0], y as f64 + d[1]))
    }))
}
