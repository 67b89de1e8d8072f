//! Scale-invariant keypoints: difference-of-Gaussian extrema with 4×4×8
//! gradient-histogram descriptors.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{blur_plane, ImageBuffer};

const DESCRIPTOR_WIDTH: usize = 4;
const DESCRIPTOR_BINS: usize = 8;
pub const DESCRIPTOR_LEN: usize = DESCRIPTOR_WIDTH * DESCRIPTOR_WIDTH * DESCRIPTOR_BINS;
const ORIENTATION_BINS: usize = 36;
const ORIENTATION_PEAK_RATIO: f64 = 0.8;
const ORIENTATION_SIGMA_FACTOR: f64 = 1.5;
const DESCRIPTOR_SCALE_FACTOR: f64 = 3.0;
const DESCRIPTOR_CLAMP: f32 = 0.2;
const MAX_INTERP_STEPS: usize = 5;
const IMAGE_BORDER: usize = 5;
const MIN_OCTAVE_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SiftParams {
    pub octaves: usize,
    pub scales_per_octave: usize,
    /// Blur of the first level of every octave.
    pub sigma: f64,
    /// Minimum |DoG| response at the refined extremum, before division by
    /// `scales_per_octave`.
    pub contrast_threshold: f64,
    /// Principal-curvature ratio above which edge responses are rejected.
    pub edge_ratio: f64,
    /// Blur already present in the input image.
    pub assumed_blur: f64,
}

impl Default for SiftParams {
    fn default() -> Self {
        Self {
            octaves: 4,
            scales_per_octave: 3,
            sigma: 1.6,
            contrast_threshold: 0.03,
            edge_ratio: 10.0,
            assumed_blur: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keypoint {
    /// Subpixel position in input-image coordinates.
    pub x: f64,
    pub y: f64,
    /// Blur scale in input-image pixels.
    pub scale: f64,
    /// Dominant gradient direction in radians, `[0, 2π)`.
    pub orientation: f64,
    /// Interpolated DoG response.
    pub response: f64,
    pub octave: usize,
    /// Unit-norm gradient histogram.
    pub descriptor: [f32; DESCRIPTOR_LEN],
}

#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.w + x]
    }

    fn blurred(&self, sigma: f64) -> Plane {
        Plane {
            w: self.w,
            h: self.h,
            data: blur_plane(&self.data, self.w, self.h, sigma),
        }
    }

    fn downsampled(&self) -> Plane {
        let (w, h) = (self.w.div_ceil(2), self.h.div_ceil(2));
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(self.at(2 * x, 2 * y));
            }
        }
        Plane { w, h, data }
    }
}

struct Octave {
    gauss: Vec<Plane>,
    dog: Vec<Plane>,
}

fn build_pyramid(base: Plane, params: &SiftParams) -> Vec<Octave> {
    let s = params.scales_per_octave;
    let k = 2f64.powf(1.0 / s as f64);
    // incremental blur between consecutive levels
    let steps: Vec<f64> = (1..s + 3)
        .map(|i| {
            let prev = params.sigma * k.powi(i as i32 - 1);
            let total = prev * k;
            (total * total - prev * prev).sqrt()
        })
        .collect();
    let mut octaves = Vec::with_capacity(params.octaves);
    let mut first = base;
    for o in 0..params.octaves {
        if o > 0 && (first.w < MIN_OCTAVE_SIZE || first.h < MIN_OCTAVE_SIZE) {
            break;
        }
        let mut gauss = Vec::with_capacity(s + 3);
        gauss.push(first.clone());
        for &step in &steps {
            let next = gauss.last().expect("nonempty").blurred(step);
            gauss.push(next);
        }
        let dog = gauss
            .windows(2)
            .map(|pair| Plane {
                w: pair[0].w,
                h: pair[0].h,
                data: pair[1]
                    .data
                    .iter()
                    .zip(&pair[0].data)
                    .map(|(a, b)| a - b)
                    .collect(),
            })
            .collect();
        first = gauss[s].downsampled();
        octaves.push(Octave { gauss, dog });
    }
    octaves
}

struct Candidate {
    octave: usize,
    layer: usize,
    x: f64,
    y: f64,
    layer_offset: f64,
    response: f64,
}

fn is_extremum(dog: &[Plane], layer: usize, x: usize, y: usize) -> bool {
    let v = dog[layer].at(x, y);
    let (mut is_max, mut is_min) = (true, true);
    for plane in &dog[layer - 1..=layer + 1] {
        for yy in y - 1..=y + 1 {
            for xx in x - 1..=x + 1 {
                if std::ptr::eq(plane, &dog[layer]) && xx == x && yy == y {
                    continue;
                }
                let n = plane.at(xx, yy);
                if n >= v {
                    is_max = false;
                }
                if n <= v {
                    is_min = false;
                }
                if !is_max && !is_min {
                    return false;
                }
            }
        }
    }
    is_max || is_min
}

/// Quadratic refinement of a scale-space extremum.
fn localize(
    oct: &Octave,
    o: usize,
    mut layer: usize,
    mut x: usize,
    mut y: usize,
    params: &SiftParams,
) -> Option<Candidate> {
    let s = params.scales_per_octave;
    let dog = &oct.dog;
    let (w, h) = (dog[0].w, dog[0].h);
    let mut offset = [0.0; 3];
    let mut grad = [0.0; 3];
    let mut converged = false;
    for _ in 0..MAX_INTERP_STEPS {
        let (c, p, n) = (&dog[layer], &dog[layer - 1], &dog[layer + 1]);
        let v = c.at(x, y);
        let dx = 0.5 * (c.at(x + 1, y) - c.at(x - 1, y));
        let dy = 0.5 * (c.at(x, y + 1) - c.at(x, y - 1));
        let ds = 0.5 * (n.at(x, y) - p.at(x, y));
        let dxx = c.at(x + 1, y) + c.at(x - 1, y) - 2.0 * v;
        let dyy = c.at(x, y + 1) + c.at(x, y - 1) - 2.0 * v;
        let dss = n.at(x, y) + p.at(x, y) - 2.0 * v;
        let dxy = 0.25
            * (c.at(x + 1, y + 1) - c.at(x - 1, y + 1) - c.at(x + 1, y - 1) + c.at(x - 1, y - 1));
        let dxs = 0.25 * (n.at(x + 1, y) - n.at(x - 1, y) - p.at(x + 1, y) + p.at(x - 1, y));
        let dys = 0.25 * (n.at(x, y + 1) - n.at(x, y - 1) - p.at(x, y + 1) + p.at(x, y - 1));
        let hess = nalgebra::Matrix3::new(dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss);
        grad = [dx, dy, ds];
        let sol = hess.lu().solve(&nalgebra::Vector3::new(-dx, -dy, -ds))?;
        offset = [sol.x, sol.y, sol.z];
        if offset.iter().all(|v| v.abs() < 0.5) {
            converged = true;
            break;
        }
        if offset.iter().any(|v| v.abs() > (w.max(h)) as f64) {
            return None;
        }
        let nx = x as f64 + offset[0].round();
        let ny = y as f64 + offset[1].round();
        let nl = layer as f64 + offset[2].round();
        if nl < 1.0
            || nl > s as f64
            || nx < IMAGE_BORDER as f64
            || ny < IMAGE_BORDER as f64
            || nx >= (w - IMAGE_BORDER) as f64
            || ny >= (h - IMAGE_BORDER) as f64
        {
            return None;
        }
        x = nx as usize;
        y = ny as usize;
        layer = nl as usize;
    }
    if !converged {
        return None;
    }
    let c = &dog[layer];
    let response =
        c.at(x, y) + 0.5 * (grad[0] * offset[0] + grad[1] * offset[1] + grad[2] * offset[2]);
    if response.abs() < params.contrast_threshold / params.scales_per_octave as f64 {
        return None;
    }
    // principal curvature ratio
    let v = c.at(x, y);
    let dxx = c.at(x + 1, y) + c.at(x - 1, y) - 2.0 * v;
    let dyy = c.at(x, y + 1) + c.at(x, y - 1) - 2.0 * v;
    let dxy =
        0.25 * (c.at(x + 1, y + 1) - c.at(x - 1, y + 1) - c.at(x + 1, y - 1) + c.at(x - 1, y - 1));
    let tr = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    let r = params.edge_ratio;
    if det <= 0.0 || tr * tr * r >= (r + 1.0).powi(2) * det {
        return None;
    }
    Some(Candidate {
        octave: o,
        layer,
        x: x as f64 + offset[0],
        y: y as f64 + offset[1],
        layer_offset: offset[2],
        response,
    })
}

/// Dominant orientations (radians) of the neighbourhood around a candidate.
fn orientations(img: &Plane, x: f64, y: f64, sigma_oct: f64) -> Vec<f64> {
    let sigma_w = ORIENTATION_SIGMA_FACTOR * sigma_oct;
    let radius = (3.0 * sigma_w).round() as isize;
    let (cx, cy) = (x.round() as isize, y.round() as isize);
    let mut hist = [0.0; ORIENTATION_BINS];
    let denom = 2.0 * sigma_w * sigma_w;
    for dy in -radius..=radius {
        let yy = cy + dy;
        if yy <= 0 || yy >= img.h as isize - 1 {
            continue;
        }
        for dx in -radius..=radius {
            let xx = cx + dx;
            if xx <= 0 || xx >= img.w as isize - 1 {
                continue;
            }
            let (xu, yu) = (xx as usize, yy as usize);
            let gx = img.at(xu + 1, yu) - img.at(xu - 1, yu);
            let gy = img.at(xu, yu + 1) - img.at(xu, yu - 1);
            let mag = gx.hypot(gy);
            let ang = gy.atan2(gx).rem_euclid(2.0 * PI);
            let weight = (-((dx * dx + dy * dy) as f64) / denom).exp();
            let bin =
                ((ang / (2.0 * PI)) * ORIENTATION_BINS as f64).round() as usize % ORIENTATION_BINS;
            hist[bin] += weight * mag;
        }
    }
    // [1 4 6 4 1] circular smoothing
    let mut smooth = [0.0; ORIENTATION_BINS];
    let n = ORIENTATION_BINS;
    for i in 0..n {
        smooth[i] = (hist[(i + n - 2) % n] + hist[(i + 2) % n]) / 16.0
            + 4.0 * (hist[(i + n - 1) % n] + hist[(i + 1) % n]) / 16.0
            + 6.0 * hist[i] / 16.0;
    }
    let max = smooth.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in 0..n {
        let (l, c, r) = (smooth[(i + n - 1) % n], smooth[i], smooth[(i + 1) % n]);
        if c > l && c > r && c >= ORIENTATION_PEAK_RATIO * max {
            let shift = 0.5 * (l - r) / (l - 2.0 * c + r);
            let bin = (i as f64 + shift).rem_euclid(n as f64);
            out.push(bin * 2.0 * PI / n as f64);
        }
    }
    out
}

fn descriptor(img: &Plane, x: f64, y: f64, sigma_oct: f64, angle: f64) -> [f32; DESCRIPTOR_LEN] {
    let d = DESCRIPTOR_WIDTH;
    let nb = DESCRIPTOR_BINS;
    let hist_width = DESCRIPTOR_SCALE_FACTOR * sigma_oct;
    let radius = (hist_width * std::f64::consts::SQRT_2 * (d as f64 + 1.0) * 0.5).round() as isize;
    let (cos_t, sin_t) = (angle.cos(), angle.sin());
    let exp_denom = 2.0 * (0.5 * d as f64).powi(2);
    let (cx, cy) = (x.round() as isize, y.round() as isize);
    let (fx, fy) = (x - cx as f64, y - cy as f64);
    let mut hist = vec![0.0f64; (d + 2) * (d + 2) * (nb + 2)];
    let idx = |r: usize, c: usize, o: usize| (r * (d + 2) + c) * (nb + 2) + o;

    for dy in -radius..=radius {
        for dx in -radius..=radius {
            // offset from the subpixel centre, rotated into the keypoint frame
            let (ox, oy) = (dx as f64 - fx, dy as f64 - fy);
            let x_rot = (cos_t * ox + sin_t * oy) / hist_width;
            let y_rot = (-sin_t * ox + cos_t * oy) / hist_width;
            let rbin = y_rot + d as f64 / 2.0 - 0.5;
            let cbin = x_rot + d as f64 / 2.0 - 0.5;
            if rbin <= -1.0 || rbin >= d as f64 || cbin <= -1.0 || cbin >= d as f64 {
                continue;
            }
            let (xx, yy) = (cx + dx, cy + dy);
            if xx <= 0 || yy <= 0 || xx >= img.w as isize - 1 || yy >= img.h as isize - 1 {
                continue;
            }
            let (xu, yu) = (xx as usize, yy as usize);
            let gx = img.at(xu + 1, yu) - img.at(xu - 1, yu);
            let gy = img.at(xu, yu + 1) - img.at(xu, yu - 1);
            let mag = gx.hypot(gy) * (-(x_rot * x_rot + y_rot * y_rot) / exp_denom).exp();
            let ori = (gy.atan2(gx) - angle).rem_euclid(2.0 * PI);
            let obin = ori * nb as f64 / (2.0 * PI);

            let (r0, c0, o0) = (rbin.floor(), cbin.floor(), obin.floor());
            let (dr, dc, dor) = (rbin - r0, cbin - c0, obin - o0);
            for (ri, wr) in [(0, 1.0 - dr), (1, dr)] {
                let r = (r0 as isize + 1 + ri) as usize;
                for (ci, wc) in [(0, 1.0 - dc), (1, dc)] {
                    let c = (c0 as isize + 1 + ci) as usize;
                    for (oi, wo) in [(0, 1.0 - dor), (1, dor)] {
                        let o = (o0 as usize + oi) % nb;
                        hist[idx(r, c, o)] += mag * wr * wc * wo;
                    }
                }
            }
        }
    }

    let mut out = [0f32; DESCRIPTOR_LEN];
    for r in 0..d {
        for c in 0..d {
            for o in 0..nb {
                out[(r * d + c) * nb + o] = hist[idx(r + 1, c + 1, o)] as f32;
            }
        }
    }
    normalize(&mut out);
    for v in &mut out {
        *v = v.min(DESCRIPTOR_CLAMP);
    }
    normalize(&mut out);
    out
}

fn normalize(v: &mut [f32]) {
    let norm = v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    if norm > 1e-12 {
        for x in v.iter_mut() {
            *x = (*x as f64 / norm) as f32;
        }
    }
}

/// Detects keypoints on a grayscale image of at least 32×32 pixels.
///
/// An empty result is valid (e.g. for featureless images).
pub fn detect_keypoints(img: &ImageBuffer, params: &SiftParams) -> Result<Vec<Keypoint>> {
    if img.channels() != 1 {
        return Err(Error::ChannelMismatch {
            expected: 1,
            actual: img.channels(),
        });
    }
    if img.width() < 32 || img.height() < 32 {
        return Err(Error::ImageTooSmall(format!(
            "{}x{} is below the 32x32 keypoint minimum",
            img.width(),
            img.height()
        )));
    }
    if params.octaves == 0 || params.scales_per_octave == 0 || !(params.sigma > 0.0) {
        return Err(Error::InvalidParameter(
            "SIFT needs octaves, scales and sigma > 0".into(),
        ));
    }
    let raw = Plane {
        w: img.width(),
        h: img.height(),
        data: img.data().to_vec(),
    };
    let initial = (params.sigma.powi(2) - params.assumed_blur.powi(2))
        .max(0.01)
        .sqrt();
    let pyramid = build_pyramid(raw.blurred(initial), params);
    let s = params.scales_per_octave;
    let prefilter = 0.5 * params.contrast_threshold / s as f64;

    let candidates: Vec<Candidate> = pyramid
        .par_iter()
        .enumerate()
        .flat_map_iter(|(o, oct)| {
            let (w, h) = (oct.dog[0].w, oct.dog[0].h);
            let mut found = Vec::new();
            if w <= 2 * IMAGE_BORDER || h <= 2 * IMAGE_BORDER {
                return found.into_iter();
            }
            for layer in 1..=s {
                for y in IMAGE_BORDER..h - IMAGE_BORDER {
                    for x in IMAGE_BORDER..w - IMAGE_BORDER {
                        if oct.dog[layer].at(x, y).abs() < prefilter
                            || !is_extremum(&oct.dog, layer, x, y)
                        {
                            continue;
                        }
                        if let Some(c) = localize(oct, o, layer, x, y, params) {
                            found.push(c);
                        }
                    }
                }
            }
            found.into_iter()
        })
        .collect();

    let keypoints: Vec<Keypoint> = candidates
        .par_iter()
        .flat_map_iter(|c| {
            let oct = &pyramid[c.octave];
            let sigma_oct = params.sigma * 2f64.powf((c.layer as f64 + c.layer_offset) / s as f64);
            let img = &oct.gauss[c.layer];
            let factor = 2f64.powi(c.octave as i32);
            orientations(img, c.x, c.y, sigma_oct)
                .into_iter()
                .map(|angle| Keypoint {
                    x: c.x * factor,
                    y: c.y * factor,
                    scale: sigma_oct * factor,
                    orientation: angle,
                    response: c.response,
                    octave: c.octave,
                    descriptor: descriptor(img, c.x, c.y, sigma_oct, angle),
                })
                .collect::<Vec<_>>()
                .into_iter()
        })
        .filter(|k| k.descriptor.iter().any(|&v| v != 0.0))
        .collect();
    Ok(keypoints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::to_grayscale;
    use crate::synth::procedural_scene;

    #[test]
    fn constant_image_has_no_keypoints() {
        let img = ImageBuffer::filled(64, 64, 1, 0.4).unwrap();
        assert!(detect_keypoints(&img, &SiftParams::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn too_small() {
        let img = ImageBuffer::filled(31, 64, 1, 0.4).unwrap();
        assert!(matches!(
            detect_keypoints(&img, &SiftParams::default()),
            Err(Error::ImageTooSmall(_))
        ));
    }

    #[test]
    fn descriptors_are_unit_and_inside() {
        let img = to_grayscale(&procedural_scene(128, 128, 21)).unwrap();
        let kps = detect_keypoints(&img, &SiftParams::default()).unwrap();
        assert!(!kps.is_empty());
        for k in &kps {
            let n: f64 = k
                .descriptor
                .iter()
                .map(|&v| (v as f64).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!((n - 1.0).abs() < 1e-6);
            assert!(k.scale > 0.0);
            assert!(k.x >= 0.0 && k.y >= 0.0 && k.x < 128.0 && k.y < 128.0);
            assert!(k.descriptor.iter().all(|&v| v <= DESCRIPTOR_CLAMP / 0.5));
        }
    }
}
