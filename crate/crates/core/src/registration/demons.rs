//! Additive demons registration with Gaussian regularization, run
//! coarse-to-fine over a ×4, ×2, ×1 pyramid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{convolve_separable, gaussian_kernel, DisplacementField, ImageBuffer};

const DENOM_EPS: f64 = 1e-10;
const PYRAMID_FACTORS: [usize; 3] = [4, 2, 1];
const MIN_LEVEL_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemonsParams {
    /// Iteration cap per pyramid level.
    pub iterations: usize,
    pub field_smoothing_sigma: f64,
    pub update_smoothing_sigma: f64,
    /// Per-pixel cap on one iteration's update, in level pixels.
    pub max_step: f64,
    /// Stop a level once the mean update magnitude drops below this.
    pub stop_tolerance: f64,
}

impl Default for DemonsParams {
    fn default() -> Self {
        Self {
            iterations: 200,
            field_smoothing_sigma: 2.0,
            update_smoothing_sigma: 1.0,
            max_step: 2.0,
            stop_tolerance: 0.01,
        }
    }
}

impl DemonsParams {
    pub fn validate(&self) -> Result<()> {
        let positive = self.iterations > 0
            && self.field_smoothing_sigma > 0.0
            && self.update_smoothing_sigma > 0.0
            && self.max_step > 0.0
            && self.stop_tolerance > 0.0;
        if !positive || self.stop_tolerance >= self.max_step {
            return Err(Error::InvalidParameter(format!(
                "demons parameters must be positive with stop_tolerance < max_step: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Per-iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemonsIteration {
    /// Downsampling factor of the level.
    pub level: usize,
    pub iteration: usize,
    pub max_update: f64,
    pub mean_update: f64,
}

#[derive(Debug, Clone)]
pub struct DemonsOutcome {
    pub field: DisplacementField,
    pub trace: Vec<DemonsIteration>,
}

/// Estimates `field` such that `moving(p + field(p)) ≈ fixed(p)`.
pub fn register_elastic(
    moving: &ImageBuffer,
    fixed: &ImageBuffer,
    params: &DemonsParams,
) -> Result<DisplacementField> {
    register_elastic_traced(moving, fixed, params).map(|o| o.field)
}

/// [`register_elastic`] that also returns per-iteration update statistics.
pub fn register_elastic_traced(
    moving: &ImageBuffer,
    fixed: &ImageBuffer,
    params: &DemonsParams,
) -> Result<DemonsOutcome> {
    params.validate()?;
    if moving.width() != fixed.width() || moving.height() != fixed.height() {
        return Err(Error::dims(
            format!("{}x{}", fixed.width(), fixed.height()),
            format!("{}x{}", moving.width(), moving.height()),
        ));
    }
    for img in [moving, fixed] {
        if img.channels() != 1 {
            return Err(Error::ChannelMismatch {
                expected: 1,
                actual: img.channels(),
            });
        }
    }
    let (w, h) = (fixed.width(), fixed.height());
    let mut trace = Vec::new();
    let mut field: Option<(usize, usize, Vec<[f64; 2]>)> = None;
    let update_kernel = gaussian_kernel(params.update_smoothing_sigma);
    let field_kernel = gaussian_kernel(params.field_smoothing_sigma);

    for &factor in &PYRAMID_FACTORS {
        let (lw, lh) = (w.div_ceil(factor), h.div_ceil(factor));
        if factor > 1 && (lw < MIN_LEVEL_SIZE || lh < MIN_LEVEL_SIZE) {
            continue;
        }
        let m = downsample(moving.data(), w, h, factor);
        let f = downsample(fixed.data(), w, h, factor);
        let mut u = match field.take() {
            None => vec![[0.0; 2]; lw * lh],
            Some((cw, ch, coarse)) => upsample_field(&coarse, cw, ch, lw, lh),
        };
        let (gx, gy) = gradient(&f, lw, lh);
        let mut warped = vec![0.0; lw * lh];
        let mut update = vec![0.0; lw * lh * 2];
        let mut flat = vec![0.0; lw * lh * 2];
        for iteration in 0..params.iterations {
            warp_clamped(&m, lw, lh, &u, &mut warped);
            update
                .par_chunks_exact_mut(2)
                .enumerate()
                .for_each(|(i, step)| {
                    let diff = warped[i] - f[i];
                    let denom = gx[i] * gx[i] + gy[i] * gy[i] + diff * diff;
                    if denom < DENOM_EPS {
                        step.fill(0.0);
                    } else {
                        step[0] = -diff * gx[i] / denom;
                        step[1] = -diff * gy[i] / denom;
                    }
                });
            convolve_separable(&mut update, lw, lh, 2, &update_kernel);
            let (mut max_update, mut sum_update) = (0.0f64, 0.0);
            for step in update.chunks_exact_mut(2) {
                let mag = step[0].hypot(step[1]);
                if mag > params.max_step {
                    let s = params.max_step / mag;
                    step[0] *= s;
                    step[1] *= s;
                }
                let mag = step[0].hypot(step[1]);
                max_update = max_update.max(mag);
                sum_update += mag;
            }
            for (i, v) in u.iter_mut().enumerate() {
                flat[2 * i] = v[0] + update[2 * i];
                flat[2 * i + 1] = v[1] + update[2 * i + 1];
            }
            convolve_separable(&mut flat, lw, lh, 2, &field_kernel);
            for (i, v) in u.iter_mut().enumerate() {
                *v = [flat[2 * i], flat[2 * i + 1]];
            }
            let mean_update = sum_update / (lw * lh) as f64;
            trace.push(DemonsIteration {
                level: factor,
                iteration,
                max_update,
                mean_update,
            });
            if mean_update < params.stop_tolerance {
                break;
            }
        }
        field = Some((lw, lh, u));
    }
    let (fw, fh, vectors) = field.expect("the full-resolution level always runs");
    debug_assert_eq!((fw, fh), (w, h));
    Ok(DemonsOutcome {
        field: DisplacementField::from_vectors(w, h, vectors)?,
        trace,
    })
}

/// Box-average downsampling; partial edge blocks average what they cover.
fn downsample(data: &[f64], w: usize, h: usize, factor: usize) -> Vec<f64> {
    if factor == 1 {
        return data.to_vec();
    }
    let (lw, lh) = (w.div_ceil(factor), h.div_ceil(factor));
    let mut out = vec![0.0; lw * lh];
    for ly in 0..lh {
        for lx in 0..lw {
            let (mut acc, mut n) = (0.0, 0usize);
            for y in ly * factor..((ly + 1) * factor).min(h) {
                for x in lx * factor..((lx + 1) * factor).min(w) {
                    acc += data[y * w + x];
                    n += 1;
                }
            }
            out[ly * lw + lx] = acc / n as f64;
        }
    }
    out
}

/// Bilinear upsampling of a coarse field; vectors are rescaled with the grid.
fn upsample_field(coarse: &[[f64; 2]], cw: usize, ch: usize, w: usize, h: usize) -> Vec<[f64; 2]> {
    let (sx, sy) = (cw as f64 / w as f64, ch as f64 / h as f64);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let cy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (ch - 1) as f64);
        let y0 = cy.floor() as usize;
        let y1 = (y0 + 1).min(ch - 1);
        let ty = cy - y0 as f64;
        for x in 0..w {
            let cx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (cw - 1) as f64);
            let x0 = cx.floor() as usize;
            let x1 = (x0 + 1).min(cw - 1);
            let tx = cx - x0 as f64;
            let mut v = [0.0; 2];
            for (k, item) in v.iter_mut().enumerate() {
                let top = coarse[y0 * cw + x0][k] * (1.0 - tx) + coarse[y0 * cw + x1][k] * tx;
                let bottom = coarse[y1 * cw + x0][k] * (1.0 - tx) + coarse[y1 * cw + x1][k] * tx;
                *item = top * (1.0 - ty) + bottom * ty;
            }
            out.push([v[0] / sx, v[1] / sy]);
        }
    }
    out
}

fn gradient(data: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (xm, xp) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (ym, yp) = (y.saturating_sub(1), (y + 1).min(h - 1));
            if xp > xm {
                gx[y * w + x] = (data[y * w + xp] - data[y * w + xm]) / (xp - xm) as f64;
            }
            if yp > ym {
                gy[y * w + x] = (data[yp * w + x] - data[ym * w + x]) / (yp - ym) as f64;
            }
        }
    }
    (gx, gy)
}

/// Bilinear warp with clamp-to-edge sampling.
fn warp_clamped(data: &[f64], w: usize, h: usize, field: &[[f64; 2]], out: &mut [f64]) {
    let (maxx, maxy) = ((w - 1) as f64, (h - 1) as f64);
    out.par_chunks_exact_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, o) in row.iter_mut().enumerate() {
                let d = field[y * w + x];
                let sx = (x as f64 + d[0]).clamp(0.0, maxx);
                let sy = (y as f64 + d[1]).clamp(0.0, maxy);
                let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
                let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
                let (tx, ty) = (sx - x0 as f64, sy - y0 as f64);
                let top = data[y0 * w + x0] * (1.0 - tx) + data[y0 * w + x1] * tx;
                let bottom = data[y1 * w + x0] * (1.0 - tx) + data[y1 * w + x1] * tx;
                *o = top * (1.0 - ty) + bottom * ty;
            }
        });
}
