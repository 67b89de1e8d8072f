use rayon::prelude::*;

use super::ImageBuffer;
use crate::error::{Error, Result};

/// Normalized 1D Gaussian kernel with radius `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i64;
    gaussian_kernel_with_radius(sigma, radius as usize)
}

pub fn gaussian_kernel_with_radius(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as i64;
    let denom = 2.0 * sigma * sigma;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / denom).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian blur with clamp-to-edge borders.
pub fn gaussian_blur(img: &ImageBuffer, sigma: f64) -> Result<ImageBuffer> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gaussian sigma must be >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let mut out = img.clone();
    convolve_separable(out.data_mut(), w, h, c, &kernel);
    Ok(out)
}

/// Blurs an interleaved `w×h×stride` buffer in place.
pub(crate) fn convolve_separable(
    data: &mut [f64],
    w: usize,
    h: usize,
    stride: usize,
    kernel: &[f64],
) {
    if kernel.len() == 1 || w == 0 || h == 0 {
        return;
    }
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; data.len()];
    let line = w * stride;
    // horizontal pass
    {
        let src = &*data;
        tmp.par_chunks_mut(line).enumerate().for_each(|(y, out)| {
            let row = &src[y * line..(y + 1) * line];
            for x in 0..w {
                for ch in 0..stride {
                    let mut acc = 0.0;
                    for (k, &kv) in kernel.iter().enumerate() {
                        let sx = (x as isize + k as isize - r).clamp(0, w as isize - 1) as usize;
                        acc += kv * row[sx * stride + ch];
                    }
                    out[x * stride + ch] = acc;
                }
            }
        });
    }
    // vertical pass
    data.par_chunks_mut(line).enumerate().for_each(|(y, out)| {
        out.fill(0.0);
        for (k, &kv) in kernel.iter().enumerate() {
            let sy = (y as isize + k as isize - r).clamp(0, h as isize - 1) as usize;
            let src = &tmp[sy * line..(sy + 1) * line];
            for (o, &v) in out.iter_mut().zip(src) {
                *o += kv * v;
            }
        }
    });
}

/// Blurs a single-channel plane, returning a new buffer.
pub(crate) fn blur_plane(plane: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let mut out = plane.to_vec();
    if sigma > 0.0 {
        convolve_separable(&mut out, w, h, 1, &gaussian_kernel(sigma));
    }
    out
}

fn row_extreme(src: &[f64], dst: &mut [f64], r: usize, pick: fn(f64, f64) -> f64) {
    let w = src.len();
    for (x, d) in dst.iter_mut().enumerate() {
        *d = src[x.saturating_sub(r)..(x + r + 1).min(w)]
            .iter()
            .copied()
            .reduce(pick)
            .expect("window is nonempty");
    }
}

/// Grey-scale opening with a horizontal line of `2·radius + 1` pixels, per
/// channel. Removes bright structures narrower than the line, such as
/// near-vertical rain streaks; darker detail is kept.
pub fn open_horizontal(img: &ImageBuffer, radius: usize) -> Result<ImageBuffer> {
    if radius == 0 {
        return Ok(img.clone());
    }
    let (w, ch) = (img.width(), img.channels());
    let mut out = img.clone();
    let mut src = vec![0.0; w];
    let mut eroded = vec![0.0; w];
    let mut opened = vec![0.0; w];
    for row in out.data_mut().chunks_exact_mut(w * ch) {
        for c in 0..ch {
            for (x, v) in src.iter_mut().enumerate() {
                *v = row[x * ch + c];
            }
            row_extreme(&src, &mut eroded, radius, f64::min);
            row_extreme(&eroded, &mut opened, radius, f64::max);
            for (x, v) in opened.iter().enumerate() {
                row[x * ch + c] = *v;
            }
        }
    }
    Ok(out)
}
