//! Translation estimation by phase correlation, globally and per block.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{gaussian_blur, luminance, ImageBuffer};

/// Blocks whose luminance standard deviation falls below this carry no
/// usable texture and are skipped.
const MIN_BLOCK_STD: f64 = 0.01;
/// Blocks whose correlation peak is weaker than this are skipped.
const MIN_BLOCK_PEAK: f64 = 0.3;
const RESIDUAL_PRESMOOTH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseShift {
    /// Translation `s` such that `b(p) ≈ a(p − s)`.
    pub dx: f64,
    pub dy: f64,
    /// Height of the normalized correlation peak, in `[0, 1]`.
    pub peak: f64,
}

/// Phase correlation between two equally sized planes.
pub fn phase_correlate(a: &[f64], b: &[f64], w: usize, h: usize) -> PhaseShift {
    debug_assert_eq!(a.len(), w * h);
    debug_assert_eq!(b.len(), w * h);
    let window = hann_2d(w, h);
    let prep = |p: &[f64]| -> Vec<Complex<f64>> {
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        p.iter()
            .zip(&window)
            .map(|(&v, &wv)| Complex::new((v - mean) * wv, 0.0))
            .collect()
    };
    let mut fa = prep(a);
    let mut fb = prep(b);
    let mut planner = FftPlanner::new();
    fft2(&mut planner, &mut fa, w, h, false);
    fft2(&mut planner, &mut fb, w, h, false);
    let mut cross: Vec<Complex<f64>> = fb
        .iter()
        .zip(&fa)
        .map(|(b, a)| {
            let c = b * a.conj();
            let n = c.norm();
            if n > 1e-12 {
                c / n
            } else {
                Complex::new(0.0, 0.0)
            }
        })
        .collect();
    fft2(&mut planner, &mut cross, w, h, true);
    let scale = (w * h) as f64;
    let surface: Vec<f64> = cross.iter().map(|c| c.re / scale).collect();

    let (mut best, mut best_v) = (0usize, f64::NEG_INFINITY);
    for (i, &v) in surface.iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    let (px, py) = (best % w, best / w);
    let at = |x: isize, y: isize| -> f64 {
        let xx = x.rem_euclid(w as isize) as usize;
        let yy = y.rem_euclid(h as isize) as usize;
        surface[yy * w + xx]
    };
    let refine = |m: f64, c: f64, p: f64| -> f64 {
        let denom = m - 2.0 * c + p;
        if denom.abs() < 1e-12 {
            0.0
        } else {
            let o = (0.5 * (m - p) / denom).clamp(-0.5, 0.5);
            // numerical noise around an exact lattice peak
            if o.abs() < 1e-6 {
                0.0
            } else {
                o
            }
        }
    };
    let (ix, iy) = (px as isize, py as isize);
    let ox = if w >= 3 {
        refine(at(ix - 1, iy), best_v, at(ix + 1, iy))
    } else {
        0.0
    };
    let oy = if h >= 3 {
        refine(at(ix, iy - 1), best_v, at(ix, iy + 1))
    } else {
        0.0
    };
    let wrap = |p: usize, n: usize| -> f64 {
        if p > n / 2 {
            p as f64 - n as f64
        } else {
            p as f64
        }
    };
    PhaseShift {
        dx: wrap(px, w) + ox,
        dy: wrap(py, h) + oy,
        peak: best_v.clamp(0.0, 1.0),
    }
}

fn hann_2d(w: usize, h: usize) -> Vec<f64> {
    let hann = |n: usize| -> Vec<f64> {
        if n < 2 {
            return vec![1.0; n];
        }
        (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
            .collect()
    };
    let (wx, wy) = (hann(w), hann(h));
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            out.push(wx[x] * wy[y]);
        }
    }
    out
}

/// In-place 2D FFT over a row-major `w×h` buffer.
pub(crate) fn fft2(
    planner: &mut FftPlanner<f64>,
    data: &mut [Complex<f64>],
    w: usize,
    h: usize,
    inverse: bool,
) {
    let row_fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    let mut col = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            col[y] = data[y * w + x];
        }
        col_fft.process(&mut col);
        for y in 0..h {
            data[y * w + x] = col[y];
        }
    }
}

/// Translation estimate for one block of the frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockShift {
    pub x: usize,
    pub y: usize,
    pub dx: f64,
    pub dy: f64,
    pub peak: f64,
}

impl BlockShift {
    pub fn magnitude(&self) -> f64 {
        self.dx.hypot(self.dy)
    }
}

/// Global and per-block residual motion between two frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionReport {
    /// `(dx, dy)` such that `b(p) ≈ a(p − shift)`.
    pub global_shift: [f64; 2],
    pub global_peak: f64,
    pub block_size: usize,
    /// Textured blocks with a usable correlation peak.
    pub blocks: Vec<BlockShift>,
    /// Number of blocks skipped for lack of texture, a weak peak or a shift
    /// beyond a quarter of the block.
    pub skipped_blocks: usize,
    pub max_block_shift: f64,
    pub mean_block_shift: f64,
}

impl MotionReport {
    pub fn global_magnitude(&self) -> f64 {
        self.global_shift[0].hypot(self.global_shift[1])
    }
}

/// Measures residual motion of `b` relative to `a` on luminance.
///
/// Partial edge blocks are dropped.
pub fn alignment_residual(a: &ImageBuffer, b: &ImageBuffer, block: usize) -> Result<MotionReport> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::dims(
            format!("{}x{}", a.width(), a.height()),
            format!("{}x{}", b.width(), b.height()),
        ));
    }
    if block < 4 {
        return Err(Error::InvalidParameter(format!("block size {block} < 4")));
    }
    let (w, h) = (a.width(), a.height());
    if w < block || h < block {
        return Err(Error::ImageTooSmall(format!(
            "{w}x{h} smaller than one {block}px block"
        )));
    }
    // light smoothing keeps thin streaks and resampling blur out of the
    // whitened spectrum
    let la = gaussian_blur(&luminance(a), RESIDUAL_PRESMOOTH)?;
    let lb = gaussian_blur(&luminance(b), RESIDUAL_PRESMOOTH)?;
    let global = phase_correlate(la.data(), lb.data(), w, h);

    let mut blocks = Vec::new();
    let mut skipped = 0;
    let mut pa = vec![0.0; block * block];
    let mut pb = vec![0.0; block * block];
    for by in 0..h / block {
        for bx in 0..w / block {
            let (x0, y0) = (bx * block, by * block);
            for y in 0..block {
                for x in 0..block {
                    pa[y * block + x] = la.get(x0 + x, y0 + y, 0);
                    pb[y * block + x] = lb.get(x0 + x, y0 + y, 0);
                }
            }
            if std_dev(&pa) < MIN_BLOCK_STD || std_dev(&pb) < MIN_BLOCK_STD {
                skipped += 1;
                continue;
            }
            let s = phase_correlate(&pa, &pb, block, block);
            // beyond a quarter block the windowed peak is unreliable
            if s.peak < MIN_BLOCK_PEAK || s.dx.hypot(s.dy) > block as f64 / 4.0 {
                skipped += 1;
                continue;
            }
            blocks.push(BlockShift {
                x: x0,
                y: y0,
                dx: s.dx,
                dy: s.dy,
                peak: s.peak,
            });
        }
    }
    let max_block_shift = blocks.iter().map(BlockShift::magnitude).fold(0.0, f64::max);
    let mean_block_shift = if blocks.is_empty() {
        0.0
    } else {
        blocks.iter().map(BlockShift::magnitude).sum::<f64>() / blocks.len() as f64
    };
    Ok(MotionReport {
        global_shift: [global.dx, global.dy],
        global_peak: global.peak,
        block_size: block,
        blocks,
        skipped_blocks: skipped,
        max_block_shift,
        mean_block_shift,
    })
}

fn std_dev(p: &[f64]) -> f64 {
    let n = p.len() as f64;
    let mean = p.iter().sum::<f64>() / n;
    (p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::procedural_scene;

    #[test]
    fn identical_images() {
        let img = procedural_scene(128, 128, 3);
        let r = alignment_residual(&img, &img, 32).unwrap();
        assert_eq!(r.global_shift, [0.0, 0.0]);
        assert!(r.blocks.iter().all(|b| b.dx == 0.0 && b.dy == 0.0));
        assert_eq!(r.max_block_shift, 0.0);
    }

    #[test]
    fn integer_shift_recovered() {
        let big = procedural_scene(160, 160, 9);
        let a = big.crop(16, 16, 128, 128).unwrap();
        // b(p) = a(p - (2, -3))
        let b = big.crop(14, 19, 128, 128).unwrap();
        let r = alignment_residual(&a, &b, 32).unwrap();
        assert_eq!(r.global_shift[0].round(), 2.0);
        assert_eq!(r.global_shift[1].round(), -3.0);
        assert!((r.global_shift[0] - 2.0).abs() < 0.1);
        assert!((r.global_shift[1] + 3.0).abs() < 0.1);
    }

    #[test]
    fn too_small() {
        let img = ImageBuffer::new(16, 16, 1).unwrap();
        assert!(matches!(
            alignment_residual(&img, &img, 32),
            Err(Error::ImageTooSmall(_))
        ));
    }

    #[test]
    fn flat_blocks_are_skipped() {
        let img = ImageBuffer::filled(64, 64, 1, 0.5).unwrap();
        let r = alignment_residual(&img, &img, 32).unwrap();
        assert!(r.blocks.is_empty());
        assert_eq!(r.skipped_blocks, 4);
    }
}
