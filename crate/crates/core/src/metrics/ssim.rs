use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{gaussian_kernel_with_radius, ImageBuffer};

/// Published five-scale exponents. They sum to 1.0001, so the defaults
/// rescale them to sum to exactly one.
pub const MS_SSIM_PUBLISHED_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub k1: f64,
    pub k2: f64,
    /// Gaussian window σ in pixels.
    pub sigma: f64,
    /// Window half-width; the window is `(2r+1)²`.
    pub radius: usize,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.03,
            sigma: 1.5,
            radius: 5,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.dynamic_range > 0.0 && self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "invalid SSIM parameters {self:?}"
            )));
        }
        Ok(())
    }

    pub fn window(&self) -> usize {
        2 * self.radius + 1
    }

    fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsSsimParams {
    /// One exponent per scale, finest first.
    pub scale_weights: Vec<f64>,
    pub ssim: SsimParams,
}

impl Default for MsSsimParams {
    fn default() -> Self {
        let total: f64 = MS_SSIM_PUBLISHED_WEIGHTS.iter().sum();
        Self {
            scale_weights: MS_SSIM_PUBLISHED_WEIGHTS
                .iter()
                .map(|w| w / total)
                .collect(),
            ssim: SsimParams::default(),
        }
    }
}

impl MsSsimParams {
    pub fn single_scale(ssim: SsimParams) -> Self {
        Self {
            scale_weights: vec![1.0],
            ssim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ssim.validate()?;
        if self.scale_weights.is_empty() || self.scale_weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidParameter(
                "scale weights must be positive and nonempty".into(),
            ));
        }
        let sum: f64 = self.scale_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "scale weights sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    /// Smallest image side that supports every scale.
    pub fn min_size(&self) -> usize {
        self.ssim.window() << (self.scale_weights.len() - 1)
    }
}

#[derive(Debug, Clone)]
pub struct SsimOutput {
    /// Mean over the valid region, averaged over channels.
    pub mean: f64,
    /// Channel-averaged score map over windows fully inside the image;
    /// `(w − 2r) × (h − 2r)`.
    pub map: ImageBuffer,
}

/// Correlates with a separable kernel, keeping only fully covered positions.
fn filter_valid(p: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let r = k.len() / 2;
    let (ow, oh) = (w - 2 * r, h - 2 * r);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &p[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().zip(&row[x..]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for (i, &kv) in k.iter().enumerate() {
            let src = &tmp[(y + i) * ow..(y + i + 1) * ow];
            for (o, &v) in out[y * ow..(y + 1) * ow].iter_mut().zip(src) {
                *o += kv * v;
            }
        }
    }
    out
}

/// Luminance and contrast-structure maps of one channel.
fn components(
    a: &[f64],
    b: &[f64],
    w: usize,
    h: usize,
    params: &SsimParams,
) -> (Vec<f64>, Vec<f64>) {
    let k = gaussian_kernel_with_radius(params.sigma, params.radius);
    let mu_a = filter_valid(a, w, h, &k);
    let mu_b = filter_valid(b, w, h, &k);
    let sq = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<_>>();
    let e_aa = filter_valid(&sq(a, a), w, h, &k);
    let e_bb = filter_valid(&sq(b, b), w, h, &k);
    let e_ab = filter_valid(&sq(a, b), w, h, &k);
    let (c1, c2) = (params.c1(), params.c2());
    let n = mu_a.len();
    let mut lum = Vec::with_capacity(n);
    let mut cs = Vec::with_capacity(n);
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        lum.push((2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1));
        cs.push((2.0 * cov + c2) / (va + vb + c2));
    }
    (lum, cs)
}

fn check_inputs(a: &ImageBuffer, b: &ImageBuffer, min: usize) -> Result<()> {
    a.ensure_same_shape(b)?;
    if a.width() < min || a.height() < min {
        return Err(Error::ImageTooSmall(format!(
            "{}x{} is smaller than the required {min}x{min}",
            a.width(),
            a.height()
        )));
    }
    Ok(())
}

/// Gaussian-windowed SSIM, computed per channel and averaged.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer, params: &SsimParams) -> Result<SsimOutput> {
    params.validate()?;
    check_inputs(a, b, params.window())?;
    let (w, h, ch) = (a.width(), a.height(), a.channels());
    let (ow, oh) = (w - 2 * params.radius, h - 2 * params.radius);
    let mut map = vec![0.0; ow * oh];
    for c in 0..ch {
        let pa = a.channel(c);
        let pb = b.channel(c);
        let (lum, cs) = components(pa.data(), pb.data(), w, h, params);
        for (m, (l, s)) in map.iter_mut().zip(lum.iter().zip(&cs)) {
            *m += l * s;
        }
    }
    if ch > 1 {
        map.iter_mut().for_each(|m| *m /= ch as f64);
    }
    let mean = map.iter().sum::<f64>() / map.len() as f64;
    Ok(SsimOutput {
        mean,
        map: ImageBuffer::from_vec(ow, oh, 1, map)
            .map_err(|_| Error::NonFinite("SSIM map".into()))?,
    })
}

/// 2×2 mean pooling; a trailing odd row or column is dropped.
fn halve(p: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let (hw, hh) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(hw * hh);
    for y in 0..hh {
        for x in 0..hw {
            let i = 2 * y * w + 2 * x;
            out.push(0.25 * (p[i] + p[i + 1] + p[i + w] + p[i + w + 1]));
        }
    }
    (out, hw, hh)
}

fn ms_ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize, params: &MsSsimParams) -> f64 {
    let scales = params.scale_weights.len();
    let (mut a, mut b, mut w, mut h) = (a.to_vec(), b.to_vec(), w, h);
    let mut score = 1.0;
    for (s, &weight) in params.scale_weights.iter().enumerate() {
        let (lum, cs) = components(&a, &b, w, h, &params.ssim);
        let n = cs.len() as f64;
        let term = if s + 1 == scales {
            lum.iter().zip(&cs).map(|(l, c)| l * c).sum::<f64>() / n
        } else {
            cs.iter().sum::<f64>() / n
        };
        score *= term.max(0.0).powf(weight);
        if s + 1 < scales {
            let (na, nw, nh) = halve(&a, w, h);
            let (nb, _, _) = halve(&b, w, h);
            (a, b, w, h) = (na, nb, nw, nh);
        }
    }
    score
}

/// Multi-scale SSIM: contrast-structure terms at every scale and the full
/// SSIM term at the coarsest, each clamped at zero and raised to its weight.
pub fn ms_ssim(a: &ImageBuffer, b: &ImageBuffer, params: &MsSsimParams) -> Result<f64> {
    params.validate()?;
    check_inputs(a, b, params.min_size())?;
    let (w, h, ch) = (a.width(), a.height(), a.channels());
    let total: f64 = (0..ch)
        .map(|c| ms_ssim_plane(a.channel(c).data(), b.channel(c).data(), w, h, params))
        .sum();
    Ok(total / ch as f64)
}
