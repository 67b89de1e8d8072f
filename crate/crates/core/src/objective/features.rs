use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MIN_NORM: f64 = 1e-12;

/// Channel-major `channels × height × width` activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidParameter(
                "feature map needs at least one channel".into(),
            ));
        }
        if values.len() != channels * height * width {
            return Err(Error::dims(
                format!("{channels}x{height}x{width}"),
                format!("{} values", values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature map".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.values[(c * self.height + y) * self.width + x]
    }
}

/// A finite real vector; 1024 entries in the paper configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * s).collect())
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn norm(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn checked_norms(u: &[f64], v: &[f64]) -> Result<(f64, f64)> {
    if u.len() != v.len() {
        return Err(Error::dims(
            format!("length {}", u.len()),
            format!("length {}", v.len()),
        ));
    }
    let (nu, nv) = (norm(u), norm(v));
    if !(nu > MIN_NORM && nv > MIN_NORM) {
        return Err(Error::ZeroNorm);
    }
    Ok((nu, nv))
}

/// `uᵀv / (‖u‖‖v‖)`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    let (nu, nv) = checked_norms(u, v)?;
    Ok(dot(u, v) / (nu * nv))
}

/// Similarity with its gradients with respect to `u` and `v`.
pub fn cosine_similarity_grad(u: &[f64], v: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let (nu, nv) = checked_norms(u, v)?;
    let s = dot(u, v) / (nu * nv);
    let inv = 1.0 / (nu * nv);
    let (su, sv) = (s / (nu * nu), s / (nv * nv));
    let gu = u.iter().zip(v).map(|(a, b)| b * inv - su * a).collect();
    let gv = u.iter().zip(v).map(|(a, b)| a * inv - sv * b).collect();
    Ok((s, gu, gv))
}

/// Average-pools every channel onto a 2×2 grid and flattens channel-major,
/// cells in row order. Odd sides give the first cell the extra row/column.
pub fn condense_features(map: &FeatureMap) -> Result<FeatureVector> {
    let (h, w) = (map.height, map.width);
    if h < 2 || w < 2 {
        return Err(Error::ImageTooSmall(format!(
            "feature map {h}x{w}, need at least 2x2"
        )));
    }
    let (hs, ws) = (h.div_ceil(2), w.div_ceil(2));
    let rows = [(0, hs), (hs, h)];
    let cols = [(0, ws), (ws, w)];
    let mut out = Vec::with_capacity(map.channels * 4);
    for c in 0..map.channels {
        for &(y0, y1) in &rows {
            for &(x0, x1) in &cols {
                let mut acc = 0.0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        acc += map.get(c, y, x);
                    }
                }
                out.push(acc / ((y1 - y0) * (x1 - x0)) as f64);
            }
        }
    }
    FeatureVector::new(out)
}
