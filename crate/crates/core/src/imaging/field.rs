//! Dense per-pixel displacement fields and the `.dfield` binary format.
//!
//! `.dfield` layout: `width: u32 LE`, `height: u32 LE`, then `width*height`
//! pairs of `(dx: f32 LE, dy: f32 LE)` in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    width: usize,
    height: usize,
    vectors: Vec<[f64; 2]>,
}

impl DisplacementField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            vectors: vec![[0.0; 2]; width * height],
        }
    }

    pub fn from_vectors(width: usize, height: usize, vectors: Vec<[f64; 2]>) -> Result<Self> {
        if vectors.len() != width * height {
            return Err(Error::dims(
                format!("{} vectors", width * height),
                format!("{} vectors", vectors.len()),
            ));
        }
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("displacement component".into()));
        }
        Ok(Self {
            width,
            height,
            vectors,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 2],
    ) -> Result<Self> {
        let mut vectors = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                vectors.push(f(x, y));
            }
        }
        Self::from_vectors(width, height, vectors)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn vectors(&self) -> &[[f64; 2]] {
        &self.vectors
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 2] {
        self.vectors[y * self.width + x]
    }

    pub fn max_magnitude(&self) -> f64 {
        self.vectors
            .iter()
            .map(|v| v[0].hypot(v[1]))
            .fold(0.0, f64::max)
    }

    /// Mean Euclidean distance between corresponding vectors.
    pub fn mean_endpoint_error(&self, other: &DisplacementField) -> Result<f64> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::dims(
                format!("{}x{}", self.width, self.height),
                format!("{}x{}", other.width, other.height),
            ));
        }
        let n = self.vectors.len().max(1) as f64;
        Ok(self
            .vectors
            .iter()
            .zip(&other.vectors)
            .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
            .sum::<f64>()
            / n)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.vectors.len() * 8);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        for v in &self.vectors {
            out.extend_from_slice(&(v[0] as f32).to_le_bytes());
            out.extend_from_slice(&(v[1] as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let word = |i: usize| -> Result<[u8; 4]> {
            bytes
                .get(i..i + 4)
                .map(|b| [b[0], b[1], b[2], b[3]])
                .ok_or_else(|| Error::CorruptImage("truncated .dfield data".into()))
        };
        let width = u32::from_le_bytes(word(0)?) as usize;
        let height = u32::from_le_bytes(word(4)?) as usize;
        let n = width * height;
        if bytes.len() != 8 + n * 8 {
            return Err(Error::CorruptImage(format!(
                ".dfield size {} does not match {width}x{height}",
                bytes.len()
            )));
        }
        let mut vectors = Vec::with_capacity(n);
        for i in 0..n {
            let off = 8 + i * 8;
            vectors.push([
                f32::from_le_bytes(word(off)?) as f64,
                f32::from_le_bytes(word(off + 4)?) as f64,
            ]);
        }
        Self::from_vectors(width, height, vectors)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}
