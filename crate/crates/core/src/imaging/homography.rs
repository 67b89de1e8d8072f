use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DET_EPS: f64 = 1e-12;

/// A 3×3 projective map from source pixel coordinates to target coordinates.
///
/// Always invertible; scaled so `m[2][2] = 1` whenever that entry is not
/// vanishingly small, otherwise scaled to unit Frobenius norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 9]", into = "[f64; 9]")]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            m: Matrix3::new(1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0),
        }
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("homography entry".into()));
        }
        let m = normalize(m);
        let det = m.determinant();
        if det.abs() <= DET_EPS {
            return Err(Error::SingularHomography(det));
        }
        Ok(Self { m })
    }

    /// Row-major construction.
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::from_matrix(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.m[(r, c)];
            }
        }
        out
    }

    pub fn inverse(&self) -> Homography {
        let inv = self
            .m
            .try_inverse()
            .expect("homography invariant guarantees invertibility");
        Homography { m: normalize(inv) }
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &Homography) -> Result<Homography> {
        Homography::from_matrix(self.m * first.m)
    }

    /// Maps a point; returns `None` when it lands on the line at infinity.
    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let p = self.m * Vector3::new(x, y, 1.0);
        if p.z.abs() < 1e-15 {
            None
        } else {
            Some((p.x / p.z, p.y / p.z))
        }
    }

    /// Largest corner displacement between two homographies over a `w×h` frame.
    pub fn corner_error(&self, other: &Homography, w: f64, h: f64) -> f64 {
        [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)]
            .iter()
            .map(|&(x, y)| match (self.apply(x, y), other.apply(x, y)) {
                (Some(a), Some(b)) => ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt(),
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }
}

impl Default for Homography {
    fn default() -> Self {
        Self::identity()
    }
}

impl TryFrom<[f64; 9]> for Homography {
    type Error = Error;

    fn try_from(v: [f64; 9]) -> Result<Self> {
        Homography::from_matrix(Matrix3::from_row_slice(&v))
    }
}

impl From<Homography> for [f64; 9] {
    fn from(h: Homography) -> Self {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = h.m[(r, c)];
            }
        }
        out
    }
}

pub(crate) fn normalize(m: Matrix3<f64>) -> Matrix3<f64> {
    let corner = m[(2, 2)];
    if corner.abs() > DET_EPS {
        m / corner
    } else {
        let norm = m.norm();
        if norm == 0.0 {
            return m;
        }
        // fix the sign on the first nonzero entry
        let sign = m.iter().find(|v| v.abs() > 0.0).map_or(1.0, |v| v.signum());
        m * (sign / norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_corner_entry() {
        let h = Homography::from_rows([[2.0, 0.0, 4.0], [0.0, 2.0, 6.0], [0.0, 0.0, 2.0]]).unwrap();
        assert_eq!(h, Homography::translation(2.0, 3.0));
    }

    #[test]
    fn rejects_singular() {
        let r = Homography::from_rows([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]]);
        assert!(matches!(r, Err(Error::SingularHomography(_))));
    }

    #[test]
    fn inverse_round_trip() {
        let h = Homography::from_rows([[1.1, 0.05, 3.0], [-0.02, 0.95, -2.0], [1e-4, -2e-4, 1.0]])
            .unwrap();
        let (x, y) = h.apply(10.0, 20.0).unwrap();
        let (bx, by) = h.inverse().apply(x, y).unwrap();
        assert!((bx - 10.0).abs() < 1e-9 && (by - 20.0).abs() < 1e-9);
    }

    #[test]
    fn json_is_nine_numbers() {
        let h = Homography::translation(1.5, -2.0);
        let s = serde_json::to_string(&h).unwrap();
        assert_eq!(s, "[1.0,0.0,1.5,0.0,1.0,-2.0,0.0,0.0,1.0]");
        let back: Homography = serde_json::from_str(&s).unwrap();
        assert_eq!(back, h);
    }
}
