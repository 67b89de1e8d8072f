use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;

/// Peak signal-to-noise ratio in decibels. Identical inputs have no finite
/// value and are reported as [`Psnr::Infinite`], serialized as `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    Infinite,
}

impl Psnr {
    /// Decibels, with `f64::INFINITY` for the infinite marker.
    pub fn db(self) -> f64 {
        match self {
            Psnr::Finite(v) => v,
            Psnr::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Psnr::Infinite)
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v:.3} dB"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Psnr::Finite(v) => s.serialize_f64(*v),
            Psnr::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Psnr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Psnr;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number of decibels or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Psnr, E> {
                Ok(Psnr::Finite(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Psnr, E> {
                Ok(Psnr::Finite(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Psnr, E> {
                Ok(Psnr::Finite(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Psnr, E> {
                if v == "inf" {
                    Ok(Psnr::Infinite)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// `10·log10(peak² / MSE)` over every sample of every channel.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer, peak: f64) -> Result<Psnr> {
    a.ensure_same_shape(b)?;
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "peak must be positive, got {peak}"
        )));
    }
    let n = a.data().len();
    let sse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    if sse == 0.0 {
        return Ok(Psnr::Infinite);
    }
    let mse = sse / n as f64;
    Ok(Psnr::Finite(10.0 * (peak * peak / mse).log10()))
}
