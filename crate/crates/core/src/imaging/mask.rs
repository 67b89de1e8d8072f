use serde::{Deserialize, Serialize};

use super::ImageBuffer;
use crate::error::{Error, Result};

/// Axis-aligned pixel rectangle `[x, x+w) × [y, y+h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(0, 0, width, height)
    }

    #[inline]
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && y >= self.y && x < self.x + self.w && y < self.y + self.h
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }
}

/// Per-pixel inclusion flags for an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    width: usize,
    height: usize,
    included: Vec<bool>,
}

impl RegionMask {
    pub fn all(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            included: vec![true; width * height],
        }
    }

    pub fn none(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            included: vec![false; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, included: Vec<bool>) -> Result<Self> {
        if included.len() != width * height {
            return Err(Error::dims(
                format!("{} flags", width * height),
                format!("{} flags", included.len()),
            ));
        }
        Ok(Self {
            width,
            height,
            included,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut included = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                included.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            included,
        }
    }

    /// Everything included except the given rectangles.
    pub fn excluding(width: usize, height: usize, rects: &[Rect]) -> Self {
        Self::from_fn(width, height, |x, y| {
            !rects.iter().any(|r| r.contains(x, y))
        })
    }

    /// Treats any nonzero luminance as included.
    pub fn from_image(img: &ImageBuffer) -> Self {
        let c = img.channels();
        Self {
            width: img.width(),
            height: img.height(),
            included: img
                .data()
                .chunks_exact(c)
                .map(|px| px.iter().any(|&v| v > 0.5 / 255.0))
                .collect(),
        }
    }

    pub fn to_image(&self) -> ImageBuffer {
        ImageBuffer::from_vec(
            self.width,
            self.height,
            1,
            self.included
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        )
        .expect("mask dimensions are consistent")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.included[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.included[y * self.width + x] = v;
    }

    pub fn flags(&self) -> &[bool] {
        &self.included
    }

    pub fn count(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }

    pub fn intersect(&self, other: &RegionMask) -> Result<RegionMask> {
        self.ensure_dims(other.width, other.height)?;
        Ok(Self {
            width: self.width,
            height: self.height,
            included: self
                .included
                .iter()
                .zip(&other.included)
                .map(|(&a, &b)| a && b)
                .collect(),
        })
    }

    pub fn crop(&self, r: Rect) -> RegionMask {
        Self::from_fn(r.w, r.h, |x, y| self.get(r.x + x, r.y + y))
    }

    /// Tight bounding box of the included pixels.
    pub fn bounding_box(&self) -> Option<Rect> {
        let mut bounds: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    let b = bounds.get_or_insert((x, y, x, y));
                    b.0 = b.0.min(x);
                    b.1 = b.1.min(y);
                    b.2 = b.2.max(x);
                    b.3 = b.3.max(y);
                }
            }
        }
        bounds.map(|(x0, y0, x1, y1)| Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }

    /// A large axis-aligned rectangle containing only included pixels.
    ///
    /// Starts from the bounding box and peels off whichever border line holds
    /// the largest fraction of excluded pixels until none remain.
    pub fn inscribed_rect(&self) -> Option<Rect> {
        let mut r = self.bounding_box()?;
        loop {
            let bad = |x: usize, y: usize| !self.get(x, y);
            let top = (r.x..r.x + r.w).filter(|&x| bad(x, r.y)).count() as f64 / r.w as f64;
            let bottom =
                (r.x..r.x + r.w).filter(|&x| bad(x, r.y + r.h - 1)).count() as f64 / r.w as f64;
            let left = (r.y..r.y + r.h).filter(|&y| bad(r.x, y)).count() as f64 / r.h as f64;
            let right =
                (r.y..r.y + r.h).filter(|&y| bad(r.x + r.w - 1, y)).count() as f64 / r.h as f64;
            let worst = top.max(bottom).max(left).max(right);
            if worst == 0.0 {
                // borders clean; check the interior
                let interior_ok =
                    (r.y..r.y + r.h).all(|y| (r.x..r.x + r.w).all(|x| self.get(x, y)));
                if interior_ok {
                    return Some(r);
                }
                // fall back to shrinking the largest dimension
                if r.w >= r.h {
                    r.x += 1;
                    r.w = r.w.checked_sub(2)?;
                } else {
                    r.y += 1;
                    r.h = r.h.checked_sub(2)?;
                }
            } else if worst == top {
                r.y += 1;
                r.h -= 1;
            } else if worst == bottom {
                r.h -= 1;
            } else if worst == left {
                r.x += 1;
                r.w -= 1;
            } else {
                r.w -= 1;
            }
            if r.w == 0 || r.h == 0 {
                return None;
            }
        }
    }

    fn ensure_dims(&self, width: usize, height: usize) -> Result<()> {
        if self.width == width && self.height == height {
            Ok(())
        } else {
            Err(Error::dims(
                format!("{}x{}", self.width, self.height),
                format!("{width}x{height}"),
            ))
        }
    }
}

/// Crops `img` to the bounding box of `mask`, zeroing excluded pixels inside the box.
pub fn apply_mask_crop(
    img: &ImageBuffer,
    mask: &RegionMask,
) -> Result<(ImageBuffer, RegionMask, Rect)> {
    mask.ensure_dims(img.width(), img.height())?;
    let rect = mask.bounding_box().ok_or(Error::EmptyMask)?;
    let mut out = img.crop(rect.x, rect.y, rect.w, rect.h)?;
    let cropped = mask.crop(rect);
    for y in 0..rect.h {
        for x in 0..rect.w {
            if !cropped.get(x, y) {
                for c in 0..out.channels() {
                    out.set(x, y, c, 0.0);
                }
            }
        }
    }
    Ok((out, cropped, rect))
}
