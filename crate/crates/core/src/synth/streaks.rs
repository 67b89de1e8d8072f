use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::blur_plane;

/// Sampling ranges for one layer of rain streaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreakParams {
    pub count: usize,
    /// Segment length in pixels.
    pub length_range: (f64, f64),
    /// Stroke width in pixels.
    pub width_range: (f64, f64),
    /// Radians from vertical; positive leans right.
    pub angle_range: (f64, f64),
    pub opacity_range: (f64, f64),
    pub blur_sigma: f64,
    pub seed: u64,
}

impl Default for StreakParams {
    fn default() -> Self {
        Self {
            count: 200,
            length_range: (8.0, 24.0),
            width_range: (0.8, 1.6),
            angle_range: (-0.2, 0.2),
            opacity_range: (0.15, 0.45),
            blur_sigma: 0.6,
            seed: 0,
        }
    }
}

impl StreakParams {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, (lo, hi): (f64, f64), min: f64, max: f64| -> Result<()> {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= min && hi <= max) {
                return Err(Error::InvalidParameter(format!(
                    "{name} range ({lo}, {hi}) must be ordered within [{min}, {max}]"
                )));
            }
            Ok(())
        };
        check("length", self.length_range, 0.0, f64::MAX)?;
        check("width", self.width_range, f64::MIN_POSITIVE, f64::MAX)?;
        check("angle", self.angle_range, -FRAC_PI_2, FRAC_PI_2)?;
        check("opacity", self.opacity_range, 0.0, 1.0)?;
        if !(self.blur_sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "blur sigma {} must be >= 0",
                self.blur_sigma
            )));
        }
        Ok(())
    }
}

/// Additive rain radiance for one layer, broadcast across color channels.
#[derive(Debug, Clone, PartialEq)]
pub struct StreakLayer {
    width: usize,
    height: usize,
    intensity: Vec<f64>,
}

impl StreakLayer {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            intensity: vec![0.0; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, intensity: Vec<f64>) -> Result<Self> {
        if intensity.len() != width * height {
            return Err(Error::dims(
                format!("{} values", width * height),
                format!("{} values", intensity.len()),
            ));
        }
        if intensity.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter(
                "streak intensities must lie in [0, 1]".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            intensity,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.intensity[y * self.width + x]
    }

    pub fn sum(&self) -> f64 {
        self.intensity.iter().sum()
    }

    /// Sum of squared intensities.
    pub fn energy(&self) -> f64 {
        self.intensity.iter().map(|v| v * v).sum()
    }
}

/// One sampled streak segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Streak {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub width: f64,
    pub opacity: f64,
}

impl Streak {
    /// Anti-aliased coverage of the pixel centred at `(px, py)`.
    #[inline]
    pub fn coverage(&self, px: f64, py: f64) -> f64 {
        let (ax, ay) = (self.start[0], self.start[1]);
        let (dx, dy) = (self.end[0] - ax, self.end[1] - ay);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let dist = (px - (ax + t * dx)).hypot(py - (ay + t * dy));
        (0.5 * self.width + 0.5 - dist).clamp(0.0, 1.0)
    }
}

/// Samples the streak geometry for a layer without rasterizing it.
pub fn sample_streaks(width: usize, height: usize, params: &StreakParams) -> Result<Vec<Streak>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| -> f64 {
        if hi > lo {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    };
    let mut out = Vec::with_capacity(params.count);
    for _ in 0..params.count {
        let cx = uniform(&mut rng, (0.0, width as f64));
        let cy = uniform(&mut rng, (0.0, height as f64));
        let length = uniform(&mut rng, params.length_range);
        let stroke = uniform(&mut rng, params.width_range);
        let angle = uniform(&mut rng, params.angle_range);
        let opacity = uniform(&mut rng, params.opacity_range);
        let (hx, hy) = (0.5 * length * angle.sin(), 0.5 * length * angle.cos());
        out.push(Streak {
            start: [cx - hx, cy - hy],
            end: [cx + hx, cy + hy],
            width: stroke,
            opacity,
        });
    }
    Ok(out)
}

/// Rasterizes `params.count` anti-aliased streaks, then applies the motion blur.
///
/// Overlapping streaks add and saturate at 1.
pub fn render_streak_layer(
    width: usize,
    height: usize,
    params: &StreakParams,
) -> Result<StreakLayer> {
    let streaks = sample_streaks(width, height, params)?;
    let mut layer = StreakLayer::zeros(width, height);
    if width == 0 || height == 0 {
        return Ok(layer);
    }
    for s in &streaks {
        let pad = 0.5 * s.width + 1.0;
        let x0 = (s.start[0].min(s.end[0]) - pad).floor().max(0.0) as usize;
        let y0 = (s.start[1].min(s.end[1]) - pad).floor().max(0.0) as usize;
        let x1 = ((s.start[0].max(s.end[0]) + pad).ceil().max(0.0) as usize).min(width - 1);
        let y1 = ((s.start[1].max(s.end[1]) + pad).ceil().max(0.0) as usize).min(height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let c = s.coverage(x as f64, y as f64);
                if c > 0.0 {
                    let v = &mut layer.intensity[y * width + x];
                    *v = (*v + s.opacity * c).min(1.0);
                }
            }
        }
    }
    if params.blur_sigma > 0.0 {
        layer.intensity = blur_plane(&layer.intensity, width, height, params.blur_sigma);
        for v in &mut layer.intensity {
            *v = v.clamp(0.0, 1.0);
        }
    }
    Ok(layer)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_streak(seed: u64) -> StreakParams {
        StreakParams {
            count: 1,
            length_range: (20.0, 20.0),
            width_range: (1.5, 1.5),
            angle_range: (0.3, 0.3),
            opacity_range: (1.0, 1.0),
            blur_sigma: 0.0,
            seed,
        }
    }

    #[test]
    fn zero_count_is_blank() {
        let p = StreakParams {
            count: 0,
            ..Default::default()
        };
        let layer = render_streak_layer(32, 32, &p).unwrap();
        assert!(layer.intensity().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_streak_matches_brute_force_rasterizer() {
        let (w, h) = (48, 40);
        for seed in 0..5 {
            let p = one_streak(seed);
            let layer = render_streak_layer(w, h, &p).unwrap();
            let s = sample_streaks(w, h, &p).unwrap()[0];
            // oracle: every pixel, distance via explicit endpoint/perpendicular cases
            let mut total = 0.0;
            for y in 0..h {
                for x in 0..w {
                    let (px, py) = (x as f64, y as f64);
                    let (vx, vy) = (s.end[0] - s.start[0], s.end[1] - s.start[1]);
                    let along = (px - s.start[0]) * vx + (py - s.start[1]) * vy;
                    let len2 = vx * vx + vy * vy;
                    let d = if along <= 0.0 {
                        ((px - s.start[0]).powi(2) + (py - s.start[1]).powi(2)).sqrt()
                    } else if along >= len2 {
                        ((px - s.end[0]).powi(2) + (py - s.end[1]).powi(2)).sqrt()
                    } else {
                        ((px - s.start[0]) * vy - (py - s.start[1]) * vx).abs() / len2.sqrt()
                    };
                    let cov = (s.width / 2.0 + 0.5 - d).max(0.0).min(1.0);
                    total += cov;
                    assert_eq!(
                        layer.get(x, y) > 0.0,
                        cov > 0.0,
                        "support differs at ({x},{y})"
                    );
                }
            }
            assert!((layer.sum() - total).abs() < 1e-6);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let p = StreakParams {
            seed: 42,
            ..Default::default()
        };
        assert_eq!(
            render_streak_layer(64, 64, &p).unwrap(),
            render_streak_layer(64, 64, &p).unwrap()
        );
    }

    #[test]
    fn rejects_bad_ranges() {
        let mut p = StreakParams::default();
        p.opacity_range = (0.5, 1.5);
        assert!(render_streak_layer(8, 8, &p).is_err());
        let mut p = StreakParams::default();
        p.length_range = (10.0, 5.0);
        assert!(p.validate().is_err());
    }
}
