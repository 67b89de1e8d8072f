use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::{gaussian_blur, ImageBuffer};

/// Deterministic textured RGB test scene.
///
/// Multi-octave value noise overlaid with random rectangles and disks, so
/// the result carries both smooth gradients and corner-like structure.
/// Values stay within `[0.05, 0.95]`.
pub fn procedural_scene(width: usize, height: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0; width * height * 3];

    // value noise octaves
    let octaves: [(f64, f64); 4] = [(48.0, 0.35), (24.0, 0.25), (12.0, 0.2), (6.0, 0.12)];
    for &(cell, amp) in &octaves {
        let gw = (width as f64 / cell).ceil() as usize + 2;
        let gh = (height as f64 / cell).ceil() as usize + 2;
        let grid: Vec<[f64; 3]> = (0..gw * gh)
            .map(|_| {
                let base = rng.gen_range(-1.0..1.0);
                [
                    base + rng.gen_range(-0.3..0.3),
                    base + rng.gen_range(-0.3..0.3),
                    base + rng.gen_range(-0.3..0.3),
                ]
            })
            .collect();
        for y in 0..height {
            let gy = y as f64 / cell;
            let y0 = gy.floor() as usize;
            let ty = smooth(gy - y0 as f64);
            for x in 0..width {
                let gx = x as f64 / cell;
                let x0 = gx.floor() as usize;
                let tx = smooth(gx - x0 as f64);
                let g = |xx: usize, yy: usize| grid[yy * gw + xx];
                let (a, b, c, d) = (g(x0, y0), g(x0 + 1, y0), g(x0, y0 + 1), g(x0 + 1, y0 + 1));
                for ch in 0..3 {
                    let top = a[ch] * (1.0 - tx) + b[ch] * tx;
                    let bottom = c[ch] * (1.0 - tx) + d[ch] * tx;
                    data[(y * width + x) * 3 + ch] += amp * (top * (1.0 - ty) + bottom * ty);
                }
            }
        }
    }
    for v in &mut data {
        *v = 0.5 + 0.5 * *v;
    }

    let area = (width * height) as f64;
    let n_rects = (area / 1200.0).round() as usize + 4;
    for _ in 0..n_rects {
        let rw = rng.gen_range(4.0..(width as f64 / 6.0).max(5.0));
        let rh = rng.gen_range(4.0..(height as f64 / 6.0).max(5.0));
        let cx = rng.gen_range(0.0..width as f64);
        let cy = rng.gen_range(0.0..height as f64);
        let color = random_color(&mut rng);
        let alpha = rng.gen_range(0.5..0.9);
        let (x0, x1) = (
            (cx - rw / 2.0).max(0.0) as usize,
            ((cx + rw / 2.0) as usize).min(width),
        );
        let (y0, y1) = (
            (cy - rh / 2.0).max(0.0) as usize,
            ((cy + rh / 2.0) as usize).min(height),
        );
        for y in y0..y1 {
            for x in x0..x1 {
                blend(&mut data[(y * width + x) * 3..][..3], &color, alpha);
            }
        }
    }
    let n_disks = (area / 1600.0).round() as usize + 3;
    for _ in 0..n_disks {
        let r = rng.gen_range(2.0..(width.min(height) as f64 / 12.0).max(3.0));
        let cx = rng.gen_range(0.0..width as f64);
        let cy = rng.gen_range(0.0..height as f64);
        let color = random_color(&mut rng);
        let alpha = rng.gen_range(0.5..0.9);
        let (x0, x1) = (
            (cx - r).max(0.0) as usize,
            ((cx + r + 1.0) as usize).min(width),
        );
        let (y0, y1) = (
            (cy - r).max(0.0) as usize,
            ((cy + r + 1.0) as usize).min(height),
        );
        for y in y0..y1 {
            for x in x0..x1 {
                if (x as f64 - cx).hypot(y as f64 - cy) <= r {
                    blend(&mut data[(y * width + x) * 3..][..3], &color, alpha);
                }
            }
        }
    }

    for v in &mut data {
        *v = v.clamp(0.05, 0.95);
    }
    let img = ImageBuffer::from_vec(width, height, 3, data).expect("consistent scene buffer");
    gaussian_blur(&img, 0.7).expect("positive sigma")
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let base: f64 = rng.gen_range(0.05..0.95);
    [
        (base + rng.gen_range(-0.15..0.15)).clamp(0.0, 1.0),
        (base + rng.gen_range(-0.15..0.15)).clamp(0.0, 1.0),
        (base + rng.gen_range(-0.15..0.15)).clamp(0.0, 1.0),
    ]
}

fn blend(px: &mut [f64], color: &[f64; 3], alpha: f64) {
    for (p, c) in px.iter_mut().zip(color) {
        *p = (1.0 - alpha) * *p + alpha * c;
    }
}
