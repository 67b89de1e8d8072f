//! Synthetic rainy/clean corpora with known perturbations.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{procedural_scene, synthesize_pair, StreakParams, VeilParams};
use crate::error::Result;
use crate::imaging::{save_image, DisplacementField, Homography};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perturbation {
    None,
    Homography,
    Elastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub width: usize,
    pub height: usize,
    pub clean_pairs: usize,
    pub homography_pairs: usize,
    pub elastic_pairs: usize,
    /// Streaks per rainy frame.
    pub streaks: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            clean_pairs: 3,
            homography_pairs: 4,
            elastic_pairs: 3,
            streaks: 20,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub pair_id: String,
    pub perturbation: Perturbation,
    /// Maps clean coordinates to rainy coordinates.
    pub homography: Option<Homography>,
    pub field_max_magnitude: Option<f64>,
}

/// Small camera motion: rotation up to 1°, translation 2.5 to 4.5 px and a
/// slight keystone, about the image centre.
pub fn camera_jitter(w: usize, h: usize, rng: &mut impl Rng) -> Homography {
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let a = rng.gen_range(-1.0f64..1.0).to_radians();
    let t = rng.gen_range(2.5..4.5);
    let dir = rng.gen_range(0.0..std::f64::consts::TAU);
    let (tx, ty) = (t * dir.cos(), t * dir.sin());
    let (p, q) = (rng.gen_range(-1e-5..1e-5), rng.gen_range(-1e-5..1e-5));
    let (c, s) = (a.cos(), a.sin());
    // translate to centre, rotate, translate back, then shift
    let m = [
        [c, -s, cx - c * cx + s * cy + tx],
        [s, c, cy - s * cx - c * cy + ty],
        [p, q, 1.0 - p * cx - q * cy],
    ];
    Homography::from_rows(m).expect("rotation is invertible")
}

/// Smooth local motion: one Gaussian bump of `amplitude` px.
pub fn gaussian_bump(
    w: usize,
    h: usize,
    amplitude: f64,
    sigma: f64,
    rng: &mut impl Rng,
) -> DisplacementField {
    let cx = rng.gen_range(0.35..0.65) * w as f64;
    let cy = rng.gen_range(0.35..0.65) * h as f64;
    let dir = rng.gen_range(0.0..std::f64::consts::TAU);
    let (ux, uy) = (amplitude * dir.cos(), amplitude * dir.sin());
    DisplacementField::from_fn(w, h, |x, y| {
        let r2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
        let g = (-r2 / (2.0 * sigma * sigma)).exp();
        [ux * g, uy * g]
    })
    .expect("dimensions are positive")
}

/// Writes `rainy/` and `clean/` under `root` with stem-paired file names and
/// returns the ground truth. Pair ids are `h{k}_{kind}` so each pair is its
/// own scene.
pub fn write_corpus(root: &Path, spec: &CorpusSpec) -> Result<Vec<CorpusEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.width, spec.height);
    let kinds = std::iter::repeat_n(Perturbation::None, spec.clean_pairs)
        .chain(std::iter::repeat_n(
            Perturbation::Homography,
            spec.homography_pairs,
        ))
        .chain(std::iter::repeat_n(
            Perturbation::Elastic,
            spec.elastic_pairs,
        ));
    let mut out = Vec::new();
    for (k, kind) in kinds.enumerate() {
        let clean = procedural_scene(w, h, spec.seed.wrapping_mul(1000).wrapping_add(k as u64));
        let hm = (kind == Perturbation::Homography).then(|| camera_jitter(w, h, &mut rng));
        let field = (kind == Perturbation::Elastic)
            .then(|| gaussian_bump(w, h, 4.0, w as f64 / 8.0, &mut rng));
        let streaks = StreakParams {
            count: spec.streaks,
            opacity_range: (0.1, 0.3),
            seed: rng.gen(),
            ..Default::default()
        };
        let pair = synthesize_pair(
            &clean,
            &[streaks],
            &VeilParams::none(),
            hm.as_ref(),
            field.as_ref(),
        )?;
        let label = match kind {
            Perturbation::None => "still",
            Perturbation::Homography => "pan",
            Perturbation::Elastic => "sway",
        };
        let id = format!("h{k:02}_{label}");
        save_image(
            &pair.rainy,
            root.join("rainy").join(format!("{id}_20240301T120000.png")),
        )?;
        save_image(
            &clean,
            root.join("clean").join(format!("{id}_20240301T121500.png")),
        )?;
        out.push(CorpusEntry {
            pair_id: id,
            perturbation: kind,
            homography: hm,
            field_max_magnitude: field.as_ref().map(DisplacementField::max_magnitude),
        });
    }
    Ok(out)
}
