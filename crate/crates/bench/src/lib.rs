//! Seeded inputs shared by the benchmarks.

use rainforge_core::imaging::{to_grayscale, warp_displacement};
use rainforge_core::registration::Correspondence;
use rainforge_core::synth::{gaussian_bump, procedural_scene};
use rainforge_core::{Homography, ImageBuffer, Interpolation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` correspondences under a mild projective warp; a fraction `outliers`
/// of them have uniformly random targets.
pub fn correspondences(n: usize, outliers: f64, seed: u64) -> (Homography, Vec<Correspondence>) {
    let truth =
        Homography::from_rows([[1.01, 0.02, 3.0], [-0.015, 0.99, -2.0], [2e-5, -1e-5, 1.0]])
            .expect("invertible");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corrs = (0..n)
        .map(|i| {
            let src = [rng.gen_range(0.0..512.0), rng.gen_range(0.0..512.0)];
            let dst = if (i as f64) < outliers * n as f64 {
                [rng.gen_range(0.0..512.0), rng.gen_range(0.0..512.0)]
            } else {
                let (x, y) = truth.apply(src[0], src[1]).expect("finite");
                [x + rng.gen_range(-0.5..0.5), y + rng.gen_range(-0.5..0.5)]
            };
            Correspondence::new(src, dst, 1.0)
        })
        .collect();
    (truth, corrs)
}

/// Grayscale scene and a copy pulled through a smooth 4 px bump.
pub fn elastic_pair(size: usize, seed: u64) -> (ImageBuffer, ImageBuffer) {
    let fixed = to_grayscale(&procedural_scene(size, size, seed)).expect("scene");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let field = gaussian_bump(size, size, 4.0, size as f64 / 8.0, &mut rng);
    let moving = warp_displacement(&fixed, &field, Interpolation::Bilinear)
        .expect("same size")
        .image;
    (moving, fixed)
}

/// Two unrelated colour scenes of the same size.
pub fn scene_pair(w: usize, h: usize) -> (ImageBuffer, ImageBuffer) {
    (procedural_scene(w, h, 1), procedural_scene(w, h, 2))
}
