//! Robust homography estimation by random sample consensus.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dlt::{has_collinear_triple, solve_homography_dlt};
use super::Correspondence;
use crate::error::{Error, Result};
use crate::imaging::Homography;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacParams {
    /// Maximum symmetric transfer error (pixels) for an inlier.
    pub inlier_threshold: f64,
    pub max_iterations: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            inlier_threshold: 2.0,
            max_iterations: 2000,
            confidence: 0.995,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RansacResult {
    pub homography: Homography,
    pub inlier_flags: Vec<bool>,
    pub iterations_used: usize,
    /// Mean symmetric transfer error over inliers, in pixels.
    pub mean_reprojection_error: f64,
}

impl RansacResult {
    pub fn inlier_count(&self) -> usize {
        self.inlier_flags.iter().filter(|&&f| f).count()
    }
}

/// Root-mean-square of the forward and backward reprojection distances.
pub fn symmetric_transfer_error(h: &Homography, h_inv: &Homography, c: &Correspondence) -> f64 {
    let fwd = h.apply(c.source[0], c.source[1]);
    let bwd = h_inv.apply(c.target[0], c.target[1]);
    match (fwd, bwd) {
        (Some(f), Some(b)) => {
            let df = (f.0 - c.target[0]).powi(2) + (f.1 - c.target[1]).powi(2);
            let db = (b.0 - c.source[0]).powi(2) + (b.1 - c.source[1]).powi(2);
            (0.5 * (df + db)).sqrt()
        }
        _ => f64::INFINITY,
    }
}

#[derive(Clone)]
struct Scored {
    h: Homography,
    flags: Vec<bool>,
    count: usize,
    mean_err: f64,
}

fn score(h: Homography, corrs: &[Correspondence], threshold: f64) -> Scored {
    let inv = h.inverse();
    let mut flags = Vec::with_capacity(corrs.len());
    let (mut count, mut sum) = (0usize, 0.0);
    for c in corrs {
        let e = symmetric_transfer_error(&h, &inv, c);
        let inlier = e <= threshold;
        if inlier {
            count += 1;
            sum += e;
        }
        flags.push(inlier);
    }
    Scored {
        h,
        flags,
        count,
        mean_err: if count > 0 {
            sum / count as f64
        } else {
            f64::INFINITY
        },
    }
}

/// Higher inlier count wins, then lower mean error; earlier models win ties.
fn better(candidate: &Scored, incumbent: Option<&Scored>) -> bool {
    match incumbent {
        None => true,
        Some(b) => {
            candidate.count > b.count
                || (candidate.count == b.count && candidate.mean_err < b.mean_err)
        }
    }
}

fn adaptive_bound(inlier_ratio: f64, confidence: f64, cap: usize) -> usize {
    let w4 = inlier_ratio.powi(4);
    if w4 >= 1.0 - 1e-12 {
        return 1;
    }
    if w4 <= 0.0 {
        return cap;
    }
    let n = (1.0 - confidence).ln() / (1.0 - w4).ln();
    if n.is_finite() {
        (n.ceil() as usize).clamp(1, cap)
    } else {
        cap
    }
}

/// Estimates a homography from putative correspondences.
///
/// Four-point hypotheses are scored by inlier count under the symmetric
/// transfer error; the iteration budget shrinks as the best inlier ratio
/// grows. The winning model is refit on its inliers until the inlier set
/// stops changing. Deterministic for a fixed seed.
pub fn estimate_homography_ransac(
    corrs: &[Correspondence],
    params: &RansacParams,
) -> Result<RansacResult> {
    let n = corrs.len();
    if n < 4 {
        return Err(Error::NoModel);
    }
    if !(params.inlier_threshold > 0.0) || !(params.confidence > 0.0 && params.confidence < 1.0) {
        return Err(Error::InvalidParameter(
            "RANSAC needs a positive threshold and confidence in (0, 1)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<Scored> = None;
    let mut bound = params.max_iterations;
    let mut iterations = 0;
    while iterations < bound.min(params.max_iterations) {
        iterations += 1;
        let idx = sample(&mut rng, n, 4);
        let picked = [
            corrs[idx.index(0)],
            corrs[idx.index(1)],
            corrs[idx.index(2)],
            corrs[idx.index(3)],
        ];
        let src = picked.map(|c| c.source);
        let dst = picked.map(|c| c.target);
        if has_collinear_triple(&src) || has_collinear_triple(&dst) {
            continue;
        }
        let Ok(h) = solve_homography_dlt(&picked) else {
            continue;
        };
        let s = score(h, corrs, params.inlier_threshold);
        if s.count >= 4 && better(&s, best.as_ref()) {
            bound = adaptive_bound(
                s.count as f64 / n as f64,
                params.confidence,
                params.max_iterations,
            );
            best = Some(s);
        }
    }
    let mut best = best.ok_or(Error::NoModel)?;

    // the final model is the least-squares refit on the consensus set,
    // repeated while the set changes
    for _ in 0..10 {
        let inliers: Vec<Correspondence> = corrs
            .iter()
            .zip(&best.flags)
            .filter_map(|(c, &f)| f.then_some(*c))
            .collect();
        let Ok(h) = solve_homography_dlt(&inliers) else {
            break;
        };
        let refit = score(h, corrs, params.inlier_threshold);
        if refit.count < 4 {
            break;
        }
        let unchanged = refit.flags == best.flags;
        best = refit;
        if unchanged {
            break;
        }
    }

    Ok(RansacResult {
        homography: best.h,
        inlier_flags: best.flags,
        iterations_used: iterations,
        mean_reprojection_error: best.mean_err,
    })
}
