use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Keypoint;
use crate::error::{Error, Result};

/// A putative point match from a source frame to a target frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub source: [f64; 2],
    pub target: [f64; 2],
    /// Nearest / second-nearest descriptor distance ratio.
    pub match_score: f64,
    pub source_index: usize,
    pub target_index: usize,
}

impl Correspondence {
    pub fn new(source: [f64; 2], target: [f64; 2], match_score: f64) -> Self {
        Self {
            source,
            target,
            match_score,
            source_index: 0,
            target_index: 0,
        }
    }
}

#[inline]
fn dist2(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// Ratio-test descriptor matching with a one-to-one constraint.
///
/// A source keypoint is admitted when its nearest target is closer than
/// `ratio` times the second-nearest. When several sources claim the same
/// target only the lowest ratio survives. Targets with fewer than two
/// candidates admit no matches since the ratio is undefined.
pub fn match_descriptors(
    a: &[Keypoint],
    b: &[Keypoint],
    ratio: f64,
) -> Result<Vec<Correspondence>> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "ratio {ratio} outside (0, 1)"
        )));
    }
    if b.len() < 2 {
        return Ok(Vec::new());
    }
    let claims: Vec<Option<(usize, f64, f64)>> = a
        .par_iter()
        .map(|ka| {
            let (mut j1, mut d1, mut d2) = (usize::MAX, f64::INFINITY, f64::INFINITY);
            for (j, kb) in b.iter().enumerate() {
                let d = dist2(&ka.descriptor, &kb.descriptor);
                if d < d1 {
                    d2 = d1;
                    d1 = d;
                    j1 = j;
                } else if d < d2 {
                    d2 = d;
                }
            }
            let (d1, d2) = (d1.sqrt(), d2.sqrt());
            if d2 == 0.0 {
                return None;
            }
            let r = d1 / d2;
            (r < ratio).then_some((j1, r, d1))
        })
        .collect();

    // best claim per target: lowest ratio, then distance, then source index
    let mut owner: Vec<Option<(usize, f64, f64)>> = vec![None; b.len()];
    for (i, claim) in claims.iter().enumerate() {
        if let Some((j, r, d)) = *claim {
            let better = match owner[j] {
                None => true,
                Some((_, br, bd)) => (r, d) < (br, bd),
            };
            if better {
                owner[j] = Some((i, r, d));
            }
        }
    }
    let mut out: Vec<Correspondence> = owner
        .iter()
        .enumerate()
        .filter_map(|(j, o)| {
            o.map(|(i, r, _)| Correspondence {
                source: [a[i].x, a[i].y],
                target: [b[j].x, b[j].y],
                match_score: r,
                source_index: i,
                target_index: j,
            })
        })
        .collect();
    out.sort_by_key(|c| c.source_index);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_keypoints(n: usize, rng: &mut ChaCha8Rng) -> Vec<Keypoint> {
        (0..n)
            .map(|_| {
                let mut d = [0f32; 128];
                for v in d.iter_mut() {
                    *v = rng.gen_range(0.0..1.0);
                }
                let norm = d.iter().map(|v| v * v).sum::<f32>().sqrt();
                d.iter_mut().for_each(|v| *v /= norm);
                Keypoint {
                    x: rng.gen_range(0.0..100.0),
                    y: rng.gen_range(0.0..100.0),
                    scale: 1.6,
                    orientation: 0.0,
                    response: 0.0,
                    octave: 0,
                    descriptor: d,
                }
            })
            .collect()
    }

    #[test]
    fn self_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let kps = random_keypoints(40, &mut rng);
        let m = match_descriptors(&kps, &kps, 0.75).unwrap();
        assert_eq!(m.len(), 40);
        for c in &m {
            assert_eq!(c.source_index, c.target_index);
            assert_eq!(c.match_score, 0.0);
        }
    }

    #[test]
    fn empty_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let kps = random_keypoints(1, &mut rng);
        assert!(match_descriptors(&kps, &[], 0.75).unwrap().is_empty());
        assert!(match_descriptors(&[], &kps, 0.75).unwrap().is_empty());
        assert!(match_descriptors(&kps, &kps, 1.5).is_err());
    }

    #[test]
    fn matches_exhaustive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_keypoints(60, &mut rng);
        // b: perturbed copies of a subset plus distractors
        let mut b = random_keypoints(40, &mut rng);
        for k in a.iter().take(30) {
            let mut c = k.clone();
            for v in c.descriptor.iter_mut() {
                *v += rng.gen_range(-0.01..0.01);
            }
            b.push(c);
        }
        let got = match_descriptors(&a, &b, 0.8).unwrap();

        // oracle: sort all distances per source, then resolve conflicts by scanning
        let mut best: std::collections::BTreeMap<usize, (f64, f64, usize)> = Default::default();
        for (i, ka) in a.iter().enumerate() {
            let mut ds: Vec<(f64, usize)> = b
                .iter()
                .enumerate()
                .map(|(j, kb)| {
                    let s: f64 = ka
                        .descriptor
                        .iter()
                        .zip(&kb.descriptor)
                        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
                        .sum();
                    (s.sqrt(), j)
                })
                .collect();
            ds.sort_by(|p, q| p.0.total_cmp(&q.0));
            let r = ds[0].0 / ds[1].0;
            if r < 0.8 {
                let j = ds[0].1;
                let cand = (r, ds[0].0, i);
                match best.get(&j) {
                    Some(&cur) if (cur.0, cur.1) <= (cand.0, cand.1) => {}
                    _ => {
                        best.insert(j, cand);
                    }
                }
            }
        }
        let mut expected: Vec<(usize, usize)> =
            best.iter().map(|(&j, &(_, _, i))| (i, j)).collect();
        expected.sort();
        let got_pairs: Vec<(usize, usize)> = got
            .iter()
            .map(|c| (c.source_index, c.target_index))
            .collect();
        assert_eq!(got_pairs, expected);
        assert!(got.iter().all(|c| c.match_score < 0.8));
    }
}
