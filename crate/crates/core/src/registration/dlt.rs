//! Normalized direct linear transform for homographies.

use nalgebra::{DMatrix, Matrix3};

use super::Correspondence;
use crate::error::{Error, Result};
use crate::imaging::Homography;

/// Relative singular-value gap below which the null space is not unique.
const RANK_EPS: f64 = 1e-10;
/// Twice the triangle area (in normalized units) below which three points are collinear.
const COLLINEAR_EPS: f64 = 1e-9;

/// Similarity transform moving the centroid to the origin with RMS distance √2.
fn normalizing_transform(points: &[[f64; 2]]) -> Result<Matrix3<f64>> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let ms = points
        .iter()
        .map(|p| (p[0] - cx).powi(2) + (p[1] - cy).powi(2))
        .sum::<f64>()
        / n;
    if ms.sqrt() < 1e-12 {
        return Err(Error::DegenerateConfiguration("coincident points".into()));
    }
    let s = (2.0 / ms).sqrt();
    Ok(Matrix3::new(
        s,
        0.0,
        -s * cx,
        0.0,
        s,
        -s * cy,
        0.0,
        0.0,
        1.0,
    ))
}

fn apply(t: &Matrix3<f64>, p: [f64; 2]) -> [f64; 2] {
    // similarity transforms keep w = 1
    [
        t[(0, 0)] * p[0] + t[(0, 1)] * p[1] + t[(0, 2)],
        t[(1, 0)] * p[0] + t[(1, 1)] * p[1] + t[(1, 2)],
    ]
}

fn cross(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// True when any three of the four points are (nearly) collinear.
pub(crate) fn has_collinear_triple(p: &[[f64; 2]; 4]) -> bool {
    let Ok(t) = normalizing_transform(p) else {
        return true;
    };
    let q = p.map(|pt| apply(&t, pt));
    [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
        .iter()
        .any(|&(i, j, k)| cross(q[i], q[j], q[k]).abs() < COLLINEAR_EPS)
}

/// Least-squares homography mapping each `source` to its `target`.
pub fn solve_homography_dlt(corrs: &[Correspondence]) -> Result<Homography> {
    let n = corrs.len();
    if n < 4 {
        return Err(Error::DegenerateConfiguration(format!(
            "{n} correspondences, need at least 4"
        )));
    }
    if n == 4 {
        let src = [
            corrs[0].source,
            corrs[1].source,
            corrs[2].source,
            corrs[3].source,
        ];
        let dst = [
            corrs[0].target,
            corrs[1].target,
            corrs[2].target,
            corrs[3].target,
        ];
        if has_collinear_triple(&src) || has_collinear_triple(&dst) {
            return Err(Error::DegenerateConfiguration(
                "three of four points are collinear".into(),
            ));
        }
    }
    let src: Vec<[f64; 2]> = corrs.iter().map(|c| c.source).collect();
    let dst: Vec<[f64; 2]> = corrs.iter().map(|c| c.target).collect();
    let ts = normalizing_transform(&src)?;
    let td = normalizing_transform(&dst)?;

    // pad to at least 9 rows so the full right singular basis is available
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src.iter().zip(&dst).enumerate() {
        let [x, y] = apply(&ts, *s);
        let [u, v] = apply(&td, *d);
        let r = 2 * i;
        a.row_mut(r)
            .copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::DegenerateConfiguration("SVD did not converge".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smallest = order[0];
    let second = svd.singular_values[order[1]];
    let largest = svd.singular_values[order[order.len() - 1]];
    if largest <= 0.0 || second / largest < RANK_EPS {
        return Err(Error::DegenerateConfiguration(
            "solution space is not one-dimensional".into(),
        ));
    }
    let h = v_t.row(smallest);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td
        .try_inverse()
        .ok_or_else(|| Error::DegenerateConfiguration("normalization not invertible".into()))?;
    Homography::from_matrix(td_inv * hn * ts).map_err(|e| match e {
        Error::SingularHomography(_) => {
            Error::DegenerateConfiguration("solution is a singular matrix".into())
        }
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corrs_from(h: &Matrix3<f64>, pts: &[[f64; 2]]) -> Vec<Correspondence> {
        pts.iter()
            .map(|&p| {
                let q = h * nalgebra::Vector3::new(p[0], p[1], 1.0);
                Correspondence::new(p, [q.x / q.z, q.y / q.z], 0.0)
            })
            .collect()
    }

    fn max_diff(a: &Homography, b: &Matrix3<f64>) -> f64 {
        let b = b / b[(2, 2)];
        (a.matrix() - b).abs().max()
    }

    #[test]
    fn identity_from_four() {
        let pts = [[0.0, 0.0], [100.0, 0.0], [100.0, 80.0], [0.0, 80.0]];
        let h = solve_homography_dlt(&corrs_from(&Matrix3::identity(), &pts)).unwrap();
        assert!(max_diff(&h, &Matrix3::identity()) < 1e-9);
    }

    #[test]
    fn known_translation() {
        let t = Matrix3::new(1.0, 0.0, 7.25, 0.0, 1.0, -3.5, 0.0, 0.0, 1.0);
        let pts = [
            [10.0, 5.0],
            [200.0, 20.0],
            [180.0, 150.0],
            [15.0, 170.0],
            [90.0, 90.0],
        ];
        let h = solve_homography_dlt(&corrs_from(&t, &pts)).unwrap();
        assert!(max_diff(&h, &t) < 1e-9);
    }

    #[test]
    fn random_projective_from_eight() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = Matrix3::new(
                1.0 + rng.gen_range(-0.2..0.2),
                rng.gen_range(-0.2..0.2),
                rng.gen_range(-20.0..20.0),
                rng.gen_range(-0.2..0.2),
                1.0 + rng.gen_range(-0.2..0.2),
                rng.gen_range(-20.0..20.0),
                rng.gen_range(-5e-4..5e-4),
                rng.gen_range(-5e-4..5e-4),
                1.0,
            );
            let pts: Vec<[f64; 2]> = (0..8)
                .map(|_| [rng.gen_range(0.0..256.0), rng.gen_range(0.0..256.0)])
                .collect();
            let h = solve_homography_dlt(&corrs_from(&m, &pts)).unwrap();
            assert!(max_diff(&h, &m) < 1e-7, "{}", max_diff(&h, &m));
        }
    }

    #[test]
    fn scale_invariant_generator() {
        let m = Matrix3::new(1.05, 0.02, 3.0, -0.01, 0.97, -4.0, 1e-4, 2e-4, 1.0);
        let pts = [
            [0.0, 0.0],
            [50.0, 3.0],
            [47.0, 61.0],
            [2.0, 55.0],
            [25.0, 30.0],
        ];
        let a = solve_homography_dlt(&corrs_from(&m, &pts)).unwrap();
        let b = solve_homography_dlt(&corrs_from(&(m * 3.7), &pts)).unwrap();
        assert!((a.matrix() - b.matrix()).abs().max() < 1e-9);
    }

    #[test]
    fn collinear_rejected() {
        let pts = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [0.0, 5.0]];
        let c = corrs_from(&Matrix3::identity(), &pts);
        assert!(matches!(
            solve_homography_dlt(&c),
            Err(Error::DegenerateConfiguration(_))
        ));
        let line: Vec<[f64; 2]> = (0..6).map(|i| [i as f64, 2.0 * i as f64]).collect();
        assert!(solve_homography_dlt(&corrs_from(&Matrix3::identity(), &line)).is_err());
        let same = [[1.0, 1.0]; 4];
        assert!(solve_homography_dlt(&corrs_from(&Matrix3::identity(), &same)).is_err());
    }

    #[test]
    fn too_few() {
        let c = corrs_from(&Matrix3::identity(), &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(solve_homography_dlt(&c).is_err());
    }
}
