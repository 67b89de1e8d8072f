use proptest::prelude::*;
use rainforge_core::curation::{
    largest_remainder, split_dataset, CurationRecord, Status, Thresholds,
};
use rainforge_core::imaging::{decode_image, encode_png, open_horizontal, warp_homography};
use rainforge_core::metrics::{psnr, ssim, SsimParams};
use rainforge_core::objective::{
    cosine_similarity, rain_robust_pair_loss, FeatureVector, RobustLossParams,
};
use rainforge_core::synth::{composite_rain, render_streak_layer, StreakParams};
use rainforge_core::{Homography, ImageBuffer, Interpolation};

fn image(w: usize, h: usize, ch: usize, seed: u64) -> ImageBuffer {
    let mut s = seed | 1;
    ImageBuffer::from_fn(w, h, ch, |_, _, _| {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64
    })
    .unwrap()
}

fn homography() -> impl Strategy<Value = Homography> {
    (
        -0.1..0.1f64,
        -0.1..0.1f64,
        -0.1..0.1f64,
        -0.1..0.1f64,
        -20.0..20.0f64,
        -20.0..20.0f64,
        -1e-4..1e-4f64,
        -1e-4..1e-4f64,
    )
        .prop_map(|(a, b, c, d, tx, ty, p, q)| {
            Homography::from_rows([[1.0 + a, b, tx], [c, 1.0 + d, ty], [p, q, 1.0]]).unwrap()
        })
}

#[test]
fn png_encoder_matches_independent_decoder() {
    // 16×16 RGB gradient decoded by a second PNG implementation
    let img = ImageBuffer::from_fn(16, 16, 3, |x, y, c| match c {
        0 => x as f64 / 15.0,
        1 => y as f64 / 15.0,
        _ => ((x + y) % 16) as f64 / 15.0,
    })
    .unwrap();
    let bytes = encode_png(&img).unwrap();
    let mut dec = zune_png::PngDecoder::new(&bytes);
    let raw = dec.decode_raw().unwrap();
    assert_eq!(dec.get_dimensions(), Some((16, 16)));
    let expected: Vec<u8> = img
        .data()
        .iter()
        .map(|v| (v * 255.0).round() as u8)
        .collect();
    assert_eq!(raw, expected);
    let back = decode_image(&bytes).unwrap();
    assert_eq!(back, img.map(|v| (v * 255.0).round() / 255.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn homography_inverse_round_trips(h in homography(), x in 0.0..256.0f64, y in 0.0..256.0f64) {
        let (u, v) = h.apply(x, y).unwrap();
        let (bx, by) = h.inverse().apply(u, v).unwrap();
        prop_assert!((bx - x).abs() < 1e-8 && (by - y).abs() < 1e-8);
        let id = h.compose(&h.inverse()).unwrap();
        prop_assert!(id.corner_error(&Homography::identity(), 256.0, 256.0) < 1e-8);
    }

    #[test]
    fn identity_warp_is_exact(w in 2usize..24, h in 2usize..24, seed in any::<u64>()) {
        let img = image(w, h, 3, seed);
        let out = warp_homography(&img, &Homography::identity(), Interpolation::Bilinear).unwrap();
        prop_assert_eq!(out.image, img);
        prop_assert_eq!(out.valid.count(), w * h);
    }

    #[test]
    fn metrics_are_symmetric_and_bounded(w in 11usize..30, h in 11usize..30, s1 in any::<u64>(), s2 in any::<u64>()) {
        let (a, b) = (image(w, h, 1, s1), image(w, h, 1, s2));
        let p = SsimParams::default();
        let (ab, ba) = (ssim(&a, &b, &p).unwrap().mean, ssim(&b, &a, &p).unwrap().mean);
        prop_assert_eq!(ab, ba);
        prop_assert!(ab <= 1.0 + 1e-12 && ab >= -1.0 - 1e-12);
        prop_assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
    }

    #[test]
    fn largest_remainder_apportions_exactly(total in 0usize..5000, a in 0.01..1.0f64, b in 0.01..1.0f64, c in 0.01..1.0f64) {
        let ratios = [a, b, c];
        let out = largest_remainder(total, &ratios);
        prop_assert_eq!(out.iter().sum::<usize>(), total);
        let sum = a + b + c;
        for (n, r) in out.iter().zip(ratios) {
            let quota = r / sum * total as f64;
            prop_assert!((*n as f64 - quota).abs() < 1.0);
        }
    }

    #[test]
    fn split_keeps_scenes_whole(sizes in prop::collection::vec(1usize..6, 1..25), seed in any::<u64>()) {
        let records: Vec<CurationRecord> = sizes
            .iter()
            .enumerate()
            .flat_map(|(s, &n)| (0..n).map(move |k| (s, k)))
            .map(|(s, k)| {
                let mut r = CurationRecord::new(format!("sc{s}_{k}"), format!("sc{s}"), "r", "c", Thresholds::default());
                r.status = Status::Accepted;
                r
            })
            .collect();
        let split = split_dataset(&records, [0.829, 0.105, 0.066], seed).unwrap();
        prop_assert_eq!(split.assignments.len(), records.len());
        for r in &records {
            prop_assert_eq!(split.assignments.get(&r.pair_id), split.scenes.get(&r.scene_id));
        }
        prop_assert_eq!(split.counts().iter().sum::<usize>(), records.len());
    }

    #[test]
    fn losses_ignore_positive_scale(seed in any::<u64>(), k in 1e-3..1e3f64) {
        let v = |i: u64| image(8, 1, 1, seed.wrapping_add(i)).data().iter().map(|x| x - 0.5).collect::<Vec<_>>();
        let (a, p, n1, n2) = (v(0), v(1), v(2), v(3));
        let scaled: Vec<f64> = a.iter().map(|x| x * k).collect();
        prop_assert!((cosine_similarity(&a, &p).unwrap() - cosine_similarity(&scaled, &p).unwrap()).abs() < 1e-12);
        let fv = |x: &Vec<f64>| FeatureVector::new(x.clone()).unwrap();
        let params = RobustLossParams::default();
        let l1 = rain_robust_pair_loss(&fv(&a), &fv(&p), &[fv(&n1), fv(&n2)], &params).unwrap();
        let l2 = rain_robust_pair_loss(&fv(&scaled), &fv(&p), &[fv(&n1), fv(&n2)], &params).unwrap();
        prop_assert!((l1 - l2).abs() < 1e-12);
    }

    #[test]
    fn rain_only_brightens(seed in any::<u64>(), count in 0usize..80) {
        let clean = image(40, 30, 3, seed);
        let layer = render_streak_layer(40, 30, &StreakParams { count, seed, ..Default::default() }).unwrap();
        let out = composite_rain(&clean, &[layer]).unwrap();
        for (r, c) in out.image.data().iter().zip(clean.data()) {
            prop_assert!(r >= c && *r <= 1.0);
        }
    }

    #[test]
    fn opening_never_brightens_and_is_idempotent(w in 1usize..30, h in 1usize..6, r in 0usize..4, seed in any::<u64>()) {
        let img = image(w, h, 3, seed);
        let once = open_horizontal(&img, r).unwrap();
        for (o, i) in once.data().iter().zip(img.data()) {
            prop_assert!(o <= i);
        }
        prop_assert_eq!(open_horizontal(&once, r).unwrap(), once);
    }
}
