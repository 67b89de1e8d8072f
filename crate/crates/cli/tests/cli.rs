mod common;

use common::*;
use rainforge_core::curation::{Manifest, Status};
use rainforge_core::imaging::{load_image, Rect};
use rainforge_core::metrics::quality_report;
use rainforge_core::synth::procedural_scene;
use rainforge_core::Homography;

#[test]
fn metrics_identical_images() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.png");
    rainforge_core::imaging::save_image(&procedural_scene(64, 64, 1), &x).unwrap();
    let o = run_bin(&["metrics", "--a", p(&x), "--b", p(&x)]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["psnr_db"], "inf");
    assert_eq!(v["ssim"], 1.0);
    // too small for five scales
    assert!(v["ms_ssim"].is_null());
}

#[test]
fn metrics_output_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
    rainforge_core::imaging::save_image(&procedural_scene(200, 180, 2), &a).unwrap();
    rainforge_core::imaging::save_image(&procedural_scene(200, 180, 3), &b).unwrap();
    let mut out = Vec::new();
    let code = rainforge_cli::run(
        [
            "rainforge",
            "metrics",
            "--a",
            p(&a),
            "--b",
            p(&b),
            "--region",
            "4,2,190,177",
        ],
        &mut out,
    );
    assert_eq!(code, 0);
    let got: serde_json::Value = serde_json::from_slice(&out).unwrap();
    let direct = quality_report(
        &load_image(&a).unwrap(),
        &load_image(&b).unwrap(),
        Rect::new(4, 2, 190, 177),
    )
    .unwrap();
    assert_eq!(got, serde_json::to_value(direct).unwrap());
}

#[test]
fn usage_errors_exit_2() {
    let o = run_bin(&["metrics", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--bogus"));
    assert_eq!(run_bin(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run_bin(&["pipeline"]).status.code(), Some(2));
    assert_eq!(
        run_bin(&["metrics", "--a", "x.png", "--b", "y.png", "--region", "1,2"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run_bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_exits_1() {
    let o = run_bin(&[
        "metrics",
        "--a",
        "/nonexistent/a.png",
        "--b",
        "/nonexistent/b.png",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/a.png"));
}

#[test]
fn bad_config_is_line_located() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[paths]\nrainy_dir = \"r\"\nclean_dir = \"c\"\noutput_root = \"o\"\n\n[thresholds]\nt_global = \"wide\"\n").unwrap();
    let o = run_bin(&["pipeline", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 7"), "{err}");

    // same file through the environment fallback
    let o = bin()
        .arg("pipeline")
        .env(rainforge_cli::CONFIG_ENV, &cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 7"));
}

#[test]
fn align_recovers_known_homography() {
    let dir = tempfile::tempdir().unwrap();
    let kw = known_warp(dir.path());
    let out = dir.path().join("aligned");
    let o = run_bin(&[
        "align",
        "--rainy",
        p(&kw.rainy),
        "--clean",
        p(&kw.clean),
        "--mode",
        "homography",
        "--out",
        p(&out),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let h: Homography =
        serde_json::from_slice(&std::fs::read(out.join("homography.json")).unwrap()).unwrap();
    let err = h.corner_error(&kw.homography, 256.0, 256.0);
    assert!(err < 1.5, "corner error {err}");
    let report = stdout_json(&o);
    assert_eq!(report["mode"], "homography");
    let pre = report["pre_metrics"]["psnr_db"].as_f64().unwrap();
    let post = report["metrics"]["psnr_db"].as_f64().unwrap();
    assert!(post > pre + 5.0, "{pre} -> {post}");
    assert!(out.join("aligned.png").exists());
    assert!(!out.join("field.dfield").exists());
}

#[test]
fn align_rejects_unknown_mode() {
    let o = run_bin(&[
        "align", "--rainy", "a.png", "--clean", "b.png", "--mode", "affine", "--out", "x",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn assess_reports_motion() {
    let dir = tempfile::tempdir().unwrap();
    let kw = known_warp(dir.path());
    let o = run_bin(&[
        "assess",
        "--rainy",
        p(&kw.rainy),
        "--clean",
        p(&kw.clean),
        "--time-delta-minutes",
        "55",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["correction_mode"], "homography");
    assert_eq!(v["criteria"]["time_ok"], false);
    assert_eq!(v["hard_failures"].as_array().unwrap().len(), 1);
}

#[test]
fn losscheck_report() {
    let o = run_bin(&["losscheck", "--dim", "64", "--batch", "4", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["flags"]["include_positive_in_denominator"], true);
    assert_eq!(v["flags"]["temperature"], 0.25);
    for k in ["cosine_similarity", "pair_loss", "batch_loss"] {
        let e = v["gradient_check"][k].as_f64().unwrap();
        assert!(e < 1e-5, "{k}: {e}");
    }
    assert!(v["terms"]["pair_loss"].as_f64().unwrap() >= 0.0);
    let total = &v["terms"]["objective"];
    let sum = total["ms_ssim_loss"].as_f64().unwrap()
        + 0.1 * total["l1"].as_f64().unwrap()
        + 0.1 * total["robust"].as_f64().unwrap();
    assert!((sum - total["total"].as_f64().unwrap()).abs() < 1e-12);

    let lit = stdout_json(&run_bin(&[
        "losscheck",
        "--dim",
        "64",
        "--batch",
        "4",
        "--seed",
        "3",
        "--paper-literal",
    ]));
    assert_eq!(lit["flags"]["include_positive_in_denominator"], false);
    assert!(lit["terms"]["pair_loss"].as_f64() < v["terms"]["pair_loss"].as_f64());
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean.png");
    rainforge_core::imaging::save_image(&procedural_scene(80, 60, 4), &clean).unwrap();
    let args = |out: &str| {
        vec![
            "synth".to_string(),
            "--clean".into(),
            p(&clean).into(),
            "--out".into(),
            p(&dir.path().join(out)).into(),
            "--seed".into(),
            "11".into(),
            "--layers".into(),
            "2".into(),
            "--shift-x".into(),
            "-1.5".into(),
        ]
    };
    for out in ["a", "b"] {
        let o = bin().args(args(out)).output().unwrap();
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let read = |out: &str, f: &str| std::fs::read(dir.path().join(out).join(f)).unwrap();
    assert_eq!(read("a", "rainy.png"), read("b", "rainy.png"));
    assert_eq!(read("a", "provenance.json"), read("b", "provenance.json"));
    let prov: serde_json::Value = serde_json::from_slice(&read("a", "provenance.json")).unwrap();
    assert_eq!(prov["layers"].as_array().unwrap().len(), 2);
}

#[test]
fn pipeline_split_export() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = curated_corpus(dir.path());
    let o = bin()
        .arg("pipeline")
        .env(rainforge_cli::CONFIG_ENV, &cfg)
        .output()
        .unwrap();
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let summary = stdout_json(&o);
    assert_eq!(summary["processed"], 5);
    let manifest_path = dir.path().join("out/manifest.jsonl");
    let m = Manifest::load(&manifest_path).unwrap();
    assert_eq!(m.get("s1_b").unwrap().status, Status::Accepted);
    assert_eq!(m.get("s2_pan").unwrap().status, Status::NeedsReview);
    assert_eq!(m.get("s3_dark").unwrap().status, Status::AutoRejected);

    let split = dir.path().join("split.json");
    let o = run_bin(&[
        "split",
        "--manifest",
        p(&manifest_path),
        "--seed",
        "1",
        "--out",
        p(&split),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let v = stdout_json(&o);
    assert_eq!(v["assignments"].as_object().unwrap().len(), 3);
    assert_eq!(v["scenes"]["s1"], "train");

    let export = dir.path().join("dataset");
    let o = run_bin(&[
        "export",
        "--manifest",
        p(&manifest_path),
        "--split",
        p(&split),
        "--out",
        p(&export),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let files: Vec<_> = std::fs::read_dir(export.join("train/s1"))
        .unwrap()
        .collect();
    assert_eq!(files.len(), 6);
    let index: serde_json::Value =
        serde_json::from_slice(&std::fs::read(export.join("train/index.json")).unwrap()).unwrap();
    assert_eq!(index["count"], 3);
    assert!(!export.join("train/s3").exists());
    for s in ["val", "test"] {
        let idx: serde_json::Value =
            serde_json::from_slice(&std::fs::read(export.join(s).join("index.json")).unwrap())
                .unwrap();
        assert_eq!(idx["count"], 0);
    }
}
