#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rainforge_core::imaging::{save_image, ImageBuffer};
use rainforge_core::synth::{
    camera_jitter, procedural_scene, synthesize_pair, StreakParams, VeilParams,
};
use rainforge_core::Homography;
use rand::SeedableRng;

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rainforge"));
    c.env_remove(rainforge_cli::CONFIG_ENV);
    c
}

pub fn run_bin(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn rainforge")
}

pub fn stdout_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        )
    })
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Rainy frame moved by a known camera jitter plus light streaks.
pub struct KnownWarp {
    pub rainy: PathBuf,
    pub clean: PathBuf,
    pub homography: Homography,
}

pub fn known_warp(dir: &Path) -> KnownWarp {
    let clean = procedural_scene(256, 256, 41);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let h = camera_jitter(256, 256, &mut rng);
    let streaks = StreakParams {
        count: 20,
        opacity_range: (0.1, 0.3),
        seed: 3,
        ..Default::default()
    };
    let pair = synthesize_pair(&clean, &[streaks], &VeilParams::none(), Some(&h), None).unwrap();
    let out = KnownWarp {
        rainy: dir.join("kw_rainy.png"),
        clean: dir.join("kw_clean.png"),
        homography: h,
    };
    save_image(&pair.rainy, &out.rainy).unwrap();
    save_image(&clean, &out.clean).unwrap();
    out
}

/// Curation corpus: scene `s1` with three identical (auto-accepted) pairs,
/// one camera-jitter pair `s2_pan` (needs review) and one underexposed pair
/// `s3_dark` (auto-rejected). Returns the config path.
pub fn curated_corpus(dir: &Path) -> PathBuf {
    let rainy = dir.join("rainy");
    let clean = dir.join("clean");
    for (i, id) in ["s1_a", "s1_b", "s1_c"].iter().enumerate() {
        let img = procedural_scene(192, 192, 100 + i as u64);
        save_image(&img, rainy.join(format!("{id}.png"))).unwrap();
        save_image(&img, clean.join(format!("{id}.png"))).unwrap();
    }
    let kw = known_warp(dir);
    std::fs::copy(&kw.rainy, rainy.join("s2_pan.png")).unwrap();
    std::fs::copy(&kw.clean, clean.join("s2_pan.png")).unwrap();
    let dark = ImageBuffer::filled(96, 96, 3, 0.02).unwrap();
    save_image(&dark, rainy.join("s3_dark.png")).unwrap();
    save_image(&dark, clean.join("s3_dark.png")).unwrap();

    let cfg = dir.join("curate.toml");
    std::fs::write(
        &cfg,
        "[paths]\nrainy_dir = \"rainy\"\nclean_dir = \"clean\"\noutput_root = \"out\"\n\n[pipeline]\nauto_accept_uncorrected = true\nrun_timestamp = \"2024-03-01T00:00:00Z\"\n",
    )
    .unwrap();
    cfg
}

pub fn mean_abs(a: &ImageBuffer, b: &ImageBuffer) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / a.data().len() as f64
}
