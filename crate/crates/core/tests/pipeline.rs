use std::path::Path;

use rainforge_core::curation::{run_pipeline, CorrectionMode, CurationConfig, Manifest, Status};
use rainforge_core::synth::{write_corpus, CorpusSpec, Perturbation};

fn config(corpus: &Path, out: &Path) -> CurationConfig {
    let text = format!(
        "[paths]\nrainy_dir = {:?}\nclean_dir = {:?}\noutput_root = {:?}\n\n[pipeline]\nauto_accept_uncorrected = true\n",
        corpus.join("rainy"),
        corpus.join("clean"),
        out
    );
    CurationConfig::parse(&text).unwrap()
}

fn expected(p: Perturbation) -> &'static [CorrectionMode] {
    match p {
        Perturbation::None => &[CorrectionMode::None],
        Perturbation::Homography => &[CorrectionMode::Homography],
        Perturbation::Elastic => &[CorrectionMode::Elastic],
    }
}

#[test]
fn harness_corpus_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let truth = write_corpus(&dir.path().join("corpus"), &CorpusSpec::default()).unwrap();
    let cfg = config(&dir.path().join("corpus"), &dir.path().join("out"));
    let summary = run_pipeline(&cfg).unwrap();
    assert_eq!(summary.processed, 10);
    let manifest = Manifest::load(cfg.manifest_path()).unwrap();
    let mut matched = 0;
    for t in &truth {
        let r = manifest.get(&t.pair_id).unwrap();
        let pre = r.pre_metrics.as_ref().unwrap().psnr_db.db();
        let post = r.metrics.as_ref().unwrap().psnr_db.db();
        eprintln!(
            "{} {:?} -> {} pre {:.2} post {:.2} global {:?} maxblock {:.2} post_warp {:?} diag {:?}",
            t.pair_id,
            t.perturbation,
            r.correction_mode.as_str(),
            pre,
            post,
            r.criteria.as_ref().unwrap().motion.global_shift,
            r.criteria.as_ref().unwrap().motion.max_block_shift,
            r.alignment.post_warp_max_block_shift,
            r.diagnostics
        );
        if expected(t.perturbation).contains(&r.correction_mode) {
            matched += 1;
        }
        if r.correction_mode != CorrectionMode::None {
            assert_eq!(r.status, Status::NeedsReview);
            assert!(post >= pre + 5.0, "{}: {pre} -> {post}", t.pair_id);
        } else {
            assert_eq!(r.status, Status::Accepted);
        }
        r.check_invariants().unwrap();
    }
    assert!(matched >= 9, "{matched}/10 modes matched");
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CorpusSpec {
        clean_pairs: 1,
        homography_pairs: 1,
        elastic_pairs: 1,
        ..Default::default()
    };
    write_corpus(&dir.path().join("corpus"), &spec).unwrap();
    let run = |name: &str| {
        let cfg = config(&dir.path().join("corpus"), &dir.path().join(name));
        run_pipeline(&cfg).unwrap();
        std::fs::read(cfg.manifest_path()).unwrap()
    };
    let a = run("out_a");
    let b = run("out_b");
    assert!(!a.is_empty());
    assert_eq!(a, b);
}
