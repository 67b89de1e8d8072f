//! Pair curation: ingest, criteria, correction, manifest, review, split
//! and export.

mod align;
mod config;
mod criteria;
mod export;
mod ingest;
mod manifest;
mod review;
mod run;
mod split;

pub use align::{align_pair, estimate_pair_homography, AlignmentOutcome, ModeRequest};
pub use config::{
    CurationConfig, PathsConfig, PipelineOptions, RegistrationConfig, SceneMask, Thresholds,
};
pub use criteria::{
    assess_criteria, exposure, noise_proxy, select_correction, CorrectionMode, CriteriaReport,
    ExposureReport, IlluminationShift,
};
pub use export::{export_dataset, ExportSummary, IndexEntry, SplitIndex};
pub use ingest::{
    ingest_pairs, scene_of, split_timestamp, IngestReport, PairCandidate, PairingRule,
};
pub use manifest::{
    AlignmentArtifacts, CurationRecord, Decision, Manifest, RansacSummary, ReviewDecision, Status,
    MANIFEST_VERSION,
};
pub use review::{
    apply_review, curated_pair, render_view, status_counts, ReviewError, ReviewOutcome, View,
};
pub use run::{artifact_dir, run_pair, run_pipeline, PipelineSummary, DEFAULT_RUN_TIMESTAMP};
pub use split::{largest_remainder, split_dataset, Split, SplitAssignment, DEFAULT_RATIOS};
