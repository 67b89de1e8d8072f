//! Global and local alignment of frame pairs.

mod demons;
mod dlt;
mod matching;
mod phase;
mod ransac;
mod sift;

pub use demons::{
    register_elastic, register_elastic_traced, DemonsIteration, DemonsOutcome, DemonsParams,
};
pub use dlt::solve_homography_dlt;
pub use matching::{match_descriptors, Correspondence};
pub(crate) use phase::fft2;
pub use phase::{alignment_residual, phase_correlate, BlockShift, MotionReport, PhaseShift};
pub use ransac::{
    estimate_homography_ransac, symmetric_transfer_error, RansacParams, RansacResult,
};
pub use sift::{detect_keypoints, Keypoint, SiftParams, DESCRIPTOR_LEN};
