//! Building blocks for curating paired rainy/clean frames: alignment,
//! rain synthesis, quality metrics, the rain-robust training objective and
//! a manifest-backed curation pipeline.

pub mod curation;
pub mod error;
pub mod imaging;
pub mod metrics;
pub mod objective;
pub mod registration;
pub mod synth;

pub use error::{Error, Result};
pub use imaging::{DisplacementField, Homography, ImageBuffer, Interpolation, Rect, RegionMask};
