//! Image containers, resampling, filtering and file I/O.

mod buffer;
mod field;
mod filter;
mod homography;
mod io;
mod mask;
mod warp;

pub use buffer::{luminance, to_grayscale, ImageBuffer, LUMA_WEIGHTS};
pub use field::DisplacementField;
pub(crate) use filter::{blur_plane, convolve_separable};
pub use filter::{gaussian_blur, gaussian_kernel, gaussian_kernel_with_radius, open_horizontal};
pub use homography::Homography;
pub use io::{decode_image, encode_png, encode_ppm, load_image, save_image, ImageFormat};
pub use mask::{apply_mask_crop, Rect, RegionMask};
pub use warp::{sample_into, warp_displacement, warp_homography, Interpolation, Warped};
