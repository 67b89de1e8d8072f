use crate::error::{Error, Result};

/// A row-major image with 1 or 3 interleaved channels of real values.
///
/// Values are nominally in `[0, 1]`; intermediate results may leave that
/// range until [`ImageBuffer::clamp`] is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        check_channels(channels)?;
        Ok(Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        })
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_channels(channels)?;
        if data.len() != width * height * channels {
            return Err(Error::dims(
                format!("{} samples", width * height * channels),
                format!("{} samples", data.len()),
            ));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("image sample {bad}")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y, c)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        check_channels(channels)?;
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::from_vec(width, height, channels, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn ensure_same_shape(&self, other: &ImageBuffer) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::dims(self.shape_string(), other.shape_string()))
        }
    }

    pub(crate) fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.width, self.height, self.channels)
    }

    /// Extracts a single channel as a grayscale image.
    pub fn channel(&self, c: usize) -> ImageBuffer {
        assert!(c < self.channels, "channel index out of range");
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| px[c])
            .collect();
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Interleaves single-channel planes into one image.
    pub fn from_planes(planes: &[ImageBuffer]) -> Result<ImageBuffer> {
        let first = planes
            .first()
            .ok_or_else(|| Error::InvalidParameter("no planes".into()))?;
        check_channels(planes.len())?;
        for p in planes {
            if p.channels != 1 || p.width != first.width || p.height != first.height {
                return Err(Error::dims(
                    format!("{}x{}x1", first.width, first.height),
                    p.shape_string(),
                ));
            }
        }
        let n = first.width * first.height;
        let mut data = Vec::with_capacity(n * planes.len());
        for i in 0..n {
            for p in planes {
                data.push(p.data[i]);
            }
        }
        Ok(ImageBuffer {
            width: first.width,
            height: first.height,
            channels: planes.len(),
            data,
        })
    }

    /// Expands a grayscale image to three identical channels; RGB images are cloned.
    pub fn to_rgb(&self) -> ImageBuffer {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    /// Clamps every sample to `[0, 1]`, returning how many samples changed.
    pub fn clamp(&mut self) -> usize {
        let mut clamped = 0;
        for v in &mut self.data {
            let c = v.clamp(0.0, 1.0);
            if c != *v {
                clamped += 1;
                *v = c;
            }
        }
        clamped
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageBuffer {
        ImageBuffer {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ImageBuffer, f: impl Fn(f64, f64) -> f64) -> Result<ImageBuffer> {
        self.ensure_same_shape(other)?;
        Ok(ImageBuffer {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Copies the rectangle `[x, x+w) × [y, y+h)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<ImageBuffer> {
        if x + w > self.width || y + h > self.height {
            return Err(Error::InvalidParameter(format!(
                "crop {w}x{h}+{x}+{y} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h * self.channels);
        for row in y..y + h {
            let start = (row * self.width + x) * self.channels;
            data.extend_from_slice(&self.data[start..start + w * self.channels]);
        }
        Ok(ImageBuffer {
            width: w,
            height: h,
            channels: self.channels,
            data,
        })
    }
}

fn check_channels(channels: usize) -> Result<()> {
    if channels == 1 || channels == 3 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "channel count must be 1 or 3, got {channels}"
        )))
    }
}

/// Luma weights applied by [`to_grayscale`].
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Converts an RGB image to luminance with Rec. 601 weights.
pub fn to_grayscale(img: &ImageBuffer) -> Result<ImageBuffer> {
    if img.channels() != 3 {
        return Err(Error::ChannelMismatch {
            expected: 3,
            actual: img.channels(),
        });
    }
    let data = img
        .data()
        .chunks_exact(3)
        .map(|px| LUMA_WEIGHTS[0] * px[0] + LUMA_WEIGHTS[1] * px[1] + LUMA_WEIGHTS[2] * px[2])
        .collect();
    ImageBuffer::from_vec(img.width(), img.height(), 1, data)
}

/// Luminance of an image of either channel count.
pub fn luminance(img: &ImageBuffer) -> ImageBuffer {
    match img.channels() {
        3 => to_grayscale(img).expect("three channels"),
        _ => img.clone(),
    }
}
