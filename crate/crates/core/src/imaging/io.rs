//! PNG and binary PPM (P6) reading and writing.
//!
//! Samples are scaled by `1/255` on load and quantized with rounding on save,
//! so an 8-bit file survives a load/save cycle bit-exactly.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use super::ImageBuffer;
use crate::error::{Error, Result};

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Ppm,
}

impl ImageFormat {
    /// Picks a format from a file extension (`png`, `ppm`).
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("png") => Ok(ImageFormat::Png),
            Some("ppm") => Ok(ImageFormat::Ppm),
            other => Err(Error::UnsupportedFormat(format!(
                "extension {:?} of {}",
                other.unwrap_or(""),
                path.display()
            ))),
        }
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

/// Decodes PNG or P6 PPM bytes, sniffing the format from the header.
pub fn decode_image(bytes: &[u8]) -> Result<ImageBuffer> {
    if bytes.starts_with(PNG_MAGIC) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P6") {
        decode_ppm(bytes)
    } else {
        Err(Error::UnsupportedFormat(
            "not a PNG or binary PPM stream".into(),
        ))
    }
}

pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match ImageFormat::from_path(path)? {
        ImageFormat::Png => encode_png(img)?,
        ImageFormat::Ppm => encode_ppm(img),
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[inline]
fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn decode_png(bytes: &[u8]) -> Result<ImageBuffer> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::CorruptImage(e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::CorruptImage(e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let (src_channels, keep) = match info.color_type {
        png::ColorType::Grayscale => (1, 1),
        png::ColorType::GrayscaleAlpha => (2, 1),
        png::ColorType::Rgb => (3, 3),
        png::ColorType::Rgba => (4, 3),
        png::ColorType::Indexed => {
            return Err(Error::UnsupportedFormat("unexpanded indexed PNG".into()))
        }
    };
    let samples: Vec<f64> = match info.bit_depth {
        png::BitDepth::Sixteen => buf[..info.buffer_size()]
            .chunks_exact(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / 65535.0)
            .collect(),
        png::BitDepth::Eight => buf[..info.buffer_size()]
            .iter()
            .map(|&b| b as f64 / 255.0)
            .collect(),
        other => return Err(Error::UnsupportedFormat(format!("PNG bit depth {other:?}"))),
    };
    let data = samples
        .chunks_exact(src_channels)
        .flat_map(|px| px[..keep].to_vec())
        .collect();
    ImageBuffer::from_vec(w, h, keep, data)
}

/// Encodes an image as an 8-bit PNG (grayscale or RGB).
pub fn encode_png(img: &ImageBuffer) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        encoder.set_color(if img.channels() == 3 {
            png::ColorType::Rgb
        } else {
            png::ColorType::Grayscale
        });
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::CorruptImage(e.to_string()))?;
        let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
        writer
            .write_image_data(&bytes)
            .map_err(|e| Error::CorruptImage(e.to_string()))?;
    }
    Ok(out)
}

/// Encodes a P6 PPM; grayscale images are replicated to three channels.
pub fn encode_ppm(img: &ImageBuffer) -> Vec<u8> {
    let rgb = img.to_rgb();
    let mut out = format!("P6\n{} {}\n255\n", rgb.width(), rgb.height()).into_bytes();
    out.extend(rgb.data().iter().map(|&v| quantize(v)));
    out
}

fn decode_ppm(bytes: &[u8]) -> Result<ImageBuffer> {
    let mut pos = 2;
    let mut header = [0usize; 3];
    for field in &mut header {
        // whitespace and comments between header tokens
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::CorruptImage("truncated PPM header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::CorruptImage(
                "expected a number in PPM header".into(),
            ));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::CorruptImage("bad number in PPM header".into()))?;
    }
    let [w, h, maxval] = header;
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedFormat(format!("PPM maxval {maxval}")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::CorruptImage(
            "missing separator after PPM header".into(),
        ));
    }
    pos += 1;
    let n = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Error::CorruptImage("PPM dimensions overflow".into()))?;
    let body = bytes
        .get(pos..pos + n)
        .ok_or_else(|| Error::CorruptImage(format!("PPM body shorter than {n} bytes")))?;
    let scale = maxval as f64;
    ImageBuffer::from_vec(w, h, 3, body.iter().map(|&b| b as f64 / scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_red_pixel() {
        let mut bytes = b"P6\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30]);
        let img = decode_image(&bytes).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 2, 3));
        assert_eq!(&img.data()[..3], &[1.0, 0.0, 0.0]);
        assert_eq!(img.get(1, 1, 2), 30.0 / 255.0);
    }

    #[test]
    fn ppm_header_comment() {
        let mut bytes = b"P6 # comment\n1 1 255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        assert!(decode_image(&bytes).is_ok());
    }

    #[test]
    fn truncated_ppm_is_corrupt() {
        let bytes = b"P6\n2 2\n255\n\x00\x01".to_vec();
        assert!(matches!(decode_image(&bytes), Err(Error::CorruptImage(_))));
    }

    #[test]
    fn unknown_magic_is_unsupported() {
        assert!(matches!(
            decode_image(b"GIF89a...."),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_image("/nonexistent/definitely/not/here.png"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageBuffer::from_fn(5, 4, 3, |x, y, c| {
            ((x * 37 + y * 11 + c * 5) % 256) as f64 / 255.0
        })
        .unwrap();
        for name in ["a.png", "a.ppm"] {
            let p = dir.path().join(name);
            save_image(&img, &p).unwrap();
            let back = load_image(&p).unwrap();
            for (a, b) in img.data().iter().zip(back.data()) {
                assert!((a - b).abs() <= 1.0 / 255.0);
            }
            // 8-bit values are reproduced exactly
            assert_eq!(back.data(), img.data());
        }
    }

    #[test]
    fn grayscale_png_round_trip() {
        let img = ImageBuffer::from_fn(3, 3, 1, |x, y, _| (x * 3 + y) as f64 / 255.0).unwrap();
        let back = decode_image(&encode_png(&img).unwrap()).unwrap();
        assert_eq!(back, img);
    }
}
