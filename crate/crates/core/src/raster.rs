//! 8-bit raster input/output (PNG and PGM only).

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat};

use crate::error::{Error, Result};

const REC709: [f64; 3] = [0.2126, 0.7152, 0.0722];

/// Single-channel 8-bit code plane. Codes are kept as `f64` so that color
/// inputs reduced to luma are not re-quantized before luminance decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    codes: Vec<f64>,
}

impl Raster {
    pub fn from_codes(width: usize, height: usize, codes: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input("image has zero size"));
        }
        if codes.len() != width * height {
            return Err(Error::input("code count does not match dimensions"));
        }
        if codes.iter().any(|c| !(0.0..=255.0).contains(c)) {
            return Err(Error::input("pixel codes must lie in [0, 255]"));
        }
        Ok(Self {
            width,
            height,
            codes,
        })
    }

    pub fn from_gray8(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        Self::from_codes(width, height, data.iter().map(|&b| b as f64).collect())
    }

    /// Interleaved RGB reduced to luma with Rec.709 weights.
    pub fn from_rgb8(width: usize, height: usize, data: &[u8]) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::input("rgb buffer does not match dimensions"));
        }
        let codes = data
            .chunks_exact(3)
            .map(|p| luma(p[0], p[1], p[2]))
            .collect();
        Self::from_codes(width, height, codes)
    }

    #[cfg(test)]
    pub(crate) fn empty_for_tests() -> Self {
        Self {
            width: 0,
            height: 0,
            codes: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn codes(&self) -> &[f64] {
        &self.codes
    }

    pub fn to_gray8(&self) -> Vec<u8> {
        self.codes.iter().map(|c| c.round().clamp(0.0, 255.0) as u8).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let format = match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("png") => ImageFormat::Png,
            Some("pgm") | Some("pnm") | Some("ppm") => ImageFormat::Pnm,
            _ => image::guess_format(&bytes).map_err(|source| Error::Image {
                path: path.to_path_buf(),
                source,
            })?,
        };
        if !matches!(format, ImageFormat::Png | ImageFormat::Pnm) {
            return Err(Error::Format {
                path: Some(path.to_path_buf()),
                line: None,
                msg: "only PNG and PGM images are supported".into(),
            });
        }
        let img = image::load_from_memory_with_format(&bytes, format).map_err(|source| {
            Error::Image {
                path: path.to_path_buf(),
                source,
            }
        })?;
        Self::from_dynamic(img).map_err(|e| match e {
            Error::Input(msg) | Error::Format { msg, .. } => Error::Format {
                path: Some(path.to_path_buf()),
                line: None,
                msg,
            },
            other => other,
        })
    }

    fn from_dynamic(img: DynamicImage) -> Result<Self> {
        let (w, h) = (img.width() as usize, img.height() as usize);
        match img {
            DynamicImage::ImageLuma8(g) => Self::from_gray8(w, h, g.as_raw()),
            DynamicImage::ImageLumaA8(g) => {
                let data: Vec<u8> = g.as_raw().chunks_exact(2).map(|p| p[0]).collect();
                Self::from_gray8(w, h, &data)
            }
            DynamicImage::ImageRgb8(rgb) => Self::from_rgb8(w, h, rgb.as_raw()),
            DynamicImage::ImageRgba8(rgba) => {
                let data: Vec<u8> = rgba
                    .as_raw()
                    .chunks_exact(4)
                    .flat_map(|p| [p[0], p[1], p[2]])
                    .collect();
                Self::from_rgb8(w, h, &data)
            }
            _ => Err(Error::format("only 8-bit images are supported")),
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        save_gray_png(path, self.width, self.height, &self.to_gray8())
    }
}

fn luma(r: u8, g: u8, b: u8) -> f64 {
    REC709[0] * r as f64 + REC709[1] * g as f64 + REC709[2] * b as f64
}

pub fn save_gray_png(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    let img = GrayImage::from_raw(width as u32, height as u32, data.to_vec())
        .ok_or_else(|| Error::Internal("gray buffer does not match dimensions".into()))?;
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
    write_atomic(path, buf.get_ref())
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::input(format!("{} is not a file path", path.display())))?;
    let tmp_name = format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id());
    let tmp = match dir {
        Some(d) => d.join(tmp_name),
        None => Path::new(&tmp_name).to_path_buf(),
    };
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(contents).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_uses_rec709_luma() {
        let r = Raster::from_rgb8(1, 1, &[255, 0, 0]).unwrap();
        assert!((r.codes()[0] - 0.2126 * 255.0).abs() < 1e-12);
        let white = Raster::from_rgb8(1, 1, &[255, 255, 255]).unwrap();
        assert!((white.codes()[0] - 255.0).abs() < 1e-9);
    }

    #[test]
    fn png_and_pgm_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<u8> = (0..=255u8).collect();
        let png = dir.path().join("ramp.png");
        save_gray_png(&png, 16, 16, &data).unwrap();
        assert_eq!(Raster::load(&png).unwrap().to_gray8(), data);

        let pgm = dir.path().join("ramp.pgm");
        let mut bytes = b"P5\n16 16\n255\n".to_vec();
        bytes.extend_from_slice(&data);
        fs::write(&pgm, bytes).unwrap();
        assert_eq!(Raster::load(&pgm).unwrap().to_gray8(), data);
    }

    #[test]
    fn rejects_out_of_range_codes_and_missing_files() {
        assert!(Raster::from_codes(1, 1, vec![256.0]).is_err());
        assert!(Raster::from_codes(0, 1, vec![]).is_err());
        assert!(matches!(
            Raster::load(Path::new("/nonexistent/x.png")),
            Err(Error::Io { .. })
        ));
    }
}
