//! Float RGB images and their on-disk forms (8-bit PNG, float32 NPY).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major `height × width × 3` float image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f64>,
}

impl ImageRgb {
    pub fn new(width: u32, height: u32) -> Self {
        ImageRgb {
            width,
            height,
            data: vec![0.0; width as usize * height as usize * 3],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [f64; 3]) -> Self {
        let mut img = ImageRgb::new(width, height);
        for y in 0..height {
            for x in 0..width {
                img.set(x, y, f(x, y));
            }
        }
        img
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f64; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [f64; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// One color channel as a row-major plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(3).copied().collect()
    }

    /// 8-bit quantization by rounding `v·255` after clamping to `[0, 1]`.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        image::save_buffer(
            path,
            &self.to_rgb8(),
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| Error::Image {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?
            .to_rgb8();
        Ok(ImageRgb {
            width: img.width(),
            height: img.height(),
            data: img.as_raw().iter().map(|&b| b as f64 / 255.0).collect(),
        })
    }

    /// NumPy `.npy` (v1.0) with dtype `<f4` and shape `(H, W, 3)`.
    pub fn to_npy(&self) -> Vec<u8> {
        let dict = format!(
            "{{'descr': '<f4', 'fortran_order': False, 'shape': ({}, {}, 3), }}",
            self.height, self.width
        );
        // magic(6) + version(2) + len(2) + dict + padding + '\n' is a multiple of 64
        let unpadded = 10 + dict.len() + 1;
        let pad = (64 - unpadded % 64) % 64;
        let header_len = dict.len() + pad + 1;
        let mut out = Vec::with_capacity(10 + header_len + self.data.len() * 4);
        out.extend_from_slice(b"\x93NUMPY\x01\x00");
        out.extend_from_slice(&(header_len as u16).to_le_bytes());
        out.extend_from_slice(dict.as_bytes());
        out.extend(std::iter::repeat_n(b' ', pad));
        out.push(b'\n');
        for v in &self.data {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    pub fn save_npy(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_npy()).map_err(|e| Error::io(path, e))
    }

    pub fn parse_npy(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |m: &str| Error::Image {
            path: path.to_path_buf(),
            message: m.to_string(),
        };
        if bytes.len() < 10 || &bytes[..6] != b"\x93NUMPY" {
            return Err(bad("not an npy file"));
        }
        let (header_len, start) = match bytes[6] {
            1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
            2 | 3 => {
                if bytes.len() < 12 {
                    return Err(bad("truncated npy header"));
                }
                (u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize, 12)
            }
            _ => return Err(bad("unsupported npy version")),
        };
        let header = bytes
            .get(start..start + header_len)
            .ok_or_else(|| bad("truncated npy header"))?;
        let header = std::str::from_utf8(header).map_err(|_| bad("npy header not utf-8"))?;
        if header.contains("'fortran_order': True") {
            return Err(bad("fortran-order arrays unsupported"));
        }
        let width = if header.contains("'<f4'") {
            4
        } else if header.contains("'<f8'") {
            8
        } else {
            return Err(bad("dtype must be <f4 or <f8"));
        };
        let shape_start = header.find("'shape': (").ok_or_else(|| bad("missing shape"))? + 10;
        let shape_end = header[shape_start..]
            .find(')')
            .ok_or_else(|| bad("missing shape"))?
            + shape_start;
        let dims: Vec<usize> = header[shape_start..shape_end]
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse().map_err(|_| bad("bad shape")))
            .collect::<Result<_>>()?;
        if dims.len() != 3 || dims[2] != 3 {
            return Err(bad("shape must be (H, W, 3)"));
        }
        let (h, w) = (dims[0], dims[1]);
        let body = &bytes[start + header_len..];
        let n = h * w * 3;
        if body.len() < n * width {
            return Err(bad("truncated npy payload"));
        }
        let data = body
            .chunks_exact(width)
            .take(n)
            .map(|c| {
                if width == 4 {
                    f32::from_le_bytes(c.try_into().unwrap()) as f64
                } else {
                    f64::from_le_bytes(c.try_into().unwrap())
                }
            })
            .collect();
        Ok(ImageRgb {
            width: w as u32,
            height: h as u32,
            data,
        })
    }

    pub fn load_npy(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::parse_npy(&bytes, path)
    }

    /// Loads `.npy` or anything the PNG decoder understands, by extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()) {
            Some("npy") => Self::load_npy(path),
            _ => Self::load_png(path),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn npy_round_trip_and_alignment() {
        let img = ImageRgb::from_fn(5, 3, |x, y| [x as f64 * 0.1, y as f64 * 0.25, 0.5]);
        let bytes = img.to_npy();
        let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        assert_eq!((10 + header_len) % 64, 0);
        let back = ImageRgb::parse_npy(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back.width, 5);
        assert_eq!(back.height, 3);
        for (a, b) in img.data.iter().zip(&back.data) {
            assert_eq!(*a as f32 as f64, *b);
        }
    }

    #[test]
    fn quantization_rounds() {
        let img = ImageRgb {
            width: 1,
            height: 1,
            data: vec![0.5, 1.2, -0.1],
        };
        assert_eq!(img.to_rgb8(), vec![128, 255, 0]);
    }
}
