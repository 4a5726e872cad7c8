//! Linear-light RGB images and masks with PNG (8-bit, sRGB-encoded) and raw
//! f32 binary I/O.
//!
//! The `.f32` format is the lossless interchange used for textures and
//! portraits during fitting: magic `F32I`, then width/height/channels as
//! little-endian u32, then row-major channel-interleaved f32 samples.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const F32_MAGIC: &[u8; 4] = b"F32I";

/// RGB image with f64 linear values. Values are unconstrained in memory and
/// clamped to [0,1] only on 8-bit export.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    /// Row-major, channel-interleaved: data[(y * width + x) * 3 + c].
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Image { width, height, data: vec![0.0; width * height * 3] }
    }

    pub fn constant(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut img = Image::new(width, height);
        for px in img.data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * 3
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = self.idx(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = self.idx(x, y);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Mean color over pixels selected by `mask` (all pixels when None).
    pub fn mean_color(&self, mask: Option<&Mask>) -> [f64; 3] {
        let mut sum = [0.0; 3];
        let mut count = 0usize;
        for y in 0..self.height {
            for x in 0..self.width {
                if let Some(m) = mask {
                    if !m.get(x, y) {
                        continue;
                    }
                }
                let p = self.pixel(x, y);
                for c in 0..3 {
                    sum[c] += p[c];
                }
                count += 1;
            }
        }
        if count == 0 {
            return [0.0; 3];
        }
        sum.map(|s| s / count as f64)
    }

    /// 8-bit PNG export; values are clamped to [0,1] and sRGB-encoded.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::with_capacity(self.width * self.height * 3);
        for v in &self.data {
            buf.push(linear_to_srgb_u8(*v));
        }
        let img = image::RgbImage::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer size matches dimensions");
        img.save(path)
            .map_err(|e| Error::ImageFormat { path: path.into(), msg: e.to_string() })
    }

    /// Load an 8-bit PNG, decoding sRGB to linear.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| Error::ImageFormat { path: path.into(), msg: e.to_string() })?
            .to_rgb8();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut out = Image::new(w, h);
        for (i, px) in img.pixels().enumerate() {
            for c in 0..3 {
                out.data[i * 3 + c] = srgb_u8_to_linear(px.0[c]);
            }
        }
        Ok(out)
    }

    /// Lossless float export (f64 -> f32).
    pub fn save_f32(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut head = Vec::with_capacity(16);
        head.extend_from_slice(F32_MAGIC);
        head.extend_from_slice(&(self.width as u32).to_le_bytes());
        head.extend_from_slice(&(self.height as u32).to_le_bytes());
        head.extend_from_slice(&3u32.to_le_bytes());
        file.write_all(&head).map_err(|e| Error::io(path, e))?;
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        file.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn load_f32(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut head = [0u8; 16];
        file.read_exact(&mut head).map_err(|e| Error::io(path, e))?;
        if &head[0..4] != F32_MAGIC {
            return Err(Error::ImageFormat { path: path.into(), msg: "bad magic".into() });
        }
        let w = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
        let h = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        let ch = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
        if ch != 3 {
            return Err(Error::ImageFormat {
                path: path.into(),
                msg: format!("expected 3 channels, got {ch}"),
            });
        }
        let mut buf = Vec::new();
        file.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
        if buf.len() != w * h * 3 * 4 {
            return Err(Error::ImageFormat { path: path.into(), msg: "truncated data".into() });
        }
        let mut out = Image::new(w, h);
        for (i, chunk) in buf.chunks_exact(4).enumerate() {
            out.data[i] = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        }
        Ok(out)
    }

    /// Dispatch on extension: `.f32` is the lossless path, `.png` is 8-bit
    /// sRGB.
    pub fn load(path: impl AsRef<Path>) -> Result<Image> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()) {
            Some("f32") => Image::load_f32(path),
            _ => Image::load_png(path),
        }
    }
}

/// Binary per-pixel mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Mask { width, height, data: vec![false; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn union(&self, other: &Mask) -> Mask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| *a || *b).collect();
        Mask { width: self.width, height: self.height, data }
    }

    pub fn any_on_border(&self) -> bool {
        let (w, h) = (self.width, self.height);
        (0..w).any(|x| self.get(x, 0) || self.get(x, h - 1))
            || (0..h).any(|y| self.get(0, y) || self.get(w - 1, y))
    }
}

pub fn srgb_encode(c: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

pub fn srgb_decode(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb_u8(v: f64) -> u8 {
    (srgb_encode(v) * 255.0).round().clamp(0.0, 255.0) as u8
}

fn srgb_u8_to_linear(v: u8) -> f64 {
    srgb_decode(v as f64 / 255.0)
}
