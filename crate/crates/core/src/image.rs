//! RGB float images and PFM I/O.
//!
//! Files are written as `PF`, little-endian (scale `-1.0`), rows stored bottom
//! to top as the format requires. In memory row 0 is the top.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian, WriteBytesExt};

use crate::color::Rgb;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Image { width, height, pixels: vec![Rgb::ZERO; width * height] }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<Rgb>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel count does not match resolution");
        Image { width, height, pixels }
    }

    pub fn from_scalar(width: usize, height: usize, values: &[f64]) -> Self {
        Self::from_pixels(width, height, values.iter().map(|&v| Rgb::splat(v)).collect())
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        self.pixels[y * self.width + x] = c;
    }

    pub fn mean(&self) -> Rgb {
        let sum = self.pixels.iter().fold(Rgb::ZERO, |a, &p| a + p);
        sum / self.pixels.len() as f64
    }

    /// Copy with negative channels set to zero.
    pub fn clamped(&self) -> Image {
        Image { pixels: self.pixels.iter().map(|p| p.clamp_negative()).collect(), ..self.clone() }
    }

    pub fn to_pfm_bytes(&self) -> Vec<u8> {
        let mut out = format!("PF\n{} {}\n-1.0\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 12);
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                let p = self.get(x, y);
                for c in p.channels() {
                    out.write_f32::<LittleEndian>(c as f32).expect("writing to a Vec cannot fail");
                }
            }
        }
        out
    }

    pub fn write_pfm(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&self.to_pfm_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn read_pfm(path: &Path) -> Result<Image> {
        let file = File::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::parse_pfm(BufReader::new(file)).map_err(|reason| Error::Image { path: path.to_path_buf(), reason })
    }

    pub fn parse_pfm<R: BufRead>(mut r: R) -> std::result::Result<Image, String> {
        let mut tokens = Vec::new();
        let mut line = String::new();
        while tokens.len() < 4 {
            line.clear();
            let n = r.read_line(&mut line).map_err(|e| e.to_string())?;
            if n == 0 {
                return Err("truncated header".into());
            }
            tokens.extend(line.split_whitespace().map(str::to_owned));
        }
        if tokens.len() != 4 {
            return Err("malformed header".into());
        }
        let channels = match tokens[0].as_str() {
            "PF" => 3,
            "Pf" => 1,
            other => return Err(format!("unsupported magic {other:?}")),
        };
        let width: usize = tokens[1].parse().map_err(|_| "bad width".to_string())?;
        let height: usize = tokens[2].parse().map_err(|_| "bad height".to_string())?;
        let scale: f64 = tokens[3].parse().map_err(|_| "bad scale".to_string())?;
        if width == 0 || height == 0 || scale == 0.0 || !scale.is_finite() {
            return Err("invalid dimensions or scale".into());
        }
        let count = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels * 4))
            .ok_or("image too large")?;
        let mut data = vec![0u8; count];
        r.read_exact(&mut data).map_err(|_| "truncated pixel data".to_string())?;
        let value = |i: usize| -> f64 {
            let b = &data[i * 4..i * 4 + 4];
            (if scale < 0.0 { LittleEndian::read_f32(b) } else { BigEndian::read_f32(b) }) as f64
        };
        let mut img = Image::new(width, height);
        for row in 0..height {
            let y = height - 1 - row;
            for x in 0..width {
                let base = (row * width + x) * channels;
                let c = if channels == 3 {
                    Rgb::new(value(base), value(base + 1), value(base + 2))
                } else {
                    Rgb::splat(value(base))
                };
                if !c.is_finite() {
                    return Err(format!("non-finite pixel at ({x}, {y})"));
                }
                img.set(x, y, c);
            }
        }
        Ok(img)
    }
}
