//! Frame assembly: first-hit mask, masked and unmasked composition, metrics.

use std::io::Write;

use serde::Serialize;

use crate::color::Rgb;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::Vec3;
use crate::scene::{IntersectMode, Scene};

/// First hit of a pixel's center ray over static and dynamic geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GBufferTexel {
    pub position: Vec3,
    pub normal: Vec3,
    pub material_id: usize,
    pub primitive_id: usize,
    pub is_dynamic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    pub width: usize,
    pub height: usize,
    /// `None` where the ray escapes.
    pub texels: Vec<Option<GBufferTexel>>,
    /// 0 where the first hit is dynamic, 1 elsewhere (including misses).
    pub mask: Vec<u8>,
}

impl GBuffer {
    pub fn mask_image(&self) -> Image {
        let v: Vec<f64> = self.mask.iter().map(|&m| m as f64).collect();
        Image::from_scalar(self.width, self.height, &v)
    }
}

pub fn build_mask(scene: &Scene) -> GBuffer {
    let cam = &scene.camera;
    let (w, h) = (cam.width as usize, cam.height as usize);
    let mut texels = Vec::with_capacity(w * h);
    let mut mask = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let hit = scene.intersect(&cam.primary_ray(x as u32, y as u32), IntersectMode::IncludeDynamic);
            mask.push(match &hit {
                Some(t) if t.is_dynamic => 0,
                _ => 1,
            });
            texels.push(hit.map(|t| GBufferTexel {
                position: t.position,
                normal: t.normal,
                material_id: t.material_id,
                primitive_id: t.primitive_id,
                is_dynamic: t.is_dynamic,
            }));
        }
    }
    GBuffer { width: w, height: h, texels, mask }
}

/// Inputs of the final composition. `plus` and `minus` hold boosted sample
/// means and may be any sign after subtraction; nothing is clamped here.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBuffers {
    pub static_image: Image,
    pub plus: Image,
    pub minus: Image,
    pub mask: Vec<u8>,
    pub spp: Vec<u32>,
}

impl FrameBuffers {
    pub fn width(&self) -> usize {
        self.static_image.width
    }

    pub fn height(&self) -> usize {
        self.static_image.height
    }

    pub fn delta_image(&self) -> Image {
        let px = self.plus.pixels.iter().zip(&self.minus.pixels).map(|(p, m)| *p - *m).collect();
        Image::from_pixels(self.plus.width, self.plus.height, px)
    }

    fn check(&self) -> Result<()> {
        let (w, h) = (self.width(), self.height());
        let same = |i: &Image| i.width == w && i.height == h;
        if !(same(&self.plus) && same(&self.minus)) || self.mask.len() != w * h || self.spp.len() != w * h {
            return Err(Error::Config("frame buffers have mismatched resolutions".into()));
        }
        Ok(())
    }
}

/// `M (Ls - L-) + L+` when masked, `Ls - L- + L+` otherwise. Unclamped.
pub fn compose_hybrid(buffers: &FrameBuffers, masked: bool) -> Result<Image> {
    buffers.check()?;
    let px = (0..buffers.mask.len())
        .map(|i| {
            let ls = buffers.static_image.pixels[i];
            let (plus, minus) = (buffers.plus.pixels[i], buffers.minus.pixels[i]);
            if masked && buffers.mask[i] == 0 {
                plus
            } else {
                ls - minus + plus
            }
        })
        .collect();
    Ok(Image::from_pixels(buffers.width(), buffers.height(), px))
}

pub const REL_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RegionError {
    pub pixels: usize,
    pub mse: f64,
    pub rel_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub rel_mse: f64,
    /// Pixels with mask 1 (static first hit or miss).
    pub unmasked_region: RegionError,
    /// Pixels with mask 0 (dynamic first hit).
    pub masked_region: RegionError,
    /// Per-pixel squared error averaged over channels.
    #[serde(skip)]
    pub error_map: Vec<f64>,
}

/// Column order of [`write_metrics_csv`].
pub const METRICS_COLUMNS: [&str; 8] = [
    "label",
    "mse",
    "rel_mse",
    "unmasked_pixels",
    "unmasked_mse",
    "masked_pixels",
    "masked_mse",
    "masked_rel_mse",
];

/// MSE and relative MSE `(a - b)^2 / (b^2 + 0.01)` over all pixels and
/// channels, with a breakdown by mask region (everything counts as
/// unmasked when `mask` is `None`).
pub fn compute_metrics(image: &Image, reference: &Image, mask: Option<&[u8]>) -> Result<MetricsReport> {
    if image.width != reference.width || image.height != reference.height {
        return Err(Error::Config(format!(
            "metric inputs differ in size: {}x{} vs {}x{}",
            image.width, image.height, reference.width, reference.height
        )));
    }
    if let Some(m) = mask {
        if m.len() != image.pixels.len() {
            return Err(Error::Config("mask size does not match image".into()));
        }
    }
    let mut error_map = Vec::with_capacity(image.pixels.len());
    let mut acc = [(0usize, 0.0f64, 0.0f64); 2];
    for (i, (a, b)) in image.pixels.iter().zip(&reference.pixels).enumerate() {
        let (mut se, mut rel) = (0.0, 0.0);
        for (x, y) in a.channels().into_iter().zip(b.channels()) {
            let d = x - y;
            se += d * d;
            rel += d * d / (y * y + REL_EPSILON);
        }
        error_map.push(se / 3.0);
        let region = mask.map_or(1, |m| m[i].min(1) as usize);
        acc[region].0 += 1;
        acc[region].1 += se;
        acc[region].2 += rel;
    }
    let region = |(n, se, rel): (usize, f64, f64)| RegionError {
        pixels: n,
        mse: if n > 0 { se / (3 * n) as f64 } else { 0.0 },
        rel_mse: if n > 0 { rel / (3 * n) as f64 } else { 0.0 },
    };
    let n = image.pixels.len().max(1) as f64;
    Ok(MetricsReport {
        mse: (acc[0].1 + acc[1].1) / (3.0 * n),
        rel_mse: (acc[0].2 + acc[1].2) / (3.0 * n),
        masked_region: region(acc[0]),
        unmasked_region: region(acc[1]),
        error_map,
    })
}

/// Mean of the image minus the mean of the reference, as used by the
/// image-mean comparisons.
pub fn mean_error(image: &Image, reference: &Image) -> Rgb {
    image.mean() - reference.mean()
}

pub fn write_metrics_csv<W: Write>(out: W, rows: &[(String, MetricsReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_COLUMNS)?;
    for (label, m) in rows {
        w.write_record([
            label.clone(),
            format!("{:e}", m.mse),
            format!("{:e}", m.rel_mse),
            m.unmasked_region.pixels.to_string(),
            format!("{:e}", m.unmasked_region.mse),
            m.masked_region.pixels.to_string(),
            format!("{:e}", m.masked_region.mse),
            format!("{:e}", m.masked_region.rel_mse),
        ])?;
    }
    w.flush()?;
    Ok(())
}
