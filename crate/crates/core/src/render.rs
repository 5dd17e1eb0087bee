//! Whole-image renders: per-pixel estimators and the hybrid frame.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{self, AdaptiveConfig, DitherMode, PixelStats, SampleMap};
use crate::color::Rgb;
use crate::compositor::{build_mask, compose_hybrid, FrameBuffers, GBuffer};
use crate::error::Result;
use crate::field::StaticField;
use crate::image::Image;
use crate::integrator::{self, camera_ray, IntegratorConfig};
use crate::math::Ray;
use crate::rng::{RandomStream, SceneVariant, StreamKey};
use crate::scene::Scene;

/// Sample indices at or above this value belong to the pilot pass.
pub const PILOT_SAMPLE_BASE: u32 = 1 << 30;
/// Sample index namespace of static-field oracle queries.
const FIELD_SAMPLE_BASE: u32 = 1 << 31;

/// Per-pixel running sums of one estimator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Accum {
    pub n: u32,
    pub sum: Rgb,
    pub sum_sq: Rgb,
}

impl Accum {
    #[inline]
    pub fn add(&mut self, v: Rgb) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn mean(&self) -> Rgb {
        if self.n == 0 {
            Rgb::ZERO
        } else {
            self.sum / self.n as f64
        }
    }

    /// Unbiased per-channel sample variance.
    pub fn variance(&self) -> Rgb {
        if self.n < 2 {
            return Rgb::ZERO;
        }
        let n = self.n as f64;
        let m = self.mean();
        ((self.sum_sq - m * m * n) / (n - 1.0)).clamp_negative()
    }

    /// Per-channel standard error of the mean.
    pub fn std_error(&self) -> Rgb {
        if self.n == 0 {
            return Rgb::ZERO;
        }
        (self.variance() / self.n as f64).map(f64::sqrt)
    }
}

/// Accumulators of a whole image.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Accum>,
}

impl EstimateImage {
    pub fn mean_image(&self) -> Image {
        Image::from_pixels(self.width, self.height, self.pixels.iter().map(Accum::mean).collect())
    }

    pub fn std_error_image(&self) -> Image {
        Image::from_pixels(self.width, self.height, self.pixels.iter().map(Accum::std_error).collect())
    }
}

/// Runs `sample(ray, stream)` `spp` times per pixel with streams keyed by
/// `(pixel, frame, sample)`. Pixels are independent, so the result does not
/// depend on the thread count.
pub fn render_estimator<F>(scene: &Scene, spp: u32, seed: u64, frame: u32, sample: F) -> EstimateImage
where
    F: Fn(&Ray, &RandomStream) -> Rgb + Sync,
{
    let (w, h) = (scene.camera.width as usize, scene.camera.height as usize);
    let pixels = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (x, y) = ((i % w) as u32, (i / w) as u32);
            let ray = camera_ray(scene, x, y);
            let mut acc = Accum::default();
            for s in 0..spp {
                acc.add(sample(&ray, &RandomStream::new(seed, StreamKey::new(x, y, frame, s))));
            }
            acc
        })
        .collect();
    EstimateImage { width: w, height: h, pixels }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    ReferenceStatic,
    ReferenceDynamic,
    Additive,
    Subtractive,
    DeltaPss,
}

impl Estimator {
    pub fn sample(self, scene: &Scene, ray: &Ray, stream: &RandomStream, cfg: &IntegratorConfig) -> Rgb {
        let mut s = stream.clone();
        match self {
            Estimator::ReferenceStatic => integrator::trace_reference(scene, ray, &mut s, SceneVariant::Static, cfg),
            Estimator::ReferenceDynamic => integrator::trace_reference(scene, ray, &mut s, SceneVariant::Dynamic, cfg),
            Estimator::Additive => integrator::trace_additive(scene, ray, &mut s, cfg),
            Estimator::Subtractive => integrator::trace_subtractive(scene, ray, &mut s, cfg),
            Estimator::DeltaPss => integrator::trace_delta_pss(scene, ray, stream, cfg).delta,
        }
    }

    /// Path traversals per sample.
    pub fn cost(self) -> u32 {
        match self {
            Estimator::DeltaPss => 2,
            _ => 1,
        }
    }
}

pub fn render(scene: &Scene, estimator: Estimator, spp: u32, seed: u64, frame: u32, cfg: &IntegratorConfig) -> EstimateImage {
    render_estimator(scene, spp, seed, frame, |ray, s| estimator.sample(scene, ray, s, cfg))
}

/// Static radiance image seen through the camera (mask ignored).
pub fn static_image(scene: &Scene, field: &StaticField, seed_frame: u32) -> Image {
    let cam = &scene.camera;
    let (w, h) = (cam.width as usize, cam.height as usize);
    let rays: Vec<Ray> = (0..w * h).map(|i| cam.primary_ray((i % w) as u32, (i / w) as u32)).collect();
    let keys: Vec<StreamKey> =
        (0..w * h).map(|i| StreamKey::new((i % w) as u32, (i / w) as u32, seed_frame, FIELD_SAMPLE_BASE)).collect();
    Image::from_pixels(w, h, field.eval_rays(scene, &rays, &keys))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridSettings {
    /// Mean delta samples per pixel.
    pub spp: f64,
    pub adaptive: bool,
    pub masked: bool,
    pub dither: DitherMode,
    pub adaptive_config: AdaptiveConfig,
    pub seed: u64,
    pub frame: u32,
    /// Carry the statistics of earlier frames forward instead of keeping
    /// only the latest frame's samples.
    pub accumulate_stats: bool,
}

impl Default for HybridSettings {
    fn default() -> Self {
        HybridSettings {
            spp: 1.0,
            adaptive: true,
            masked: true,
            dither: DitherMode::BlockStratified,
            adaptive_config: AdaptiveConfig::default(),
            seed: 0,
            frame: 0,
            accumulate_stats: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HybridFrame {
    pub buffers: FrameBuffers,
    pub gbuffer: GBuffer,
    /// Composited image, not clamped.
    pub image: Image,
    pub sample_map: SampleMap,
    /// Statistics for the next frame: this frame's delta samples, plus the
    /// previous statistics when accumulating.
    pub stats: PixelStats,
    /// Per-pixel luminance variance of the delta samples.
    pub delta_variance: Vec<f64>,
    /// Delta samples traced, pilot included.
    pub delta_samples: u64,
}

struct PixelDelta {
    plus: Rgb,
    minus: Rgb,
    samples: Vec<Rgb>,
}

fn trace_pixel(
    scene: &Scene,
    cfg: &IntegratorConfig,
    seed: u64,
    frame: u32,
    (x, y): (u32, u32),
    first_sample: u32,
    count: u32,
) -> PixelDelta {
    let ray = camera_ray(scene, x, y);
    let mut out = PixelDelta { plus: Rgb::ZERO, minus: Rgb::ZERO, samples: Vec::with_capacity(count as usize) };
    for s in 0..count {
        let stream = RandomStream::new(seed, StreamKey::new(x, y, frame, first_sample + s));
        let d = integrator::trace_delta_pss(scene, &ray, &stream, cfg);
        out.plus += d.plus();
        out.minus += d.minus();
        out.samples.push(d.plus() - d.minus());
    }
    out
}

fn trace_map(scene: &Scene, cfg: &IntegratorConfig, seed: u64, frame: u32, counts: &[u32], first_sample: u32) -> Vec<PixelDelta> {
    let w = scene.camera.width as usize;
    counts
        .par_iter()
        .enumerate()
        .map(|(i, &c)| trace_pixel(scene, cfg, seed, frame, ((i % w) as u32, (i / w) as u32), first_sample, c))
        .collect()
}

/// Renders the delta buffers of one frame and composes them with `static_image`.
///
/// The allocation comes from `previous` statistics when adaptive sampling is
/// on; without them a uniform pilot pass spends a quarter of the budget and
/// the main pass the rest. Non-adaptive frames use a uniform map.
pub fn render_hybrid(
    scene: &Scene,
    static_image: &Image,
    settings: &HybridSettings,
    cfg: &IntegratorConfig,
    previous: Option<&PixelStats>,
) -> Result<HybridFrame> {
    let (w, h) = (scene.camera.width as usize, scene.camera.height as usize);
    let floor = settings.adaptive_config.floor;
    let (seed, frame) = (settings.seed, settings.frame);
    let mut delta_samples = 0u64;

    let map = if !settings.adaptive {
        adaptive::uniform_map(w, h, settings.spp, floor)
    } else if let Some(stats) = previous {
        adaptive::estimate_map(stats, settings.spp, &settings.adaptive_config)
    } else {
        let pilot_map = adaptive::uniform_map(w, h, settings.spp / 4.0, floor);
        let counts = adaptive::dither_quantize(&pilot_map, settings.dither, seed ^ 0x5049_4c4f_54, frame);
        let pilot = trace_map(scene, cfg, seed, frame, &counts, PILOT_SAMPLE_BASE);
        let mut stats = PixelStats::new(w, h);
        for (i, p) in pilot.iter().enumerate() {
            delta_samples += p.samples.len() as u64;
            p.samples.iter().for_each(|s| stats.record(i, *s));
        }
        adaptive::estimate_map(&stats, settings.spp * 0.75, &settings.adaptive_config)
    };

    let counts = adaptive::dither_quantize(&map, settings.dither, seed, frame);
    let traced = trace_map(scene, cfg, seed, frame, &counts, 0);

    let mut stats = PixelStats::new(w, h);
    let mut plus = Vec::with_capacity(w * h);
    let mut minus = Vec::with_capacity(w * h);
    let mut delta_variance = Vec::with_capacity(w * h);
    for (i, p) in traced.iter().enumerate() {
        let (c, s) = (counts[i], map.values[i]);
        delta_samples += c as u64;
        plus.push(adaptive::boosted_mean(p.plus, c, s));
        minus.push(adaptive::boosted_mean(p.minus, c, s));
        let mut acc = Accum::default();
        for sample in &p.samples {
            stats.record(i, *sample);
            acc.add(Rgb::splat(sample.luminance()));
        }
        delta_variance.push(acc.variance().r);
    }

    if settings.accumulate_stats {
        if let Some(prev) = previous {
            stats.merge(prev);
        }
    }

    let gbuffer = build_mask(scene);
    let buffers = FrameBuffers {
        static_image: static_image.clone(),
        plus: Image::from_pixels(w, h, plus),
        minus: Image::from_pixels(w, h, minus),
        mask: gbuffer.mask.clone(),
        spp: counts,
    };
    let image = compose_hybrid(&buffers, settings.masked)?;
    Ok(HybridFrame { buffers, gbuffer, image, sample_map: map, stats, delta_variance, delta_samples })
}
