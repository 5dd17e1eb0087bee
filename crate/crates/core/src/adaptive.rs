//! Per-pixel sample allocation for the delta image.
//!
//! Pipeline: raw allocation proportional to `sigma + |mean|` of the previous
//! frame's delta luminance, 5x5 Gaussian blur, renormalization to mean `S`,
//! an optional blend with the uniform map, a per-pixel floor of one sample
//! per 2x2 block (`1/4` per pixel) with the remainder renormalized over
//! unfloored pixels, then dithered quantization.
//! Samples of pixels with fractional allocation below one are boosted by
//! `1 / s` so the estimate stays unbiased.

use serde::{Deserialize, Serialize};

use crate::color::Rgb;
use crate::rng::{RandomStream, StreamKey};

/// Sample index reserved for dither streams so they never collide with path streams.
const DITHER_SAMPLE: u32 = u32::MAX;

/// Running per-pixel statistics of delta samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelStats {
    pub width: usize,
    pub height: usize,
    count: Vec<u32>,
    sum: Vec<Rgb>,
    sum_lum: Vec<f64>,
    sum_lum2: Vec<f64>,
    sum_abs_lum: Vec<f64>,
}

impl PixelStats {
    pub fn new(width: usize, height: usize) -> Self {
        let n = width * height;
        PixelStats {
            width,
            height,
            count: vec![0; n],
            sum: vec![Rgb::ZERO; n],
            sum_lum: vec![0.0; n],
            sum_lum2: vec![0.0; n],
            sum_abs_lum: vec![0.0; n],
        }
    }

    pub fn record(&mut self, pixel: usize, sample: Rgb) {
        let l = sample.luminance();
        self.count[pixel] += 1;
        self.sum[pixel] += sample;
        self.sum_lum[pixel] += l;
        self.sum_lum2[pixel] += l * l;
        self.sum_abs_lum[pixel] += l.abs();
    }

    /// Adds every sample recorded in `other` (same resolution).
    pub fn merge(&mut self, other: &PixelStats) {
        assert_eq!((self.width, self.height), (other.width, other.height), "stats resolution mismatch");
        for i in 0..self.count.len() {
            self.count[i] += other.count[i];
            self.sum[i] += other.sum[i];
            self.sum_lum[i] += other.sum_lum[i];
            self.sum_lum2[i] += other.sum_lum2[i];
            self.sum_abs_lum[i] += other.sum_abs_lum[i];
        }
    }

    pub fn count(&self, pixel: usize) -> u32 {
        self.count[pixel]
    }

    pub fn mean(&self, pixel: usize) -> Rgb {
        match self.count[pixel] {
            0 => Rgb::ZERO,
            n => self.sum[pixel] / n as f64,
        }
    }

    /// Population standard deviation of the luminance.
    pub fn sigma(&self, pixel: usize) -> f64 {
        match self.count[pixel] {
            0 => 0.0,
            n => {
                let n = n as f64;
                let m = self.sum_lum[pixel] / n;
                (self.sum_lum2[pixel] / n - m * m).max(0.0).sqrt()
            }
        }
    }

    /// Mean absolute luminance.
    pub fn mean_abs(&self, pixel: usize) -> f64 {
        match self.count[pixel] {
            0 => 0.0,
            n => self.sum_abs_lum[pixel] / n as f64,
        }
    }

    /// `sigma + |L|` per pixel. Pixels without samples take the average of the
    /// sampled pixels in their 2x2 block, or zero.
    pub fn raw_weights(&self) -> Vec<f64> {
        let n = self.width * self.height;
        let mut raw = vec![0.0; n];
        for (i, r) in raw.iter_mut().enumerate() {
            if self.count[i] > 0 {
                *r = self.sigma(i) + self.mean_abs(i);
            }
        }
        let mut filled = raw.clone();
        for i in 0..n {
            if self.count[i] > 0 {
                continue;
            }
            let (sum, k) = block_members(self.width, self.height, i)
                .filter(|&j| self.count[j] > 0)
                .fold((0.0, 0), |(s, k), j| (s + raw[j], k + 1));
            filled[i] = if k > 0 { sum / k as f64 } else { 0.0 };
        }
        filled
    }
}

/// Pixel indices of the 2x2 block containing pixel `i`, in row-major order.
pub fn block_members(width: usize, height: usize, i: usize) -> impl Iterator<Item = usize> {
    let (bx, by) = ((i % width) / 2 * 2, (i / width) / 2 * 2);
    (by..(by + 2).min(height)).flat_map(move |y| (bx..(bx + 2).min(width)).map(move |x| y * width + x))
}

fn block_size(width: usize, height: usize, i: usize) -> usize {
    let (x, y) = (i % width, i / width);
    let w = if x / 2 * 2 + 1 < width { 2 } else { 1 };
    let h = if y / 2 * 2 + 1 < height { 2 } else { 1 };
    w * h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    /// Half-width of the Gaussian kernel (2 gives a 5x5 kernel).
    pub blur_radius: usize,
    pub blur_sigma: f64,
    /// Share of the budget spread uniformly before the floor; the rest
    /// follows the statistics. Zero gives the pure proportional map.
    pub uniform_fraction: f64,
    /// Apply the one-sample-per-2x2-block floor.
    pub floor: bool,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig { blur_radius: 2, blur_sigma: 1.0, uniform_fraction: 0.5, floor: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleMap {
    pub width: usize,
    pub height: usize,
    /// Target mean samples per pixel.
    pub target: f64,
    pub values: Vec<f64>,
}

impl SampleMap {
    pub fn uniform(width: usize, height: usize, target: f64) -> Self {
        SampleMap { width, height, target, values: vec![target; width * height] }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// `s_i = S * w_i / mean(w)`. All-zero weights give the uniform map.
pub fn allocate(weights: &[f64], target: f64) -> Vec<f64> {
    let mean = weights.iter().sum::<f64>() / weights.len() as f64;
    if !(mean > 0.0) || !mean.is_finite() {
        return vec![target; weights.len()];
    }
    weights.iter().map(|w| target * w / mean).collect()
}

/// Separable Gaussian blur; taps outside the image are dropped and the
/// remaining weights renormalized.
pub fn gaussian_blur(values: &[f64], width: usize, height: usize, radius: usize, sigma: f64) -> Vec<f64> {
    let kernel: Vec<f64> = (0..=2 * radius)
        .map(|k| {
            let d = k as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut dst = vec![0.0; src.len()];
        for y in 0..height {
            for x in 0..width {
                let (mut acc, mut wsum) = (0.0, 0.0);
                for (k, w) in kernel.iter().enumerate() {
                    let off = k as isize - radius as isize;
                    let (sx, sy) = if horizontal { (x as isize + off, y as isize) } else { (x as isize, y as isize + off) };
                    if sx < 0 || sy < 0 || sx >= width as isize || sy >= height as isize {
                        continue;
                    }
                    acc += w * src[sy as usize * width + sx as usize];
                    wsum += w;
                }
                dst[y * width + x] = acc / wsum;
            }
        }
        dst
    };
    let h = pass(values, true);
    pass(&h, false)
}

/// Raises every pixel to at least one sample per 2x2 block and rescales the
/// unfloored pixels so the mean stays `target`. When the floor alone exceeds
/// the budget the floor wins.
pub fn apply_floor(values: &[f64], width: usize, height: usize, target: f64) -> Vec<f64> {
    let n = values.len();
    let floors: Vec<f64> = (0..n).map(|i| 1.0 / block_size(width, height, i) as f64).collect();
    let budget = target * n as f64;
    let mut floored = vec![false; n];
    loop {
        let fixed: f64 = (0..n).filter(|&i| floored[i]).map(|i| floors[i]).sum();
        let free: f64 = (0..n).filter(|&i| !floored[i]).map(|i| values[i]).sum();
        let remaining = budget - fixed;
        if remaining <= 0.0 {
            return floors;
        }
        if !(free > 0.0) {
            // Nothing left to scale: spread the surplus evenly over the floor.
            let extra = (budget - floors.iter().sum::<f64>()).max(0.0) / n as f64;
            return floors.iter().map(|f| f + extra).collect();
        }
        let scale = remaining / free;
        let mut changed = false;
        for i in 0..n {
            if !floored[i] && values[i] * scale < floors[i] {
                floored[i] = true;
                changed = true;
            }
        }
        if !changed {
            return (0..n).map(|i| if floored[i] { floors[i] } else { values[i] * scale }).collect();
        }
    }
}

fn renormalize(values: &mut [f64], target: f64) {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if mean > 0.0 {
        values.iter_mut().for_each(|v| *v *= target / mean);
    } else {
        values.iter_mut().for_each(|v| *v = target);
    }
}

/// Full map estimation from previous-frame statistics.
pub fn estimate_map(stats: &PixelStats, target: f64, cfg: &AdaptiveConfig) -> SampleMap {
    let (w, h) = (stats.width, stats.height);
    let raw = allocate(&stats.raw_weights(), target);
    let mut values = if cfg.blur_radius > 0 { gaussian_blur(&raw, w, h, cfg.blur_radius, cfg.blur_sigma) } else { raw };
    renormalize(&mut values, target);
    let a = cfg.uniform_fraction.clamp(0.0, 1.0);
    if a > 0.0 {
        values.iter_mut().for_each(|v| *v = a * target + (1.0 - a) * *v);
    }
    if cfg.floor {
        values = apply_floor(&values, w, h, target);
    }
    SampleMap { width: w, height: h, target, values }
}

/// Uniform map with the floor applied (matters only for `target < 1/4`).
pub fn uniform_map(width: usize, height: usize, target: f64, floor: bool) -> SampleMap {
    let mut map = SampleMap::uniform(width, height, target);
    if floor {
        map.values = apply_floor(&map.values, width, height, target);
    }
    map
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DitherMode {
    /// `round(s + U)` with an independent `U` in `[-1/2, 1/2)` per pixel.
    Independent,
    /// One shared uniform per 2x2 block, placed systematically along the
    /// block's cumulative allocation. Per-pixel marginals equal those of
    /// `Independent`; a block whose allocation sums to at least one always
    /// receives a sample.
    BlockStratified,
}

/// `round(s + U)` for `u = U + 1/2` in `[0, 1)`.
#[inline]
pub fn dither_one(s: f64, u: f64) -> u32 {
    let base = s.floor();
    // Compare against the fractional part instead of rounding `s + u`, which
    // could round an integer `s` up for `u` just below one.
    let up = u >= 1.0 - (s - base);
    (base.max(0.0) as u32) + up as u32
}

pub fn dither_quantize(map: &SampleMap, mode: DitherMode, seed: u64, frame: u32) -> Vec<u32> {
    let (w, h) = (map.width, map.height);
    let unit = |x: usize, y: usize| RandomStream::new(seed, StreamKey::new(x as u32, y as u32, frame, DITHER_SAMPLE)).unit_at(0);
    let mut counts = vec![0u32; w * h];
    match mode {
        DitherMode::Independent => {
            for y in 0..h {
                for x in 0..w {
                    counts[y * w + x] = dither_one(map.values[y * w + x], unit(x, y));
                }
            }
        }
        DitherMode::BlockStratified => {
            for by in (0..h).step_by(2) {
                for bx in (0..w).step_by(2) {
                    let u = unit(bx / 2, by / 2);
                    let members: Vec<usize> = block_members(w, h, by * w + bx).collect();
                    let values: Vec<f64> = members.iter().map(|&i| map.values[i]).collect();
                    for (i, c) in members.iter().zip(stratified_counts(&values, u)) {
                        counts[*i] = c;
                    }
                }
            }
        }
    }
    counts
}

/// Number of points of the grid `u + Z` inside each cumulative interval
/// `[C_{k-1}, C_k)`.
pub fn stratified_counts(values: &[f64], u: f64) -> Vec<u32> {
    let mut prev = 0.0f64;
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let next = prev + v;
        out.push(((next - u).ceil() - (prev - u).ceil()).max(0.0) as u32);
        prev = next;
    }
    out
}

/// Multiplier that compensates pixels whose allocation is below one sample.
#[inline]
pub fn boost_factor(s: f64) -> f64 {
    assert!(s > 0.0, "boost requires a positive allocation, got {s}");
    1.0 / s.min(1.0)
}

#[inline]
pub fn boost(sample: Rgb, s: f64) -> Rgb {
    sample * boost_factor(s)
}

/// Per-pixel estimate from `count` samples summing to `sum` under allocation `s`.
#[inline]
pub fn boosted_mean(sum: Rgb, count: u32, s: f64) -> Rgb {
    if count == 0 {
        Rgb::ZERO
    } else {
        boost(sum / count as f64, s)
    }
}
