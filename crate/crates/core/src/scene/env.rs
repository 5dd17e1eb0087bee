//! Lat-long environment maps, the signed environment delta, and importance
//! sampling over texels.
//!
//! Parameterization (y up): `theta = acos(d.y)` selects the row (row 0 is the
//! zenith), `phi = atan2(d.z, d.x)` selects the column, `u = (phi + pi) / 2pi`.
//! Longitude wraps, latitude clamps.

use std::f64::consts::PI;

use crate::color::Rgb;
use crate::error::{Error, Result};
use crate::math::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentMap {
    pub width: usize,
    pub height: usize,
    /// Row-major, row 0 at the zenith.
    pub texels: Vec<Rgb>,
}

impl EnvironmentMap {
    pub fn new(width: usize, height: usize, texels: Vec<Rgb>) -> Result<Self> {
        if width == 0 || height == 0 || texels.len() != width * height {
            return Err(Error::Config(format!(
                "environment map {width}x{height} needs {} texels, got {}",
                width * height,
                texels.len()
            )));
        }
        if texels.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("environment map has non-finite texels".into()));
        }
        Ok(EnvironmentMap { width, height, texels })
    }

    pub fn constant(c: Rgb) -> Self {
        EnvironmentMap { width: 1, height: 1, texels: vec![c] }
    }

    pub fn is_black(&self) -> bool {
        self.texels.iter().all(|t| t.is_zero())
    }

    #[inline]
    pub fn texel_index(&self, dir: Vec3) -> usize {
        texel_index(self.width, self.height, dir)
    }

    #[inline]
    pub fn lookup(&self, dir: Vec3) -> Rgb {
        self.texels[self.texel_index(dir)]
    }

    pub fn texel_solid_angle(&self, index: usize) -> f64 {
        texel_solid_angle(self.width, self.height, index / self.width)
    }
}

#[inline]
pub(crate) fn texel_index(width: usize, height: usize, dir: Vec3) -> usize {
    let theta = dir.y.clamp(-1.0, 1.0).acos();
    let row = ((theta / PI) * height as f64) as usize;
    let row = row.min(height - 1);
    let phi = dir.z.atan2(dir.x);
    let u = (phi + PI) / (2.0 * PI);
    let col = ((u * width as f64) as usize) % width;
    row * width + col
}

/// Exact solid angle of a texel in the given row.
pub(crate) fn texel_solid_angle(width: usize, height: usize, row: usize) -> f64 {
    let t0 = PI * row as f64 / height as f64;
    let t1 = PI * (row + 1) as f64 / height as f64;
    (2.0 * PI / width as f64) * (t0.cos() - t1.cos())
}

fn direction(theta_cos: f64, phi: f64) -> Vec3 {
    let sin_theta = (1.0 - theta_cos * theta_cos).max(0.0).sqrt();
    Vec3::new(sin_theta * phi.cos(), theta_cos, sin_theta * phi.sin())
}

/// Piecewise-constant distribution over lat-long texels, uniform in solid
/// angle inside each texel.
#[derive(Debug, Clone, PartialEq)]
pub struct TexelDistribution {
    width: usize,
    height: usize,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TexelSample {
    pub direction: Vec3,
    pub texel: usize,
    /// Solid-angle density.
    pub pdf: f64,
}

impl TexelDistribution {
    /// Texel weights are `luminance * solid angle`. Returns `None` when every
    /// weight is zero.
    pub fn from_luminance(width: usize, height: usize, luminance: &[f64]) -> Option<Self> {
        let weights: Vec<f64> = luminance
            .iter()
            .enumerate()
            .map(|(i, &l)| l.max(0.0) * texel_solid_angle(width, height, i / width))
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        let pmf: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        // Pin the tail so the search below always terminates inside the table.
        let last_nonzero = pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        for c in cdf.iter_mut().skip(last_nonzero) {
            *c = 1.0;
        }
        Some(TexelDistribution { width, height, pmf, cdf })
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn sample(&self, u0: f64, u1: f64) -> TexelSample {
        // First texel whose cdf exceeds u0; zero-probability texels are never chosen.
        let mut texel = self.cdf.partition_point(|&c| c <= u0);
        texel = texel.min(self.cdf.len() - 1);
        while self.pmf[texel] == 0.0 && texel + 1 < self.pmf.len() {
            texel += 1;
        }
        let lo = if texel == 0 { 0.0 } else { self.cdf[texel - 1] };
        // Keep the direction off texel borders so it maps back to `texel`.
        const EDGE: f64 = 1e-7;
        let reuse = ((u0 - lo) / self.pmf[texel]).clamp(EDGE, 1.0 - EDGE);
        let u1 = u1.clamp(EDGE, 1.0 - EDGE);

        let row = texel / self.width;
        let col = texel % self.width;
        let phi = 2.0 * PI * (col as f64 + reuse) / self.width as f64 - PI;
        let c0 = (PI * row as f64 / self.height as f64).cos();
        let c1 = (PI * (row + 1) as f64 / self.height as f64).cos();
        let cos_theta = c0 + (c1 - c0) * u1;
        let direction = direction(cos_theta, phi);
        let pdf = self.pmf[texel] / texel_solid_angle(self.width, self.height, row);
        TexelSample { direction, texel, pdf }
    }

    pub fn pdf(&self, dir: Vec3) -> f64 {
        let texel = texel_index(self.width, self.height, dir);
        self.pmf[texel] / texel_solid_angle(self.width, self.height, texel / self.width)
    }
}

/// Texelwise `E_new - E_old` with a sampling table proportional to `|E_new - E_old|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedEnvDelta {
    pub width: usize,
    pub height: usize,
    pub texels: Vec<Rgb>,
    distribution: Option<TexelDistribution>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvDeltaSample {
    pub direction: Vec3,
    /// Signed texel radiance of the delta.
    pub value: Rgb,
    pub pdf: f64,
}

impl SignedEnvDelta {
    pub fn is_empty(&self) -> bool {
        self.distribution.is_none()
    }

    pub fn distribution(&self) -> Option<&TexelDistribution> {
        self.distribution.as_ref()
    }

    pub fn lookup(&self, dir: Vec3) -> Rgb {
        self.texels[texel_index(self.width, self.height, dir)]
    }

    /// Exact integral of the delta over the sphere.
    pub fn integral(&self) -> Rgb {
        let mut acc = Rgb::ZERO;
        for (i, t) in self.texels.iter().enumerate() {
            acc += *t * texel_solid_angle(self.width, self.height, i / self.width);
        }
        acc
    }

    /// Draws a direction with density proportional to `|E_delta|` luminance.
    ///
    /// Panics on an empty delta; callers branch on [`is_empty`](Self::is_empty).
    pub fn sample(&self, u0: f64, u1: f64) -> EnvDeltaSample {
        let dist = self
            .distribution
            .as_ref()
            .expect("sample_env_delta called on an empty delta");
        let s = dist.sample(u0, u1);
        EnvDeltaSample { direction: s.direction, value: self.texels[s.texel], pdf: s.pdf }
    }
}

pub fn build_env_delta(old: &EnvironmentMap, new: &EnvironmentMap) -> Result<SignedEnvDelta> {
    if old.width != new.width || old.height != new.height {
        return Err(Error::Config(format!(
            "environment delta needs equal resolutions, got {}x{} and {}x{}",
            old.width, old.height, new.width, new.height
        )));
    }
    let texels: Vec<Rgb> = old
        .texels
        .iter()
        .zip(&new.texels)
        .map(|(o, n)| *n - *o)
        .collect();
    let lum: Vec<f64> = texels.iter().map(|t| t.abs().luminance()).collect();
    let distribution = TexelDistribution::from_luminance(old.width, old.height, &lum);
    Ok(SignedEnvDelta { width: old.width, height: old.height, texels, distribution })
}
