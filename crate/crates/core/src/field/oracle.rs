//! Path-traced reference for the static field.

use rayon::prelude::*;

use super::FieldQuery;
use crate::color::Rgb;
use crate::integrator::{trace_reference, IntegratorConfig};
use crate::math::Ray;
use crate::rng::{mix64, RandomStream, SceneVariant, StreamKey};
use crate::scene::Scene;

/// Distance from the surface the probe ray starts at. Small enough that
/// probes near a corner start inside the enclosure.
pub const PROBE_OFFSET: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct OracleField {
    pub samples: u32,
    pub seed: u64,
    pub integrator: IntegratorConfig,
}

impl OracleField {
    pub fn new(samples: u32, seed: u64) -> Self {
        OracleField { samples: samples.max(1), seed, integrator: IntegratorConfig::default() }
    }

    /// Ray that reaches `q.position` travelling against `q.direction`.
    pub fn probe_ray(q: &FieldQuery) -> Ray {
        Ray::new(q.position + q.direction * PROBE_OFFSET, -q.direction)
    }

    /// Stream of the `k`-th sample; sample 0 uses `(seed, key)` unchanged.
    pub fn stream(&self, key: StreamKey, k: u32) -> RandomStream {
        let seed = if k == 0 { self.seed } else { self.seed ^ mix64(k as u64) };
        RandomStream::new(seed, key)
    }

    pub fn query(&self, scene: &Scene, q: &FieldQuery, key: StreamKey) -> Rgb {
        let ray = Self::probe_ray(q);
        let mut sum = Rgb::ZERO;
        for k in 0..self.samples {
            sum += trace_reference(scene, &ray, &mut self.stream(key, k), SceneVariant::Static, &self.integrator);
        }
        sum / self.samples as f64
    }

    pub fn query_batch(&self, scene: &Scene, queries: &[FieldQuery], keys: &[StreamKey]) -> Vec<Rgb> {
        assert_eq!(queries.len(), keys.len());
        queries.par_iter().zip(keys.par_iter()).map(|(q, k)| self.query(scene, q, *k)).collect()
    }
}
