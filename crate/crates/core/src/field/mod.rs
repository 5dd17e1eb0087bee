//! Precomputed static-scene radiance: outgoing radiance at a surface point
//! toward a viewing direction. Two backends, a path-traced oracle and a
//! trained hash grid + MLP.

pub mod grid;
pub mod mlp;
pub mod network;
pub mod oracle;
pub mod train;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::color::Rgb;
use crate::error::Result;
use crate::math::{Ray, Vec3};
use crate::rng::StreamKey;
use crate::scene::{IntersectMode, LightStateId, Scene};

pub use grid::{HashGrid, HashGridConfig};
pub use network::{FieldConfig, Network};
pub use oracle::OracleField;
pub use train::{generate_dataset, train, TrainConfig, TrainReport, TrainSample};

/// A point on a static surface seen from `direction` (pointing away from the
/// surface, toward the viewer).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldQuery {
    pub position: Vec3,
    pub direction: Vec3,
    pub normal: Vec3,
}

impl FieldQuery {
    /// Query at the first static hit of `ray`, normal facing the viewer.
    /// `None` on a miss.
    pub fn from_ray(scene: &Scene, ray: &Ray) -> Option<FieldQuery> {
        let hit = scene.intersect(ray, IntersectMode::SkipDynamic)?;
        let direction = -ray.dir;
        let normal = if hit.normal.dot(direction) < 0.0 { -hit.normal } else { hit.normal };
        Some(FieldQuery { position: hit.position, direction, normal })
    }
}

/// Where a static field comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "kebab-case")]
pub enum FieldSource {
    Oracle {
        samples: u32,
        #[serde(default)]
        seed: u64,
    },
    Learned {
        path: PathBuf,
    },
}

impl FieldSource {
    pub fn open(&self) -> Result<StaticField> {
        Ok(match self {
            FieldSource::Oracle { samples, seed } => StaticField::Oracle(OracleField::new(*samples, *seed)),
            FieldSource::Learned { path } => StaticField::Learned(Network::<f32>::load(path)?),
        })
    }
}

/// The static radiance seen along a camera ray: a field query at the first
/// static hit, or the static environment on a miss.
pub enum StaticField {
    Oracle(OracleField),
    Learned(Network<f32>),
}

impl StaticField {
    /// One value per ray. `keys` seed the oracle backend and are ignored by
    /// the learned one.
    pub fn eval_rays(&self, scene: &Scene, rays: &[Ray], keys: &[StreamKey]) -> Vec<Rgb> {
        let queries: Vec<Option<FieldQuery>> = rays.iter().map(|r| FieldQuery::from_ray(scene, r)).collect();
        let hits: Vec<FieldQuery> = queries.iter().flatten().copied().collect();
        let values = match self {
            StaticField::Oracle(o) => {
                let hit_keys: Vec<StreamKey> =
                    queries.iter().zip(keys).filter(|(q, _)| q.is_some()).map(|(_, k)| *k).collect();
                o.query_batch(scene, &hits, &hit_keys)
            }
            StaticField::Learned(net) => {
                let mut out = Vec::with_capacity(hits.len());
                for chunk in hits.chunks(4096) {
                    out.extend(net.predict(chunk));
                }
                out
            }
        };
        let mut values = values.into_iter();
        queries
            .iter()
            .zip(rays)
            .map(|(q, r)| match q {
                Some(_) => values.next().expect("one value per hit"),
                None => scene.env_radiance(r.dir, LightStateId::Static),
            })
            .collect()
    }
}
