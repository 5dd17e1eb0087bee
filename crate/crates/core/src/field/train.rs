//! Offline training of the learned field on random surface samples.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::Network;
use super::oracle::OracleField;
use super::FieldQuery;
use crate::color::Rgb;
use crate::error::{Error, Result};
use crate::integrator::bsdf::cosine_hemisphere;
use crate::rng::{RandomStream, StreamKey};
use crate::scene::Scene;

/// Frame index reserved for dataset streams so they never alias render streams.
const DATASET_FRAME: u32 = u32::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSample {
    pub query: FieldQuery,
    pub target: Rgb,
    pub weight: f64,
}

fn sample_key(i: u64, sub: u32) -> StreamKey {
    StreamKey::new(i as u32, (i >> 32) as u32, DATASET_FRAME, sub)
}

/// `count` area-weighted points on the front side of static surfaces, each
/// with a cosine-weighted outgoing direction and a one-sample static radiance
/// target.
pub fn generate_dataset(scene: &Scene, count: usize, seed: u64) -> Vec<TrainSample> {
    let prims: Vec<usize> = (0..scene.primitives().len()).filter(|&i| !scene.primitives()[i].dynamic).collect();
    if prims.is_empty() {
        return Vec::new();
    }
    let mut cdf = Vec::with_capacity(prims.len());
    let mut acc = 0.0;
    for &i in &prims {
        acc += scene.primitives()[i].area();
        cdf.push(acc);
    }
    let oracle = OracleField::new(1, seed);
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = RandomStream::new(seed, sample_key(i, 0));
            let pick = s.next_1d() * acc;
            let k = cdf.partition_point(|&c| c <= pick).min(prims.len() - 1);
            let (u0, u1) = s.next_2d();
            let (position, normal) = scene.primitives()[prims[k]].sample_point(u0, u1);
            let (v0, v1) = s.next_2d();
            let direction = cosine_hemisphere(normal, v0, v1);
            let query = FieldQuery { position, direction, normal };
            let target = oracle.query(scene, &query, sample_key(i, 1));
            TrainSample { query, target, weight: 1.0 }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Learning rate multiplier applied after every epoch.
    pub lr_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub loss_epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 4096,
            learning_rate: 5e-3,
            lr_decay: 0.75,
            beta1: 0.9,
            beta2: 0.99,
            adam_epsilon: 1e-10,
            loss_epsilon: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub initial_loss: f64,
    /// Mean batch loss of every epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(self.initial_loss)
    }
}

/// Loss over (at most the first 16384) samples without updating anything.
pub fn evaluate_loss(net: &Network<f32>, data: &[TrainSample], eps: f64) -> f64 {
    let n = data.len().min(16384);
    let mut total = 0.0;
    for chunk in data[..n].chunks(4096) {
        let (q, t, w) = unzip(chunk.iter());
        total += net.relative_loss(&q, &t, &w, eps, None) * chunk.len() as f64;
    }
    total / n as f64
}

fn unzip<'a>(it: impl Iterator<Item = &'a TrainSample>) -> (Vec<FieldQuery>, Vec<Rgb>, Vec<f64>) {
    let mut q = Vec::new();
    let mut t = Vec::new();
    let mut w = Vec::new();
    for s in it {
        q.push(s.query);
        t.push(s.target);
        w.push(s.weight);
    }
    (q, t, w)
}

struct Adam {
    m: Vec<f32>,
    v: Vec<f32>,
    t: i32,
}

impl Adam {
    fn step(&mut self, params: &mut [f32], grad: &[f32], lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1 as f32, cfg.beta2 as f32);
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let step = (lr * c2.sqrt() / c1) as f32;
        let eps = cfg.adam_epsilon as f32;
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            params[i] -= step * self.m[i] / (self.v[i].sqrt() + eps);
        }
    }
}

/// Adam on the relative loss with per-epoch exponential learning-rate decay.
/// Aborts when the epoch loss stays above ten times the initial loss for
/// three consecutive epochs.
pub fn train(net: &mut Network<f32>, data: &[TrainSample], cfg: &TrainConfig) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::Config("training needs a non-empty dataset".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let initial_loss = evaluate_loss(net, data, cfg.loss_epsilon);
    let n = net.param_count();
    let mut adam = Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 };
    let mut grad = vec![0.0f32; n];
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = TrainReport { initial_loss, epoch_losses: Vec::with_capacity(cfg.epochs), steps: 0 };
    let mut bad_epochs = 0;
    let mut lr = cfg.learning_rate;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for idx in order.chunks(cfg.batch_size) {
            let (q, t, w) = unzip(idx.iter().map(|&i| &data[i]));
            grad.iter_mut().for_each(|g| *g = 0.0);
            sum += net.relative_loss(&q, &t, &w, cfg.loss_epsilon, Some(&mut grad));
            batches += 1;
            adam.step(&mut net.params, &grad, lr, cfg);
            report.steps += 1;
        }
        let loss = sum / batches as f64;
        report.epoch_losses.push(loss);
        log::info!("epoch {epoch}: loss {loss:.6e} lr {lr:.3e}");
        if !loss.is_finite() || loss > 10.0 * initial_loss {
            bad_epochs += 1;
            if bad_epochs >= 3 {
                return Err(Error::TrainingDiverged(format!(
                    "epoch {epoch}: loss {loss:.4e} exceeded 10x the initial loss {initial_loss:.4e} for 3 consecutive epochs"
                )));
            }
        } else {
            bad_epochs = 0;
        }
        lr *= cfg.lr_decay;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::network::FieldConfig;
    use crate::field::HashGridConfig;
    use crate::scene::builtin;

    fn tiny() -> FieldConfig {
        FieldConfig {
            grid: HashGridConfig { levels: 2, log2_table_size: 8, features: 2, base_resolution: 2, finest_resolution: 4 },
            hidden_layers: 2,
            width: 16,
        }
    }

    #[test]
    fn dataset_is_reproducible_and_on_static_surfaces() {
        let scene = Scene::from_desc(builtin::cornell_sphere(), None).unwrap();
        let a = generate_dataset(&scene, 500, 9);
        let b = generate_dataset(&scene, 500, 9);
        assert_eq!(a, b);
        let bounds = scene.static_bounds().padded(1e-9);
        for s in &a {
            assert!(bounds.contains(s.query.position));
            assert!(s.query.direction.dot(s.query.normal) >= 0.0);
            assert!(s.target.is_finite() && s.target.channels().iter().all(|c| *c >= 0.0));
            // Nothing but a static surface can be at the sample point.
            let probe = OracleField::probe_ray(&s.query);
            let hit = scene.intersect(&probe, crate::scene::IntersectMode::IncludeDynamic).unwrap();
            assert!(!hit.is_dynamic);
            assert!((hit.position - s.query.position).length() < 1e-6);
        }
    }

    #[test]
    fn furnace_targets_average_to_one() {
        let scene = Scene::from_desc(builtin::furnace(), None).unwrap();
        let data = generate_dataset(&scene, 40_000, 2);
        let mean: f64 = data.iter().map(|s| s.target.luminance()).sum::<f64>() / data.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let scene = Scene::from_desc(builtin::constant_box(), None).unwrap();
        let data = generate_dataset(&scene, 256, 1);
        let mut net = Network::<f32>::new(tiny(), scene.static_bounds(), 3).unwrap();
        let before = net.params.clone();
        let cfg = TrainConfig { epochs: 3, batch_size: 64, learning_rate: 0.0, ..Default::default() };
        let report = train(&mut net, &data, &cfg).unwrap();
        assert_eq!(net.params, before);
        for l in &report.epoch_losses {
            assert!((l - report.initial_loss).abs() <= 1e-5 * report.initial_loss);
        }
    }

    #[test]
    fn constant_radiance_is_learned() {
        let scene = Scene::from_desc(builtin::constant_box(), None).unwrap();
        let data = generate_dataset(&scene, 4096, 1);
        let mut net = Network::<f32>::new(tiny(), scene.static_bounds(), 3).unwrap();
        let cfg = TrainConfig { epochs: 40, batch_size: 64, learning_rate: 1e-2, lr_decay: 0.88, ..Default::default() };
        let report = train(&mut net, &data, &cfg).unwrap();
        assert!(report.final_loss() < 1e-4, "{report:?}");
        let p = net.predict(&data[..64].iter().map(|s| s.query).collect::<Vec<_>>());
        assert!(p.iter().all(|c| c.channels().iter().all(|v| (v - 1.0).abs() < 0.02)));
    }

    #[test]
    fn runaway_learning_rate_is_reported() {
        let scene = Scene::from_desc(builtin::cornell(), None).unwrap();
        let data = generate_dataset(&scene, 512, 1);
        let mut net = Network::<f32>::new(tiny(), scene.static_bounds(), 3).unwrap();
        let cfg = TrainConfig { epochs: 6, batch_size: 64, learning_rate: 1e6, lr_decay: 1.0, ..Default::default() };
        assert!(matches!(train(&mut net, &data, &cfg), Err(Error::TrainingDiverged(_))));
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let scene = Scene::from_desc(builtin::cornell(), None).unwrap();
        let mut net = Network::<f32>::new(tiny(), scene.static_bounds(), 3).unwrap();
        assert!(train(&mut net, &[], &TrainConfig::default()).is_err());
    }
}
