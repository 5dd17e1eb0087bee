//! Equal-cost comparisons of path tracing and hybrid rendering against a
//! high-sample reference.
//!
//! Cost is counted in path traversals per pixel. A path-traced arm with cost
//! `c` takes `c` samples per pixel; a hybrid arm with cost `c` takes `c / 2`
//! delta samples per pixel because every delta sample traces two paths. The
//! static image is precomputed and not charged.
//!
//! Spec file (JSON):
//!
//! ```json
//! {
//!   "scene": "builtin:cornell-sphere",
//!   "width": 64, "height": 64,
//!   "reference_spp": 4096,
//!   "field": { "backend": "oracle", "samples": 4096 },
//!   "seeds": 10,
//!   "arms": [
//!     { "label": "pt", "integrator": "path-traced", "cost_spp": 2 },
//!     { "label": "hybrid", "integrator": "hybrid", "cost_spp": 2, "adaptive": true, "warmup_frames": 3 }
//!   ]
//! }
//! ```

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adaptive::{DitherMode, PixelStats};
use crate::compositor::{compute_metrics, MetricsReport};
use crate::error::{Error, Result};
use crate::field::FieldSource;
use crate::image::Image;
use crate::integrator::IntegratorConfig;
use crate::render::{render, render_hybrid, static_image, Estimator, HybridSettings};
use crate::scene::{resolve_scene_desc, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArmIntegrator {
    PathTraced,
    Hybrid,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    pub label: String,
    pub integrator: ArmIntegrator,
    /// Path traversals per pixel.
    pub cost_spp: f64,
    #[serde(default)]
    pub adaptive: bool,
    #[serde(default = "yes")]
    pub masked: bool,
    #[serde(default)]
    pub dither: Option<DitherMode>,
    /// Frames rendered before the measured one, feeding statistics forward.
    #[serde(default)]
    pub warmup_frames: u32,
}

impl ArmSpec {
    /// Samples per pixel of the arm's own estimator under the cost rule.
    pub fn spp(&self) -> f64 {
        match self.integrator {
            ArmIntegrator::PathTraced => self.cost_spp,
            ArmIntegrator::Hybrid => self.cost_spp / 2.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.cost_spp.is_finite() && self.cost_spp >= 0.0) {
            return Err(Error::Config(format!("arm '{}': cost must be finite and non-negative", self.label)));
        }
        if self.integrator == ArmIntegrator::PathTraced && (self.cost_spp < 1.0 || self.cost_spp.fract() != 0.0) {
            return Err(Error::Config(format!("arm '{}': path-traced cost must be a positive integer", self.label)));
        }
        Ok(())
    }
}

fn one() -> u32 {
    1
}

fn default_reference_seed() -> u64 {
    0x5eed_0f_4ef
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scene: String,
    #[serde(default)]
    pub width: Option<u32>,
    #[serde(default)]
    pub height: Option<u32>,
    pub reference_spp: u32,
    #[serde(default = "default_reference_seed")]
    pub reference_seed: u64,
    /// Defaults to a 4096-sample oracle.
    #[serde(default)]
    pub field: Option<FieldSource>,
    #[serde(default = "one")]
    pub seeds: u32,
    pub arms: Vec<ArmSpec>,
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmResult {
    pub label: String,
    pub integrator: ArmIntegrator,
    pub cost_spp: f64,
    pub spp: f64,
    pub seed: u64,
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub reference: Image,
    pub rows: Vec<ArmResult>,
}

pub const EXPERIMENT_COLUMNS: [&str; 10] =
    ["label", "integrator", "cost_spp", "spp", "seed", "mse", "rel_mse", "unmasked_mse", "masked_mse", "status"];

fn run_arm(scene: &Scene, arm: &ArmSpec, seed: u64, static_img: Option<&Image>, cfg: &IntegratorConfig) -> Result<Image> {
    match arm.integrator {
        ArmIntegrator::PathTraced => Ok(render(scene, Estimator::ReferenceDynamic, arm.spp() as u32, seed, 0, cfg).mean_image()),
        ArmIntegrator::Hybrid => {
            let st = static_img.ok_or_else(|| Error::Config("hybrid arm needs a static field".into()))?;
            let mut prev: Option<PixelStats> = None;
            let mut image = None;
            for frame in 0..=arm.warmup_frames {
                let settings = HybridSettings {
                    spp: arm.spp(),
                    adaptive: arm.adaptive,
                    masked: arm.masked,
                    dither: arm.dither.unwrap_or(HybridSettings::default().dither),
                    seed,
                    frame,
                    ..Default::default()
                };
                let f = render_hybrid(scene, st, &settings, cfg, prev.as_ref())?;
                prev = Some(f.stats);
                image = Some(f.image);
            }
            Ok(image.expect("at least one frame"))
        }
    }
}

/// Renders the reference once, then every arm for every seed. An arm that
/// fails is reported in its row and the run continues.
pub fn run_experiment(spec: &ExperimentSpec, scene_dir: Option<&Path>) -> Result<ExperimentReport> {
    for arm in &spec.arms {
        arm.validate()?;
    }
    let (desc, base) = resolve_scene_desc(&spec.scene, scene_dir)?;
    let mut scene = Scene::from_desc(desc, base.as_deref())?;
    let (w, h) = (spec.width.unwrap_or(scene.camera.width), spec.height.unwrap_or(scene.camera.height));
    scene = scene.with_resolution(w, h);
    scene.camera.validate()?;
    let cfg = IntegratorConfig::default();

    let reference = render(&scene, Estimator::ReferenceDynamic, spec.reference_spp, spec.reference_seed, 0, &cfg).mean_image();
    let mask = crate::compositor::build_mask(&scene).mask;

    let needs_field = spec.arms.iter().any(|a| a.integrator == ArmIntegrator::Hybrid);
    let static_img = if needs_field {
        let source = spec.field.clone().unwrap_or(FieldSource::Oracle { samples: 4096, seed: 0 });
        match source.open() {
            Ok(field) => Ok(static_image(&scene, &field, 0)),
            Err(e) => Err(e.to_string()),
        }
    } else {
        Err(String::new())
    };

    let mut rows = Vec::new();
    for arm in &spec.arms {
        for seed in 0..spec.seeds as u64 {
            let result = match (&static_img, arm.integrator) {
                (Err(e), ArmIntegrator::Hybrid) => Err(Error::FieldFile(e.clone())),
                (st, _) => run_arm(&scene, arm, seed, st.as_ref().ok(), &cfg),
            };
            let (metrics, error) = match result.and_then(|img| compute_metrics(&img, &reference, Some(&mask))) {
                Ok(m) => (Some(m), None),
                Err(e) => {
                    log::error!("arm '{}' seed {seed} failed: {e}", arm.label);
                    (None, Some(e.to_string()))
                }
            };
            rows.push(ArmResult {
                label: arm.label.clone(),
                integrator: arm.integrator,
                cost_spp: arm.cost_spp,
                spp: arm.spp(),
                seed,
                metrics,
                error,
            });
        }
    }
    Ok(ExperimentReport { reference, rows })
}

pub fn write_experiment_csv<W: Write>(out: W, rows: &[ArmResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EXPERIMENT_COLUMNS)?;
    for r in rows {
        let integrator = match r.integrator {
            ArmIntegrator::PathTraced => "path-traced",
            ArmIntegrator::Hybrid => "hybrid",
        };
        let (mse, rel, un, ma, status) = match (&r.metrics, &r.error) {
            (Some(m), _) => (
                format!("{:e}", m.mse),
                format!("{:e}", m.rel_mse),
                format!("{:e}", m.unmasked_region.mse),
                format!("{:e}", m.masked_region.mse),
                "ok".to_string(),
            ),
            (None, e) => (String::new(), String::new(), String::new(), String::new(), format!("error: {}", e.clone().unwrap_or_default())),
        };
        w.write_record([
            r.label.clone(),
            integrator.to_string(),
            r.cost_spp.to_string(),
            r.spp.to_string(),
            r.seed.to_string(),
            mse,
            rel,
            un,
            ma,
            status,
        ])?;
    }
    w.flush()?;
    Ok(())
}
