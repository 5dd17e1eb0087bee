//! Path integrators for the two scene variants and their signed difference.
//!
//! One traversal routine serves every integrator. The dynamic variant
//! intersects static and dynamic primitives under the dynamic light state; the
//! static variant treats dynamic primitives as fully transparent and uses the
//! static light state. Both variants run the same nearest-hit logic: the
//! static nearest hit is found first, then the dynamic nearest hit strictly in
//! front of it. A dynamic hit is the dynamic variant's next vertex and the
//! static variant's crossing, so the flag `h` flips on the same segment in both.
//!
//! Every contribution (emission found by a BSDF ray, or a next-event
//! connection) is tagged. It is *affected* when `h` is already set, when its
//! shadow ray is blocked by or passes through dynamic geometry, or when the
//! emitter differs between light states (or is itself dynamic). Unaffected
//! contributions are computed from identical inputs in both variants and are
//! bitwise equal, so the additive estimate is the affected sum of the dynamic
//! variant and the subtractive estimate is the affected sum of the static one.
//!
//! Random dimensions are consumed in a fixed budget of [`DIMS_PER_BOUNCE`] per
//! bounce: BSDF (2), Russian roulette (1), light selection (1), light sample (2).

pub mod bsdf;

use crate::color::Rgb;
use crate::math::Ray;
use crate::rng::{RandomStream, SceneVariant};
use crate::scene::{LightStateId, MaterialKind, Scene};

use bsdf::{lambert, sample_bsdf};

pub const DIMS_PER_BOUNCE: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Hard cap on path segments.
    pub max_depth: u32,
    /// First bounce at which Russian roulette may terminate a path.
    pub rr_start: u32,
    /// `t_min` of secondary and shadow rays.
    pub ray_epsilon: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { max_depth: 32, rr_start: 3, ray_epsilon: crate::scene::RAY_EPSILON }
    }
}

/// Path-domain tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathClass {
    /// Never touches dynamic geometry or changed lights.
    Unaffected,
    /// Interacts with dynamic content in the dynamic scene.
    Additive,
    /// Would have crossed dynamic content, traced in the static scene.
    Subtractive,
}

/// Result of one traversal with its contributions split by path domain.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Traversal {
    pub unaffected: Rgb,
    pub affected: Rgb,
    pub unaffected_events: u32,
    pub affected_events: u32,
    /// The main path hit (dynamic variant) or crossed (static variant) dynamic geometry.
    pub crossed_dynamic: bool,
    /// Non-finite radiance was produced and the sample was zeroed.
    pub rejected: bool,
}

impl Traversal {
    #[inline]
    pub fn total(&self) -> Rgb {
        self.unaffected + self.affected
    }

    #[inline]
    fn add(&mut self, value: Rgb, affected: bool) {
        if affected {
            self.affected += value;
            self.affected_events += 1;
        } else {
            self.unaffected += value;
            self.unaffected_events += 1;
        }
    }

    /// Class of the completed path in `variant`'s domain.
    pub fn class(&self, variant: SceneVariant) -> PathClass {
        match (self.affected_events > 0, variant) {
            (false, _) => PathClass::Unaffected,
            (true, SceneVariant::Dynamic) => PathClass::Additive,
            (true, SceneVariant::Static) => PathClass::Subtractive,
        }
    }
}

#[inline]
fn balance(a: f64, b: f64) -> f64 {
    a / (a + b)
}

/// Traces one path from `ray` in `variant`.
pub fn trace_path(
    scene: &Scene,
    ray: &Ray,
    stream: &mut RandomStream,
    variant: SceneVariant,
    cfg: &IntegratorConfig,
) -> Traversal {
    let dynamic = variant == SceneVariant::Dynamic;
    let state = if dynamic { LightStateId::Dynamic } else { LightStateId::Static };
    let base_dim = stream.dimension();
    let light_count = scene.lights().len();
    let sel_pdf = scene.light_selection_pdf();

    let mut out = Traversal::default();
    let mut ray = *ray;
    let mut throughput = Rgb::ONE;
    let mut h = false;
    // Density of the BSDF sample that produced `ray`; `None` after the camera
    // or a specular bounce, where no light sample could have produced it.
    let mut prev_pdf: Option<f64> = None;
    let mut prev_pos = ray.origin;

    for bounce in 0..cfg.max_depth {
        stream.skip_to(base_dim + bounce * DIMS_PER_BOUNCE);
        let split = scene.intersect_split(&ray);
        h |= split.crossed_dynamic();
        let hit = if dynamic { split.nearest() } else { split.static_hit };

        let Some(hit) = hit else {
            let le = scene.env_radiance(ray.dir, state);
            if !le.is_zero() {
                let w = match prev_pdf {
                    Some(pb) => balance(pb, scene.env_light_pdf(ray.dir)),
                    None => 1.0,
                };
                out.add(throughput * le * w, h || scene.env_changed(ray.dir));
            }
            break;
        };

        let le = scene.emission_at(&hit, ray.dir, state);
        if !le.is_zero() {
            let w = match prev_pdf {
                Some(pb) => balance(pb, scene.area_light_pdf(prev_pos, &hit, ray.dir)),
                None => 1.0,
            };
            let affected = h || hit.is_dynamic || scene.emission_changed(hit.primitive_id);
            out.add(throughput * le * w, affected);
        }

        let u_bsdf = stream.next_2d();
        let u_rr = stream.next_1d();
        let u_sel = stream.next_1d();
        let u_light = stream.next_2d();

        let material = scene.material(hit.material_id);
        let flip = hit.geometric_normal.dot(ray.dir) > 0.0;
        let (n, ng) = if flip { (-hit.normal, -hit.geometric_normal) } else { (hit.normal, hit.geometric_normal) };
        let p = hit.position;

        if material.kind == MaterialKind::Lambertian && light_count > 0 && !material.albedo.is_zero() {
            let index = ((u_sel * light_count as f64) as usize).min(light_count - 1);
            if let Some(ls) = scene.sample_light(index, p, state, dynamic, u_light.0, u_light.1) {
                let cos = n.dot(ls.direction);
                if cos > 0.0 && ng.dot(ls.direction) > 0.0 && !ls.radiance.is_zero() {
                    let shadow = Ray::new(p, ls.direction).with_t_min(cfg.ray_epsilon);
                    let t_max = if ls.distance.is_finite() { ls.distance - cfg.ray_epsilon } else { f64::INFINITY };
                    let blockers = scene.blockers(&shadow, t_max);
                    if !blockers.by_static {
                        let affected = h || blockers.by_dynamic || ls.changed || ls.on_dynamic;
                        if dynamic && blockers.by_dynamic {
                            // Occluded in the dynamic scene: a zero-valued affected event.
                            out.add(Rgb::ZERO, true);
                        } else {
                            let pl = sel_pdf * ls.pdf;
                            let w = if ls.is_delta { 1.0 } else { balance(pl, cos * std::f64::consts::FRAC_1_PI) };
                            let f = lambert(material.albedo);
                            out.add(throughput * f * ls.radiance * (cos * w / pl), affected);
                        }
                    }
                }
            }
        }

        let Some(bs) = sample_bsdf(material, n, ray.dir, u_bsdf) else { break };
        if bs.direction.dot(ng) <= 0.0 {
            break;
        }
        throughput = throughput * bs.weight;
        if throughput.is_zero() {
            break;
        }
        if bounce >= cfg.rr_start {
            let q = throughput.max_component().min(1.0);
            if u_rr >= q {
                break;
            }
            throughput = throughput / q;
        }
        prev_pdf = if bs.specular { None } else { Some(bs.pdf) };
        prev_pos = p;
        ray = Ray::new(p, bs.direction).with_t_min(cfg.ray_epsilon);
    }

    out.crossed_dynamic = h;
    if !(out.unaffected.is_finite() && out.affected.is_finite()) {
        log::warn!("dropping non-finite sample for stream {:?}", stream.key());
        out = Traversal { rejected: true, crossed_dynamic: h, ..Traversal::default() };
    }
    out
}

/// Unbiased estimate of the full radiance of one scene variant along `ray`.
pub fn trace_reference(
    scene: &Scene,
    ray: &Ray,
    stream: &mut RandomStream,
    variant: SceneVariant,
    cfg: &IntegratorConfig,
) -> Rgb {
    trace_path(scene, ray, stream, variant, cfg).total()
}

/// Radiance carried by paths that interact with dynamic content.
pub fn trace_additive(scene: &Scene, ray: &Ray, stream: &mut RandomStream, cfg: &IntegratorConfig) -> Rgb {
    trace_path(scene, ray, stream, SceneVariant::Dynamic, cfg).affected
}

/// Static-scene radiance carried by paths that would have crossed dynamic content.
pub fn trace_subtractive(scene: &Scene, ray: &Ray, stream: &mut RandomStream, cfg: &IntegratorConfig) -> Rgb {
    trace_path(scene, ray, stream, SceneVariant::Static, cfg).affected
}

/// Both traversals of one correlated sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaSample {
    /// Full dynamic-scene estimate minus full static-scene estimate.
    pub delta: Rgb,
    pub dynamic: Traversal,
    pub static_: Traversal,
}

impl DeltaSample {
    #[inline]
    pub fn plus(&self) -> Rgb {
        self.dynamic.affected
    }

    #[inline]
    pub fn minus(&self) -> Rgb {
        self.static_.affected
    }

    /// `Unaffected` when neither traversal produced an affected contribution,
    /// `Additive` when the main path met dynamic geometry, `Subtractive` when
    /// only light connections or changed emitters differ.
    pub fn class(&self) -> PathClass {
        if self.dynamic.affected_events == 0 && self.static_.affected_events == 0 {
            PathClass::Unaffected
        } else if self.dynamic.crossed_dynamic {
            PathClass::Additive
        } else {
            PathClass::Subtractive
        }
    }
}

/// Correlated difference: two traversals replaying the same random numbers.
pub fn trace_delta_pss(scene: &Scene, ray: &Ray, stream: &RandomStream, cfg: &IntegratorConfig) -> DeltaSample {
    let mut s_dyn = stream.fork_for_scene(SceneVariant::Dynamic);
    let mut s_stat = stream.fork_for_scene(SceneVariant::Static);
    let dynamic = trace_path(scene, ray, &mut s_dyn, SceneVariant::Dynamic, cfg);
    let static_ = trace_path(scene, ray, &mut s_stat, SceneVariant::Static, cfg);
    DeltaSample { delta: dynamic.total() - static_.total(), dynamic, static_ }
}

/// Ray used by every integrator for pixel `(x, y)`.
#[inline]
pub fn camera_ray(scene: &Scene, x: u32, y: u32) -> Ray {
    scene.camera.primary_ray(x, y)
}
