//! Immutable scene: geometry tagged static or dynamic, materials, emitters in
//! two light states, and the environment with its signed delta.

pub mod builtin;
pub mod camera;
pub mod env;
pub mod file;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::color::Rgb;
use crate::error::{Error, Result};
use crate::math::{Aabb, Ray, Vec3};

pub use camera::Camera;
pub use env::{build_env_delta, EnvDeltaSample, EnvironmentMap, SignedEnvDelta, TexelDistribution};
pub use file::{MaterialKind, SceneDesc};

/// Offset applied to secondary rays against self-intersection.
pub const RAY_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightStateId {
    Static = 0,
    Dynamic = 1,
}

impl LightStateId {
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntersectMode {
    /// Nearest hit over static and dynamic primitives.
    IncludeDynamic,
    /// Nearest hit over static primitives; dynamic ones are fully transparent.
    SkipDynamic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Sphere { center: Vec3, radius: f64 },
    Triangle { vertices: [Vec3; 3], normals: Option<[Vec3; 3]> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub material_id: usize,
    pub dynamic: bool,
}

impl Primitive {
    pub fn area(&self) -> f64 {
        match &self.shape {
            Shape::Sphere { radius, .. } => 4.0 * PI * radius * radius,
            Shape::Triangle { vertices: [a, b, c], .. } => 0.5 * (*b - *a).cross(*c - *a).length(),
        }
    }

    pub fn bounds(&self) -> Aabb {
        let mut bb = Aabb::empty();
        match &self.shape {
            Shape::Sphere { center, radius } => {
                let r = Vec3::new(*radius, *radius, *radius);
                bb.grow(*center - r);
                bb.grow(*center + r);
            }
            Shape::Triangle { vertices, .. } => vertices.iter().for_each(|v| bb.grow(*v)),
        }
        bb
    }

    /// Uniform point on the surface with its outward (geometric) normal.
    pub fn sample_point(&self, u0: f64, u1: f64) -> (Vec3, Vec3) {
        match &self.shape {
            Shape::Sphere { center, radius } => {
                let z = 1.0 - 2.0 * u0;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let phi = 2.0 * PI * u1;
                let n = Vec3::new(r * phi.cos(), r * phi.sin(), z);
                (*center + n * *radius, n)
            }
            Shape::Triangle { vertices: [a, b, c], .. } => {
                let su = u0.sqrt();
                let b1 = su * (1.0 - u1);
                let b2 = su * u1;
                let p = *a * (1.0 - su) + *b * b1 + *c * b2;
                (p, (*b - *a).cross(*c - *a).normalized())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub albedo: Rgb,
    /// Emission in the static light state.
    pub emission: Rgb,
    pub kind: MaterialKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointLight {
    pub position: Vec3,
    pub intensity: Rgb,
}

/// Per-state emitter configuration. Both states enumerate the same emitters.
#[derive(Debug, Clone, PartialEq)]
pub struct LightState {
    pub id: LightStateId,
    /// Emitted radiance indexed by primitive; zero for non-emitters.
    pub area_emission: Vec<Rgb>,
    pub point_lights: Vec<PointLight>,
    pub environment: Option<EnvironmentMap>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intersection {
    pub t: f64,
    pub position: Vec3,
    /// Unit shading normal, outward facing (not flipped toward the ray).
    pub normal: Vec3,
    pub geometric_normal: Vec3,
    pub material_id: usize,
    pub is_dynamic: bool,
    pub primitive_id: usize,
}

/// Nearest static hit along a ray plus the nearest dynamic hit in front of it.
#[derive(Debug, Clone, Copy)]
pub struct SplitHit {
    pub static_hit: Option<Intersection>,
    /// Present only when strictly closer than `static_hit` (or when nothing static is hit).
    pub dynamic_hit: Option<Intersection>,
}

impl SplitHit {
    #[inline]
    pub fn nearest(&self) -> Option<Intersection> {
        self.dynamic_hit.or(self.static_hit)
    }

    #[inline]
    pub fn crossed_dynamic(&self) -> bool {
        self.dynamic_hit.is_some()
    }
}

/// Which primitive classes block a shadow segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Blockers {
    pub by_static: bool,
    pub by_dynamic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Light {
    Area { primitive: usize },
    Point { index: usize },
    Environment,
}

/// A light sample as seen from a shading point.
#[derive(Debug, Clone, Copy)]
pub struct LightSample {
    pub direction: Vec3,
    /// Distance to the sampled point; infinite for the environment.
    pub distance: f64,
    /// Incident radiance (area, environment) or intensity / distance^2 (point).
    pub radiance: Rgb,
    /// Solid-angle density of the chosen light's sampling routine (1 for delta lights).
    pub pdf: f64,
    pub is_delta: bool,
    /// The emitted value differs between the two light states.
    pub changed: bool,
    /// The sampled emitter is itself a dynamic primitive.
    pub on_dynamic: bool,
}

#[derive(Debug, Clone)]
struct Environment {
    maps: [EnvironmentMap; 2],
    delta: SignedEnvDelta,
    sampler: Option<TexelDistribution>,
}

#[derive(Debug, Clone, Copy)]
struct SphereGeom {
    center: Vec3,
    radius2: f64,
    prim: u32,
}

#[derive(Debug, Clone, Copy)]
struct TriGeom {
    v0: Vec3,
    e1: Vec3,
    e2: Vec3,
    prim: u32,
}

#[derive(Debug, Clone, Default)]
struct Group {
    spheres: Vec<SphereGeom>,
    tris: Vec<TriGeom>,
}

#[derive(Debug, Clone, Copy)]
struct RawHit {
    t: f64,
    prim: u32,
    u: f64,
    v: f64,
}

impl Group {
    #[inline]
    fn nearest(&self, ray: &Ray, t_max: f64) -> Option<RawHit> {
        let mut best: Option<RawHit> = None;
        let mut t_best = t_max;
        for s in &self.spheres {
            if let Some(t) = hit_sphere(s, ray, t_best) {
                t_best = t;
                best = Some(RawHit { t, prim: s.prim, u: 0.0, v: 0.0 });
            }
        }
        for tri in &self.tris {
            if let Some((t, u, v)) = hit_triangle(tri, ray, t_best) {
                t_best = t;
                best = Some(RawHit { t, prim: tri.prim, u, v });
            }
        }
        best
    }

    #[inline]
    fn any(&self, ray: &Ray, t_max: f64) -> bool {
        self.spheres.iter().any(|s| hit_sphere(s, ray, t_max).is_some())
            || self.tris.iter().any(|t| hit_triangle(t, ray, t_max).is_some())
    }
}

#[inline]
fn hit_sphere(s: &SphereGeom, ray: &Ray, t_max: f64) -> Option<f64> {
    let oc = ray.origin - s.center;
    let b = oc.dot(ray.dir);
    let c = oc.dot(oc) - s.radius2;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = -b - sq;
    if t0 > ray.t_min && t0 < t_max {
        return Some(t0);
    }
    let t1 = -b + sq;
    if t1 > ray.t_min && t1 < t_max {
        return Some(t1);
    }
    None
}

/// Möller-Trumbore.
#[inline]
fn hit_triangle(tri: &TriGeom, ray: &Ray, t_max: f64) -> Option<(f64, f64, f64)> {
    let p = ray.dir.cross(tri.e2);
    let det = tri.e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - tri.v0;
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(tri.e1);
    let v = ray.dir.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = tri.e2.dot(q) * inv;
    if t > ray.t_min && t < t_max {
        Some((t, u, v))
    } else {
        None
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    desc: SceneDesc,
    pub camera: Camera,
    primitives: Vec<Primitive>,
    materials: Vec<Material>,
    states: [LightState; 2],
    /// Emitted radiance per primitive per light state.
    emission: Vec<[Rgb; 2]>,
    light_of_primitive: Vec<Option<usize>>,
    statics: Group,
    dynamics: Group,
    lights: Vec<Light>,
    environment: Option<Environment>,
    static_bounds: Aabb,
}

/// Environment variable naming the directory relative scene paths resolve against.
pub const SCENE_DIR_ENV: &str = "DELTAPATH_SCENE_DIR";

/// Scene description named by `spec`: `builtin:NAME` or a JSON file path,
/// relative paths taken from `scene_dir` when given. Also returns the
/// directory environment-map paths resolve against.
pub fn resolve_scene_desc(spec: &str, scene_dir: Option<&Path>) -> Result<(SceneDesc, Option<PathBuf>)> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        let desc = builtin::by_name(name).ok_or_else(|| {
            Error::Scene(format!("unknown builtin scene '{name}' (known: {})", builtin::NAMES.join(", ")))
        })?;
        return Ok((desc, None));
    }
    let mut path = PathBuf::from(spec);
    if path.is_relative() {
        if let Some(dir) = scene_dir {
            path = dir.join(path);
        }
    }
    let desc = SceneDesc::load(&path)?;
    Ok((desc, path.parent().map(Path::to_path_buf)))
}

impl Scene {
    pub fn load(path: &Path) -> Result<Scene> {
        let desc = SceneDesc::load(path)?;
        Scene::from_desc(desc, path.parent())
    }

    /// Builds the scene. `base_dir` resolves relative environment-map paths.
    pub fn from_desc(desc: SceneDesc, base_dir: Option<&Path>) -> Result<Scene> {
        desc.camera.validate()?;
        let materials: Vec<Material> = desc
            .materials
            .iter()
            .map(|m| Material { albedo: m.albedo, emission: m.emission, kind: m.kind })
            .collect();
        for (i, m) in materials.iter().enumerate() {
            let albedo_ok = m.albedo.channels().iter().all(|c| (0.0..=1.0).contains(c));
            if !albedo_ok {
                return Err(Error::Scene(format!("material {i}: albedo must lie in [0, 1]^3")));
            }
            if !m.emission.is_finite() || m.emission.channels().iter().any(|c| *c < 0.0) {
                return Err(Error::Scene(format!("material {i}: emission must be finite and >= 0")));
            }
        }

        // Expand quads; remember which compiled primitives each entry produced.
        let mut primitives = Vec::new();
        let mut expanded: Vec<Vec<usize>> = Vec::with_capacity(desc.primitives.len());
        for (i, p) in desc.primitives.iter().enumerate() {
            if p.material >= materials.len() {
                return Err(Error::Scene(format!(
                    "primitive {i} references missing material {}",
                    p.material
                )));
            }
            let shapes = match &p.shape {
                file::ShapeDesc::Sphere { center, radius } => {
                    if !(*radius > 0.0) || !center.is_finite() {
                        return Err(Error::Scene(format!("primitive {i}: sphere radius must be > 0")));
                    }
                    vec![Shape::Sphere { center: *center, radius: *radius }]
                }
                file::ShapeDesc::Triangle { vertices, normals } => {
                    vec![Shape::Triangle { vertices: *vertices, normals: *normals }]
                }
                file::ShapeDesc::Quad { corner, edge_u, edge_v } => {
                    let (a, b, c, d) =
                        (*corner, *corner + *edge_u, *corner + *edge_u + *edge_v, *corner + *edge_v);
                    vec![
                        Shape::Triangle { vertices: [a, b, c], normals: None },
                        Shape::Triangle { vertices: [a, c, d], normals: None },
                    ]
                }
            };
            let mut ids = Vec::new();
            for shape in shapes {
                if let Shape::Triangle { vertices: [a, b, c], normals } = &shape {
                    let n = (*b - *a).cross(*c - *a);
                    if !(n.length() > 1e-12) || !n.is_finite() {
                        return Err(Error::Scene(format!("primitive {i}: degenerate triangle")));
                    }
                    if let Some(ns) = normals {
                        if ns.iter().any(|v| !(v.length() > 0.0)) {
                            return Err(Error::Scene(format!("primitive {i}: zero shading normal")));
                        }
                    }
                }
                ids.push(primitives.len());
                primitives.push(Primitive { shape, material_id: p.material, dynamic: p.dynamic });
            }
            expanded.push(ids);
        }

        let mut emission: Vec<[Rgb; 2]> = primitives
            .iter()
            .map(|p| {
                let e = materials[p.material_id].emission;
                [e, e]
            })
            .collect();
        for o in &desc.dynamic_state.emission {
            let ids = expanded.get(o.primitive).ok_or_else(|| {
                Error::Scene(format!("emission override references missing primitive {}", o.primitive))
            })?;
            if !o.emission.is_finite() || o.emission.channels().iter().any(|c| *c < 0.0) {
                return Err(Error::Scene("emission override must be finite and >= 0".into()));
            }
            for &id in ids {
                emission[id][1] = o.emission;
            }
        }

        let static_points: Vec<PointLight> = desc
            .point_lights
            .iter()
            .map(|p| PointLight { position: p.position, intensity: p.intensity })
            .collect();
        let mut dynamic_points = static_points.clone();
        for o in &desc.dynamic_state.point_lights {
            let pl = dynamic_points.get_mut(o.index).ok_or_else(|| {
                Error::Scene(format!("point light override references missing light {}", o.index))
            })?;
            if let Some(p) = o.position {
                pl.position = p;
            }
            if let Some(i) = o.intensity {
                pl.intensity = i;
            }
        }
        for pl in static_points.iter().chain(&dynamic_points) {
            if !pl.position.is_finite() || !pl.intensity.is_finite() {
                return Err(Error::Scene("point light values must be finite".into()));
            }
        }

        let env_static = desc.environment.as_ref().map(|e| e.resolve(base_dir)).transpose()?;
        let env_dynamic = match &desc.dynamic_state.environment {
            Some(e) => Some(e.resolve(base_dir)?),
            None => env_static.clone(),
        };
        for m in env_static.iter().chain(env_dynamic.iter()) {
            if m.texels.iter().any(|t| t.channels().iter().any(|c| *c < 0.0)) {
                return Err(Error::Scene("environment maps must be non-negative".into()));
            }
        }
        let environment = match (env_static, env_dynamic) {
            (None, None) => None,
            (old, new) => {
                let (old, new) = match (old, new) {
                    (Some(o), Some(n)) => (o, n),
                    (Some(o), None) => {
                        let black = EnvironmentMap::new(o.width, o.height, vec![Rgb::ZERO; o.texels.len()])?;
                        (o, black)
                    }
                    (None, Some(n)) => {
                        let black = EnvironmentMap::new(n.width, n.height, vec![Rgb::ZERO; n.texels.len()])?;
                        (black, n)
                    }
                    (None, None) => unreachable!(),
                };
                let delta = build_env_delta(&old, &new)?;
                let sampler = match delta.distribution() {
                    Some(d) => Some(d.clone()),
                    None => {
                        let lum: Vec<f64> = old.texels.iter().map(|t| t.luminance()).collect();
                        TexelDistribution::from_luminance(old.width, old.height, &lum)
                    }
                };
                Some(Environment { maps: [old, new], delta, sampler })
            }
        };

        let mut statics = Group::default();
        let mut dynamics = Group::default();
        let mut static_bounds = Aabb::empty();
        for (i, p) in primitives.iter().enumerate() {
            let group = if p.dynamic { &mut dynamics } else { &mut statics };
            if !p.dynamic {
                static_bounds.union(&p.bounds());
            }
            match &p.shape {
                Shape::Sphere { center, radius } => group.spheres.push(SphereGeom {
                    center: *center,
                    radius2: radius * radius,
                    prim: i as u32,
                }),
                Shape::Triangle { vertices: [a, b, c], .. } => group.tris.push(TriGeom {
                    v0: *a,
                    e1: *b - *a,
                    e2: *c - *a,
                    prim: i as u32,
                }),
            }
        }

        let mut lights = Vec::new();
        let mut light_of_primitive = vec![None; primitives.len()];
        for (i, e) in emission.iter().enumerate() {
            if !e[0].is_zero() || !e[1].is_zero() {
                light_of_primitive[i] = Some(lights.len());
                lights.push(Light::Area { primitive: i });
            }
        }
        for index in 0..static_points.len() {
            lights.push(Light::Point { index });
        }
        if environment.as_ref().is_some_and(|e| e.sampler.is_some()) {
            lights.push(Light::Environment);
        }

        let area_emission = |s: usize| emission.iter().map(|e| e[s]).collect::<Vec<_>>();
        let states = [
            LightState {
                id: LightStateId::Static,
                area_emission: area_emission(0),
                point_lights: static_points,
                environment: environment.as_ref().map(|e| e.maps[0].clone()),
            },
            LightState {
                id: LightStateId::Dynamic,
                area_emission: area_emission(1),
                point_lights: dynamic_points,
                environment: environment.as_ref().map(|e| e.maps[1].clone()),
            },
        ];

        Ok(Scene {
            camera: desc.camera.clone(),
            desc,
            primitives,
            materials,
            states,
            emission,
            light_of_primitive,
            statics,
            dynamics,
            lights,
            environment,
            static_bounds,
        })
    }

    /// Same scene seen through a camera with a different resolution.
    pub fn with_resolution(mut self, width: u32, height: u32) -> Scene {
        self.camera = self.camera.with_resolution(width, height);
        self
    }

    pub fn desc(&self) -> &SceneDesc {
        &self.desc
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn material(&self, id: usize) -> &Material {
        &self.materials[id]
    }

    pub fn light_state(&self, id: LightStateId) -> &LightState {
        &self.states[id.index()]
    }

    pub fn lights(&self) -> &[Light] {
        &self.lights
    }

    pub fn has_dynamic_primitives(&self) -> bool {
        self.primitives.iter().any(|p| p.dynamic)
    }

    /// True when the two light states are identical everywhere.
    pub fn light_states_equal(&self) -> bool {
        self.emission.iter().all(|e| e[0] == e[1])
            && self.states[0].point_lights == self.states[1].point_lights
            && self.environment.as_ref().is_none_or(|e| e.delta.is_empty())
    }

    /// Bounds of the static geometry.
    pub fn static_bounds(&self) -> Aabb {
        self.static_bounds
    }

    pub fn env_delta(&self) -> Option<&SignedEnvDelta> {
        self.environment.as_ref().map(|e| &e.delta)
    }

    pub fn intersect(&self, ray: &Ray, mode: IntersectMode) -> Option<Intersection> {
        match mode {
            IntersectMode::IncludeDynamic => self.intersect_split(ray).nearest(),
            IntersectMode::SkipDynamic => self
                .statics
                .nearest(ray, ray.t_max)
                .map(|h| self.make_intersection(ray, h)),
        }
    }

    /// Static nearest hit and, if closer, the dynamic nearest hit. Ties go to
    /// the static primitive in both scene variants.
    #[inline]
    pub fn intersect_split(&self, ray: &Ray) -> SplitHit {
        let s = self.statics.nearest(ray, ray.t_max);
        let limit = s.map_or(ray.t_max, |h| h.t);
        let d = self.dynamics.nearest(ray, limit);
        SplitHit {
            static_hit: s.map(|h| self.make_intersection(ray, h)),
            dynamic_hit: d.map(|h| self.make_intersection(ray, h)),
        }
    }

    /// Blockers strictly between `ray.t_min` and `t_max`.
    #[inline]
    pub fn blockers(&self, ray: &Ray, t_max: f64) -> Blockers {
        Blockers {
            by_static: self.statics.any(ray, t_max),
            by_dynamic: self.dynamics.any(ray, t_max),
        }
    }

    fn make_intersection(&self, ray: &Ray, h: RawHit) -> Intersection {
        let prim = &self.primitives[h.prim as usize];
        let position = ray.at(h.t);
        let (normal, geometric_normal) = match &prim.shape {
            Shape::Sphere { center, radius } => {
                let n = (position - *center) / *radius;
                (n, n)
            }
            Shape::Triangle { vertices: [a, b, c], normals } => {
                let ng = (*b - *a).cross(*c - *a).normalized();
                let ns = match normals {
                    Some([n0, n1, n2]) => {
                        (*n0 * (1.0 - h.u - h.v) + *n1 * h.u + *n2 * h.v).normalized()
                    }
                    None => ng,
                };
                (ns, ng)
            }
        };
        Intersection {
            t: h.t,
            position,
            normal,
            geometric_normal,
            material_id: prim.material_id,
            is_dynamic: prim.dynamic,
            primitive_id: h.prim as usize,
        }
    }

    /// Radiance emitted from a hit toward the ray origin under a light state.
    #[inline]
    pub fn emission_at(&self, hit: &Intersection, ray_dir: Vec3, state: LightStateId) -> Rgb {
        if hit.geometric_normal.dot(ray_dir) < 0.0 {
            self.emission[hit.primitive_id][state.index()]
        } else {
            Rgb::ZERO
        }
    }

    /// True when the hit primitive emits differently in the two light states.
    #[inline]
    pub fn emission_changed(&self, primitive: usize) -> bool {
        let e = &self.emission[primitive];
        e[0] != e[1]
    }

    #[inline]
    pub fn env_radiance(&self, dir: Vec3, state: LightStateId) -> Rgb {
        match &self.environment {
            Some(env) => env.maps[state.index()].lookup(dir),
            None => Rgb::ZERO,
        }
    }

    #[inline]
    pub fn env_changed(&self, dir: Vec3) -> bool {
        match &self.environment {
            Some(env) => {
                let i = env.maps[0].texel_index(dir);
                env.maps[0].texels[i] != env.maps[1].texels[i]
            }
            None => false,
        }
    }

    /// Emission seen along a ray: the hit emitter's radiance, or the
    /// environment on a miss.
    pub fn eval_emission(&self, ray: &Ray, hit: Option<&Intersection>, state: LightStateId) -> Rgb {
        match hit {
            Some(h) => self.emission_at(h, ray.dir, state),
            None => self.env_radiance(ray.dir, state),
        }
    }

    /// Probability of picking any one light for next-event estimation.
    #[inline]
    pub fn light_selection_pdf(&self) -> f64 {
        if self.lights.is_empty() {
            0.0
        } else {
            1.0 / self.lights.len() as f64
        }
    }

    /// Solid-angle density with which next-event estimation would produce the
    /// direction toward `hit` from `origin`, including light selection.
    #[inline]
    pub fn area_light_pdf(&self, origin: Vec3, hit: &Intersection, ray_dir: Vec3) -> f64 {
        match self.light_of_primitive[hit.primitive_id] {
            Some(_) => {
                let cos_l = -hit.geometric_normal.dot(ray_dir);
                if cos_l <= 0.0 {
                    return 0.0;
                }
                let d2 = (hit.position - origin).length_squared();
                let area = self.primitives[hit.primitive_id].area();
                self.light_selection_pdf() * d2 / (cos_l * area)
            }
            None => 0.0,
        }
    }

    /// Environment counterpart of [`area_light_pdf`](Self::area_light_pdf).
    #[inline]
    pub fn env_light_pdf(&self, dir: Vec3) -> f64 {
        match self.environment.as_ref().and_then(|e| e.sampler.as_ref()) {
            Some(s) => self.light_selection_pdf() * s.pdf(dir),
            None => 0.0,
        }
    }

    /// Samples light `index` from `origin` under `state`. Dynamic area lights
    /// are absent when `include_dynamic` is false. Returns `None` when the
    /// sample carries no energy by construction (back face, absent light).
    pub fn sample_light(
        &self,
        index: usize,
        origin: Vec3,
        state: LightStateId,
        include_dynamic: bool,
        u0: f64,
        u1: f64,
    ) -> Option<LightSample> {
        match self.lights[index] {
            Light::Area { primitive } => {
                let prim = &self.primitives[primitive];
                if prim.dynamic && !include_dynamic {
                    return None;
                }
                let (p, n) = prim.sample_point(u0, u1);
                let d = p - origin;
                let dist2 = d.length_squared();
                let dist = dist2.sqrt();
                let direction = d / dist;
                let cos_l = -n.dot(direction);
                if cos_l <= 0.0 {
                    return None;
                }
                Some(LightSample {
                    direction,
                    distance: dist,
                    radiance: self.emission[primitive][state.index()],
                    pdf: dist2 / (cos_l * prim.area()),
                    is_delta: false,
                    changed: self.emission_changed(primitive),
                    on_dynamic: prim.dynamic,
                })
            }
            Light::Point { index } => {
                let pl = &self.states[state.index()].point_lights[index];
                let d = pl.position - origin;
                let dist2 = d.length_squared();
                let dist = dist2.sqrt();
                let other = &self.states[1 - state.index()].point_lights[index];
                Some(LightSample {
                    direction: d / dist,
                    distance: dist,
                    radiance: pl.intensity / dist2,
                    pdf: 1.0,
                    is_delta: true,
                    changed: pl != other,
                    on_dynamic: false,
                })
            }
            Light::Environment => {
                let env = self.environment.as_ref()?;
                let s = env.sampler.as_ref()?.sample(u0, u1);
                Some(LightSample {
                    direction: s.direction,
                    distance: f64::INFINITY,
                    radiance: env.maps[state.index()].texels[s.texel],
                    pdf: s.pdf,
                    is_delta: false,
                    changed: env.maps[0].texels[s.texel] != env.maps[1].texels[s.texel],
                    on_dynamic: false,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests;
