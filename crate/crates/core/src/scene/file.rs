//! JSON scene description.
//!
//! ```json
//! {
//!   "camera": { "position": [0, 1, 3.9], "look_at": [0, 1, 0], "vfov": 38, "width": 64, "height": 64 },
//!   "materials": [
//!     { "albedo": [0.7, 0.7, 0.7] },
//!     { "albedo": [0, 0, 0], "emission": [8, 8, 8] },
//!     { "albedo": [0.9, 0.9, 0.9], "kind": "mirror" }
//!   ],
//!   "primitives": [
//!     { "sphere": { "center": [0, 0.3, 0], "radius": 0.3 }, "material": 0, "dynamic": true },
//!     { "triangle": { "vertices": [[..], [..], [..]], "normals": null }, "material": 0 },
//!     { "quad": { "corner": [..], "edge_u": [..], "edge_v": [..] }, "material": 1 }
//!   ],
//!   "point_lights": [ { "position": [0, 1.5, 0], "intensity": [1, 1, 1] } ],
//!   "environment": { "constant": [0.5, 0.5, 0.5] },
//!   "dynamic_state": {
//!     "emission": [ { "primitive": 2, "emission": [12, 12, 12] } ],
//!     "point_lights": [ { "index": 0, "position": [0.5, 1.5, 0] } ],
//!     "environment": { "file": "sky_new.pfm" }
//!   }
//! }
//! ```
//!
//! Conventions: `y` is up; triangles and quads emit and face along
//! `(v1 - v0) x (v2 - v0)` (for quads `edge_u x edge_v`); a quad expands to two
//! triangles sharing the quad's material, dynamic flag and overrides.
//! `material` indexes `materials`; `primitive` in overrides indexes `primitives`
//! as written in the file. Everything not listed in `dynamic_state` is
//! identical in both light states. Environment files are PFM images resolved
//! relative to the scene file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::color::Rgb;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::math::Vec3;
use crate::scene::camera::Camera;
use crate::scene::env::EnvironmentMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDesc {
    pub camera: Camera,
    pub materials: Vec<MaterialDesc>,
    pub primitives: Vec<PrimitiveDesc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub point_lights: Vec<PointLightDesc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvSource>,
    #[serde(default, skip_serializing_if = "DynamicStateDesc::is_empty")]
    pub dynamic_state: DynamicStateDesc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    #[default]
    Lambertian,
    Mirror,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialDesc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub albedo: Rgb,
    #[serde(default)]
    pub emission: Rgb,
    #[serde(default)]
    pub kind: MaterialKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeDesc {
    Sphere { center: Vec3, radius: f64 },
    Triangle {
        vertices: [Vec3; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        normals: Option<[Vec3; 3]>,
    },
    Quad { corner: Vec3, edge_u: Vec3, edge_v: Vec3 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimitiveDesc {
    #[serde(flatten)]
    pub shape: ShapeDesc,
    pub material: usize,
    #[serde(default)]
    pub dynamic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointLightDesc {
    pub position: Vec3,
    pub intensity: Rgb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvSource {
    Constant(Rgb),
    File(PathBuf),
    Texels { width: usize, height: usize, texels: Vec<Rgb> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionOverride {
    pub primitive: usize,
    pub emission: Rgb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointLightOverride {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<Rgb>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicStateDesc {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub emission: Vec<EmissionOverride>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub point_lights: Vec<PointLightOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvSource>,
}

impl DynamicStateDesc {
    pub fn is_empty(&self) -> bool {
        self.emission.is_empty() && self.point_lights.is_empty() && self.environment.is_none()
    }
}

impl EnvSource {
    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<EnvironmentMap> {
        match self {
            EnvSource::Constant(c) => Ok(EnvironmentMap::constant(*c)),
            EnvSource::Texels { width, height, texels } => {
                EnvironmentMap::new(*width, *height, texels.clone())
            }
            EnvSource::File(path) => {
                let full = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                let img = Image::read_pfm(&full)?;
                EnvironmentMap::new(img.width, img.height, img.pixels)
            }
        }
    }
}

impl SceneDesc {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|source| Error::SceneParse { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Scene(format!("cannot read scene file {}: {e}", path.display()))
        })?;
        Self::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene description serializes")
    }

    /// Copy of this description with every dynamic primitive translated by `offset`.
    pub fn with_dynamic_offset(&self, offset: Vec3) -> SceneDesc {
        let mut desc = self.clone();
        for p in desc.primitives.iter_mut().filter(|p| p.dynamic) {
            p.shape = match &p.shape {
                ShapeDesc::Sphere { center, radius } => {
                    ShapeDesc::Sphere { center: *center + offset, radius: *radius }
                }
                ShapeDesc::Triangle { vertices, normals } => ShapeDesc::Triangle {
                    vertices: vertices.map(|v| v + offset),
                    normals: *normals,
                },
                ShapeDesc::Quad { corner, edge_u, edge_v } => {
                    ShapeDesc::Quad { corner: *corner + offset, edge_u: *edge_u, edge_v: *edge_v }
                }
            };
        }
        desc
    }

    /// Copy without dynamic primitives and without light-state changes.
    pub fn static_only(&self) -> SceneDesc {
        let mut desc = self.clone();
        desc.primitives.retain(|p| !p.dynamic);
        desc.dynamic_state = DynamicStateDesc::default();
        desc
    }
}
