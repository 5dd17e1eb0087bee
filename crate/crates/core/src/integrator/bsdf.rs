use std::f64::consts::{FRAC_1_PI, PI};

use crate::color::Rgb;
use crate::math::Vec3;
use crate::scene::{Material, MaterialKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsdfSample {
    pub direction: Vec3,
    /// `f * cos / pdf`; equals the albedo for both supported materials.
    pub weight: Rgb,
    /// Solid-angle density; meaningless when `specular`.
    pub pdf: f64,
    pub specular: bool,
}

/// Cosine-weighted direction about unit `n`.
#[inline]
pub fn cosine_hemisphere(n: Vec3, u0: f64, u1: f64) -> Vec3 {
    let r = u0.sqrt();
    let phi = 2.0 * PI * u1;
    let z = (1.0 - u0).max(0.0).sqrt();
    let (t, b) = n.basis();
    t * (r * phi.cos()) + b * (r * phi.sin()) + n * z
}

/// `normal` must face the side the path arrives from; `incoming` is the
/// direction of travel of the arriving ray. Returns `None` for degenerate
/// normals and grazing samples.
#[inline]
pub fn sample_bsdf(material: &Material, normal: Vec3, incoming: Vec3, u: (f64, f64)) -> Option<BsdfSample> {
    if (normal.length_squared() - 1.0).abs() > 1e-6 {
        return None;
    }
    match material.kind {
        MaterialKind::Lambertian => {
            let direction = cosine_hemisphere(normal, u.0, u.1);
            let cos = direction.dot(normal);
            if cos <= 0.0 {
                return None;
            }
            Some(BsdfSample { direction, weight: material.albedo, pdf: cos * FRAC_1_PI, specular: false })
        }
        MaterialKind::Mirror => Some(BsdfSample {
            direction: incoming.reflect(normal),
            weight: material.albedo,
            pdf: 1.0,
            specular: true,
        }),
    }
}

/// Lambertian BSDF value `albedo / pi`.
#[inline]
pub fn lambert(albedo: Rgb) -> Rgb {
    albedo * FRAC_1_PI
}
