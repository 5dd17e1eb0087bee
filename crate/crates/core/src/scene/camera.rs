use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Ray, Vec3};

/// Pinhole camera. Primary rays go through pixel centers; there is no
/// sub-pixel jitter, so the mask, the static-field lookup and every
/// path-traced estimate refer to the same ray per pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    #[serde(default = "default_up")]
    pub up: Vec3,
    /// Vertical field of view in degrees.
    pub vfov: f64,
    pub width: u32,
    pub height: u32,
}

fn default_up() -> Vec3 {
    Vec3::new(0.0, 1.0, 0.0)
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::Config(format!(
                "resolution must be at least 8x8, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.vfov > 0.0 && self.vfov < 180.0) {
            return Err(Error::Config(format!("vertical fov {} outside (0, 180)", self.vfov)));
        }
        let fwd = self.look_at - self.position;
        if !(fwd.length() > 0.0) || fwd.normalized().cross(self.up).length() < 1e-9 {
            return Err(Error::Config("camera look direction is degenerate".into()));
        }
        Ok(())
    }

    pub fn with_resolution(mut self, width: u32, height: u32) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Ray through the center of pixel `(x, y)`; `y = 0` is the top row.
    pub fn primary_ray(&self, x: u32, y: u32) -> Ray {
        let forward = (self.look_at - self.position).normalized();
        let right = forward.cross(self.up).normalized();
        let up = right.cross(forward);
        let half_h = (self.vfov.to_radians() * 0.5).tan();
        let half_w = half_h * self.width as f64 / self.height as f64;
        let sx = ((x as f64 + 0.5) / self.width as f64) * 2.0 - 1.0;
        let sy = 1.0 - ((y as f64 + 0.5) / self.height as f64) * 2.0;
        let dir = (forward + right * (sx * half_w) + up * (sy * half_h)).normalized();
        Ray::new(self.position, dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> Camera {
        Camera {
            position: Vec3::new(0.0, 0.0, 5.0),
            look_at: Vec3::ZERO,
            up: default_up(),
            vfov: 90.0,
            width: 8,
            height: 8,
        }
    }

    #[test]
    fn corner_rays_span_fov() {
        let c = cam();
        let top_left = c.primary_ray(0, 0).dir;
        assert!(top_left.x < 0.0 && top_left.y > 0.0 && top_left.z < 0.0);
        let bottom_right = c.primary_ray(7, 7).dir;
        assert!(bottom_right.x > 0.0 && bottom_right.y < 0.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(cam().validate().is_ok());
        assert!(cam().with_resolution(4, 8).validate().is_err());
        let mut c = cam();
        c.vfov = 180.0;
        assert!(c.validate().is_err());
    }
}
