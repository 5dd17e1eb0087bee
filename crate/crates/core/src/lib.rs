//! Hybrid rendering of scenes split into a precomputed static part and a
//! path-traced signed delta caused by dynamic objects and lights.

pub mod adaptive;
pub mod color;
pub mod compositor;
pub mod error;
pub mod experiment;
pub mod field;
pub mod image;
pub mod integrator;
pub mod math;
pub mod render;
pub mod rng;
pub mod scene;

pub use color::Rgb;
pub use error::{Error, Result};
pub use image::Image;
pub use math::{Ray, Vec3};
