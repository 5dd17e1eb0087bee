//! Counter-based random streams over the primary sample space.
//!
//! Every unit real is a pure function of `(seed, pixel, frame, sample_index,
//! dimension)`. A stream only carries the hashed key prefix and a dimension
//! counter, so it can be copied, forked and replayed freely.
//!
//! Mixing function (portable, integer-only):
//!
//! ```text
//! mix(z)   = splitmix64 finalizer:
//!            z ^= z >> 30; z *= 0xbf58476d1ce4e5b9;
//!            z ^= z >> 27; z *= 0x94d049bb133111eb;
//!            z ^= z >> 31
//! prefix   = mix(mix(mix(seed ^ GOLDEN) ^ (x << 32 | y)) ^ (frame << 32 | sample))
//! u32(dim) = (mix(prefix ^ (dim + 1) * GOLDEN) >> 32)
//! unit     = u32(dim) * 2^-32                       // in [0, 1)
//! ```
//!
//! with `GOLDEN = 0x9e3779b97f4a7c15` and all arithmetic wrapping.

use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Hard cap on dimensions drawn from one stream. Reaching it means a runaway path.
pub const DIMENSION_CAP: u32 = 1024;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Identifies one sample of one pixel in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub pixel: (u32, u32),
    pub frame: u32,
    pub sample_index: u32,
}

impl StreamKey {
    pub fn new(x: u32, y: u32, frame: u32, sample_index: u32) -> Self {
        StreamKey { pixel: (x, y), frame, sample_index }
    }
}

/// Which scene a forked stream drives. Forks never decorrelate; the tag only
/// documents intent at call sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneVariant {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomStream {
    key: StreamKey,
    prefix: u64,
    dimension: u32,
}

impl RandomStream {
    pub fn new(seed: u64, key: StreamKey) -> Self {
        let mut h = mix64(seed ^ GOLDEN);
        h = mix64(h ^ ((key.pixel.0 as u64) << 32 | key.pixel.1 as u64));
        h = mix64(h ^ ((key.frame as u64) << 32 | key.sample_index as u64));
        RandomStream { key, prefix: h, dimension: 0 }
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    /// Index of the next dimension to be drawn.
    pub fn dimension(&self) -> u32 {
        self.dimension
    }

    /// Raw 32-bit output for an arbitrary dimension, without touching the counter.
    #[inline]
    pub fn bits_at(&self, dimension: u32) -> u32 {
        let d = (dimension as u64).wrapping_add(1).wrapping_mul(GOLDEN);
        (mix64(self.prefix ^ d) >> 32) as u32
    }

    #[inline]
    pub fn unit_at(&self, dimension: u32) -> f64 {
        self.bits_at(dimension) as f64 * (1.0 / 4_294_967_296.0)
    }

    #[inline]
    pub fn next_1d(&mut self) -> f64 {
        assert!(
            self.dimension < DIMENSION_CAP,
            "random stream {:?} exhausted {} dimensions (runaway path?)",
            self.key,
            DIMENSION_CAP
        );
        let u = self.unit_at(self.dimension);
        self.dimension += 1;
        u
    }

    #[inline]
    pub fn next_2d(&mut self) -> (f64, f64) {
        let a = self.next_1d();
        let b = self.next_1d();
        (a, b)
    }

    /// Jump forward so the next draw comes from `dimension`. Used to keep a fixed
    /// per-bounce dimension budget regardless of how many draws a bounce made.
    pub fn skip_to(&mut self, dimension: u32) {
        assert!(dimension >= self.dimension, "streams never rewind");
        self.dimension = dimension;
    }

    /// An independent counter over the same underlying sequence.
    pub fn fork_for_scene(&self, _variant: SceneVariant) -> RandomStream {
        self.clone()
    }
}
