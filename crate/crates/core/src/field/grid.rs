//! Multiresolution hash-grid encoding.
//!
//! Level `l` has resolution `round(base * b^l)` with `b` chosen so the last
//! level reaches `finest`. A level whose `(res + 1)^3` vertices fit in the
//! table is stored densely; otherwise vertices are hashed with
//! `(x * 1) ^ (y * 2654435761) ^ (z * 805459861)` modulo the table size.
//! Features are interpolated trilinearly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PRIMES: [u32; 3] = [1, 2_654_435_761, 805_459_861];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashGridConfig {
    pub levels: u32,
    pub log2_table_size: u32,
    pub features: u32,
    pub base_resolution: u32,
    pub finest_resolution: u32,
}

impl Default for HashGridConfig {
    fn default() -> Self {
        HashGridConfig { levels: 8, log2_table_size: 14, features: 2, base_resolution: 4, finest_resolution: 256 }
    }
}

impl HashGridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.features == 0 {
            return Err(Error::Config("hash grid needs at least one level and one feature".into()));
        }
        if self.base_resolution < 1 || self.finest_resolution < self.base_resolution {
            return Err(Error::Config("hash grid resolutions must satisfy 1 <= base <= finest".into()));
        }
        if self.log2_table_size == 0 || self.log2_table_size > 24 {
            return Err(Error::Config("hash table size must be 2^1 ..= 2^24".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLevel {
    pub resolution: u32,
    pub dense: bool,
    /// Entries stored for this level.
    pub entries: u32,
    /// Offset of the first entry of this level.
    pub offset: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HashGrid {
    pub config: HashGridConfig,
    pub levels: Vec<GridLevel>,
    pub total_entries: u32,
}

impl HashGrid {
    pub fn new(config: HashGridConfig) -> Self {
        let table = 1u64 << config.log2_table_size;
        let growth = if config.levels > 1 {
            ((config.finest_resolution as f64 / config.base_resolution as f64).ln() / (config.levels - 1) as f64).exp()
        } else {
            1.0
        };
        let mut levels = Vec::with_capacity(config.levels as usize);
        let mut offset = 0u32;
        for l in 0..config.levels {
            let resolution = (config.base_resolution as f64 * growth.powi(l as i32)).round().max(1.0) as u32;
            let vertices = (resolution as u64 + 1).pow(3);
            let dense = vertices <= table;
            let entries = if dense { vertices } else { table } as u32;
            levels.push(GridLevel { resolution, dense, entries, offset });
            offset += entries;
        }
        HashGrid { config, levels, total_entries: offset }
    }

    pub fn param_count(&self) -> usize {
        self.total_entries as usize * self.config.features as usize
    }

    pub fn output_dim(&self) -> usize {
        (self.config.levels * self.config.features) as usize
    }

    #[inline]
    fn vertex_index(&self, level: &GridLevel, v: [u32; 3]) -> u32 {
        let local = if level.dense {
            let r = level.resolution + 1;
            v[0] + v[1] * r + v[2] * r * r
        } else {
            let h = v[0].wrapping_mul(PRIMES[0]) ^ v[1].wrapping_mul(PRIMES[1]) ^ v[2].wrapping_mul(PRIMES[2]);
            h & (level.entries - 1)
        };
        level.offset + local
    }

    /// The 8 (entry, weight) pairs of `p` (in `[0,1]^3`) at `level`.
    #[inline]
    pub fn corners(&self, level: usize, p: [f64; 3]) -> [(u32, f64); 8] {
        let lv = &self.levels[level];
        let res = lv.resolution as f64;
        let mut cell = [0u32; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let x = (p[a].clamp(0.0, 1.0)) * res;
            let c = (x.floor() as u32).min(lv.resolution - 1);
            cell[a] = c;
            frac[a] = x - c as f64;
        }
        let mut out = [(0u32, 0.0f64); 8];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut v = cell;
            let mut w = 1.0;
            for a in 0..3 {
                if k >> a & 1 == 1 {
                    v[a] += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            *slot = (self.vertex_index(lv, v), w);
        }
        out
    }
}
