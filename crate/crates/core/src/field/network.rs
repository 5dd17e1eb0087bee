//! Hash grid + MLP radiance cache with a flat parameter vector.
//!
//! Input to the MLP: the concatenated grid features, the outgoing direction
//! and the surface normal (both raw unit vectors).
//!
//! File layout (little-endian):
//!
//! ```text
//! magic            8 bytes  "DPFIELD\0"
//! version          u32      1
//! levels           u32
//! log2_table_size  u32
//! features         u32
//! base_resolution  u32
//! finest_res       u32
//! hidden_layers    u32
//! width            u32
//! bounds           6 x f64  (min xyz, max xyz)
//! param_count      u64
//! params           param_count x f32  (grid entries x features, then per layer W[in][out], b[out])
//! ```

use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{HashGrid, HashGridConfig};
use super::mlp::{self, real, MlpCache, MlpShape, Real};
use super::FieldQuery;
use crate::color::Rgb;
use crate::error::{Error, Result};
use crate::math::{Aabb, Vec3};

const MAGIC: &[u8; 8] = b"DPFIELD\0";
const VERSION: u32 = 1;
const GRID_INIT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub grid: HashGridConfig,
    pub hidden_layers: usize,
    pub width: usize,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig { grid: HashGridConfig::default(), hidden_layers: 7, width: 64 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T: Real> {
    pub config: FieldConfig,
    pub grid: HashGrid,
    pub shape: MlpShape,
    pub bounds: Aabb,
    pub params: Vec<T>,
}

/// Forward state needed by [`Network::backward`].
pub struct ForwardPass<T> {
    pub mlp: MlpCache<T>,
    corners: Vec<(u32, T)>,
}

impl<T: Real> ForwardPass<T> {
    pub fn output(&self) -> &Array2<T> {
        &self.mlp.output
    }
}

impl<T: Real> Network<T> {
    /// Grid entries uniform in `+-1e-4`, He-uniform weights, zero biases.
    pub fn new(config: FieldConfig, bounds: Aabb, seed: u64) -> Result<Self> {
        let mut net = Self::zeroed(config, bounds)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid_n = net.grid.param_count();
        for p in &mut net.params[..grid_n] {
            *p = real(rng.gen_range(-GRID_INIT..GRID_INIT));
        }
        let mut off = grid_n;
        for (i, o) in net.shape.layers() {
            let limit = (6.0 / i as f64).sqrt();
            for p in &mut net.params[off..off + i * o] {
                *p = real(rng.gen_range(-limit..limit));
            }
            off += i * o + o;
        }
        Ok(net)
    }

    pub fn zeroed(config: FieldConfig, bounds: Aabb) -> Result<Self> {
        config.grid.validate()?;
        if config.width == 0 && config.hidden_layers > 0 {
            return Err(Error::Config("MLP width must be positive".into()));
        }
        let grid = HashGrid::new(config.grid);
        let shape = MlpShape {
            input: grid.output_dim() + 6,
            hidden_layers: config.hidden_layers,
            width: config.width,
            output: 3,
        };
        let n = grid.param_count() + shape.param_count();
        Ok(Network { config, grid, shape, bounds, params: vec![T::zero(); n] })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn grid_param_count(&self) -> usize {
        self.grid.param_count()
    }

    /// Position mapped to `[0,1]^3`; the flag reports clamping.
    fn normalize(&self, p: Vec3) -> ([f64; 3], bool) {
        let e = self.bounds.extent();
        let mut out = [0.0; 3];
        let mut clamped = false;
        for a in 0..3 {
            let span = e[a].max(1e-9);
            let v = (p[a] - self.bounds.min[a]) / span;
            if !(0.0..=1.0).contains(&v) {
                clamped = true;
            }
            out[a] = v.clamp(0.0, 1.0);
        }
        (out, clamped)
    }

    fn encode(&self, queries: &[FieldQuery]) -> (Array2<T>, Vec<(u32, T)>) {
        let levels = self.grid.levels.len();
        let f = self.grid.config.features as usize;
        let dim = self.shape.input;
        let grid_dim = self.grid.output_dim();
        let mut x = Array2::<T>::zeros((queries.len(), dim));
        let mut corners = Vec::with_capacity(queries.len() * levels * 8);
        let mut clamped = 0usize;
        for (b, q) in queries.iter().enumerate() {
            let (p, c) = self.normalize(q.position);
            clamped += c as usize;
            let mut row = x.row_mut(b);
            for l in 0..levels {
                for (entry, w) in self.grid.corners(l, p) {
                    let w: T = real(w);
                    let base = entry as usize * f;
                    for k in 0..f {
                        row[l * f + k] = row[l * f + k] + w * self.params[base + k];
                    }
                    corners.push((entry, w));
                }
            }
            for a in 0..3 {
                row[grid_dim + a] = real(q.direction[a]);
                row[grid_dim + 3 + a] = real(q.normal[a]);
            }
        }
        if clamped > 0 {
            log::warn!("{clamped} field queries outside the scene bounds were clamped");
        }
        (x, corners)
    }

    pub fn forward(&self, queries: &[FieldQuery]) -> ForwardPass<T> {
        let (x, corners) = self.encode(queries);
        let mlp = mlp::forward(&self.shape, &self.params[self.grid_param_count()..], x);
        ForwardPass { mlp, corners }
    }

    /// Adds the gradient of `sum(d_out * output)` into `grad`.
    pub fn backward(&self, pass: &ForwardPass<T>, d_out: &Array2<T>, grad: &mut [T]) {
        let g = self.grid_param_count();
        let (grid_grad, mlp_grad) = grad.split_at_mut(g);
        let d_x = mlp::backward(&self.shape, &self.params[g..], &pass.mlp, d_out, mlp_grad);
        let levels = self.grid.levels.len();
        let f = self.grid.config.features as usize;
        for b in 0..d_x.nrows() {
            let row = d_x.row(b);
            for l in 0..levels {
                for k in 0..8 {
                    let (entry, w) = pass.corners[(b * levels + l) * 8 + k];
                    let base = entry as usize * f;
                    for j in 0..f {
                        grid_grad[base + j] = grid_grad[base + j] + w * row[l * f + j];
                    }
                }
            }
        }
    }

    pub fn predict(&self, queries: &[FieldQuery]) -> Vec<Rgb> {
        let pass = self.forward(queries);
        pass.output()
            .rows()
            .into_iter()
            .map(|r| Rgb::new(r[0].to_f64().unwrap(), r[1].to_f64().unwrap(), r[2].to_f64().unwrap()))
            .collect()
    }

    /// Relative squared error `w (p - t)^2 / (p^2 + eps)` with the normalizer
    /// treated as a constant, averaged over samples and channels. Adds the
    /// gradient into `grad` when given.
    pub fn relative_loss(
        &self,
        queries: &[FieldQuery],
        targets: &[Rgb],
        weights: &[f64],
        eps: f64,
        grad: Option<&mut [T]>,
    ) -> f64 {
        let pass = self.forward(queries);
        let out = pass.output();
        let norm = 1.0 / (3.0 * queries.len() as f64);
        let mut loss = 0.0;
        let mut d_out = Array2::<T>::zeros(out.raw_dim());
        for (b, (t, w)) in targets.iter().zip(weights).enumerate() {
            for (c, tc) in t.channels().into_iter().enumerate() {
                let p = out[[b, c]].to_f64().unwrap();
                let denom = p * p + eps;
                let e = p - tc;
                loss += w * e * e / denom;
                d_out[[b, c]] = real(2.0 * w * e / denom * norm);
            }
        }
        if let Some(g) = grad {
            self.backward(&pass, &d_out, g);
        }
        loss * norm
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            config: self.config,
            grid: self.grid.clone(),
            shape: self.shape,
            bounds: self.bounds,
            params: self.params.iter().map(|p| real(p.to_f64().unwrap())).collect(),
        }
    }
}

impl Network<f32> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(96 + self.params.len() * 4);
        out.extend_from_slice(MAGIC);
        let g = &self.config.grid;
        for v in [
            VERSION,
            g.levels,
            g.log2_table_size,
            g.features,
            g.base_resolution,
            g.finest_resolution,
            self.config.hidden_layers as u32,
            self.config.width as u32,
        ] {
            out.write_u32::<LittleEndian>(v).unwrap();
        }
        for v in [self.bounds.min, self.bounds.max] {
            for a in 0..3 {
                out.write_f64::<LittleEndian>(v[a]).unwrap();
            }
        }
        out.write_u64::<LittleEndian>(self.params.len() as u64).unwrap();
        for p in &self.params {
            out.write_f32::<LittleEndian>(*p).unwrap();
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::FieldFile(m.to_string());
        let mut r = Cursor::new(bytes);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let mut u = || r.read_u32::<LittleEndian>().map_err(|_| bad("truncated header"));
        let version = u()?;
        if version != VERSION {
            return Err(Error::FieldFile(format!("unsupported version {version}")));
        }
        let grid = HashGridConfig {
            levels: u()?,
            log2_table_size: u()?,
            features: u()?,
            base_resolution: u()?,
            finest_resolution: u()?,
        };
        let hidden_layers = u()? as usize;
        let width = u()? as usize;
        let mut f = || r.read_f64::<LittleEndian>().map_err(|_| bad("truncated bounds"));
        let min = Vec3::new(f()?, f()?, f()?);
        let max = Vec3::new(f()?, f()?, f()?);
        let config = FieldConfig { grid, hidden_layers, width };
        let mut net = Network::<f32>::zeroed(config, Aabb { min, max }).map_err(|e| Error::FieldFile(e.to_string()))?;
        let count = r.read_u64::<LittleEndian>().map_err(|_| bad("truncated header"))?;
        if count != net.params.len() as u64 {
            return Err(Error::FieldFile(format!(
                "parameter count {count} does not match configuration ({})",
                net.params.len()
            )));
        }
        r.read_f32_into::<LittleEndian>(&mut net.params).map_err(|_| bad("truncated parameters"))?;
        if r.position() as usize != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        if net.params.iter().any(|p| !p.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::FieldFile(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}
