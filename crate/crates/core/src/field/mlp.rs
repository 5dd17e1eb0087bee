//! Fully connected network with ReLU hidden layers and a softplus output,
//! evaluated on row-major batches. Parameters live in one flat slice: for
//! each layer the `in x out` weight matrix followed by the bias.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};

/// Scalar type the network can run in (f32 for training, f64 for checks).
pub trait Real: ndarray::LinalgScalar + Float + FromPrimitive + std::fmt::Debug + Send + Sync + 'static {}
impl Real for f32 {}
impl Real for f64 {}

#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite value converts")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub input: usize,
    pub hidden_layers: usize,
    pub width: usize,
    pub output: usize,
}

impl MlpShape {
    /// `(in, out)` of every dense layer.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_layers + 1);
        let mut prev = self.input;
        for _ in 0..self.hidden_layers {
            dims.push((prev, self.width));
            prev = self.width;
        }
        dims.push((prev, self.output));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[inline]
pub fn softplus<T: Real>(x: T) -> T {
    if x > real(20.0) {
        x
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn layer_views<'a, T: Real>(params: &'a [T], offset: usize, (i, o): (usize, usize)) -> (ArrayView2<'a, T>, ArrayView1<'a, T>) {
    let w = ArrayView2::from_shape((i, o), &params[offset..offset + i * o]).expect("layer shape");
    let b = ArrayView1::from(&params[offset + i * o..offset + i * o + o]);
    (w, b)
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    /// Input of every layer (post-ReLU for hidden layers).
    pub inputs: Vec<Array2<T>>,
    /// Output pre-activation.
    pub pre: Array2<T>,
    /// Softplus output.
    pub output: Array2<T>,
}

pub fn forward<T: Real>(shape: &MlpShape, params: &[T], x: Array2<T>) -> MlpCache<T> {
    let dims = shape.layers();
    let mut inputs = Vec::with_capacity(dims.len());
    let mut a = x;
    let mut offset = 0;
    for (k, &d) in dims.iter().enumerate() {
        let (w, b) = layer_views(params, offset, d);
        offset += d.0 * d.1 + d.1;
        let mut z = a.dot(&w);
        for mut row in z.rows_mut() {
            row.zip_mut_with(&b, |a, &c| *a = *a + c);
        }
        inputs.push(a);
        if k + 1 == dims.len() {
            let output = z.mapv(softplus);
            return MlpCache { inputs, pre: z, output };
        }
        z.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() });
        a = z;
    }
    unreachable!("at least one layer")
}

/// Gradients of `sum(d_out * output)` with respect to the parameters (same
/// layout as `params`, added into `grad`) and to the input.
pub fn backward<T: Real>(shape: &MlpShape, params: &[T], cache: &MlpCache<T>, d_out: &Array2<T>, grad: &mut [T]) -> Array2<T> {
    let dims = shape.layers();
    let mut offsets = Vec::with_capacity(dims.len());
    let mut off = 0;
    for &(i, o) in &dims {
        offsets.push(off);
        off += i * o + o;
    }
    let mut dz = d_out * &cache.pre.mapv(sigmoid);
    for k in (0..dims.len()).rev() {
        let (i, o) = dims[k];
        let a = &cache.inputs[k];
        let dw = a.t().dot(&dz);
        let db: Array1<T> = dz.sum_axis(Axis(0));
        let base = offsets[k];
        for (g, v) in grad[base..base + i * o].iter_mut().zip(dw.iter()) {
            *g = *g + *v;
        }
        for (g, v) in grad[base + i * o..base + i * o + o].iter_mut().zip(db.iter()) {
            *g = *g + *v;
        }
        let (w, _) = layer_views(params, base, (i, o));
        let mut da = dz.dot(&w.t());
        if k == 0 {
            return da;
        }
        // Input of layer k is ReLU output of layer k-1: gradient flows where it is positive.
        ndarray::Zip::from(&mut da).and(a).for_each(|d, &x| {
            if x <= T::zero() {
                *d = T::zero();
            }
        });
        dz = da;
    }
    unreachable!("at least one layer")
}
