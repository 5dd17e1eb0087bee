#![allow(dead_code)]

use rayon::prelude::*;

use deltapath::Rgb;

/// Per-channel sample mean and standard error.
#[derive(Debug, Clone, Copy, Default)]
pub struct Mean {
    pub n: u64,
    sum: [f64; 3],
    sum2: [f64; 3],
}

impl Mean {
    pub fn add(&mut self, v: Rgb) {
        self.n += 1;
        for (k, c) in v.channels().into_iter().enumerate() {
            self.sum[k] += c;
            self.sum2[k] += c * c;
        }
    }

    pub fn merge(&mut self, o: &Mean) {
        self.n += o.n;
        for k in 0..3 {
            self.sum[k] += o.sum[k];
            self.sum2[k] += o.sum2[k];
        }
    }

    pub fn mean(&self) -> [f64; 3] {
        self.sum.map(|s| s / self.n as f64)
    }

    pub fn se(&self) -> [f64; 3] {
        let n = self.n as f64;
        let m = self.mean();
        let mut out = [0.0; 3];
        for k in 0..3 {
            let var = ((self.sum2[k] - m[k] * m[k] * n) / (n - 1.0)).max(0.0);
            out[k] = (var / n).sqrt();
        }
        out
    }
}

/// `n` draws of `sample(i)` split over fixed chunks and merged in order, so
/// the result does not depend on scheduling.
pub fn estimate<F>(n: u64, sample: F) -> Mean
where
    F: Fn(u64) -> Rgb + Sync,
{
    const CHUNKS: u64 = 64;
    let parts: Vec<Mean> = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut m = Mean::default();
            let (lo, hi) = (c * n / CHUNKS, (c + 1) * n / CHUNKS);
            for i in lo..hi {
                m.add(sample(i));
            }
            m
        })
        .collect();
    let mut total = Mean::default();
    parts.iter().for_each(|p| total.merge(p));
    total
}

/// Asserts every channel of `a` and `b` agree within `k` combined standard
/// errors plus `slack`.
pub fn assert_agree(what: &str, a: &Mean, b: &Mean, k: f64, slack: f64) {
    let (ma, mb, sa, sb) = (a.mean(), b.mean(), a.se(), b.se());
    for c in 0..3 {
        let tol = k * (sa[c] * sa[c] + sb[c] * sb[c]).sqrt() + slack;
        assert!((ma[c] - mb[c]).abs() <= tol, "{what} channel {c}: {} vs {} (tol {tol})", ma[c], mb[c]);
    }
}
