//! Sampled parametrizations `X: [0,1]^k -> R^n` on uniform grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a field was produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    /// Hurst index for Gaussian samples.
    pub hurst: Option<f64>,
    pub seed: Option<u64>,
    /// Generator backend, e.g. `circulant`, `cholesky`, `koch`, `minimize`.
    pub generator: String,
}

/// Values of a field on the grid `{0, .., m-1}^k`, grid index `i` mapped to the
/// parameter `i / (m - 1)`.
///
/// Values are stored point-major: the point for flat index `p` occupies
/// `values[p * n .. (p + 1) * n]`. The flat index is row-major in the
/// multi-index with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledField {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub values: Vec<f64>,
    pub origin_pinned: bool,
    pub meta: FieldMeta,
}

impl SampledField {
    pub fn new(k: usize, n: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(Error::input("parameter and target dimensions must be positive"));
        }
        if m < 2 {
            return Err(Error::input("a field needs at least 2 points per axis"));
        }
        let pts = grid_len(k, m)?;
        if values.len() != pts * n {
            return Err(Error::input(format!(
                "expected {} values for k={k}, n={n}, m={m}, got {}",
                pts * n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("field values must be finite"));
        }
        let origin_pinned = values[..n].iter().all(|&v| v == 0.0);
        Ok(SampledField {
            k,
            n,
            m,
            values,
            origin_pinned,
            meta: FieldMeta::default(),
        })
    }

    /// Sample `f` at every grid parameter.
    pub fn from_fn<F>(k: usize, n: usize, m: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let pts = grid_len(k, m)?;
        let mut values = Vec::with_capacity(pts * n);
        let mut t = vec![0.0; k];
        for p in 0..pts {
            param_into(k, m, p, &mut t);
            let x = f(&t);
            if x.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: x.len(),
                });
            }
            values.extend_from_slice(&x);
        }
        SampledField::new(k, n, m, values)
    }

    pub fn with_meta(mut self, meta: FieldMeta) -> Self {
        self.meta = meta;
        self
    }

    /// Number of grid points, `m^k`.
    pub fn len(&self) -> usize {
        self.values.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn point(&self, p: usize) -> &[f64] {
        &self.values[p * self.n..(p + 1) * self.n]
    }

    #[inline]
    pub fn point_mut(&mut self, p: usize) -> &mut [f64] {
        let n = self.n;
        &mut self.values[p * n..(p + 1) * n]
    }

    /// Multi-index of flat index `p`.
    pub fn multi_index(&self, p: usize) -> Vec<usize> {
        let mut idx = vec![0; self.k];
        let mut r = p;
        for d in (0..self.k).rev() {
            idx[d] = r % self.m;
            r /= self.m;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.m + i)
    }

    /// Parameter `t in [0,1]^k` of flat index `p`.
    pub fn param(&self, p: usize) -> Vec<f64> {
        let mut t = vec![0.0; self.k];
        param_into(self.k, self.m, p, &mut t);
        t
    }

    /// Flat index of the corner `(m-1, .., m-1)`, i.e. parameter `(1, .., 1)`.
    pub fn last_index(&self) -> usize {
        self.len() - 1
    }

    /// Euclidean distance between the parameters of two flat indices.
    pub fn param_dist(&self, p: usize, q: usize) -> f64 {
        let h = 1.0 / (self.m - 1) as f64;
        let (mut a, mut b) = (p, q);
        let mut s = 0.0;
        for _ in 0..self.k {
            let d = (a % self.m) as f64 - (b % self.m) as f64;
            s += d * d;
            a /= self.m;
            b /= self.m;
        }
        s.sqrt() * h
    }

    /// Multiply every value by `lambda`.
    pub fn scaled(&self, lambda: f64) -> SampledField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= lambda);
        out
    }

    /// Add `c` to every value.
    pub fn translated(&self, c: &[f64]) -> SampledField {
        let mut out = self.clone();
        for p in 0..out.len() {
            for (v, &cj) in out.point_mut(p).iter_mut().zip(c) {
                *v += cj;
            }
        }
        out.origin_pinned = out.values[..out.n].iter().all(|&v| v == 0.0);
        out
    }

    /// Recompute the pinned flag from the stored origin value.
    pub fn refresh_pin(&mut self) {
        self.origin_pinned = self.values[..self.n].iter().all(|&v| v == 0.0);
    }

    /// The image points as owned vectors.
    pub fn points(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.n).map(|c| c.to_vec()).collect()
    }
}

pub(crate) fn grid_len(k: usize, m: usize) -> Result<usize> {
    let mut pts: usize = 1;
    for _ in 0..k {
        pts = pts
            .checked_mul(m)
            .filter(|&p| p <= 1 << 28)
            .ok_or_else(|| Error::input(format!("grid {m}^{k} is too large")))?;
    }
    Ok(pts)
}

fn param_into(k: usize, m: usize, p: usize, t: &mut [f64]) {
    let h = 1.0 / (m - 1) as f64;
    let mut r = p;
    for d in (0..k).rev() {
        t[d] = (r % m) as f64 * h;
        r /= m;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_roundtrip() {
        let f = SampledField::from_fn(2, 3, 4, |t| vec![t[0], t[1], t[0] * t[1]]).unwrap();
        assert_eq!(f.len(), 16);
        for p in 0..f.len() {
            let idx = f.multi_index(p);
            assert_eq!(f.flat_index(&idx), p);
            let t = f.param(p);
            assert_eq!(f.point(p)[0], t[0]);
            assert_eq!(f.point(p)[1], t[1]);
        }
        assert_eq!(f.param(f.last_index()), vec![1.0, 1.0]);
        assert!(f.origin_pinned);
        assert!((f.param_dist(0, f.last_index()) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(SampledField::new(1, 1, 1, vec![0.0]).is_err());
        assert!(SampledField::new(1, 2, 3, vec![0.0; 5]).is_err());
        assert!(SampledField::new(1, 1, 2, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn translation_unpins() {
        let f = SampledField::from_fn(1, 1, 3, |t| vec![t[0]]).unwrap();
        assert!(f.origin_pinned);
        assert!(!f.translated(&[1.0]).origin_pinned);
        assert_eq!(f.scaled(2.0).point(2), &[2.0]);
    }
}
