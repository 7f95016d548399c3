use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// General sparse order-`d` tensor with per-position coefficients. This is the
/// coefficient form of a decoupled polynomial `sum T[i1..id] x1_i1 ... xd_id`;
/// repeated indices are allowed since each position has its own group.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    order: usize,
    dim: usize,
    entries: BTreeMap<Vec<usize>, f64>,
}

impl Tensor {
    pub fn zeros(order: usize, dim: usize) -> Self {
        Self { order, dim, entries: BTreeMap::new() }
    }

    pub fn from_entries<I>(order: usize, dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        let mut t = Self::zeros(order, dim);
        for (idx, c) in entries {
            t.add(&idx, c)?;
        }
        Ok(t)
    }

    /// Dense tensor with i.i.d. standard Gaussian entries.
    pub fn gaussian<R: Rng + ?Sized>(order: usize, dim: usize, rng: &mut R) -> Self {
        let mut t = Self::zeros(order, dim);
        let total = dim.pow(order as u32);
        for flat in 0..total {
            let mut idx = vec![0; order];
            let mut r = flat;
            for p in (0..order).rev() {
                idx[p] = r % dim;
                r /= dim;
            }
            let v: f64 = rng.sample(StandardNormal);
            t.entries.insert(idx, v);
        }
        t
    }

    /// Outer product of the given vectors.
    pub fn rank_one(vectors: &[Vec<f64>]) -> Result<Self> {
        let order = vectors.len();
        let dim = vectors.first().map_or(0, |v| v.len());
        let mut t = Self::zeros(order, dim);
        let total = dim.pow(order as u32);
        for flat in 0..total {
            let mut idx = vec![0; order];
            let mut r = flat;
            for p in (0..order).rev() {
                idx[p] = r % dim;
                r /= dim;
            }
            let v: f64 = idx.iter().enumerate().map(|(p, &i)| vectors[p][i]).product();
            t.add(&idx, v)?;
        }
        Ok(t)
    }

    pub fn add(&mut self, idx: &[usize], c: f64) -> Result<()> {
        if idx.len() != self.order {
            return Err(Error::DimensionMismatch { expected: self.order, found: idx.len() });
        }
        if let Some(&i) = idx.iter().find(|&&i| i >= self.dim) {
            return Err(Error::IndexOutOfRange { index: i, dim: self.dim });
        }
        let slot = self.entries.entry(idx.to_vec()).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.entries.remove(idx);
        }
        Ok(())
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.entries.get(idx).copied().unwrap_or(0.0)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        self.entries.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.values().map(|c| c.abs()).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = Self::zeros(self.order, self.dim);
        for (k, &c) in &self.entries {
            if c * s != 0.0 {
                out.entries.insert(k.clone(), c * s);
            }
        }
        out
    }

    /// Zero-extends every index range to `dim`.
    pub fn padded(&self, dim: usize) -> Self {
        assert!(dim >= self.dim);
        Self { order: self.order, dim, entries: self.entries.clone() }
    }

    pub fn eval(&self, groups: &[&[f64]]) -> Result<f64> {
        if groups.len() != self.order {
            return Err(Error::GroupCount { expected: self.order, found: groups.len() });
        }
        for g in groups {
            if g.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, found: g.len() });
            }
        }
        Ok(self
            .entries
            .iter()
            .map(|(k, &c)| c * k.iter().enumerate().map(|(p, &i)| groups[p][i]).product::<f64>())
            .sum())
    }

    /// Slice along the first position: `M[j][k] = T[i, j, k]` (order 3 only).
    pub fn slice(&self, i: usize) -> Result<DMatrix<f64>> {
        if self.order != 3 {
            return Err(Error::OrderMismatch { expected: "3".into(), found: self.order });
        }
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (k, &c) in self.entries.range(vec![i, 0, 0]..) {
            if k[0] != i {
                break;
            }
            m[(k[1], k[2])] += c;
        }
        Ok(m)
    }

    /// Contracts every position except the last two with the given vectors,
    /// leaving the matrix of the remaining bilinear form.
    pub fn contract_leading(&self, hs: &[&[f64]]) -> Result<DMatrix<f64>> {
        if self.order < 2 || hs.len() != self.order - 2 {
            return Err(Error::GroupCount { expected: self.order.saturating_sub(2), found: hs.len() });
        }
        let d = self.order;
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (k, &c) in &self.entries {
            let w: f64 = (0..d - 2).map(|p| hs[p][k[p]]).product();
            m[(k[d - 2], k[d - 1])] += c * w;
        }
        Ok(m)
    }

    /// Vector `v_i = sum_{j,k} T[i,j,k] y_j z_k` (order 3 only).
    pub fn contract_last_two(&self, y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        if self.order != 3 {
            return Err(Error::OrderMismatch { expected: "3".into(), found: self.order });
        }
        let mut v = vec![0.0; self.dim];
        for (k, &c) in &self.entries {
            v[k[0]] += c * y[k[1]] * z[k[2]];
        }
        Ok(v)
    }

    /// Contracts all positions but `skip`, giving the gradient in that group.
    pub fn contract_except(&self, groups: &[&[f64]], skip: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for (k, &c) in &self.entries {
            let w: f64 = k.iter().enumerate().filter(|&(p, _)| p != skip).map(|(p, &i)| groups[p][i]).product();
            v[k[skip]] += c * w;
        }
        v
    }
}
