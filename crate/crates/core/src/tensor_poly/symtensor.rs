use std::collections::BTreeMap;

use nalgebra::DMatrix;

use super::{factorial, permutations, Assignment, Tensor};
use crate::error::{Error, Result};

/// Sparse symmetric multilinear tensor. Each orbit is stored once under its
/// sorted index tuple (0-based) and holds the total coefficient of the
/// monomial, so `f(x) = sum c * prod x_i` with no `d!` factor.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensor {
    order: usize,
    dim: usize,
    entries: BTreeMap<Vec<usize>, f64>,
}

impl SymTensor {
    pub fn new(order: usize, dim: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::UnsupportedDegree(order));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        Ok(Self { order, dim, entries: BTreeMap::new() })
    }

    /// Builds a tensor from monomials given as index tuples in any order.
    /// Coefficients of the same monomial accumulate.
    pub fn from_monomials<I>(order: usize, dim: usize, monomials: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        let mut t = Self::new(order, dim)?;
        for (idx, c) in monomials {
            t.add(&idx, c)?;
        }
        Ok(t)
    }

    /// Adds `c` to the coefficient of the monomial `prod x_idx`.
    pub fn add(&mut self, idx: &[usize], c: f64) -> Result<()> {
        let key = self.canonical(idx)?;
        let slot = self.entries.entry(key.clone()).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.entries.remove(&key);
        }
        Ok(())
    }

    fn canonical(&self, idx: &[usize]) -> Result<Vec<usize>> {
        if idx.len() != self.order {
            return Err(Error::DimensionMismatch { expected: self.order, found: idx.len() });
        }
        let mut key = idx.to_vec();
        key.sort_unstable();
        if let Some(&i) = key.iter().find(|&&i| i >= self.dim) {
            return Err(Error::IndexOutOfRange { index: i, dim: self.dim });
        }
        if key.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DiagonalEntry(idx.to_vec()));
        }
        Ok(key)
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

    pub fn coeff(&self, idx: &[usize]) -> f64 {
        let mut key = idx.to_vec();
        key.sort_unstable();
        self.entries.get(&key).copied().unwrap_or(0.0)
    }

    /// Sum of absolute monomial coefficients.
    pub fn l1_norm(&self) -> f64 {
        self.entries.values().map(|c| c.abs()).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.entries = self
            .entries
            .iter()
            .filter(|(_, &c)| c * s != 0.0)
            .map(|(k, &c)| (k.clone(), c * s))
            .collect();
        out
    }

    /// Evaluates the coupled polynomial at an arbitrary real point.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(self
            .entries
            .iter()
            .map(|(k, &c)| c * k.iter().map(|&i| x[i]).product::<f64>())
            .sum())
    }

    /// Evaluates the decoupled form at `d` real vectors, one per tensor position.
    pub fn eval_decoupled(&self, groups: &[&[f64]]) -> Result<f64> {
        if groups.len() != self.order {
            return Err(Error::GroupCount { expected: self.order, found: groups.len() });
        }
        for g in groups {
            if g.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, found: g.len() });
            }
        }
        let perms = permutations(self.order);
        let scale = 1.0 / factorial(self.order);
        let mut total = 0.0;
        for (k, &c) in &self.entries {
            let s: f64 = perms
                .iter()
                .map(|p| p.iter().enumerate().map(|(pos, &j)| groups[pos][k[j]]).product::<f64>())
                .sum();
            total += c * scale * s;
        }
        Ok(total)
    }

    /// Per-position tensor: each monomial spread evenly over its `d!` positions.
    pub fn to_tensor(&self) -> Tensor {
        let perms = permutations(self.order);
        let scale = 1.0 / factorial(self.order);
        let mut t = Tensor::zeros(self.order, self.dim);
        for (k, &c) in &self.entries {
            for p in &perms {
                let idx: Vec<usize> = p.iter().map(|&j| k[j]).collect();
                t.add(&idx, c * scale).expect("indices validated");
            }
        }
        t
    }
}

/// Collapses a per-position tensor onto sorted orbits. Entries with repeated
/// indices are rejected unless `drop_diagonal` is set.
pub fn symmetrize(raw: &Tensor, drop_diagonal: bool) -> Result<SymTensor> {
    let mut out = SymTensor::new(raw.order(), raw.dim())?;
    for (idx, c) in raw.entries() {
        let mut key = idx.to_vec();
        key.sort_unstable();
        if key.windows(2).any(|w| w[0] == w[1]) {
            if drop_diagonal {
                continue;
            }
            return Err(Error::DiagonalEntry(idx.to_vec()));
        }
        out.add(&key, c)?;
    }
    Ok(out)
}

pub fn eval_coupled(t: &SymTensor, x: &Assignment) -> Result<f64> {
    if x.groups().len() != 1 {
        return Err(Error::GroupCount { expected: 1, found: x.groups().len() });
    }
    t.eval(x.group(0))
}

pub fn eval_decoupled(t: &SymTensor, groups: &Assignment) -> Result<f64> {
    let refs: Vec<&[f64]> = groups.groups().iter().map(|g| g.as_slice()).collect();
    t.eval_decoupled(&refs)
}

/// Slice `T_i` of an order-3 tensor: `(j,k)` entry is the coefficient of
/// `x_i y_j z_k` in the decoupled form.
pub fn slice_matrix(t: &SymTensor, i: usize) -> Result<DMatrix<f64>> {
    if t.order() != 3 {
        return Err(Error::OrderMismatch { expected: "3".into(), found: t.order() });
    }
    if i >= t.dim() {
        return Err(Error::IndexOutOfRange { index: i, dim: t.dim() });
    }
    let mut m = DMatrix::zeros(t.dim(), t.dim());
    for (k, c) in t.entries() {
        if let Some(pos) = k.iter().position(|&v| v == i) {
            let rest: Vec<usize> = k.iter().enumerate().filter(|&(p, _)| p != pos).map(|(_, &v)| v).collect();
            m[(rest[0], rest[1])] += c / 6.0;
            m[(rest[1], rest[0])] += c / 6.0;
        }
    }
    Ok(m)
}
