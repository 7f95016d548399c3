use rand::Rng;

use super::SymTensor;
use crate::error::{Error, Result};

/// Exact description of the recoupling distribution built from `d` (odd)
/// hypercube vectors. A sign pattern `b` with `b_d = b_1 ... b_{d-1}` is drawn
/// uniformly; given `b`, coordinate `i` picks one group uniformly at random and
/// outputs `b_j x^(j)_i`. Coordinates are conditionally independent, so the
/// expectation of any multilinear polynomial is its value at the per-branch
/// coordinate means, averaged over branches.
#[derive(Clone, Debug)]
pub struct Recoupling {
    groups: Vec<Vec<f64>>,
    branches: Vec<Vec<f64>>,
}

pub fn recouple_cubic(x: &[f64], y: &[f64], z: &[f64]) -> Result<Recoupling> {
    recouple_odd_d(&[x.to_vec(), y.to_vec(), z.to_vec()])
}

pub fn recouple_odd_d(groups: &[Vec<f64>]) -> Result<Recoupling> {
    let d = groups.len();
    if d < 3 || d % 2 == 0 {
        return Err(Error::UnsupportedDegree(d));
    }
    let n = groups[0].len();
    for g in groups {
        if g.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: g.len() });
        }
        if g.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidAssignment("recoupling needs hypercube vectors".into()));
        }
    }
    let branches = (0..1usize << (d - 1))
        .map(|mask| {
            let mut b: Vec<f64> = (0..d - 1).map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
            b.push(b.iter().product());
            b
        })
        .collect();
    Ok(Recoupling { groups: groups.to_vec(), branches })
}

impl Recoupling {
    pub fn order(&self) -> usize {
        self.groups.len()
    }

    pub fn dim(&self) -> usize {
        self.groups[0].len()
    }

    pub fn branches(&self) -> &[Vec<f64>] {
        &self.branches
    }

    /// Coordinate means `(1/d) sum_j b_j x^(j)_i` conditioned on branch `b`.
    pub fn branch_means(&self, b: &[f64]) -> Vec<f64> {
        let d = self.order() as f64;
        (0..self.dim())
            .map(|i| self.groups.iter().zip(b).map(|(g, s)| s * g[i]).sum::<f64>() / d)
            .collect()
    }

    /// Exact expectation of a multilinear function given through its
    /// evaluation at real points.
    pub fn expectation_with<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        let total: f64 = self.branches.iter().map(|b| f(&self.branch_means(b))).sum();
        total / self.branches.len() as f64
    }

    pub fn expectation(&self, t: &SymTensor) -> Result<f64> {
        let mut err = None;
        let v = self.expectation_with(|m| match t.eval(m) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                0.0
            }
        });
        err.map_or(Ok(v), Err)
    }

    /// Coordinatewise mean of the distribution.
    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim()];
        for b in &self.branches {
            for (a, m) in acc.iter_mut().zip(self.branch_means(b)) {
                *a += m;
            }
        }
        acc.iter().map(|a| a / self.branches.len() as f64).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let b = &self.branches[rng.random_range(0..self.branches.len())];
        let d = self.order();
        (0..self.dim())
            .map(|i| {
                let j = rng.random_range(0..d);
                b[j] * self.groups[j][i]
            })
            .collect()
    }
}
