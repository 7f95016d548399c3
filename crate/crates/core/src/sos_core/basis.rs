use std::collections::HashMap;
use std::sync::Arc;

use super::monomial::{canonical_cmp, Monomial, VarKind, VarSpace};
use crate::error::{Error, Result};

/// Ordered monomial list with a reverse lookup.
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    space: Arc<VarSpace>,
    monomials: Vec<Monomial>,
    index: HashMap<Monomial, usize>,
}

impl MonomialBasis {
    /// Deduplicates and sorts the given monomials canonically.
    pub fn from_monomials<I>(space: Arc<VarSpace>, monomials: I) -> Self
    where
        I: IntoIterator<Item = Monomial>,
    {
        let mut list: Vec<Monomial> = monomials.into_iter().collect();
        list.sort_by(canonical_cmp);
        list.dedup();
        let index = list.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        Self { space, monomials: list, index }
    }

    /// Keeps the given order; panics on duplicates.
    pub fn from_ordered(space: Arc<VarSpace>, monomials: Vec<Monomial>) -> Self {
        let index: HashMap<Monomial, usize> = monomials.iter().enumerate().map(|(i, m)| (m.clone(), i)).collect();
        assert_eq!(index.len(), monomials.len(), "duplicate monomials in basis");
        Self { space, monomials, index }
    }

    pub fn space(&self) -> &Arc<VarSpace> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn get(&self, i: usize) -> &Monomial {
        &self.monomials[i]
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn max_degree(&self) -> usize {
        self.monomials.iter().map(|m| m.degree()).max().unwrap_or(0)
    }
}

/// Number of monomials of degree at most `degree` over the whole space.
pub fn basis_count(space: &VarSpace, degree: usize) -> u128 {
    let mut poly = vec![0u128; degree + 1];
    poly[0] = 1;
    for v in 0..space.num_vars() {
        let boolean = space.kind(v as u32) == VarKind::Boolean;
        let mut next = vec![0u128; degree + 1];
        for (d, &c) in poly.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let top = if boolean { (d + 1).min(degree) } else { degree };
            for e in d..=top {
                next[e] = next[e].saturating_add(c);
            }
        }
        poly = next;
    }
    poly.iter().fold(0u128, |a, &b| a.saturating_add(b))
}

/// All monomials of degree at most `degree` over the space (multilinear in
/// Boolean variables, with powers otherwise), optionally filtered.
pub fn build_basis(
    space: Arc<VarSpace>,
    degree: usize,
    filter: Option<&dyn Fn(&Monomial) -> bool>,
    cap: usize,
) -> Result<MonomialBasis> {
    let count = basis_count(&space, degree);
    let limit = if filter.is_some() { cap.saturating_mul(200) } else { cap } as u128;
    if count > limit {
        return Err(Error::SizeCap { what: "monomial basis".into(), size: count.min(usize::MAX as u128) as usize, cap });
    }
    let mut out = Vec::new();
    let mut cur = Vec::new();
    enumerate(&space, 0, degree, &mut cur, &mut out, filter);
    if out.len() > cap {
        return Err(Error::SizeCap { what: "monomial basis".into(), size: out.len(), cap });
    }
    Ok(MonomialBasis::from_monomials(space, out))
}

fn enumerate(
    space: &VarSpace,
    var: usize,
    remaining: usize,
    cur: &mut Vec<u32>,
    out: &mut Vec<Monomial>,
    filter: Option<&dyn Fn(&Monomial) -> bool>,
) {
    if var == space.num_vars() || remaining == 0 {
        let m = Monomial::from_vars(space, cur);
        if filter.is_none_or(|f| f(&m)) {
            out.push(m);
        }
        return;
    }
    let max_pow = if space.kind(var as u32) == VarKind::Boolean { 1 } else { remaining };
    for p in 0..=max_pow {
        for _ in 0..p {
            cur.push(var as u32);
        }
        enumerate(space, var + 1, remaining - p, cur, out, filter);
        for _ in 0..p {
            cur.pop();
        }
    }
}
