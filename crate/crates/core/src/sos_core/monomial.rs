use std::collections::BTreeMap;
use std::fmt;

use smallvec::SmallVec;

/// Index of a scalar variable inside a [`VarSpace`].
pub type VarId = u32;
/// Index of a variable group inside a [`VarSpace`].
pub type GroupId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    /// Satisfies `v^2 = 1`; monomials reduce to multilinear form.
    Boolean,
    /// Member of a group constrained to the unit sphere.
    Sphere,
    /// Unconstrained real variable.
    Free,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarGroup {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    pub kind: VarKind,
}

/// Named groups of scalar variables and their reduction rules.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VarSpace {
    groups: Vec<VarGroup>,
    kinds: Vec<VarKind>,
    owner: Vec<GroupId>,
}

impl VarSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_group(&mut self, name: &str, len: usize, kind: VarKind) -> GroupId {
        let offset = self.kinds.len();
        let id = self.groups.len();
        self.groups.push(VarGroup { name: name.to_string(), offset, len, kind });
        self.kinds.extend(std::iter::repeat_n(kind, len));
        self.owner.extend(std::iter::repeat_n(id, len));
        id
    }

    pub fn groups(&self) -> &[VarGroup] {
        &self.groups
    }

    pub fn group(&self, g: GroupId) -> &VarGroup {
        &self.groups[g]
    }

    pub fn group_by_name(&self, name: &str) -> Option<GroupId> {
        self.groups.iter().position(|g| g.name == name)
    }

    pub fn var(&self, g: GroupId, i: usize) -> VarId {
        let grp = &self.groups[g];
        assert!(i < grp.len, "variable {i} out of range for group {}", grp.name);
        (grp.offset + i) as VarId
    }

    pub fn group_vars(&self, g: GroupId) -> impl Iterator<Item = VarId> + '_ {
        let grp = &self.groups[g];
        (grp.offset..grp.offset + grp.len).map(|v| v as VarId)
    }

    pub fn num_vars(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, v: VarId) -> VarKind {
        self.kinds[v as usize]
    }

    pub fn group_of(&self, v: VarId) -> GroupId {
        self.owner[v as usize]
    }

    pub fn var_name(&self, v: VarId) -> String {
        let g = &self.groups[self.owner[v as usize]];
        format!("{}[{}]", g.name, v as usize - g.offset + 1)
    }
}

/// Sorted multiset of variables, always stored in reduced form.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(SmallVec<[VarId; 8]>);

impl Monomial {
    pub fn one() -> Self {
        Self(SmallVec::new())
    }

    pub fn var(v: VarId) -> Self {
        Self(smallvec::smallvec![v])
    }

    /// Builds a monomial from variables in any order, applying `v^2 = 1` to
    /// Boolean variables.
    pub fn from_vars(space: &VarSpace, vars: &[VarId]) -> Self {
        let mut v: SmallVec<[VarId; 8]> = vars.iter().copied().collect();
        v.sort_unstable();
        Self(reduce(space, v))
    }

    pub fn vars(&self) -> &[VarId] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &Monomial, space: &VarSpace) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out: SmallVec<[VarId; 8]> = SmallVec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                out.push(a[i]);
                i += 1;
            } else {
                out.push(b[j]);
                j += 1;
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(reduce(space, out))
    }

    /// Exponent of each variable, as `(var, power)` pairs in increasing order.
    pub fn powers(&self) -> Vec<(VarId, usize)> {
        let mut out: Vec<(VarId, usize)> = Vec::new();
        for &v in &self.0 {
            match out.last_mut() {
                Some((w, p)) if *w == v => *p += 1,
                _ => out.push((v, 1)),
            }
        }
        out
    }

    /// Degree contributed by the variables of one group.
    pub fn group_degree(&self, space: &VarSpace, g: GroupId) -> usize {
        self.0.iter().filter(|&&v| space.group_of(v) == g).count()
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.0.iter().map(|&v| point[v as usize]).product()
    }

    /// If `t` divides `self` as a multiset, the quotient.
    pub fn divide(&self, t: &Monomial) -> Option<Monomial> {
        let mut out: SmallVec<[VarId; 8]> = SmallVec::new();
        let mut j = 0;
        for &v in &self.0 {
            if j < t.0.len() && t.0[j] == v {
                j += 1;
            } else {
                out.push(v);
            }
        }
        (j == t.0.len()).then_some(Monomial(out))
    }

    pub fn display<'a>(&'a self, space: &'a VarSpace) -> MonomialDisplay<'a> {
        MonomialDisplay { m: self, space }
    }
}

fn reduce(space: &VarSpace, v: SmallVec<[VarId; 8]>) -> SmallVec<[VarId; 8]> {
    if v.len() < 2 {
        return v;
    }
    let mut out: SmallVec<[VarId; 8]> = SmallVec::with_capacity(v.len());
    for x in v {
        if space.kind(x) == VarKind::Boolean && out.last() == Some(&x) {
            out.pop();
        } else {
            out.push(x);
        }
    }
    out
}

/// Canonical basis order: by degree, then lexicographic.
pub fn canonical_cmp(a: &Monomial, b: &Monomial) -> std::cmp::Ordering {
    a.degree().cmp(&b.degree()).then_with(|| a.cmp(b))
}

pub struct MonomialDisplay<'a> {
    m: &'a Monomial,
    space: &'a VarSpace,
}

impl fmt::Display for MonomialDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.m.is_one() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .m
            .powers()
            .into_iter()
            .map(|(v, p)| if p == 1 { self.space.var_name(v) } else { format!("{}^{p}", self.space.var_name(v)) })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// Sparse polynomial over the variables of a [`VarSpace`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparsePoly {
    terms: BTreeMap<Monomial, f64>,
}

impl SparsePoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn monomial(m: Monomial, c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn var(v: VarId) -> Self {
        Self::monomial(Monomial::var(v), 1.0)
    }

    /// Linear form `sum_i c_i v_i` over the variables of a group.
    pub fn linear(space: &VarSpace, g: GroupId, coeffs: &[f64]) -> Self {
        let mut p = Self::zero();
        for (i, &c) in coeffs.iter().enumerate() {
            p.add_term(Monomial::var(space.var(g, i)), c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        let slot = self.terms.entry(m.clone()).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.terms.remove(&m);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> + '_ {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn l1_norm(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    pub fn add(&self, other: &SparsePoly) -> SparsePoly {
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m.clone(), c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> SparsePoly {
        let mut out = SparsePoly::zero();
        for (m, c) in self.terms() {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    pub fn sub(&self, other: &SparsePoly) -> SparsePoly {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &SparsePoly, space: &VarSpace) -> SparsePoly {
        let mut out = SparsePoly::zero();
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                out.add_term(a.mul(b, space), ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: usize, space: &VarSpace) -> SparsePoly {
        let mut out = SparsePoly::constant(1.0);
        for _ in 0..k {
            out = out.mul(self, space);
        }
        out
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.terms().map(|(m, c)| c * m.eval(point)).sum()
    }
}
