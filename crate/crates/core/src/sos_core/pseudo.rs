use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::basis::MonomialBasis;
use super::monomial::{Monomial, SparsePoly, VarId, VarKind, VarSpace};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::tensor_poly::Domain;

/// Moment matrix over a monomial basis, possibly split into PSD blocks.
/// Entries outside every block are unused.
#[derive(Clone, Debug)]
pub struct PseudoDistribution {
    basis: Arc<MonomialBasis>,
    moments: DMatrix<f64>,
    degree: usize,
    domain: Domain,
    blocks: Vec<Vec<usize>>,
    factor: HashMap<Monomial, (usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    /// `|pE 1 - 1|`, or `None` when the constant monomial is not in the basis.
    pub normalization: Option<f64>,
    pub consistency: f64,
    pub block_min_eigs: Vec<f64>,
    pub domain_identity: f64,
    pub passed: bool,
}

impl ValidationReport {
    pub fn min_eig(&self) -> f64 {
        self.block_min_eigs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl PseudoDistribution {
    pub fn new(
        basis: Arc<MonomialBasis>,
        moments: DMatrix<f64>,
        degree: usize,
        domain: Domain,
        blocks: Option<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        let n = basis.len();
        if moments.nrows() != n || moments.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: moments.nrows() });
        }
        let blocks = blocks.unwrap_or_else(|| vec![(0..n).collect()]);
        if blocks.iter().flatten().any(|&i| i >= n) {
            return Err(Error::InvalidMoment("block index out of range".into()));
        }
        let space = basis.space().clone();
        let mut factor = HashMap::new();
        for b in &blocks {
            for (a, &i) in b.iter().enumerate() {
                for &j in &b[a..] {
                    let (lo, hi) = (i.min(j), i.max(j));
                    factor.entry(basis.get(lo).mul(basis.get(hi), &space)).or_insert((lo, hi));
                }
            }
        }
        Ok(Self { basis, moments, degree, domain, blocks, factor })
    }

    /// Fills the block entries from a moment functional.
    pub fn from_moment_fn<F: Fn(&Monomial) -> f64>(
        basis: Arc<MonomialBasis>,
        degree: usize,
        domain: Domain,
        blocks: Option<Vec<Vec<usize>>>,
        f: F,
    ) -> Result<Self> {
        let n = basis.len();
        let blocks = blocks.unwrap_or_else(|| vec![(0..n).collect()]);
        let space = basis.space().clone();
        let mut m = DMatrix::zeros(n, n);
        let mut cache: HashMap<Monomial, f64> = HashMap::new();
        for b in &blocks {
            for &i in b {
                for &j in b {
                    let prod = basis.get(i).mul(basis.get(j), &space);
                    let v = *cache.entry(prod).or_insert_with_key(|k| f(k));
                    m[(i, j)] = v;
                }
            }
        }
        Self::new(basis, m, degree, domain, Some(blocks))
    }

    /// Mixture of point masses; points are full assignments of the space.
    pub fn from_points(
        basis: Arc<MonomialBasis>,
        degree: usize,
        domain: Domain,
        points: &[(f64, Vec<f64>)],
    ) -> Result<Self> {
        let total: f64 = points.iter().map(|(w, _)| w).sum();
        Self::from_moment_fn(basis, degree, domain, None, |m| {
            points.iter().map(|(w, p)| w * m.eval(p)).sum::<f64>() / total
        })
    }

    pub fn basis(&self) -> &Arc<MonomialBasis> {
        &self.basis
    }

    pub fn space(&self) -> &Arc<VarSpace> {
        self.basis.space()
    }

    pub fn moments(&self) -> &DMatrix<f64> {
        &self.moments
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Whether `m` factors inside one block.
    pub fn covers(&self, m: &Monomial) -> bool {
        self.factor.contains_key(m)
    }

    pub fn moment(&self, m: &Monomial) -> Result<f64> {
        match self.factor.get(m) {
            Some(&(i, j)) => Ok(self.moments[(i, j)]),
            None => Err(Error::BasisCoverage(m.display(self.space()).to_string())),
        }
    }

    /// Pseudo-expectation of a polynomial.
    pub fn pe(&self, p: &SparsePoly) -> Result<f64> {
        let deg = p.degree();
        if deg > self.degree {
            return Err(Error::DegreeOverflow { degree: deg, limit: self.degree });
        }
        let mut acc = 0.0;
        for (m, c) in p.terms() {
            acc += c * self.moment(m)?;
        }
        Ok(acc)
    }

    /// Matrix `pE[v_a v_b]` over the given variables.
    pub fn second_moments(&self, vars: &[VarId]) -> Result<DMatrix<f64>> {
        let space = self.space().clone();
        let n = vars.len();
        let mut out = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let m = Monomial::var(vars[a]).mul(&Monomial::var(vars[b]), &space);
                let v = self.moment(&m)?;
                out[(a, b)] = v;
                out[(b, a)] = v;
            }
        }
        Ok(out)
    }

    pub fn first_moments(&self, vars: &[VarId]) -> Result<Vec<f64>> {
        vars.iter().map(|&v| self.moment(&Monomial::var(v))).collect()
    }

    pub fn block_matrix(&self, b: usize) -> DMatrix<f64> {
        let idx = &self.blocks[b];
        DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.moments[(idx[r], idx[c])])
    }

    pub fn validate(&self, tol: &Tolerances) -> ValidationReport {
        let space = self.space().clone();
        let normalization = self.basis.index_of(&Monomial::one()).map(|i| (self.moments[(i, i)] - 1.0).abs());
        let mut consistency = 0.0f64;
        for b in &self.blocks {
            for &i in b {
                for &j in b {
                    let prod = self.basis.get(i).mul(self.basis.get(j), &space);
                    let &(r, c) = &self.factor[&prod];
                    consistency = consistency.max((self.moments[(i, j)] - self.moments[(r, c)]).abs());
                }
            }
        }
        let block_min_eigs: Vec<f64> = (0..self.blocks.len())
            .map(|b| {
                let m = self.block_matrix(b);
                if m.nrows() == 0 {
                    return 0.0;
                }
                m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
            })
            .collect();
        let domain_identity = self.sphere_identity_violation();
        let passed = normalization.is_none_or(|v| v <= tol.normalization)
            && consistency <= tol.consistency
            && block_min_eigs.iter().all(|&e| e >= -tol.psd)
            && domain_identity <= tol.domain_identity;
        ValidationReport { normalization, consistency, block_min_eigs, domain_identity, passed }
    }

    /// Largest `|sum_v pE[v^2 m] - pE[m]|` over sphere groups and monomials
    /// for which every term factors.
    fn sphere_identity_violation(&self) -> f64 {
        let space = self.space().clone();
        let mut worst = 0.0f64;
        for (g, grp) in space.groups().iter().enumerate() {
            if grp.kind != VarKind::Sphere {
                continue;
            }
            let squares: Vec<Monomial> =
                space.group_vars(g).map(|v| Monomial::from_vars(&space, &[v, v])).collect();
            for (m, &(i, j)) in &self.factor {
                let mut total = 0.0;
                let mut ok = true;
                for s in &squares {
                    match self.factor.get(&m.mul(s, &space)) {
                        Some(&(r, c)) => total += self.moments[(r, c)],
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    worst = worst.max((total - self.moments[(i, j)]).abs());
                }
            }
        }
        worst
    }

    /// Reweighting by the sum of squares `sum_i s_i^2`:
    /// `pE'[p] = pE[p * sum s_i^2] / pE[sum s_i^2]`.
    ///
    /// The new basis is the largest set `B'` inside one block such that
    /// `u * t` stays in that block for every `u` in `B'` and every monomial `t`
    /// of the `s_i`; the new moment matrix is `sum_i S_i^T M S_i / Z`.
    pub fn reweight(&self, squares: &[SparsePoly], tol: &Tolerances) -> Result<PseudoDistribution> {
        let space = self.space().clone();
        let mut mass = 0.0;
        for s in squares {
            mass += self.pe(&s.mul(s, &space))?;
        }
        if !(mass > tol.reweight) {
            return Err(Error::DegenerateReweight { mass });
        }
        let mut ts: Vec<Monomial> = squares.iter().flat_map(|s| s.terms().map(|(m, _)| m.clone())).collect();
        ts.sort();
        ts.dedup();
        if ts.is_empty() {
            return Err(Error::DegenerateReweight { mass: 0.0 });
        }
        let anchor = ts.iter().find(|t| t.is_one()).unwrap_or(&ts[0]).clone();

        let mut best: Option<(usize, Vec<Monomial>)> = None;
        for (bi, block) in self.blocks.iter().enumerate() {
            let members: HashSet<usize> = block.iter().copied().collect();
            let mut cands: Vec<Monomial> = Vec::new();
            for &i in block {
                let b = self.basis.get(i);
                if let Some(u) = b.divide(&anchor) {
                    cands.push(u);
                }
                let u = b.mul(&anchor, &space);
                if &u.mul(&anchor, &space) == b {
                    cands.push(u);
                }
            }
            cands.sort();
            cands.dedup();
            let keep: Vec<Monomial> = cands
                .into_iter()
                .filter(|u| {
                    ts.iter().all(|t| self.basis.index_of(&u.mul(t, &space)).is_some_and(|k| members.contains(&k)))
                })
                .collect();
            if best.as_ref().is_none_or(|(_, b)| keep.len() > b.len()) {
                best = Some((bi, keep));
            }
        }
        let (_, keep) = best.expect("at least one block");
        if keep.is_empty() {
            return Err(Error::BasisCoverage("reweighting leaves an empty basis".into()));
        }
        let new_basis = Arc::new(MonomialBasis::from_monomials(space.clone(), keep));
        let k = new_basis.len();
        let mut out = DMatrix::zeros(k, k);
        for s in squares {
            let terms: Vec<(&Monomial, f64)> = s.terms().collect();
            // rows[a] = list of (old index, coefficient) for u_a * s.
            let rows: Vec<Vec<(usize, f64)>> = new_basis
                .monomials()
                .iter()
                .map(|u| terms.iter().map(|(t, c)| (self.basis.index_of(&u.mul(t, &space)).unwrap(), *c)).collect())
                .collect();
            for a in 0..k {
                for c in a..k {
                    let mut v = 0.0;
                    for &(i, ci) in &rows[a] {
                        for &(j, cj) in &rows[c] {
                            v += ci * cj * self.moments[(i, j)];
                        }
                    }
                    out[(a, c)] += v;
                    if a != c {
                        out[(c, a)] += v;
                    }
                }
            }
        }
        out /= mass;
        let degree = 2 * new_basis.max_degree();
        PseudoDistribution::new(new_basis, out, degree, self.domain, None)
    }

    /// Text dump: header `basis-size degree domain`, then the matrix row by row.
    pub fn to_text(&self) -> String {
        let n = self.basis.len();
        let mut s = format!("{} {} {}\n", n, self.degree, self.domain.name());
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{:?}", self.moments[(i, j)])).collect();
            writeln!(s, "{}", row.join(" ")).unwrap();
        }
        s
    }
}

/// Parses a moment dump back into `(degree, domain, matrix)`.
pub fn parse_moment_dump(text: &str) -> Result<(usize, Domain, DMatrix<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let perr = |msg: &str| Error::Parse { line: 0, msg: msg.to_string() };
    let header: Vec<&str> = lines.next().ok_or_else(|| perr("missing header"))?.split_whitespace().collect();
    if header.len() != 3 {
        return Err(perr("header must be `size degree domain`"));
    }
    let n: usize = header[0].parse().map_err(|_| perr("bad size"))?;
    let degree: usize = header[1].parse().map_err(|_| perr("bad degree"))?;
    let domain = Domain::parse(header[2])?;
    let mut data = Vec::with_capacity(n * n);
    for l in lines {
        for t in l.split_whitespace() {
            data.push(t.parse::<f64>().map_err(|_| perr("bad value"))?);
        }
    }
    if data.len() != n * n {
        return Err(perr("wrong number of entries"));
    }
    Ok((degree, domain, DMatrix::from_row_slice(n, n, &data)))
}

/// Moments of the uniform measure: uniform on each Boolean variable and on
/// each sphere group, standard Gaussian on free variables, all independent.
pub fn uniform_moment(space: &VarSpace, m: &Monomial) -> f64 {
    let mut per_group: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut value = 1.0;
    for (v, p) in m.powers() {
        match space.kind(v) {
            VarKind::Boolean => {
                if p % 2 == 1 {
                    return 0.0;
                }
            }
            VarKind::Free => {
                if p % 2 == 1 {
                    return 0.0;
                }
                value *= double_factorial(p - 1);
            }
            VarKind::Sphere => per_group.entry(space.group_of(v)).or_default().push(p),
        }
    }
    for (g, pows) in per_group {
        if pows.iter().any(|p| p % 2 == 1) {
            return 0.0;
        }
        let n = space.group(g).len as f64;
        let s: usize = pows.iter().sum::<usize>() / 2;
        let num: f64 = pows.iter().map(|&p| double_factorial(p - 1)).product();
        let den: f64 = (0..s).map(|j| n + 2.0 * j as f64).product();
        value *= num / den;
    }
    value
}

fn double_factorial(k: usize) -> f64 {
    let mut v = 1.0;
    let mut i = k as i64;
    while i > 1 {
        v *= i as f64;
        i -= 2;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sos_core::build_basis;

    fn cube_space(n: usize) -> Arc<VarSpace> {
        let mut s = VarSpace::new();
        s.add_group("x", n, VarKind::Boolean);
        Arc::new(s)
    }

    fn uniform(n: usize, d: usize) -> PseudoDistribution {
        let s = cube_space(n);
        let b = Arc::new(build_basis(s.clone(), d, None, 1000).unwrap());
        PseudoDistribution::from_moment_fn(b, 2 * d, Domain::Hypercube, None, |m| uniform_moment(&s, m)).unwrap()
    }

    #[test]
    fn expectation_examples() {
        let mu = uniform(2, 1);
        let s = mu.space().clone();
        assert_eq!(mu.pe(&SparsePoly::constant(1.0)).unwrap(), 1.0);
        let x1 = SparsePoly::var(0);
        assert_eq!(mu.pe(&x1.mul(&x1, &s)).unwrap(), 1.0);
        assert_eq!(mu.pe(&SparsePoly::var(0).mul(&SparsePoly::var(1), &s)).unwrap(), 0.0);
        // x1*x2*x1 reduces to x2.
        let p = SparsePoly::var(0).mul(&SparsePoly::var(1), &s).mul(&x1, &s);
        assert_eq!(p.degree(), 1);
        assert_eq!(mu.pe(&p).unwrap(), 0.0);
    }

    #[test]
    fn coverage_and_degree_errors() {
        let mut mu = uniform(3, 1);
        let m = Monomial::from_vars(mu.space(), &[0, 1, 2]);
        let p = SparsePoly::monomial(m, 1.0);
        assert!(matches!(mu.pe(&p), Err(Error::DegreeOverflow { .. })));
        mu.degree = 4;
        assert!(matches!(mu.pe(&p), Err(Error::BasisCoverage(_))));
    }

    #[test]
    fn validate_examples() {
        let tol = Tolerances::default();
        let mu = uniform(3, 3);
        let r = mu.validate(&tol);
        assert!(r.passed);
        assert!(r.normalization.unwrap() <= 1e-12 && r.consistency <= 1e-12);
        assert!((r.min_eig() - 1.0).abs() < 1e-12);

        let mut bad = mu.clone();
        bad.moments[(0, 0)] = 0.9;
        let r = bad.validate(&tol);
        assert!((r.normalization.unwrap() - 0.1).abs() < 1e-12);
        assert!(!r.passed);

        let s = cube_space(4);
        let b = Arc::new(build_basis(s, 2, None, 100).unwrap());
        let x = vec![1.0, -1.0, -1.0, 1.0];
        let point = PseudoDistribution::from_points(b, 4, Domain::Hypercube, &[(1.0, x)]).unwrap();
        assert!(point.validate(&tol).passed);
    }

    #[test]
    fn consistency_violation_detected() {
        let mut mu = uniform(2, 1);
        // x1*x2 appears at (1,2) and (2,1); break the symmetry of one copy.
        mu.moments[(1, 2)] = 0.3;
        let r = mu.validate(&Tolerances::default());
        assert!(r.consistency > 0.1 && !r.passed);
    }

    #[test]
    fn sphere_uniform_moments() {
        let mut s = VarSpace::new();
        s.add_group("y", 3, VarKind::Sphere);
        let s = Arc::new(s);
        let sq = Monomial::from_vars(&s, &[0, 0]);
        assert!((uniform_moment(&s, &sq) - 1.0 / 3.0).abs() < 1e-15);
        let q = Monomial::from_vars(&s, &[0, 0, 0, 0]);
        assert!((uniform_moment(&s, &q) - 3.0 / 15.0).abs() < 1e-15);
        let b = Arc::new(build_basis(s.clone(), 2, None, 100).unwrap());
        let mu = PseudoDistribution::from_moment_fn(b, 4, Domain::Sphere, None, |m| uniform_moment(&s, m)).unwrap();
        let r = mu.validate(&Tolerances::default());
        assert!(r.passed, "{r:?}");
        assert!(r.domain_identity < 1e-14);
    }

    #[test]
    fn reweight_examples() {
        let tol = Tolerances::default();
        let mu = uniform(1, 1);
        let same = mu.reweight(&[SparsePoly::constant(1.0)], &tol).unwrap();
        assert_eq!(same.moments(), mu.moments());

        let s = mu.space().clone();
        let r = SparsePoly::var(0).add(&SparsePoly::constant(1.0));
        let mu2 = mu.reweight(&[r], &tol).unwrap();
        assert!((mu2.pe(&SparsePoly::var(0)).unwrap() - 1.0).abs() < 1e-15);
        assert!(mu2.validate(&tol).passed);
        assert!((mu2.pe(&SparsePoly::var(0).mul(&SparsePoly::var(0), &s)).unwrap() - 1.0).abs() < 1e-15);

        let bad = SparsePoly::var(0).sub(&SparsePoly::var(0));
        assert!(mu.reweight(&[bad], &tol).is_err());
    }

    #[test]
    fn reweight_matches_definition() {
        let tol = Tolerances::default();
        let mu = uniform(3, 2);
        let s = mu.space().clone();
        let sq = SparsePoly::var(0).add(&SparsePoly::var(1).scale(0.5)).add(&SparsePoly::constant(0.3));
        let nu = mu.reweight(&[sq.clone()], &tol).unwrap();
        let r = sq.mul(&sq, &s);
        let z = mu.pe(&r).unwrap();
        for p in [SparsePoly::var(2), SparsePoly::var(0).mul(&SparsePoly::var(1), &s), SparsePoly::var(1)] {
            let lhs = nu.pe(&p).unwrap();
            let rhs = mu.pe(&p.mul(&r, &s)).unwrap() / z;
            assert!((lhs - rhs).abs() < 1e-12);
        }
        assert!(nu.validate(&tol).passed);
    }

    #[test]
    fn moment_dump_round_trip() {
        let mu = uniform(2, 1);
        let (deg, dom, m) = parse_moment_dump(&mu.to_text()).unwrap();
        assert_eq!(deg, 2);
        assert_eq!(dom, Domain::Hypercube);
        assert_eq!(&m, mu.moments());
    }
}
