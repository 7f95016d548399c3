//! Satisfiable Max-3SAT: DIMACS parsing, the clause-polynomial decomposition
//! `psi = 7/8 + f1 + f2 + f3`, and the three-case rounding pipeline.
//!
//! Convention: `-1` is True and `+1` is False. A literal `v` has sign `+1` and
//! `-v` has sign `-1`, so a clause is falsified exactly when `sigma_i x_i = +1`
//! for all three of its literals.

mod solve;

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use num_rational::Ratio;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SeedTree;
use crate::sos_core::{GroupId, Monomial, SparsePoly, VarKind, VarSpace};
use crate::tensor_poly::SymTensor;

pub use solve::{
    branch_deg1, branch_deg2, branch_deg3, random_baseline, solve_3sat, Branch, BranchResult, Deg1Result, Deg3Path,
    SatParams, SatReport,
};

/// Literal: 0-based variable and sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub var: usize,
    pub sign: i8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CnfFormula {
    pub n: usize,
    pub clauses: Vec<[Literal; 3]>,
}

impl CnfFormula {
    /// Checks ranges, repeated variables and repeated variable triples.
    pub fn new(n: usize, clauses: Vec<[Literal; 3]>) -> Result<Self> {
        let mut triples = HashSet::new();
        for (line, c) in clauses.iter().enumerate() {
            for l in c {
                if l.var >= n || (l.sign != 1 && l.sign != -1) {
                    return Err(Error::LiteralRange { line: line + 1, literal: l.var as i64 + 1, n });
                }
            }
            if c[0].var == c[1].var || c[0].var == c[2].var || c[1].var == c[2].var {
                return Err(Error::RepeatedVariable(line + 1));
            }
            if !triples.insert(triple_key(c)) {
                return Err(Error::DuplicateTriple(line + 1));
            }
        }
        Ok(Self { n, clauses })
    }

    pub fn m(&self) -> usize {
        self.clauses.len()
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.n, self.m());
        for c in &self.clauses {
            let lits: Vec<String> = c.iter().map(|l| (l.sign as i64 * (l.var as i64 + 1)).to_string()).collect();
            let _ = writeln!(s, "{} 0", lits.join(" "));
        }
        s
    }

    /// Whether `x` (in `{+-1}^n`) satisfies clause `c`.
    pub fn clause_satisfied(c: &[Literal; 3], x: &[f64]) -> bool {
        c.iter().any(|l| (l.sign as f64) * x[l.var] < 0.0)
    }
}

fn triple_key(c: &[Literal; 3]) -> [usize; 3] {
    let mut k = [c[0].var, c[1].var, c[2].var];
    k.sort_unstable();
    k
}

/// Parses DIMACS CNF with exactly three distinct variables per clause.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<i64> = Vec::new();
    let mut start_line = 0;
    let mut triples = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('c') {
            continue;
        }
        if t.starts_with('%') {
            break;
        }
        if t.starts_with('p') {
            let parts: Vec<&str> = t.split_whitespace().collect();
            if header.is_some() || parts.len() != 4 || parts[1] != "cnf" {
                return Err(Error::DimacsHeader(line));
            }
            let n = parts[2].parse().map_err(|_| Error::DimacsHeader(line))?;
            let m = parts[3].parse().map_err(|_| Error::DimacsHeader(line))?;
            header = Some((n, m, line));
            continue;
        }
        let Some((n, _, _)) = header else {
            return Err(Error::DimacsHeader(line));
        };
        for tok in t.split_whitespace() {
            let v: i64 = tok.parse().map_err(|_| Error::DimacsHeader(line))?;
            if current.is_empty() {
                start_line = line;
            }
            if v != 0 {
                if v.unsigned_abs() as usize > n {
                    return Err(Error::LiteralRange { line, literal: v, n });
                }
                current.push(v);
                continue;
            }
            if current.len() != 3 {
                return Err(Error::ClauseWidth { line: start_line, width: current.len() });
            }
            let c = [0, 1, 2].map(|j| Literal { var: current[j].unsigned_abs() as usize - 1, sign: current[j].signum() as i8 });
            if c[0].var == c[1].var || c[0].var == c[2].var || c[1].var == c[2].var {
                return Err(Error::RepeatedVariable(start_line));
            }
            if !triples.insert(triple_key(&c)) {
                return Err(Error::DuplicateTriple(start_line));
            }
            clauses.push(c);
            current.clear();
        }
    }
    let Some((n, m, header_line)) = header else {
        return Err(Error::DimacsHeader(0));
    };
    if !current.is_empty() {
        return Err(Error::ClauseWidth { line: start_line, width: current.len() });
    }
    if clauses.len() != m {
        return Err(Error::DimacsHeader(header_line));
    }
    CnfFormula::new(n, clauses)
}

/// Exact fraction of satisfied clauses.
pub fn fraction_satisfied(f: &CnfFormula, x: &[f64]) -> Result<Ratio<i64>> {
    if x.len() != f.n {
        return Err(Error::DimensionMismatch { expected: f.n, found: x.len() });
    }
    if f.m() == 0 {
        return Ok(Ratio::from_integer(1));
    }
    let sat = f.clauses.iter().filter(|c| CnfFormula::clause_satisfied(c, x)).count();
    Ok(Ratio::new(sat as i64, f.m() as i64))
}

/// `psi = 7/8 + f1 + f2 + f3` with every coefficient an integer multiple of
/// `1/(8m)`, stored as those integers.
#[derive(Clone, Debug)]
pub struct SatDecomposition {
    pub n: usize,
    pub m: usize,
    pub num1: BTreeMap<usize, i64>,
    pub num2: BTreeMap<(usize, usize), i64>,
    pub num3: BTreeMap<(usize, usize, usize), i64>,
    pub delta: f64,
    pub space: Arc<VarSpace>,
    pub group: GroupId,
    pub f1: SparsePoly,
    pub f2: SparsePoly,
    pub f3: SparsePoly,
}

/// `c / (sqrt(n) ln n)`, with `ln n` floored at `ln 3`.
pub fn delta(n: usize, c: f64) -> f64 {
    let nf = n.max(1) as f64;
    c / (nf.sqrt() * nf.max(3.0).ln())
}

fn sign_of(v: f64) -> i64 {
    if v < 0.0 {
        -1
    } else {
        1
    }
}

/// Expands `psi_C = 1 - prod (1 + sigma_i x_i) / 8` for every clause.
pub fn decompose(f: &CnfFormula, c: f64) -> SatDecomposition {
    let mut num1 = BTreeMap::new();
    let mut num2 = BTreeMap::new();
    let mut num3 = BTreeMap::new();
    for cl in &f.clauses {
        let mut l = *cl;
        l.sort_by_key(|l| l.var);
        let s: [i64; 3] = l.map(|l| l.sign as i64);
        for j in 0..3 {
            *num1.entry(l[j].var).or_insert(0) -= s[j];
        }
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            *num2.entry((l[a].var, l[b].var)).or_insert(0) -= s[a] * s[b];
        }
        *num3.entry((l[0].var, l[1].var, l[2].var)).or_insert(0) -= s[0] * s[1] * s[2];
    }
    num1.retain(|_, v| *v != 0);
    num2.retain(|_, v| *v != 0);
    num3.retain(|_, v| *v != 0);
    let mut sp = VarSpace::new();
    let group = sp.add_group("x", f.n, VarKind::Boolean);
    let space = Arc::new(sp);
    let scale = 1.0 / (8.0 * f.m().max(1) as f64);
    let mut d = SatDecomposition {
        n: f.n,
        m: f.m(),
        num1,
        num2,
        num3,
        delta: delta(f.n, c),
        space: space.clone(),
        group,
        f1: SparsePoly::zero(),
        f2: SparsePoly::zero(),
        f3: SparsePoly::zero(),
    };
    d.f1 = d.poly1(&space, group, scale);
    d.f2 = d.poly2(&space, group, scale);
    let mut f3 = SparsePoly::zero();
    for (&(i, j, k), &v) in &d.num3 {
        f3.add_term(Monomial::from_vars(&space, &[space.var(group, i), space.var(group, j), space.var(group, k)]), v as f64 * scale);
    }
    d.f3 = f3;
    d
}

impl SatDecomposition {
    fn poly1(&self, space: &VarSpace, g: GroupId, scale: f64) -> SparsePoly {
        let mut p = SparsePoly::zero();
        for (&i, &v) in &self.num1 {
            p.add_term(Monomial::var(space.var(g, i)), v as f64 * scale);
        }
        p
    }

    fn poly2(&self, space: &VarSpace, g: GroupId, scale: f64) -> SparsePoly {
        let mut p = SparsePoly::zero();
        for (&(i, j), &v) in &self.num2 {
            p.add_term(Monomial::from_vars(space, &[space.var(g, i), space.var(g, j)]), v as f64 * scale);
        }
        p
    }

    fn scale(&self) -> f64 {
        1.0 / (8.0 * self.m.max(1) as f64)
    }

    /// `f1` over group `g` of another space.
    pub fn f1_on(&self, space: &VarSpace, g: GroupId) -> SparsePoly {
        self.poly1(space, g, self.scale())
    }

    /// `f2` over group `g` of another space.
    pub fn f2_on(&self, space: &VarSpace, g: GroupId) -> SparsePoly {
        self.poly2(space, g, self.scale())
    }

    /// Numerators of `(f1, f2, f3)(x)` over `8m`.
    pub fn numerators(&self, x: &[f64]) -> (i64, i64, i64) {
        let s: Vec<i64> = x.iter().map(|&v| sign_of(v)).collect();
        let a = self.num1.iter().map(|(&i, &v)| v * s[i]).sum();
        let b = self.num2.iter().map(|(&(i, j), &v)| v * s[i] * s[j]).sum();
        let c = self.num3.iter().map(|(&(i, j, k), &v)| v * s[i] * s[j] * s[k]).sum();
        (a, b, c)
    }

    /// Exact `psi(x)`.
    pub fn psi(&self, x: &[f64]) -> Ratio<i64> {
        if self.m == 0 {
            return Ratio::from_integer(1);
        }
        let (a, b, c) = self.numerators(x);
        Ratio::new(7 * self.m as i64 + a + b + c, 8 * self.m as i64)
    }

    pub fn f1_value(&self, x: &[f64]) -> f64 {
        self.numerators(x).0 as f64 * self.scale()
    }

    pub fn f2_value(&self, x: &[f64]) -> f64 {
        self.numerators(x).1 as f64 * self.scale()
    }

    pub fn f3_value(&self, x: &[f64]) -> f64 {
        self.numerators(x).2 as f64 * self.scale()
    }

    /// `f3` as a symmetric cubic tensor.
    pub fn f3_tensor(&self) -> SymTensor {
        let s = self.scale();
        SymTensor::from_monomials(3, self.n, self.num3.iter().map(|(&(i, j, k), &v)| (vec![i, j, k], v as f64 * s)))
            .expect("distinct indices in range")
    }

    /// Zero-diagonal symmetric `A` with `f2(x) = x^T A x`.
    pub fn f2_matrix(&self) -> nalgebra::DMatrix<f64> {
        let mut a = nalgebra::DMatrix::zeros(self.n, self.n);
        let s = self.scale();
        for (&(i, j), &v) in &self.num2 {
            a[(i, j)] += 0.5 * v as f64 * s;
            a[(j, i)] += 0.5 * v as f64 * s;
        }
        a
    }
}

/// Random formula with distinct variable triples satisfied by a hidden
/// assignment. Returns the formula and the assignment.
pub fn planted_formula(n: usize, m: usize, seed: SeedTree) -> Result<(CnfFormula, Vec<f64>)> {
    let triples = n * n.saturating_sub(1) * n.saturating_sub(2) / 6;
    if n < 3 || m > triples {
        return Err(Error::InvalidInput(format!("cannot place {m} distinct triples on {n} variables")));
    }
    let mut rng = seed.rng();
    let x: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let clauses = random_clauses(n, m, &mut rng, |c| CnfFormula::clause_satisfied(c, &x));
    Ok((CnfFormula::new(n, clauses)?, x))
}

/// Uniformly random formula with distinct variable triples.
pub fn random_formula(n: usize, m: usize, seed: SeedTree) -> Result<CnfFormula> {
    let triples = n * n.saturating_sub(1) * n.saturating_sub(2) / 6;
    if n < 3 || m > triples {
        return Err(Error::InvalidInput(format!("cannot place {m} distinct triples on {n} variables")));
    }
    let mut rng = seed.rng();
    CnfFormula::new(n, random_clauses(n, m, &mut rng, |_| true))
}

fn random_clauses<R: Rng, F: Fn(&[Literal; 3]) -> bool>(n: usize, m: usize, rng: &mut R, accept: F) -> Vec<[Literal; 3]> {
    let mut used = HashSet::new();
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let mut v = [rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n)];
        if v[0] == v[1] || v[0] == v[2] || v[1] == v[2] {
            continue;
        }
        v.sort_unstable();
        if used.contains(&v) {
            continue;
        }
        let c = loop {
            let c = v.map(|var| Literal { var, sign: if rng.random::<bool>() { 1 } else { -1 } });
            if accept(&c) {
                break c;
            }
        };
        used.insert(v);
        out.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_examples() {
        let f = parse_dimacs("p cnf 3 1\n1 2 3 0\n").unwrap();
        assert_eq!(f.m(), 1);
        assert!(f.clauses[0].iter().all(|l| l.sign == 1));
        assert!(matches!(parse_dimacs("p cnf 3 1\n1 1 2 0\n"), Err(Error::RepeatedVariable(2))));
        assert!(matches!(parse_dimacs("p cnf 3 2\n1 2 3 0\n-1 2 -3 0\n"), Err(Error::DuplicateTriple(3))));
        assert!(matches!(parse_dimacs("p cnf 3 1\n1 2 0\n"), Err(Error::ClauseWidth { line: 2, width: 2 })));
        assert!(matches!(parse_dimacs("p cnf 3 1\n1 2 4 0\n"), Err(Error::LiteralRange { literal: 4, .. })));
        assert!(matches!(parse_dimacs("p dnf 3 1\n1 2 3 0\n"), Err(Error::DimacsHeader(1))));
        assert!(matches!(parse_dimacs("1 2 3 0\n"), Err(Error::DimacsHeader(1))));
        let g = parse_dimacs("c comment\np cnf 4 2\n1 -2\n 3 0 2 3 -4 0\n").unwrap();
        assert_eq!(g.m(), 2);
        assert_eq!(parse_dimacs(&g.to_dimacs()).unwrap(), g);
    }

    #[test]
    fn single_clause_values() {
        let f = parse_dimacs("p cnf 3 1\n1 -2 3 0\n").unwrap();
        let d = decompose(&f, 0.1);
        assert_eq!(d.psi(&[-1.0, 1.0, -1.0]), Ratio::from_integer(1));
        // Unique falsifier: sigma_i x_i = +1.
        let bad = [1.0, -1.0, 1.0];
        assert_eq!(d.psi(&bad), Ratio::from_integer(0));
        assert_eq!(fraction_satisfied(&f, &bad).unwrap(), Ratio::from_integer(0));
    }

    #[test]
    fn decomposition_matches_counting() {
        let root = SeedTree::new(11);
        for t in 0..20 {
            let f = random_formula(8, 40, root.index(t)).unwrap();
            let d = decompose(&f, 0.1);
            let mut rng = root.child("x").index(t).rng();
            for _ in 0..100 {
                let x: Vec<f64> = (0..8).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
                assert_eq!(d.psi(&x), fraction_satisfied(&f, &x).unwrap());
                let (a, b, c) = (d.f1_value(&x), d.f2_value(&x), d.f3_value(&x));
                assert!(a.abs() <= 3.0 / 8.0 && b.abs() <= 3.0 / 8.0 && c.abs() <= 1.0 / 8.0);
                let xs = x.as_slice();
                assert!((d.f1.eval(xs) - a).abs() < 1e-12);
                assert!((d.f2.eval(xs) - b).abs() < 1e-12);
                assert!((d.f3.eval(xs) - c).abs() < 1e-12);
                assert!((d.f3_tensor().eval(xs).unwrap() - c).abs() < 1e-12);
                let a2 = d.f2_matrix();
                let xv = nalgebra::DVector::from_column_slice(xs);
                assert!(((xv.transpose() * &a2 * &xv)[(0, 0)] - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn planted_assignment_observation() {
        let root = SeedTree::new(5);
        for t in 0..20 {
            let (f, x) = planted_formula(12, 60, root.index(t)).unwrap();
            let d = decompose(&f, 0.1);
            assert_eq!(d.psi(&x), Ratio::from_integer(1));
            let (a, b, _) = d.numerators(&x);
            assert!(a + b >= 0);
        }
    }
}
