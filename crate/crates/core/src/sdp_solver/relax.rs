//! Canonical moment relaxations of tensor maximization problems.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::admm::{solve, SolveResult, SolverParams, WarmStart};
use super::problem::Mode;
use super::program::{CompiledProgram, Extraction, MomentProgram};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::sos_core::{build_basis, GroupId, Monomial, SparsePoly, VarKind, VarSpace};
use crate::tensor_poly::{Domain, SymTensor, Tensor};

/// Which monomials index the moment matrix of a decoupled relaxation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisPattern {
    /// Sampled-group monomials (one variable per sampled group) plus the
    /// bilinear-group monomials needed by the rounding: bidegrees
    /// `(0,0),(1,0),(0,1),(1,1),(2,1),(1,2)` at level 1 and all monomials of
    /// degree `<= 2k+2` at level `k >= 2`.
    Compact,
    /// `(y,z)`-monomials of degree `<= 3k` plus `x_i` times `(y,z)`-monomials
    /// of degree `<= 3k-1` (cubic only).
    Split,
    /// Every monomial of degree `<= ell/2`.
    Full,
}

impl BasisPattern {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "compact" => Ok(Self::Compact),
            "split" => Ok(Self::Split),
            "full" => Ok(Self::Full),
            _ => Err(Error::InvalidInput(format!("unknown basis pattern `{s}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Compact => "compact",
            Self::Split => "split",
            Self::Full => "full",
        }
    }
}

#[derive(Clone, Debug)]
pub enum Axiom {
    /// `g >= 0`, localized on every basis monomial `u` with `2 deg u + deg g <= ell`.
    NonNeg(SparsePoly),
    /// `g >= 0` localized on an explicit basis.
    Localized(SparsePoly, Vec<Monomial>),
    /// `g = 0`.
    Zero(SparsePoly),
}

#[derive(Clone, Copy, Debug)]
pub enum Objective<'a> {
    /// `f(x) = sum T x_i x_j x_k ...` over a single group.
    Coupled(&'a SymTensor),
    /// `f~(x1, ..., xd) = sum T[i1..id] x1_i1 ... xd_id`.
    Decoupled(&'a Tensor),
}

#[derive(Clone, Debug)]
pub struct RelaxationSpec {
    /// Relaxation degree `ell` (even).
    pub degree: usize,
    pub domain: Domain,
    pub pattern: BasisPattern,
    pub cap: usize,
}

impl RelaxationSpec {
    pub fn new(degree: usize, domain: Domain) -> Self {
        Self { degree, domain, pattern: BasisPattern::Compact, cap: crate::config::DEFAULT_BASIS_CAP }
    }
}

/// An assembled relaxation together with its variable layout.
#[derive(Clone, Debug)]
pub struct Relaxation {
    pub compiled: CompiledProgram,
    pub space: Arc<VarSpace>,
    /// Variable groups in tensor-position order.
    pub groups: Vec<GroupId>,
    pub spec: RelaxationSpec,
    pub basis_size: usize,
}

/// Variable space for an order-`d` objective: groups `x, y, z` for `d = 3`,
/// `x1..xd` otherwise, or a single `x` when coupled.
pub fn tensor_space(n: usize, d: usize, domain: Domain, coupled: bool) -> (Arc<VarSpace>, Vec<GroupId>) {
    let kind = match domain {
        Domain::Hypercube => VarKind::Boolean,
        Domain::Sphere => VarKind::Sphere,
    };
    let mut s = VarSpace::new();
    let groups = if coupled {
        vec![s.add_group("x", n, kind)]
    } else if d == 3 {
        ["x", "y", "z"].iter().map(|name| s.add_group(name, n, kind)).collect()
    } else {
        (1..=d).map(|p| s.add_group(&format!("x{p}"), n, kind)).collect()
    };
    (Arc::new(s), groups)
}

/// `sum T[i1..id] x1_i1 ... xd_id` as a polynomial over the given groups.
pub fn decoupled_poly(t: &Tensor, space: &VarSpace, groups: &[GroupId]) -> SparsePoly {
    let mut p = SparsePoly::zero();
    for (idx, c) in t.entries() {
        let vars: Vec<u32> = idx.iter().zip(groups).map(|(&i, &g)| space.var(g, i)).collect();
        p.add_term(Monomial::from_vars(space, &vars), c);
    }
    p
}

/// `sum_{tuples} c x_i x_j x_k ...` over one group.
pub fn coupled_poly(t: &SymTensor, space: &VarSpace, group: GroupId) -> SparsePoly {
    let mut p = SparsePoly::zero();
    for (idx, c) in t.entries() {
        let vars: Vec<u32> = idx.iter().map(|&i| space.var(group, i)).collect();
        p.add_term(Monomial::from_vars(space, &vars), c);
    }
    p
}

/// Basis for a decoupled objective of order `groups.len()` at level `k`.
/// The first `d-2` groups are the sampled ones; the last two are bilinear.
pub fn decoupled_basis(
    space: &Arc<VarSpace>,
    groups: &[GroupId],
    pattern: BasisPattern,
    k: usize,
    cap: usize,
) -> Result<Vec<Monomial>> {
    let d = groups.len();
    if d < 3 {
        return Err(Error::UnsupportedDegree(d));
    }
    let sampled = &groups[..d - 2];
    let (gy, gz) = (groups[d - 2], groups[d - 1]);
    let half = d * k / 2 + (d * k) % 2;
    let degs = |m: &Monomial| -> (Vec<usize>, usize, usize) {
        let s: Vec<usize> = sampled.iter().map(|&g| m.group_degree(space, g)).collect();
        (s, m.group_degree(space, gy), m.group_degree(space, gz))
    };
    let basis = match pattern {
        BasisPattern::Full => build_basis(space.clone(), half, None, cap)?,
        BasisPattern::Split => {
            if d != 3 {
                return Err(Error::InvalidInput("split pattern is defined for cubic objectives".into()));
            }
            let f = |m: &Monomial| {
                let (s, a, b) = degs(m);
                (s[0] == 0 && a + b <= 3 * k) || (s[0] == 1 && a + b < 3 * k)
            };
            build_basis(space.clone(), 3 * k, Some(&f), cap)?
        }
        BasisPattern::Compact => {
            let top = if k == 1 { 3.max(d - 2) } else { (2 * k + 2).max(d - 2) };
            let f = |m: &Monomial| {
                let (s, a, b) = degs(m);
                let sampled_deg: usize = s.iter().sum();
                if sampled_deg > 0 {
                    a == 0 && b == 0 && s.iter().all(|&e| e == 1)
                } else if k == 1 {
                    matches!((a, b), (0, 0) | (1, 0) | (0, 1) | (1, 1) | (2, 1) | (1, 2))
                } else {
                    a + b <= 2 * k + 2
                }
            };
            build_basis(space.clone(), top, Some(&f), cap)?
        }
    };
    Ok(basis.monomials().to_vec())
}

/// Assembles the degree-`ell` relaxation of `max f` (or `max f~`) with the
/// domain identities, the given axioms and an optional extra basis filter.
pub fn assemble_sos_sdp(
    objective: Objective<'_>,
    spec: &RelaxationSpec,
    axioms: &[Axiom],
    filter: Option<&dyn Fn(&Monomial) -> bool>,
) -> Result<Relaxation> {
    if spec.degree % 2 == 1 || spec.degree == 0 {
        return Err(Error::UnsupportedDegree(spec.degree));
    }
    let (n, d, coupled) = match objective {
        Objective::Coupled(t) => (t.dim(), t.order(), true),
        Objective::Decoupled(t) => (t.dim(), t.order(), false),
    };
    let (space, groups) = tensor_space(n, d, spec.domain, coupled);
    let mut basis = if coupled || spec.pattern == BasisPattern::Full || d < 3 {
        build_basis(space.clone(), spec.degree / 2, filter, spec.cap)?.monomials().to_vec()
    } else {
        let k = (spec.degree / (2 * d)).max(1);
        if spec.degree < 2 * d {
            return Err(Error::InvalidInput(format!("degree {} is below 2d = {}", spec.degree, 2 * d)));
        }
        decoupled_basis(&space, &groups, spec.pattern, k, spec.cap)?
    };
    if let Some(f) = filter {
        basis.retain(|m| f(m));
    }
    if basis.len() > spec.cap {
        return Err(Error::SizeCap { what: "moment basis".into(), size: basis.len(), cap: spec.cap });
    }
    let obj = match objective {
        Objective::Coupled(t) => coupled_poly(t, &space, groups[0]),
        Objective::Decoupled(t) => decoupled_poly(t, &space, &groups),
    };
    let mut program = MomentProgram::new(space.clone(), spec.domain, Mode::Maximize);
    for a in axioms {
        match a {
            Axiom::NonNeg(g) => {
                let gd = g.degree();
                if gd > spec.degree {
                    return Err(Error::DegreeOverflow { degree: gd, limit: spec.degree });
                }
                let loc: Vec<Monomial> = basis.iter().filter(|u| 2 * u.degree() + gd <= spec.degree).cloned().collect();
                program.add_localizing(g.clone(), loc);
            }
            Axiom::Localized(g, b) => program.add_localizing(g.clone(), b.clone()),
            Axiom::Zero(g) => program.add_zero_axiom(g.clone()),
        }
    }
    let basis_size = basis.len();
    program.add_moment_block(basis);
    program.set_objective(obj);
    let compiled = program.compile()?;
    Ok(Relaxation { compiled, space, groups, spec: spec.clone(), basis_size })
}

/// Solved relaxation: solver output, repaired pseudo-distribution and the
/// SOS value `pE f` under it.
#[derive(Clone, Debug)]
pub struct SosSolution {
    pub result: SolveResult,
    pub extraction: Extraction,
    pub sos: f64,
}

impl Relaxation {
    /// Solves, extracts and checks that the repair moved the objective by at
    /// most `tol.extraction * scale`.
    pub fn solve(
        &self,
        params: &SolverParams,
        tol: &Tolerances,
        scale: f64,
        warm: Option<&WarmStart>,
    ) -> Result<SosSolution> {
        let result = solve(&self.compiled.problem, params, warm)?;
        let extraction = self.compiled.extract(&result, tol)?;
        extraction.check_objective_change(tol.extraction * scale.max(1e-12))?;
        let sos = extraction.objective_after;
        Ok(SosSolution { result, extraction, sos })
    }
}

/// Order-2 tensor holding a square matrix.
pub fn matrix_tensor(m: &DMatrix<f64>) -> Result<Tensor> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    let n = m.nrows();
    let entries = (0..n).flat_map(|j| (0..n).map(move |k| (j, k))).filter(|&(j, k)| m[(j, k)] != 0.0);
    Tensor::from_entries(2, n, entries.map(|(j, k)| (vec![j, k], m[(j, k)])).collect::<Vec<_>>())
}

/// Degree-2 relaxation of `max y^T M z` with extra axioms on the groups `x1, x2`.
pub fn solve_bilinear_sdp(
    m: &DMatrix<f64>,
    domain: Domain,
    axioms: &[Axiom],
    params: &SolverParams,
    tol: &Tolerances,
) -> Result<(Relaxation, SosSolution)> {
    let t = matrix_tensor(m)?;
    let relax = assemble_sos_sdp(Objective::Decoupled(&t), &RelaxationSpec::new(2, domain), axioms, None)?;
    let scale = m.iter().map(|v| v.abs()).sum::<f64>().max(1e-12);
    let sol = relax.solve(params, tol, scale, None)?;
    Ok((relax, sol))
}
