//! Moment programs: PSD moment blocks over monomial lists, localizing blocks
//! for axioms, and linear side constraints, compiled to an [`SdpProblem`] in
//! which every distinct reduced monomial is one variable.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::DMatrix;

use super::admm::SolveResult;
use super::problem::{LinearConstraint, Mode, PsdBlock, SdpProblem};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::sos_core::{uniform_moment, Monomial, MonomialBasis, PseudoDistribution, SparsePoly, VarKind, VarSpace};
use crate::tensor_poly::Domain;

#[derive(Clone, Debug)]
pub struct MomentProgram {
    space: Arc<VarSpace>,
    domain: Domain,
    mode: Mode,
    moment_blocks: Vec<Vec<Monomial>>,
    localizing: Vec<(SparsePoly, Vec<Monomial>)>,
    zero_axioms: Vec<SparsePoly>,
    equalities: Vec<SparsePoly>,
    inequalities: Vec<SparsePoly>,
    objective: SparsePoly,
}

impl MomentProgram {
    pub fn new(space: Arc<VarSpace>, domain: Domain, mode: Mode) -> Self {
        Self {
            space,
            domain,
            mode,
            moment_blocks: Vec::new(),
            localizing: Vec::new(),
            zero_axioms: Vec::new(),
            equalities: Vec::new(),
            inequalities: Vec::new(),
            objective: SparsePoly::zero(),
        }
    }

    pub fn space(&self) -> &Arc<VarSpace> {
        &self.space
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn moment_blocks(&self) -> &[Vec<Monomial>] {
        &self.moment_blocks
    }

    /// Requires `[pE(u v)]_{u,v in basis}` to be PSD.
    pub fn add_moment_block(&mut self, basis: Vec<Monomial>) {
        self.moment_blocks.push(basis);
    }

    /// Axiom `g >= 0` localized on `basis`: `[pE(g u v)]` PSD. A basis of just
    /// the constant monomial becomes the scalar inequality `pE g >= 0`.
    pub fn add_localizing(&mut self, g: SparsePoly, basis: Vec<Monomial>) {
        if basis.len() == 1 && basis[0].is_one() {
            self.inequalities.push(g);
        } else {
            self.localizing.push((g, basis));
        }
    }

    /// Axiom `g = 0`: `pE(g m) = 0` for every moment `m` whose products with
    /// `g` are all available.
    pub fn add_zero_axiom(&mut self, g: SparsePoly) {
        self.zero_axioms.push(g);
    }

    /// `pE g = 0`.
    pub fn add_equality(&mut self, g: SparsePoly) {
        self.equalities.push(g);
    }

    /// `pE g >= 0`.
    pub fn add_inequality(&mut self, g: SparsePoly) {
        self.inequalities.push(g);
    }

    pub fn set_objective(&mut self, p: SparsePoly) {
        self.objective = p;
    }

    pub fn objective(&self) -> &SparsePoly {
        &self.objective
    }

    pub fn compile(&self) -> Result<CompiledProgram> {
        let space = &*self.space;
        let mut vars = VarIndex::default();
        let mut moment_set: Vec<Monomial> = Vec::new();
        let mut in_set: HashMap<Monomial, ()> = HashMap::new();
        let mut blocks = Vec::new();
        for basis in &self.moment_blocks {
            let mut blk = PsdBlock::new(basis.len());
            for r in 0..basis.len() {
                for c in r..basis.len() {
                    let m = basis[r].mul(&basis[c], space);
                    if in_set.insert(m.clone(), ()).is_none() {
                        moment_set.push(m.clone());
                    }
                    if m.is_one() {
                        blk.constant.push((r, c, 1.0));
                    } else {
                        blk.entries.push((r, c, vars.get(&m), 1.0));
                    }
                }
            }
            blocks.push(blk);
        }
        let moment_blocks = blocks.len();
        for (g, basis) in &self.localizing {
            let mut blk = PsdBlock::new(basis.len());
            for r in 0..basis.len() {
                for c in r..basis.len() {
                    let uv = SparsePoly::monomial(basis[r].mul(&basis[c], space), 1.0);
                    let p = g.mul(&uv, space);
                    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
                    for (m, a) in p.terms() {
                        if m.is_one() {
                            blk.constant.push((r, c, a));
                        } else {
                            *acc.entry(vars.get(m)).or_insert(0.0) += a;
                        }
                    }
                    blk.entries.extend(acc.into_iter().filter(|&(_, a)| a != 0.0).map(|(v, a)| (r, c, v, a)));
                }
            }
            blocks.push(blk);
        }

        let mut equalities = Vec::new();
        let mut inequalities = Vec::new();
        let linear = |p: &SparsePoly, vars: &VarIndex| -> Result<LinearConstraint> {
            let mut terms = Vec::new();
            let mut constant = 0.0;
            for (m, a) in p.terms() {
                if m.is_one() {
                    constant += a;
                } else {
                    let v = vars.lookup(m).ok_or_else(|| Error::BasisCoverage(m.display(space).to_string()))?;
                    terms.push((v, a));
                }
            }
            Ok(LinearConstraint { terms, rhs: -constant })
        };

        // Sphere identities `pE[m |v|^2] = pE[m]` wherever both sides exist.
        for (gi, group) in space.groups().iter().enumerate() {
            if group.kind != VarKind::Sphere {
                continue;
            }
            let gvars: Vec<u32> = space.group_vars(gi).collect();
            for m in &moment_set {
                let lifted: Vec<Monomial> = gvars.iter().map(|&v| m.mul(&Monomial::from_vars(space, &[v, v]), space)).collect();
                if lifted.iter().all(|l| in_set.contains_key(l)) {
                    let mut p = SparsePoly::monomial(m.clone(), -1.0);
                    for l in lifted {
                        p.add_term(l, 1.0);
                    }
                    equalities.push(linear(&p, &vars)?);
                }
            }
        }
        for g in &self.zero_axioms {
            for m in &moment_set {
                let p = g.mul(&SparsePoly::monomial(m.clone(), 1.0), space);
                if p.terms().all(|(t, _)| t.is_one() || in_set.contains_key(t)) && !p.is_zero() {
                    equalities.push(linear(&p, &vars)?);
                }
            }
        }
        for g in &self.equalities {
            equalities.push(linear(g, &vars)?);
        }
        for g in &self.inequalities {
            inequalities.push(linear(g, &vars)?);
        }
        let obj = linear(&self.objective, &vars)?;

        // Localizing blocks with several variables on one coordinate are
        // rewritten: each such coordinate gets a fresh variable tied to the
        // combination by an equality.
        let mut num_vars = vars.len();
        let mut aux_defs = Vec::new();
        for blk in blocks.iter_mut().skip(moment_blocks) {
            let mut by_coord: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
            for &(r, c, v, a) in &blk.entries {
                by_coord.entry((r, c)).or_default().push((v, a));
            }
            let mut entries = Vec::new();
            for ((r, c), terms) in by_coord {
                if terms.len() == 1 {
                    entries.push((r, c, terms[0].0, terms[0].1));
                } else {
                    let aux = num_vars;
                    num_vars += 1;
                    aux_defs.push((aux, terms.clone()));
                    let mut t = terms;
                    t.push((aux, -1.0));
                    equalities.push(LinearConstraint { terms: t, rhs: 0.0 });
                    entries.push((r, c, aux, 1.0));
                }
            }
            blk.entries = entries;
        }

        let mut problem = SdpProblem::new(num_vars, self.mode);
        problem.blocks = blocks;
        problem.equalities = equalities;
        problem.inequalities = inequalities;
        problem.objective = obj.terms;
        problem.objective_offset = -obj.rhs;
        Ok(CompiledProgram {
            program: self.clone(),
            problem,
            moments: vars.list,
            index: vars.map,
            moment_blocks,
            aux_defs,
        })
    }
}

#[derive(Default)]
struct VarIndex {
    list: Vec<Monomial>,
    map: HashMap<Monomial, usize>,
}

impl VarIndex {
    fn get(&mut self, m: &Monomial) -> usize {
        if let Some(&i) = self.map.get(m) {
            return i;
        }
        self.list.push(m.clone());
        self.map.insert(m.clone(), self.list.len() - 1);
        self.list.len() - 1
    }

    fn lookup(&self, m: &Monomial) -> Option<usize> {
        self.map.get(m).copied()
    }

    fn len(&self) -> usize {
        self.list.len()
    }
}

#[derive(Clone, Debug)]
pub struct CompiledProgram {
    pub program: MomentProgram,
    pub problem: SdpProblem,
    /// Monomial carried by each moment variable (auxiliary variables follow).
    pub moments: Vec<Monomial>,
    pub index: HashMap<Monomial, usize>,
    moment_blocks: usize,
    aux_defs: Vec<(usize, Vec<(usize, f64)>)>,
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub mu: PseudoDistribution,
    /// Weight `t` of the interior point in `(1-t) y + t y_int`; zero if unrepaired.
    pub mixing: f64,
    /// Most negative moment-block eigenvalue before repair.
    pub min_eig_before: f64,
    pub objective_before: f64,
    pub objective_after: f64,
    /// True when mixing failed and negative eigenvalues were clipped instead.
    pub clipped: bool,
}

impl CompiledProgram {
    pub fn space(&self) -> &Arc<VarSpace> {
        &self.program.space
    }

    pub fn num_moment_blocks(&self) -> usize {
        self.moment_blocks
    }

    /// Moment of `m` under `y`; the constant monomial is 1.
    pub fn moment(&self, y: &[f64], m: &Monomial) -> Option<f64> {
        if m.is_one() {
            Some(1.0)
        } else {
            self.index.get(m).map(|&i| y[i])
        }
    }

    /// Moments of the uniform product measure, padded for auxiliary variables.
    pub fn interior_point(&self) -> Vec<f64> {
        let space = self.space();
        let mut y: Vec<f64> = self.moments.iter().map(|m| uniform_moment(space, m)).collect();
        y.resize(self.problem.num_vars, 0.0);
        for (aux, terms) in &self.aux_defs {
            y[*aux] = terms.iter().map(|&(v, a)| a * y[v]).sum();
        }
        y
    }

    fn moment_min_eig(&self, y: &[f64]) -> f64 {
        self.problem.blocks[..self.moment_blocks]
            .iter()
            .map(|b| {
                let m = b.eval(y);
                if m.nrows() == 0 {
                    0.0
                } else {
                    m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Pseudo-distribution over the union of the moment-block bases.
    pub fn pseudo_distribution(&self, y: &[f64]) -> Result<PseudoDistribution> {
        let space = self.space().clone();
        let all: Vec<Monomial> = self.program.moment_blocks.iter().flatten().cloned().collect();
        let basis = Arc::new(MonomialBasis::from_monomials(space, all));
        let blocks: Vec<Vec<usize>> = self
            .program
            .moment_blocks
            .iter()
            .map(|b| b.iter().map(|m| basis.index_of(m).expect("basis contains block")).collect())
            .collect();
        let degree = 2 * basis.max_degree();
        PseudoDistribution::from_moment_fn(basis, degree, self.program.domain, Some(blocks), |m| {
            self.moment(y, m).unwrap_or(0.0)
        })
    }

    /// Builds the pseudo-distribution from a solve. Negative eigenvalues are
    /// removed by mixing with the uniform moments, which keeps every linear
    /// identity they share; when that fails the blocks are clipped.
    pub fn extract(&self, result: &SolveResult, tol: &Tolerances) -> Result<Extraction> {
        let y = &result.y;
        if y.len() != self.problem.num_vars {
            return Err(Error::Extraction("solution does not match the program".into()));
        }
        let target = -1e-3 * tol.psd;
        let before = self.moment_min_eig(y);
        let objective_before = self.problem.objective_value(y);
        if before >= target {
            return Ok(Extraction {
                mu: self.pseudo_distribution(y)?,
                mixing: 0.0,
                min_eig_before: before,
                objective_before,
                objective_after: objective_before,
                clipped: false,
            });
        }
        let interior = self.interior_point();
        let mix = |t: f64| -> Vec<f64> { y.iter().zip(&interior).map(|(a, b)| (1.0 - t) * a + t * b).collect() };
        if self.moment_min_eig(&interior) > target {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if self.moment_min_eig(&mix(mid)) >= target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let ym = mix(hi);
            let objective_after = self.problem.objective_value(&ym);
            return Ok(Extraction {
                mu: self.pseudo_distribution(&ym)?,
                mixing: hi,
                min_eig_before: before,
                objective_before,
                objective_after,
                clipped: false,
            });
        }
        let mu = self.pseudo_distribution(y)?;
        let mut m = mu.moments().clone();
        for b in mu.blocks() {
            let mut sub = DMatrix::from_fn(b.len(), b.len(), |i, j| m[(b[i], b[j])]);
            super::admm::project_psd(&mut sub);
            for (i, &bi) in b.iter().enumerate() {
                for (j, &bj) in b.iter().enumerate() {
                    m[(bi, bj)] = sub[(i, j)];
                }
            }
        }
        let clipped = PseudoDistribution::new(mu.basis().clone(), m, mu.degree(), mu.domain(), Some(mu.blocks().to_vec()))?;
        let objective_after = clipped.pe(self.program.objective()).unwrap_or(objective_before);
        Ok(Extraction { mu: clipped, mixing: 0.0, min_eig_before: before, objective_before, objective_after, clipped: true })
    }
}

impl Extraction {
    /// Fails when the repair moved the objective by more than `limit`.
    pub fn check_objective_change(&self, limit: f64) -> Result<()> {
        let delta = (self.objective_after - self.objective_before).abs();
        if delta > limit {
            return Err(Error::Extraction(format!("repair changed the objective by {delta:e} (limit {limit:e})")));
        }
        Ok(())
    }
}
