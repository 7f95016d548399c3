//! Compressed feasibility programs over a hitting distribution, binary-searched
//! upper bounds, their rounding, and the pairwise `sqrt(n)` certificate.
//!
//! The program has variables `y, z` (padded to `n'`) and one free variable
//! `M_x` per folded support point `x`, with
//!
//! ```text
//! sum_x w_x pE[M_x^2] = 1,     sum_x w_x pE[M_x^2 (<x, q(y,z)>^2 - alpha^2)] >= 0,
//! ```
//!
//! where `q_i(y,z) = sum_jk T[i,j,k] y_j z_k`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::hitting_sets::{blockwise_hypercube_set, blockwise_sphere_set, direction_constant, padded_dim, pairwise_set, HittingSet};
use crate::rng::SeedTree;
use crate::roundings::{grothendieck_round, scalar_fix, KrivineSampler, RoundingOutcome, TrialRecord, GROTHENDIECK_TRIALS};
use crate::sdp_solver::{
    solve, solve_bilinear_sdp, BasisPattern, CompiledProgram, Mode, MomentProgram, SolveResult, SolverParams,
    Status, WarmStart,
};
use crate::sos_core::{build_basis, GroupId, Monomial, MonomialBasis, PseudoDistribution, SparsePoly, VarId, VarKind, VarSpace};
use crate::tensor_poly::{Domain, Tensor};

/// Net radius for the sphere hitting set.
pub const SPHERE_NET_EPS: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct CompressedOptions {
    /// `(y,z)` monomials used in every block: `Compact` keeps the bidegrees
    /// `(0,0),(1,0),(0,1),(1,1),(2,1),(1,2)`, `Full` all monomials of degree `<= 3`.
    pub pattern: BasisPattern,
    /// Prepend the shared `(y,z)` block to every per-point block.
    pub shared_marginal: bool,
    /// Impose the inequality separately for every support point.
    pub per_point_inequalities: bool,
    /// Merge `x` with `-x` and repeated support points.
    pub fold: bool,
    pub cap: usize,
}

impl Default for CompressedOptions {
    fn default() -> Self {
        Self {
            pattern: BasisPattern::Compact,
            shared_marginal: false,
            per_point_inequalities: false,
            fold: true,
            cap: crate::config::DEFAULT_BASIS_CAP,
        }
    }
}

/// Support points after folding, with their merged weights.
#[derive(Clone, Debug, PartialEq)]
pub struct FoldedSupport {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl FoldedSupport {
    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Folds `x ~ -x` (first nonzero coordinate made positive) and merges repeats.
pub fn fold_support(d: &HittingSet, fold: bool) -> FoldedSupport {
    if !fold {
        return FoldedSupport { points: d.support.clone(), weights: d.probs.clone() };
    }
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut out = FoldedSupport { points: Vec::new(), weights: Vec::new() };
    for (x, &p) in d.support.iter().zip(&d.probs) {
        let s = match x.iter().find(|v| **v != 0.0) {
            Some(&v) if v < 0.0 => -1.0,
            _ => 1.0,
        };
        let canon: Vec<f64> = x.iter().map(|v| if *v == 0.0 { 0.0 } else { s * v }).collect();
        let key: Vec<u64> = canon.iter().map(|v| v.to_bits()).collect();
        match index.get(&key) {
            Some(&i) => out.weights[i] += p,
            None => {
                index.insert(key, out.points.len());
                out.points.push(canon);
                out.weights.push(p);
            }
        }
    }
    out
}

/// Hitting set matching the domain, built at the padded dimension.
pub fn default_hitting_set(n: usize, k: usize, domain: Domain) -> Result<HittingSet> {
    let np = padded_dim(n, k);
    match domain {
        Domain::Hypercube => blockwise_hypercube_set(np, k),
        Domain::Sphere => blockwise_sphere_set(np, k, SPHERE_NET_EPS),
    }
}

/// Hitting constant `c` with `max_x |<x, w>| >= c |w|` over the support
/// (`|w|_1` on the cube, `|w|_2` on the sphere).
pub fn hitting_constant(d: &HittingSet) -> f64 {
    let c = direction_constant(d.n, d.k);
    match d.domain {
        Domain::Hypercube => c,
        Domain::Sphere => c * (1.0 - SPHERE_NET_EPS),
    }
}

#[derive(Clone, Debug)]
pub struct CompressedProgram {
    pub compiled: CompiledProgram,
    pub space: Arc<VarSpace>,
    pub y: GroupId,
    pub z: GroupId,
    pub m: GroupId,
    /// Padded tensor (dimension `n'`).
    pub tensor: Tensor,
    pub original_dim: usize,
    pub folded: FoldedSupport,
    /// `(y,z)` monomials shared by all blocks.
    pub pattern: Vec<Monomial>,
    pub block_dims: Vec<usize>,
    pub alpha: f64,
    pub k: usize,
    pub domain: Domain,
    pub options: CompressedOptions,
}

fn bilinear_poly(m: &DMatrix<f64>, ys: &[VarId], zs: &[VarId], space: &VarSpace) -> SparsePoly {
    let mut p = SparsePoly::zero();
    for (j, &y) in ys.iter().enumerate() {
        for (l, &z) in zs.iter().enumerate() {
            if m[(j, l)] != 0.0 {
                p.add_term(Monomial::from_vars(space, &[y, z]), m[(j, l)]);
            }
        }
    }
    p
}

fn yz_pattern(space: &Arc<VarSpace>, y: GroupId, z: GroupId, pattern: BasisPattern, cap: usize) -> Result<Vec<Monomial>> {
    let m_free = |m: &Monomial| m.group_degree(space, y) + m.group_degree(space, z) == m.degree();
    let f = |m: &Monomial| {
        let (a, b) = (m.group_degree(space, y), m.group_degree(space, z));
        m_free(m)
            && match pattern {
                BasisPattern::Compact => matches!((a, b), (0, 0) | (1, 0) | (0, 1) | (1, 1) | (2, 1) | (1, 2)),
                _ => a + b <= 3,
            }
    };
    Ok(build_basis(space.clone(), 3, Some(&f), cap)?.monomials().to_vec())
}

/// Builds the compressed feasibility program at level `alpha`.
pub fn assemble_compressed(
    t: &Tensor,
    k: usize,
    alpha: f64,
    d: &HittingSet,
    domain: Domain,
    opts: &CompressedOptions,
) -> Result<CompressedProgram> {
    build(t, k, Some(alpha), d, domain, opts)
}

/// Same blocks and normalization, maximizing `sum_x w_x pE[M_x^2 <x,q>^2]`.
/// Its optimum is the square of the largest feasible `alpha` (without
/// per-point inequalities).
pub fn assemble_compressed_max(
    t: &Tensor,
    k: usize,
    d: &HittingSet,
    domain: Domain,
    opts: &CompressedOptions,
) -> Result<CompressedProgram> {
    build(t, k, None, d, domain, opts)
}

fn build(
    t: &Tensor,
    k: usize,
    level: Option<f64>,
    d: &HittingSet,
    domain: Domain,
    opts: &CompressedOptions,
) -> Result<CompressedProgram> {
    let alpha = level.unwrap_or(0.0);
    if t.order() != 3 {
        return Err(Error::OrderMismatch { expected: "3".into(), found: t.order() });
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidInput(format!("alpha = {alpha} must be a finite nonnegative number")));
    }
    if d.domain != domain || d.k != k || d.n < t.dim() {
        return Err(Error::InvalidInput(format!(
            "hitting set (n = {}, k = {}, {}) does not match the instance (n = {}, k = {k}, {})",
            d.n,
            d.k,
            d.domain.name(),
            t.dim(),
            domain.name()
        )));
    }
    let np = d.n;
    let tensor = t.padded(np);
    let folded = fold_support(d, opts.fold);
    let kind = match domain {
        Domain::Hypercube => VarKind::Boolean,
        Domain::Sphere => VarKind::Sphere,
    };
    let mut s = VarSpace::new();
    let gy = s.add_group("y", np, kind);
    let gz = s.add_group("z", np, kind);
    let gm = s.add_group("M", folded.points.len(), VarKind::Free);
    let space = Arc::new(s);
    let pattern = yz_pattern(&space, gy, gz, opts.pattern, opts.cap)?;
    let ys: Vec<VarId> = space.group_vars(gy).collect();
    let zs: Vec<VarId> = space.group_vars(gz).collect();

    let mode = if level.is_some() { Mode::Feasibility } else { Mode::Maximize };
    let mut program = MomentProgram::new(space.clone(), domain, mode);
    let mut block_dims = vec![pattern.len()];
    program.add_moment_block(pattern.clone());
    let mut norm = SparsePoly::constant(-1.0);
    let mut agg = SparsePoly::zero();
    for (i, (x, &w)) in folded.points.iter().zip(&folded.weights).enumerate() {
        let mv = space.var(gm, i);
        let mmon = Monomial::var(mv);
        let mut blk: Vec<Monomial> = if opts.shared_marginal { pattern.clone() } else { Vec::new() };
        blk.extend(pattern.iter().map(|u| u.mul(&mmon, &space)));
        if blk.len() > opts.cap {
            return Err(Error::SizeCap { what: "compressed block".into(), size: blk.len(), cap: opts.cap });
        }
        block_dims.push(blk.len());
        program.add_moment_block(blk);
        let m2 = SparsePoly::monomial(mmon.mul(&mmon, &space), 1.0);
        let p = bilinear_poly(&tensor.contract_leading(&[x])?, &ys, &zs, &space);
        let g = m2.mul(&p.mul(&p, &space), &space).sub(&m2.scale(alpha * alpha));
        norm = norm.add(&m2.scale(w));
        if opts.per_point_inequalities && level.is_some() {
            program.add_inequality(g.clone());
        }
        agg = agg.add(&g.scale(w));
    }
    program.add_equality(norm);
    match level {
        Some(_) => program.add_inequality(agg),
        None => program.set_objective(agg),
    }
    let compiled = program.compile()?;
    Ok(CompressedProgram {
        compiled,
        space,
        y: gy,
        z: gz,
        m: gm,
        tensor,
        original_dim: t.dim(),
        folded,
        pattern,
        block_dims,
        alpha,
        k,
        domain,
        options: opts.clone(),
    })
}

impl CompressedProgram {
    /// Moment vector of the integral lift: point mass at `(y, z)` with
    /// `M_x = <x, q(y,z)>^k`, scaled to satisfy the normalization.
    pub fn lift_moments(&self, y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        let vals = lift_values(&self.tensor, &self.folded, y, z, self.k)?;
        let scale = self.folded.weights.iter().zip(&vals).map(|(w, v)| w * v.powi(2 * self.k as i32)).sum::<f64>();
        if scale <= 0.0 {
            return Err(Error::Rounding("the lift has zero mass on the support".into()));
        }
        let mut point = vec![0.0; self.space.num_vars()];
        for (j, v) in self.space.group_vars(self.y).zip(y) {
            point[j as usize] = *v;
        }
        for (j, v) in self.space.group_vars(self.z).zip(z) {
            point[j as usize] = *v;
        }
        for (i, v) in self.space.group_vars(self.m).zip(&vals) {
            point[i as usize] = v.powi(self.k as i32) / scale.sqrt();
        }
        let mut out: Vec<f64> = self.compiled.moments.iter().map(|m| m.eval(&point)).collect();
        out.resize(self.compiled.problem.num_vars, 0.0);
        Ok(out)
    }
}

fn lift_values(t: &Tensor, folded: &FoldedSupport, y: &[f64], z: &[f64], _k: usize) -> Result<Vec<f64>> {
    let np = t.dim();
    let pad = |v: &[f64]| -> Vec<f64> {
        let mut p = v.to_vec();
        p.resize(np, 0.0);
        p
    };
    let q = t.contract_last_two(&pad(y), &pad(z))?;
    Ok(folded.points.iter().map(|x| x.iter().zip(&q).map(|(a, b)| a * b).sum()).collect())
}

/// `E[v^{2k+2}] / E[v^{2k}]` for `v = <x, q(y,z)>`, `x ~ D`: the integral lift
/// at `(y, z)` is feasible exactly when `alpha^2` is at most this.
pub fn planted_lift_ratio(t: &Tensor, d: &HittingSet, y: &[f64], z: &[f64], k: usize) -> Result<f64> {
    let folded = fold_support(d, true);
    let vals = lift_values(&t.padded(d.n.max(t.dim())), &folded, y, z, k)?;
    let num: f64 = folded.weights.iter().zip(&vals).map(|(w, v)| w * v.powi(2 * k as i32 + 2)).sum();
    let den: f64 = folded.weights.iter().zip(&vals).map(|(w, v)| w * v.powi(2 * k as i32)).sum();
    if den <= 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

/// Result of rounding a compressed pseudo-distribution.
#[derive(Clone, Debug)]
pub struct CompressedRounding {
    pub outcome: RoundingOutcome,
    /// Index of the chosen folded support point.
    pub point: usize,
    /// `pE[M^2 <x, q>^2] / pE[M^2]` at the chosen point.
    pub ratio: f64,
    pub mass: f64,
}

fn point_moments(
    prog: &CompressedProgram,
    yv: &[f64],
    i: usize,
    tol: &Tolerances,
) -> Result<Option<(PseudoDistribution, f64)>> {
    let space = &prog.space;
    let mmon = Monomial::var(space.var(prog.m, i));
    let m2 = mmon.mul(&mmon, space);
    let mass = prog.compiled.moment(yv, &m2).unwrap_or(0.0);
    if mass <= tol.reweight {
        return Ok(None);
    }
    let basis = Arc::new(MonomialBasis::from_ordered(space.clone(), prog.pattern.clone()));
    let mu = PseudoDistribution::from_moment_fn(basis, 6, prog.domain, None, |m| {
        prog.compiled.moment(yv, &m.mul(&m2, space)).unwrap_or(0.0) / mass
    })?;
    Ok(Some((mu, mass)))
}

/// Picks the support point with the largest `pE[M^2 <x,q>^2] / pE[M^2]`,
/// conditions on `M_x^2`, fixes `<x, q>` and rounds the bilinear form.
pub fn round_compressed(prog: &CompressedProgram, yv: &[f64], seed: SeedTree, tol: &Tolerances) -> Result<CompressedRounding> {
    let space = prog.space.clone();
    let ys: Vec<VarId> = space.group_vars(prog.y).collect();
    let zs: Vec<VarId> = space.group_vars(prog.z).collect();
    let mut best: Option<(usize, f64, f64, PseudoDistribution)> = None;
    for (i, x) in prog.folded.points.iter().enumerate() {
        let Some((mu, mass)) = point_moments(prog, yv, i, tol)? else { continue };
        let p = bilinear_poly(&prog.tensor.contract_leading(&[x])?, &ys, &zs, &space);
        let r = mu.pe(&p.mul(&p, &space))?;
        if best.as_ref().is_none_or(|b| r > b.1) {
            best = Some((i, r, mass, mu));
        }
    }
    let Some((point, ratio, mass, mu)) = best else {
        return Err(Error::DegenerateReweight { mass: 0.0 });
    };
    let outcome = round_point(&prog.tensor, prog.original_dim, &prog.folded.points[point], &mu, prog.alpha, seed, tol)?;
    Ok(CompressedRounding { outcome, point, ratio, mass })
}

/// Rounds a pseudo-distribution over `(y, z)` (the first two groups of its
/// space) for the fixed point `x` of a padded tensor: fix `<x, q>`, round the
/// bilinear form, flip `x` to the sign of the result and drop the padding.
pub fn round_point(
    tensor: &Tensor,
    original_dim: usize,
    x: &[f64],
    mu: &PseudoDistribution,
    alpha: f64,
    seed: SeedTree,
    tol: &Tolerances,
) -> Result<RoundingOutcome> {
    let space = mu.space().clone();
    if space.groups().len() < 2 {
        return Err(Error::GroupCount { expected: 2, found: space.groups().len() });
    }
    let ys: Vec<VarId> = space.group_vars(0).collect();
    let zs: Vec<VarId> = space.group_vars(1).collect();
    let np = ys.len();
    let m = tensor.contract_leading(&[x])?;
    let p = bilinear_poly(&m, &ys, &zs, &space);
    let sos = mu.pe(&p.mul(&p, &space))?.max(0.0).sqrt();
    let fix = scalar_fix(mu, &p, 1, tol)?;
    let mut wvars = ys.clone();
    wvars.extend(&zs);
    let gram = fix.mu.second_moments(&wvars)?;
    let mut x = x.to_vec();
    let mut rng = seed.rng();
    let domain = mu.domain();
    let (y, z, s) = match domain {
        Domain::Hypercube => {
            let sampler = KrivineSampler::new(&gram, np)?;
            let mut pick: Option<(Vec<f64>, Vec<f64>, f64)> = None;
            for _ in 0..GROTHENDIECK_TRIALS {
                let (y, z) = sampler.sample(&mut rng);
                let v = bilinear_value(&y, &m, &z);
                if pick.as_ref().is_none_or(|b| v.abs() > b.2.abs()) {
                    pick = Some((y, z, v));
                }
            }
            let (y, z, v) = pick.expect("at least one sample");
            (y, z, if v < 0.0 { -1.0 } else { 1.0 })
        }
        Domain::Sphere => {
            let r = crate::roundings::sphere_bilinear_from_gram(&gram, np, &m);
            (r.y, r.z, 1.0)
        }
    };
    x.iter_mut().for_each(|v| *v *= s);
    let mut groups = vec![x, y, z];
    for g in &mut groups {
        g.truncate(original_dim);
        if domain == Domain::Sphere {
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                g.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }
    let orig = Tensor::from_entries(3, original_dim, tensor.entries().map(|(k, c)| (k.to_vec(), c)).collect::<Vec<_>>())?;
    let refs: Vec<&[f64]> = groups.iter().map(|g| g.as_slice()).collect();
    let value = orig.eval(&refs)?;
    let record = TrialRecord {
        trial: 0,
        branch: Some(fix.branch),
        fixed: fix.value,
        target: fix.target(),
        second_moment: fix.second_moment,
        pz_hit: fix.second_moment >= alpha * alpha,
        h_norm: 1.0,
        value,
    };
    Ok(RoundingOutcome { h: vec![groups[0].clone()], groups, value, sos, trials: 1, best_trial: 0, records: vec![record] })
}

/// Single-point program `max pE[<x, q(y,z)>^2]` over the shared `(y,z)` block.
/// The maximization form of the compressed program equals the largest of
/// these over the support, since each `M_x` block only meets the others
/// through the normalization.
///
/// The objective is invariant under `y -> -y` and under `z -> -z`, so the
/// block is split by the parities of the `y` and `z` degrees; moments of odd
/// parity are zero in the resulting pseudo-distribution.
pub fn point_program(tensor: &Tensor, x: &[f64], domain: Domain, opts: &CompressedOptions) -> Result<CompiledProgram> {
    let np = tensor.dim();
    let kind = match domain {
        Domain::Hypercube => VarKind::Boolean,
        Domain::Sphere => VarKind::Sphere,
    };
    let mut s = VarSpace::new();
    let gy = s.add_group("y", np, kind);
    let gz = s.add_group("z", np, kind);
    let space = Arc::new(s);
    let pattern = yz_pattern(&space, gy, gz, opts.pattern, opts.cap)?;
    let ys: Vec<VarId> = space.group_vars(gy).collect();
    let zs: Vec<VarId> = space.group_vars(gz).collect();
    let p = bilinear_poly(&tensor.contract_leading(&[x])?, &ys, &zs, &space);
    let mut program = MomentProgram::new(space.clone(), domain, Mode::Maximize);
    let mut classes: [Vec<Monomial>; 4] = Default::default();
    for m in pattern {
        let c = m.group_degree(&space, gy) % 2 + 2 * (m.group_degree(&space, gz) % 2);
        classes[c].push(m);
    }
    for c in classes.into_iter().filter(|c| !c.is_empty()) {
        program.add_moment_block(c);
    }
    program.set_objective(p.mul(&p, &space));
    program.compile()
}

/// Single-block pseudo-distribution from a [`point_program`] solve, with the
/// odd-parity moments set to zero.
pub fn point_distribution(cp: &CompiledProgram, res: &SolveResult, tol: &Tolerances) -> Result<PseudoDistribution> {
    let mu = cp.extract(res, tol)?.mu;
    PseudoDistribution::from_moment_fn(mu.basis().clone(), mu.degree(), mu.domain(), None, |m| mu.moment(m).unwrap_or(0.0))
}

fn bilinear_value(y: &[f64], m: &DMatrix<f64>, z: &[f64]) -> f64 {
    let mut s = 0.0;
    for (j, &a) in y.iter().enumerate() {
        for (l, &b) in z.iter().enumerate() {
            s += a * m[(j, l)] * b;
        }
    }
    s
}

#[derive(Clone, Debug)]
pub struct SearchParams {
    /// Upper end of the initial bracket; defaults to `|T|_1`.
    pub alpha_hi: Option<f64>,
    pub iters: usize,
    /// Stop once the bracket is below `rel_tol * |T|_1`.
    pub rel_tol: f64,
    pub solver: SolverParams,
    pub options: CompressedOptions,
    pub seed: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        let solver = SolverParams { max_iter: 10_000, eps_primal: 1e-5, eps_gap: 1e-5, ..SolverParams::default() };
        Self { alpha_hi: None, iters: 40, rel_tol: 1e-3, solver, options: CompressedOptions::default(), seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchStep {
    pub alpha: f64,
    pub status: Status,
    pub feasible: bool,
    pub slack: Option<f64>,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct Certificate {
    pub method: String,
    pub domain: Domain,
    pub n: usize,
    pub k: usize,
    pub upper_bound: f64,
    /// Largest `alpha` accepted as feasible.
    pub alpha_star: f64,
    /// Smallest `alpha` with an infeasibility certificate, if any.
    pub alpha_infeasible: Option<f64>,
    /// Multiplier turning `alpha_infeasible` into the upper bound.
    pub bound_constant: f64,
    pub trivial_bound: f64,
    pub description: String,
    pub block_dims: Vec<usize>,
    pub support_size: usize,
    pub folded_size: usize,
    pub primal_residual: f64,
    pub psd_residual: f64,
    pub approximate: bool,
    pub lower_bound: f64,
    pub assignment: Vec<Vec<f64>>,
    pub solves: usize,
    pub steps: Vec<SearchStep>,
}

impl Certificate {
    /// Upper bound over rounded value.
    pub fn soundness_ratio(&self) -> f64 {
        if self.lower_bound > 0.0 {
            self.upper_bound / self.lower_bound
        } else {
            f64::INFINITY
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let dims: Vec<String> = self.block_dims.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(s, "method: {}", self.method);
        let _ = writeln!(s, "domain: {}", self.domain.name());
        let _ = writeln!(s, "n: {}", self.n);
        let _ = writeln!(s, "k: {}", self.k);
        let _ = writeln!(s, "upper_bound: {:e}", self.upper_bound);
        let _ = writeln!(s, "lower_bound: {:e}", self.lower_bound);
        let _ = writeln!(s, "soundness_ratio: {:e}", self.soundness_ratio());
        let _ = writeln!(s, "alpha_star: {:e}", self.alpha_star);
        match self.alpha_infeasible {
            Some(a) => writeln!(s, "alpha_infeasible: {a:e}"),
            None => writeln!(s, "alpha_infeasible: none"),
        }
        .unwrap();
        let _ = writeln!(s, "bound_constant: {:e}", self.bound_constant);
        let _ = writeln!(s, "trivial_bound: {:e}", self.trivial_bound);
        let _ = writeln!(s, "relaxation: {}", self.description);
        let _ = writeln!(s, "block_dims: {}", dims.join(","));
        let _ = writeln!(s, "support_size: {}", self.support_size);
        let _ = writeln!(s, "folded_size: {}", self.folded_size);
        let _ = writeln!(s, "primal_residual: {:e}", self.primal_residual);
        let _ = writeln!(s, "psd_residual: {:e}", self.psd_residual);
        let _ = writeln!(s, "approximate: {}", self.approximate);
        let _ = writeln!(s, "solves: {}", self.solves);
        for (i, g) in self.assignment.iter().enumerate() {
            let row: Vec<String> = g.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(s, "assignment_{i}: {}", row.join(" "));
        }
        s
    }
}

/// Largest feasible `alpha` for `T`, followed by the rounding of the last
/// feasible solution. The bracket is opened by the maximization form (whose
/// primal and dual values bound `alpha*^2`) and closed by bisection over
/// feasibility solves; with per-point inequalities only bisection is used.
///
/// The upper bound uses the integral lift: at an optimum `(y*, z*)` some support
/// point `x` has `|<x, q*>| >= c OPT`, and `E[v^{2k+2}]/E[v^{2k}] >= E[v^{2k}]^{1/k}
/// >= p_min^{1/k} c^2 OPT^2`, so infeasibility at `alpha` gives
/// `OPT < alpha / (c p_min^{1/2k})`.
pub fn certify_binary_search(t: &Tensor, k: usize, domain: Domain, params: &SearchParams, tol: &Tolerances) -> Result<Certificate> {
    if t.order() != 3 {
        return Err(Error::OrderMismatch { expected: "3".into(), found: t.order() });
    }
    let n = t.dim();
    let norm = t.l1_norm();
    let d = default_hitting_set(n, k, domain)?;
    let trivial = match domain {
        Domain::Hypercube => norm,
        Domain::Sphere => t.entries().map(|(_, c)| c * c).sum::<f64>().sqrt(),
    };
    let folded = fold_support(&d, params.options.fold);
    let bound_constant = 1.0 / (hitting_constant(&d) * folded.min_weight().powf(1.0 / (2 * k) as f64));
    let mut cert = Certificate {
        method: "compressed-binary-search".into(),
        domain,
        n,
        k,
        upper_bound: trivial,
        alpha_star: 0.0,
        alpha_infeasible: None,
        bound_constant,
        trivial_bound: trivial,
        description: String::new(),
        block_dims: Vec::new(),
        support_size: d.len(),
        folded_size: folded.points.len(),
        primal_residual: 0.0,
        psd_residual: 0.0,
        approximate: false,
        lower_bound: 0.0,
        assignment: vec![vec![0.0; n]; 3],
        solves: 0,
        steps: Vec::new(),
    };
    if norm == 0.0 {
        cert.upper_bound = 0.0;
        cert.description = "zero tensor".into();
        return Ok(cert);
    }
    // Work with |T|_1 = 1; alphas are reported in the original scale.
    let tn = t.scaled(1.0 / norm);
    let sound = !params.options.per_point_inequalities;
    let mut lo = 0.0f64;
    let mut hi = params.alpha_hi.map_or(1.0, |a| a / norm);
    let mut hi_certified = false;
    let mut last: Option<(CompressedProgram, SolveResult)> = None;

    let base = assemble_compressed(&tn, k, 0.0, &d, domain, &params.options)?;
    cert.block_dims = base.block_dims.clone();
    let mut point_best: Option<(usize, CompiledProgram, SolveResult)> = None;
    if sound {
        let tp = tn.padded(d.n);
        let mut top = 0.0f64;
        let mut all_optimal = true;
        let mut warm: Option<WarmStart> = None;
        for (i, x) in folded.points.iter().enumerate() {
            let cp = point_program(&tp, x, domain, &params.options)?;
            let res = solve(&cp.problem, &params.solver, warm.as_ref())?;
            warm = Some(res.warm.clone());
            cert.solves += 1;
            cert.steps.push(SearchStep {
                alpha: res.objective.max(0.0).sqrt() * norm,
                status: res.status,
                feasible: true,
                slack: None,
                iterations: res.iterations,
            });
            all_optimal &= res.status == Status::Optimal;
            let margin = params.solver.eps_gap * (1.0 + res.objective.abs() + res.dual_bound.abs());
            top = top.max(res.dual_bound.max(res.objective) + margin);
            if point_best.as_ref().is_none_or(|b| res.objective > b.2.objective) {
                point_best = Some((i, cp, res));
            }
        }
        let best = point_best.as_ref().map_or(0.0, |b| b.2.objective.max(0.0));
        lo = best.sqrt().min(hi);
        if !all_optimal {
            cert.approximate = true;
        } else if top.sqrt() < hi {
            hi = top.sqrt();
            hi_certified = true;
        }
    }

    let mut warm: Option<WarmStart> = None;
    let mut feasibility = |alpha: f64, cert: &mut Certificate| -> Result<(CompressedProgram, SolveResult, bool)> {
        let prog = assemble_compressed(&tn, k, alpha, &d, domain, &params.options)?;
        let res = solve(&prog.compiled.problem, &params.solver, warm.as_ref())?;
        warm = Some(res.warm.clone());
        let infeasible = res.status == Status::InfeasibleCertificate
            || (res.status != Status::IterationLimit && !res.feasible_within_band(&params.solver));
        if res.status == Status::IterationLimit {
            cert.approximate = true;
        }
        cert.solves += 1;
        cert.steps.push(SearchStep {
            alpha: alpha * norm,
            status: res.status,
            feasible: !infeasible,
            slack: res.phase1_slack,
            iterations: res.iterations,
        });
        Ok((prog, res, !infeasible))
    };
    if !sound {
        let (p, r, feasible) = feasibility(hi, &mut cert)?;
        if feasible {
            lo = hi;
            last = Some((p, r));
        } else {
            hi_certified = true;
        }
    }
    let mut iters = 0;
    while hi_certified && hi - lo > params.rel_tol && iters < params.iters {
        iters += 1;
        let mid = 0.5 * (lo + hi);
        let (p, r, feasible) = feasibility(mid, &mut cert)?;
        if feasible {
            lo = mid;
            last = Some((p, r));
        } else {
            hi = mid;
        }
    }
    cert.description = format!(
        "compressed program, pattern {}, padded n {}, {} moment blocks, shared marginal {}, per-point inequalities {}",
        params.options.pattern.name(),
        d.n,
        base.block_dims.len(),
        params.options.shared_marginal,
        params.options.per_point_inequalities
    );
    cert.alpha_star = lo * norm;
    cert.alpha_infeasible = hi_certified.then_some(hi * norm);
    if let Some(a) = cert.alpha_infeasible.filter(|_| sound) {
        cert.upper_bound = (a * bound_constant).min(trivial);
    }
    let seed = SeedTree::new(params.seed).child("round");
    let rounded = if let Some((i, cp, res)) = &point_best {
        cert.primal_residual = res.primal_residual;
        cert.psd_residual = res.psd_residual;
        let mu = point_distribution(cp, res, tol)?;
        round_point(&tn.padded(d.n), n, &folded.points[*i], &mu, lo, seed, tol)
    } else {
        let (prog, res) = match last {
            Some(v) => v,
            None => {
                let (p, r, _) = feasibility(0.0, &mut cert)?;
                (p, r)
            }
        };
        cert.primal_residual = res.primal_residual;
        cert.psd_residual = res.psd_residual;
        round_compressed(&prog, &res.y, seed, tol).map(|r| r.outcome)
    };
    if cert.psd_residual > 1e2 * params.solver.eps_primal || cert.primal_residual > 1e2 * params.solver.eps_primal {
        cert.approximate = true;
    }
    match rounded {
        Ok(r) => {
            let refs: Vec<&[f64]> = r.groups.iter().map(|g| g.as_slice()).collect();
            cert.lower_bound = t.eval(&refs)?;
            cert.assignment = r.groups;
        }
        Err(Error::DegenerateReweight { .. }) | Err(Error::Rounding(_)) => {}
        Err(e) => return Err(e),
    }
    Ok(cert)
}

/// Pairwise-independent certificate: `r = max_x SDP(x)` over the pairwise set,
/// upper bound `r sqrt(n)`, lower bound from rounding the best bilinear SDP.
pub fn simple_sqrtn_certificate(
    t: &Tensor,
    params: &SolverParams,
    seed: SeedTree,
    tol: &Tolerances,
) -> Result<Certificate> {
    if t.order() != 3 {
        return Err(Error::OrderMismatch { expected: "3".into(), found: t.order() });
    }
    let n = t.dim();
    let d = pairwise_set(n);
    let folded = fold_support(&d, true);
    let mut cert = Certificate {
        method: "pairwise-sqrt-n".into(),
        domain: Domain::Hypercube,
        n,
        k: 1,
        upper_bound: 0.0,
        alpha_star: 0.0,
        alpha_infeasible: None,
        bound_constant: (n as f64).sqrt(),
        trivial_bound: t.l1_norm(),
        description: "degree-2 bilinear relaxation per support point".into(),
        block_dims: vec![2 * n + 1],
        support_size: d.len(),
        folded_size: folded.points.len(),
        primal_residual: 0.0,
        psd_residual: 0.0,
        approximate: false,
        lower_bound: 0.0,
        assignment: vec![vec![1.0; n]; 3],
        solves: 0,
        steps: Vec::new(),
    };
    if t.l1_norm() == 0.0 {
        cert.lower_bound = 0.0;
        return Ok(cert);
    }
    let mut rng = seed.rng();
    let mut r = 0.0f64;
    let mut best_value = f64::NEG_INFINITY;
    for x in &folded.points {
        let m = t.contract_leading(&[x])?;
        if m.iter().all(|v| *v == 0.0) {
            continue;
        }
        let (relax, sol) = solve_bilinear_sdp(&m, Domain::Hypercube, &[], params, tol)?;
        cert.solves += 1;
        cert.primal_residual = cert.primal_residual.max(sol.result.primal_residual);
        cert.psd_residual = cert.psd_residual.max(sol.result.psd_residual);
        if sol.result.status != Status::Optimal {
            cert.approximate = true;
        }
        r = r.max(sol.sos);
        let b = grothendieck_round(&sol.extraction.mu, relax.groups[0], relax.groups[1], &m, GROTHENDIECK_TRIALS, &mut rng)?;
        // Either sign of x pairs with the rounded (y, z).
        let (s, v) = if b.value >= 0.0 { (1.0, b.value) } else { (-1.0, -b.value) };
        if v > best_value {
            best_value = v;
            cert.assignment = vec![x.iter().map(|a| s * a).collect(), b.y, b.z];
        }
    }
    cert.alpha_star = r;
    cert.upper_bound = r * (n as f64).sqrt();
    let refs: Vec<&[f64]> = cert.assignment.iter().map(|g| g.as_slice()).collect();
    cert.lower_bound = t.eval(&refs)?;
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::brute_force_decoupled;
    use rand::Rng;

    fn signs(rng: &mut impl Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
    }

    fn planted(n: usize, seed: u64) -> (Tensor, Vec<f64>, Vec<f64>) {
        let mut rng = SeedTree::new(seed).rng();
        let (a, b, c) = (signs(&mut rng, n), signs(&mut rng, n), signs(&mut rng, n));
        (Tensor::rank_one(&[a, b.clone(), c.clone()]).unwrap(), b, c)
    }

    #[test]
    fn block_sizes_n4_k2() {
        let (t, ..) = planted(4, 0);
        let d = default_hitting_set(4, 2, Domain::Hypercube).unwrap();
        let folded = fold_support(&d, true).points.len();
        let prog = assemble_compressed(&t, 2, 0.0, &d, Domain::Hypercube, &CompressedOptions::default()).unwrap();
        // 1, y, z, yz, yy'z, yzz'.
        let compact = 1 + 4 + 4 + 16 + 2 * 6 * 4;
        assert_eq!(prog.block_dims, vec![compact; folded + 1]);
        let opts = CompressedOptions { pattern: BasisPattern::Full, shared_marginal: true, ..Default::default() };
        let prog = assemble_compressed(&t, 2, 0.0, &d, Domain::Hypercube, &opts).unwrap();
        let full = 1 + 8 + 28 + 56;
        assert_eq!(prog.block_dims[0], full);
        assert!(prog.block_dims[1..].iter().all(|&b| b == 2 * full));
    }

    #[test]
    fn alpha_zero_is_feasible() {
        let mut rng = SeedTree::new(3).rng();
        let t = Tensor::gaussian(3, 2, &mut rng);
        let d = default_hitting_set(2, 1, Domain::Hypercube).unwrap();
        let prog = assemble_compressed(&t, 1, 0.0, &d, Domain::Hypercube, &CompressedOptions::default()).unwrap();
        let res = solve(&prog.compiled.problem, &SearchParams::default().solver, None).unwrap();
        assert_ne!(res.status, Status::InfeasibleCertificate);
        assert!(res.feasible_within_band(&SearchParams::default().solver));
    }

    #[test]
    fn integral_lift_meets_the_constraints() {
        let (t, b, c) = planted(4, 5);
        let k = 2;
        let d = default_hitting_set(4, k, Domain::Hypercube).unwrap();
        let opt = brute_force_decoupled(&t).unwrap().value;
        let ratio = planted_lift_ratio(&t, &d, &b, &c, k).unwrap();
        assert!(ratio.sqrt() >= direction_constant(4, k) * opt);
        for (scale, ok) in [(0.99, true), (1.01, false)] {
            let alpha = scale * ratio.sqrt();
            let prog = assemble_compressed(&t, k, alpha, &d, Domain::Hypercube, &CompressedOptions::default()).unwrap();
            let y = prog.lift_moments(&b, &c).unwrap();
            let p = &prog.compiled.problem;
            for e in &p.equalities {
                assert!((e.value(&y) - e.rhs).abs() < 1e-9);
            }
            assert_eq!(p.inequalities.len(), 1);
            assert_eq!(p.inequalities[0].value(&y) >= p.inequalities[0].rhs, ok);
            for blk in &p.blocks {
                let m = blk.eval(&y);
                assert!(m.symmetric_eigenvalues().min() > -1e-9);
            }
        }
    }

    #[test]
    fn maximization_splits_over_points() {
        let mut rng = SeedTree::new(8).rng();
        let t = Tensor::gaussian(3, 2, &mut rng);
        let d = default_hitting_set(2, 1, Domain::Hypercube).unwrap();
        let opts = CompressedOptions::default();
        let params = SolverParams { max_iter: 50_000, eps_primal: 1e-7, eps_gap: 1e-7, ..SolverParams::default() };
        let joint = assemble_compressed_max(&t, 1, &d, Domain::Hypercube, &opts).unwrap();
        let rj = solve(&joint.compiled.problem, &params, None).unwrap();
        let best = joint
            .folded
            .points
            .iter()
            .map(|x| solve(&point_program(&t, x, Domain::Hypercube, &opts).unwrap().problem, &params, None).unwrap().objective)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((rj.objective - best).abs() < 1e-4 * best.max(1.0), "{} vs {best}", rj.objective);
    }

    #[test]
    fn zero_tensor_certificate() {
        let t = Tensor::zeros(3, 3);
        let cert = certify_binary_search(&t, 1, Domain::Hypercube, &SearchParams::default(), &Tolerances::default()).unwrap();
        assert_eq!(cert.upper_bound, 0.0);
        assert_eq!(cert.alpha_star, 0.0);
        let s = simple_sqrtn_certificate(&t, &SolverParams::default(), SeedTree::new(0), &Tolerances::default()).unwrap();
        assert_eq!(s.upper_bound, 0.0);
    }

    #[test]
    fn planted_certificates_bracket_opt() {
        for seed in 0..3 {
            let (t, ..) = planted(4, seed);
            let opt = brute_force_decoupled(&t).unwrap().value;
            let cert = certify_binary_search(&t, 2, Domain::Hypercube, &SearchParams::default(), &Tolerances::default()).unwrap();
            assert!(cert.alpha_star >= direction_constant(4, 2) * opt);
            assert!(cert.lower_bound >= cert.alpha_star / 6.0);
            assert!(cert.upper_bound >= opt - 1e-9 && cert.lower_bound <= opt + 1e-9);
            assert!(cert.to_text().contains("upper_bound: "));
        }
    }

    #[test]
    fn random_certificates_are_sound() {
        let mut rng = SeedTree::new(21).rng();
        for _ in 0..4 {
            let t = Tensor::gaussian(3, 3, &mut rng);
            let opt = brute_force_decoupled(&t).unwrap().value;
            let cert = certify_binary_search(&t, 1, Domain::Hypercube, &SearchParams::default(), &Tolerances::default()).unwrap();
            assert!(cert.upper_bound >= opt - 1e-4 * t.l1_norm());
            assert!(cert.lower_bound <= opt + 1e-9);
            assert!(cert.lower_bound >= cert.alpha_star / 6.0, "{}", cert.to_text());
        }
    }

    #[test]
    fn sphere_rank_one() {
        let v = vec![0.6, 0.0, 0.8];
        let t = Tensor::rank_one(&[v.clone(), v.clone(), v]).unwrap();
        let cert = certify_binary_search(&t, 1, Domain::Sphere, &SearchParams::default(), &Tolerances::default()).unwrap();
        assert!(cert.upper_bound >= 1.0 - 1e-6);
        assert!(cert.lower_bound >= cert.alpha_star / 3.0, "{}", cert.to_text());
        assert!(cert.lower_bound <= 1.0 + 1e-9);
    }

    #[test]
    fn sqrt_n_certificate() {
        let t = Tensor::from_entries(3, 1, vec![(vec![0, 0, 0], 1.0)]).unwrap();
        let c = simple_sqrtn_certificate(&t, &SolverParams::default(), SeedTree::new(0), &Tolerances::default()).unwrap();
        assert!((c.upper_bound - 1.0).abs() < 1e-4 && (c.lower_bound - 1.0).abs() < 1e-9);
        let mut rng = SeedTree::new(2).rng();
        for i in 0..3 {
            let t = Tensor::gaussian(3, 4, &mut rng);
            let opt = brute_force_decoupled(&t).unwrap().value;
            let c = simple_sqrtn_certificate(&t, &SolverParams::default(), SeedTree::new(i), &Tolerances::default()).unwrap();
            assert!(c.upper_bound >= opt - 1e-5 * t.l1_norm());
            assert!(c.lower_bound >= 0.56 * c.alpha_star, "{}", c.to_text());
        }
    }
}
