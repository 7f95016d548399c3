//! The three rounding branches and the best-of driver.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{decompose, CnfFormula, SatDecomposition};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::rng::SeedTree;
use crate::roundings::{charikar_wirth_from_moments, scalar_fix};
use crate::sdp_solver::{
    assemble_sos_sdp, solve, solve_bilinear_sdp, tensor_space, Axiom, Mode, MomentProgram, Objective, RelaxationSpec,
    SolverParams,
};
use crate::sos_core::{GroupId, Monomial, SparsePoly, VarId, VarSpace};
use crate::tensor_poly::{recouple_cubic, Domain};

#[derive(Clone, Debug, PartialEq)]
pub struct SatParams {
    /// Constant `c` in `delta = c / (sqrt(n) ln n)`.
    pub c: f64,
    /// Outer repetitions; `None` means `20 n`.
    pub outer: Option<usize>,
    pub gaussian_samples: usize,
    pub recouple_samples: usize,
    /// Points `x` prepared for the degree-3 branch.
    pub deg3_points: usize,
    /// Largest compact basis for which the degree-3 branch solves the joint
    /// degree-6 relaxation; above it each point gets its own bilinear program.
    pub deg3_basis_cap: usize,
    /// Accept `x` once `f2(x) >= -f2_slack * delta`.
    pub f2_slack: f64,
    pub x_tries: usize,
    pub solver: SolverParams,
    pub tol: Tolerances,
}

impl Default for SatParams {
    fn default() -> Self {
        Self {
            c: 0.1,
            outer: None,
            gaussian_samples: 50,
            recouple_samples: 50,
            deg3_points: 6,
            deg3_basis_cap: 100,
            f2_slack: 4.0,
            x_tries: 1000,
            solver: SolverParams { max_iter: 20_000, eps_primal: 1e-6, eps_gap: 1e-6, ..SolverParams::default() },
            tol: Tolerances::default(),
        }
    }
}

impl SatParams {
    pub fn reps(&self, n: usize) -> usize {
        self.outer.unwrap_or(20 * n).max(1)
    }
}

/// Branch order doubles as the tie-break: earlier wins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Branch {
    Deg3,
    Deg2,
    Deg1,
    Baseline,
}

impl Branch {
    pub fn name(&self) -> &'static str {
        match self {
            Branch::Deg3 => "degree-3",
            Branch::Deg2 => "degree-2",
            Branch::Deg1 => "degree-1",
            Branch::Baseline => "random",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchResult {
    pub branch: Branch,
    pub assignment: Option<Vec<f64>>,
    pub fraction: Option<Ratio<i64>>,
    /// Relaxation value the branch rounded (`pE[+-f1]`, `pE f2` or `pE f3~`).
    pub sdp_value: Option<f64>,
    pub note: String,
}

impl BranchResult {
    fn empty(branch: Branch, note: &str) -> Self {
        Self { branch, assignment: None, fraction: None, sdp_value: None, note: note.into() }
    }

    fn offer(&mut self, d: &SatDecomposition, x: Vec<f64>) {
        let v = d.psi(&x);
        if self.fraction.is_none_or(|f| v > f) {
            self.fraction = Some(v);
            self.assignment = Some(x);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Deg1Result {
    /// Programs `f1 >= delta` and `-f1 >= delta`.
    pub feasible: [bool; 2],
    /// Largest `pE[+-f1]` subject to `pE[f1 + f2] >= 0`.
    pub values: [f64; 2],
    pub result: BranchResult,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Deg3Path {
    /// Joint degree-6 relaxation of `f3~` with the two `f2` axioms.
    Joint,
    /// One degree-2 bilinear program per sampled `x`.
    PerPoint,
}

impl Deg3Path {
    pub fn name(&self) -> &'static str {
        match self {
            Deg3Path::Joint => "joint-degree-6",
            Deg3Path::PerPoint => "per-point-degree-2",
        }
    }
}

fn random_signs<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// `L` with `L L^T = C` after clipping negative eigenvalues.
fn psd_factor(c: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = c.clone().symmetric_eigen();
    let mut v = eig.eigenvectors;
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        v.column_mut(j).scale_mut(s);
    }
    v
}

fn degree_two_basis(space: &VarSpace, g: GroupId) -> Vec<Monomial> {
    std::iter::once(Monomial::one()).chain(space.group_vars(g).map(Monomial::var)).collect()
}

/// `x_i = +1` with probability `(1 + p bar_i) / 2`.
fn biased_signs<R: Rng + ?Sized>(bar: &[f64], p: f64, rng: &mut R) -> Vec<f64> {
    bar.iter().map(|b| if rng.random::<f64>() < (1.0 + p * b) / 2.0 { 1.0 } else { -1.0 }).collect()
}

/// Degree-1 branch: maximize `+-pE f1` subject to `pE[f1 + f2] >= 0`; a sign
/// whose value reaches `delta` is rounded by truncated Gaussian sampling with
/// bias `p`.
pub fn branch_deg1(d: &SatDecomposition, params: &SatParams, seed: SeedTree) -> Result<Deg1Result> {
    let n = d.n;
    let mut out = Deg1Result {
        feasible: [false; 2],
        values: [f64::NEG_INFINITY; 2],
        result: BranchResult::empty(Branch::Deg1, "both programs below delta"),
    };
    if n == 0 || d.num1.is_empty() {
        out.values = [0.0; 2];
        out.result.note = "f1 is zero".into();
        return Ok(out);
    }
    let space = d.space.clone();
    let xs: Vec<VarId> = space.group_vars(d.group).collect();
    let lnn = (n.max(3) as f64).ln();
    let t = (48.0 * lnn).sqrt();
    let p = (n as f64).powf(-0.25) / lnn;
    let reps = params.reps(n);
    let mut notes = Vec::new();
    for (si, sign) in [1.0, -1.0].into_iter().enumerate() {
        let mut prog = MomentProgram::new(space.clone(), Domain::Hypercube, Mode::Maximize);
        prog.add_moment_block(degree_two_basis(&space, d.group));
        prog.add_inequality(d.f1.add(&d.f2));
        prog.set_objective(d.f1.scale(sign));
        let compiled = prog.compile()?;
        let res = solve(&compiled.problem, &params.solver, None)?;
        let ext = compiled.extract(&res, &params.tol)?;
        let value = ext.objective_after;
        out.values[si] = value;
        if value < d.delta - 10.0 * params.solver.eps_primal {
            continue;
        }
        out.feasible[si] = true;
        notes.push(if sign > 0.0 { "f1 >= delta" } else { "-f1 >= delta" });
        let mean = ext.mu.first_moments(&xs)?;
        let second = ext.mu.second_moments(&xs)?;
        let mv = DVector::from_column_slice(&mean);
        let cov = second - &mv * mv.transpose();
        let l = psd_factor(&cov);
        let sub = seed.child(if sign > 0.0 { "plus" } else { "minus" });
        for rep in 0..reps {
            let mut rng = sub.index(rep as u64).rng();
            for _ in 0..params.gaussian_samples.max(1) {
                let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let g = &mv + &l * z;
                let bar: Vec<f64> = g.iter().map(|gi| (gi / t).clamp(-1.0, 1.0)).collect();
                let x = biased_signs(&bar, p, &mut rng);
                out.result.offer(d, x);
            }
        }
        out.result.sdp_value = Some(out.result.sdp_value.map_or(value, |v: f64| v.max(value)));
    }
    if !notes.is_empty() {
        out.result.note = notes.join(", ");
    }
    Ok(out)
}

/// Degree-2 branch: Charikar-Wirth on the degree-2 relaxation of `max f2`,
/// keeping whichever of `x, -x` has the larger `psi`.
pub fn branch_deg2(d: &SatDecomposition, params: &SatParams, seed: SeedTree) -> Result<BranchResult> {
    let n = d.n;
    let mut out = BranchResult::empty(Branch::Deg2, "");
    let reps = params.reps(n);
    if d.num2.is_empty() {
        out.sdp_value = Some(0.0);
        out.note = "f2 is zero".into();
        for rep in 0..reps {
            let x = random_signs(&mut seed.index(rep as u64).rng(), n);
            out.offer(d, x);
        }
        return Ok(out);
    }
    let space = d.space.clone();
    let xs: Vec<VarId> = space.group_vars(d.group).collect();
    let mut prog = MomentProgram::new(space.clone(), Domain::Hypercube, Mode::Maximize);
    prog.add_moment_block(degree_two_basis(&space, d.group));
    prog.set_objective(d.f2.clone());
    let compiled = prog.compile()?;
    let res = solve(&compiled.problem, &params.solver, None)?;
    let ext = compiled.extract(&res, &params.tol)?;
    out.sdp_value = Some(ext.objective_after);
    let sigma = ext.mu.second_moments(&xs)?;
    let a = d.f2_matrix();
    let t = (2.0 * (n.max(3) as f64).ln()).sqrt().max(1.0);
    out.note = format!("T = {t:.4}");
    for rep in 0..reps {
        let mut rng = seed.index(rep as u64).rng();
        let cw = charikar_wirth_from_moments(&sigma, &a, t, 1, &mut rng)?;
        let neg: Vec<f64> = cw.x.iter().map(|v| -v).collect();
        let x = if d.psi(&neg) > d.psi(&cw.x) { neg } else { cw.x };
        out.offer(d, x);
    }
    Ok(out)
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

fn compact_size(n: usize) -> usize {
    n + 1 + 2 * n + n * n + n * n * n.saturating_sub(1)
}

/// Point `x` with `f2(x) >= -slack delta`, or the best of `tries` draws.
fn sample_point<R: Rng + ?Sized>(d: &SatDecomposition, params: &SatParams, rng: &mut R) -> Vec<f64> {
    let floor = -params.f2_slack * d.delta;
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..params.x_tries.max(1) {
        let x = random_signs(rng, d.n);
        let v = d.f2_value(&x);
        if v >= floor {
            return x;
        }
        if best.as_ref().is_none_or(|b| v > b.1) {
            best = Some((x, v));
        }
    }
    best.expect("at least one draw").0
}

/// State prepared for one `x`: Gram matrix of the joint `(y, z)` moments and
/// the slice `M = f3~(x, ., .)`.
struct Prepared {
    x: Vec<f64>,
    gram: DMatrix<f64>,
    m: DMatrix<f64>,
}

/// Degree-3 branch: relax `max f3~` with `f2(y), f2(z) >= -delta`, fix a
/// point `x` with `f2(x) >= -4 delta`, Charikar-Wirth on the joint `(y, z)`
/// and recouple.
pub fn branch_deg3(d: &SatDecomposition, params: &SatParams, seed: SeedTree) -> Result<(BranchResult, Deg3Path)> {
    let n = d.n;
    let mut out = BranchResult::empty(Branch::Deg3, "");
    let reps = params.reps(n);
    if n < 3 || d.num3.is_empty() {
        out.note = "f3 is zero".into();
        out.sdp_value = Some(0.0);
        return Ok((out, Deg3Path::PerPoint));
    }
    let t3 = d.f3_tensor().to_tensor();
    let path = if compact_size(n) <= params.deg3_basis_cap { Deg3Path::Joint } else { Deg3Path::PerPoint };
    let mut xrng = seed.child("points").rng();
    let mut prepared = Vec::new();
    let mut sdp = f64::NEG_INFINITY;
    match path {
        Deg3Path::Joint => {
            let (space, groups) = tensor_space(n, 3, Domain::Hypercube, false);
            let axioms = f2_axioms(d, &space, &groups[1..]);
            let relax = assemble_sos_sdp(Objective::Decoupled(&t3), &RelaxationSpec::new(6, Domain::Hypercube), &axioms, None)?;
            let sol = relax.solve(&params.solver, &params.tol, t3.l1_norm().max(1e-12), None)?;
            sdp = sol.sos;
            let ys: Vec<VarId> = space.group_vars(groups[1]).collect();
            let zs: Vec<VarId> = space.group_vars(groups[2]).collect();
            let mut w = ys.clone();
            w.extend(&zs);
            for _ in 0..params.deg3_points.max(1) {
                let x = sample_point(d, params, &mut xrng);
                let m = t3.contract_leading(&[&x])?;
                let p = bilinear_poly(&m, &ys, &zs, &space);
                let fix = match scalar_fix(&sol.extraction.mu, &p, 1, &params.tol) {
                    Ok(f) => f,
                    Err(Error::DegenerateReweight { .. }) => continue,
                    Err(e) => return Err(e),
                };
                prepared.push(signed(x, m, fix.mu.second_moments(&w)?, fix.value));
            }
        }
        Deg3Path::PerPoint => {
            let (space, groups) = tensor_space(n, 2, Domain::Hypercube, false);
            let axioms = f2_axioms(d, &space, &groups);
            for _ in 0..params.deg3_points.max(1) {
                let x = sample_point(d, params, &mut xrng);
                let m = t3.contract_leading(&[&x])?;
                if m.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let (relax, sol) = solve_bilinear_sdp(&m, Domain::Hypercube, &axioms, &params.solver, &params.tol)?;
                sdp = sdp.max(sol.sos);
                let mut w: Vec<VarId> = relax.space.group_vars(relax.groups[0]).collect();
                w.extend(relax.space.group_vars(relax.groups[1]));
                prepared.push(signed(x, m, sol.extraction.mu.second_moments(&w)?, sol.sos));
            }
        }
    }
    out.sdp_value = Some(sdp);
    out.note = format!("{} with {} points", path.name(), prepared.len());
    if prepared.is_empty() {
        return Ok((out, path));
    }
    let big = bilinear_lift(n);
    let t = (8.0 * (n.max(3) as f64).ln()).sqrt();
    for rep in 0..reps {
        let st = &prepared[rep % prepared.len()];
        let mut rng = seed.index(rep as u64).rng();
        let b = big(&st.m);
        let cw = charikar_wirth_from_moments(&st.gram, &b, t, 1, &mut rng)?;
        let (y, z) = cw.x.split_at(n);
        let v: f64 = (0..n).map(|j| y[j] * (0..n).map(|l| st.m[(j, l)] * z[l]).sum::<f64>()).sum();
        let x: Vec<f64> = if v < 0.0 { st.x.iter().map(|a| -a).collect() } else { st.x.clone() };
        let rec = recouple_cubic(&x, y, z)?;
        for _ in 0..params.recouple_samples.max(1) {
            out.offer(d, rec.sample(&mut rng));
        }
    }
    Ok((out, path))
}

fn signed(x: Vec<f64>, m: DMatrix<f64>, gram: DMatrix<f64>, value: f64) -> Prepared {
    if value < 0.0 {
        Prepared { x: x.iter().map(|a| -a).collect(), m: -m, gram }
    } else {
        Prepared { x, m, gram }
    }
}

/// `B = [[0, M/2], [M^T/2, 0]]`, so that `(y,z)^T B (y,z) = y^T M z`.
fn bilinear_lift(n: usize) -> impl Fn(&DMatrix<f64>) -> DMatrix<f64> {
    move |m: &DMatrix<f64>| {
        let mut b = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            for l in 0..n {
                b[(j, n + l)] = 0.5 * m[(j, l)];
                b[(n + l, j)] = 0.5 * m[(j, l)];
            }
        }
        b
    }
}

fn f2_axioms(d: &SatDecomposition, space: &VarSpace, groups: &[GroupId]) -> Vec<Axiom> {
    groups
        .iter()
        .map(|&g| Axiom::Localized(d.f2_on(space, g).add(&SparsePoly::constant(d.delta)), vec![Monomial::one()]))
        .collect()
}

/// Best of `reps` uniformly random assignments.
pub fn random_baseline(d: &SatDecomposition, reps: usize, seed: SeedTree) -> BranchResult {
    let mut out = BranchResult::empty(Branch::Baseline, "uniform assignments");
    for rep in 0..reps.max(1) {
        out.offer(d, random_signs(&mut seed.index(rep as u64).rng(), d.n));
    }
    out
}

#[derive(Clone, Debug)]
pub struct SatReport {
    pub assignment: Vec<f64>,
    pub fraction: Ratio<i64>,
    pub branch: Branch,
    pub delta: f64,
    pub reps: usize,
    pub deg1: Deg1Result,
    pub deg3_path: Deg3Path,
    /// Every branch in tie-break order.
    pub branches: Vec<BranchResult>,
}

impl SatReport {
    pub fn branch_result(&self, b: Branch) -> &BranchResult {
        self.branches.iter().find(|r| r.branch == b).expect("every branch is reported")
    }

    /// Assignment line (`+-1` per variable), exact fraction and provenance.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let xs: Vec<String> = self.assignment.iter().map(|v| if *v < 0.0 { "-1".into() } else { "1".into() }).collect();
        let _ = writeln!(s, "assignment: {}", xs.join(" "));
        let _ = writeln!(s, "fraction: {}/{}", self.fraction.numer(), self.fraction.denom());
        let _ = writeln!(s, "branch: {}", self.branch.name());
        let _ = writeln!(s, "delta: {:e}", self.delta);
        let _ = writeln!(s, "repetitions: {}", self.reps);
        let _ = writeln!(s, "degree-1 feasible: {} {}", self.deg1.feasible[0], self.deg1.feasible[1]);
        let _ = writeln!(s, "degree-3 path: {}", self.deg3_path.name());
        for b in &self.branches {
            let f = b.fraction.map_or("none".to_string(), |f| format!("{}/{}", f.numer(), f.denom()));
            let v = b.sdp_value.map_or("none".to_string(), |v| format!("{v:e}"));
            let _ = writeln!(s, "{}: fraction {f}, relaxation {v}, {}", b.branch.name(), b.note);
        }
        s
    }
}

/// Runs every branch and the random baseline and returns the best assignment.
pub fn solve_3sat(f: &CnfFormula, params: &SatParams, seed: SeedTree) -> Result<SatReport> {
    let d = decompose(f, params.c);
    let reps = params.reps(f.n);
    let (deg3, path) = branch_deg3(&d, params, seed.child("deg3"))?;
    let deg2 = branch_deg2(&d, params, seed.child("deg2"))?;
    let deg1 = branch_deg1(&d, params, seed.child("deg1"))?;
    let base = random_baseline(&d, reps, seed.child("baseline"));
    let branches = vec![deg3, deg2, deg1.result.clone(), base];
    let mut best: Option<(Ratio<i64>, &BranchResult)> = None;
    for b in &branches {
        if let Some(fr) = b.fraction {
            if best.as_ref().is_none_or(|(bf, _)| fr > *bf) {
                best = Some((fr, b));
            }
        }
    }
    let (fraction, winner) = best.expect("the baseline always produces an assignment");
    Ok(SatReport {
        assignment: winner.assignment.clone().expect("fraction implies assignment"),
        fraction,
        branch: winner.branch,
        delta: d.delta,
        reps,
        deg1,
        deg3_path: path,
        branches: branches.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::threesat::{parse_dimacs, planted_formula};

    fn quick() -> SatParams {
        SatParams { outer: Some(40), ..SatParams::default() }
    }

    #[test]
    fn single_clause_is_satisfied() {
        let f = parse_dimacs("p cnf 3 1\n1 -2 3 0\n").unwrap();
        let r = solve_3sat(&f, &quick(), SeedTree::new(1)).unwrap();
        assert_eq!(r.fraction, Ratio::from_integer(1));
        assert_eq!(r.branches.len(), 4);
    }

    #[test]
    fn planted_reaches_seven_eighths() {
        let (f, _) = planted_formula(20, 80, SeedTree::new(3)).unwrap();
        let t = std::time::Instant::now();
        let r = solve_3sat(&f, &SatParams::default(), SeedTree::new(4)).unwrap();
        eprintln!("{}elapsed {:?}", r.to_text(), t.elapsed());
        assert!(r.fraction >= Ratio::new(7, 8));
    }

    #[test]
    fn cw_sign_choice_never_hurts() {
        let (f, _) = planted_formula(10, 40, SeedTree::new(8)).unwrap();
        let d = decompose(&f, 0.1);
        let r = branch_deg2(&d, &quick(), SeedTree::new(9)).unwrap();
        let x = r.assignment.unwrap();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!(r.fraction.unwrap() >= d.psi(&neg));
    }

    #[test]
    fn recoupled_linear_part_vanishes() {
        let (f, _) = planted_formula(9, 30, SeedTree::new(2)).unwrap();
        let d = decompose(&f, 0.1);
        let mut rng = SeedTree::new(6).rng();
        for _ in 0..10 {
            let (x, y, z) = (random_signs(&mut rng, 9), random_signs(&mut rng, 9), random_signs(&mut rng, 9));
            let rec = recouple_cubic(&x, &y, &z).unwrap();
            assert!(rec.expectation_with(|w| d.f1.eval(w)).abs() < 1e-12);
            let t = d.f3_tensor();
            let want = 2.0 / 9.0 * t.to_tensor().eval(&[&x, &y, &z]).unwrap();
            assert!((rec.expectation(&t).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn every_branch_reports() {
        let (f, _) = planted_formula(4, 4, SeedTree::new(12)).unwrap();
        let r = solve_3sat(&f, &quick(), SeedTree::new(13)).unwrap();
        assert!(r.fraction >= Ratio::new(7, 8));
        assert_eq!(r.deg3_path, Deg3Path::Joint);
        for b in [Branch::Deg3, Branch::Deg2, Branch::Baseline] {
            assert!(r.branch_result(b).fraction.is_some(), "{:?}", b);
        }
        assert!(r.deg1.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn bias_scales_linear_part() {
        let (f, _) = planted_formula(10, 40, SeedTree::new(21)).unwrap();
        let d = decompose(&f, 0.1);
        let mut rng = SeedTree::new(22).rng();
        let bar: Vec<f64> = (0..10).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let p = 0.3;
        let samples = 200_000;
        let mean = (0..samples).map(|_| d.f1.eval(&biased_signs(&bar, p, &mut rng))).sum::<f64>() / samples as f64;
        let want = p * d.f1.eval(&bar);
        // f1 is bounded by 3/8, so the standard error is at most 3/8 / sqrt(samples).
        assert!((mean - want).abs() < 5.0 * 0.375 / (samples as f64).sqrt(), "{mean} vs {want}");
    }

    #[test]
    fn some_case_applies_on_planted_inputs() {
        let params = quick();
        for s in 0..5 {
            let (f, x) = planted_formula(12, 50, SeedTree::new(30).index(s)).unwrap();
            let d = decompose(&f, params.c);
            let deg1 = branch_deg1(&d, &params, SeedTree::new(31)).unwrap();
            let deg2 = branch_deg2(&d, &params, SeedTree::new(32)).unwrap();
            let planted_lift = d.f2_value(&x) >= -d.delta;
            assert!(deg1.feasible.iter().any(|&b| b) || deg2.sdp_value.unwrap() > d.delta || planted_lift);
        }
    }
}
