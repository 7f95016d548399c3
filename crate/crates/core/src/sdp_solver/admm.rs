//! Over-relaxed ADMM on the moment-vector form of a block-PSD program.
//!
//! The program `max c.y  s.t.  A(y) + a0 in K` is split as `A(y) + a0 = s`,
//! `s in K`, where `K` is a product of PSD cones, a zero cone (equalities) and
//! a nonnegative orthant (inequalities). The `y`-update solves the normal
//! equations `A^T A y = A^T(s - u - a0) + c/rho`; `A^T A` is diagonal over the
//! PSD part and the scalar rows enter as a low-rank correction handled with a
//! cached Woodbury factorization.

use nalgebra::{DMatrix, DVector};

use super::problem::{Mode, SdpProblem};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverParams {
    pub max_iter: usize,
    pub eps_primal: f64,
    pub eps_gap: f64,
    /// Over-relaxation factor in `(1, 2)`.
    pub alpha: f64,
    pub rho: f64,
    pub check_every: usize,
    /// Upper cap on the phase-I slack in feasibility mode.
    pub slack_cap: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self { max_iter: 50_000, eps_primal: 1e-6, eps_gap: 1e-6, alpha: 1.6, rho: 1.0, check_every: 10, slack_cap: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Feasible,
    InfeasibleCertificate,
    IterationLimit,
}

impl Status {
    pub fn name(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Feasible => "feasible",
            Status::InfeasibleCertificate => "infeasible-certificate",
            Status::IterationLimit => "iteration-limit",
        }
    }
}

/// Cone-space vector: one matrix per PSD block plus scalar rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeVec {
    mats: Vec<DMatrix<f64>>,
    rows: Vec<f64>,
}

impl ConeVec {
    fn zeros_like(op: &Operator) -> Self {
        Self {
            mats: op.blocks.iter().map(|b| DMatrix::zeros(b.dim, b.dim)).collect(),
            rows: vec![0.0; op.rows.len()],
        }
    }

    fn same_shape(&self, other: &ConeVec) -> bool {
        self.rows.len() == other.rows.len()
            && self.mats.len() == other.mats.len()
            && self.mats.iter().zip(&other.mats).all(|(a, b)| a.shape() == b.shape())
    }

    fn dot(&self, other: &ConeVec) -> f64 {
        self.mats.iter().zip(&other.mats).map(|(a, b)| a.dot(b)).sum::<f64>()
            + self.rows.iter().zip(&other.rows).map(|(a, b)| a * b).sum::<f64>()
    }

    fn max_abs_diff(&self, other: &ConeVec) -> f64 {
        let m = self
            .mats
            .iter()
            .zip(&other.mats)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max);
        self.rows.iter().zip(&other.rows).map(|(a, b)| (a - b).abs()).fold(m, f64::max)
    }
}

/// State that lets a later solve of a structurally identical problem resume.
#[derive(Clone, Debug)]
pub struct WarmStart {
    y: Vec<f64>,
    s: ConeVec,
    u: ConeVec,
    rho: f64,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub status: Status,
    pub y: Vec<f64>,
    /// Block matrices recomputed from `y`.
    pub blocks: Vec<DMatrix<f64>>,
    pub objective: f64,
    /// Dual estimate of the optimal value (maximize mode).
    pub dual_bound: f64,
    /// Largest equality or inequality violation at `y`.
    pub primal_residual: f64,
    /// Most negative block eigenvalue at `y`, as a nonnegative number.
    pub psd_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    /// Optimal slack of the phase-I program (feasibility mode with inequalities).
    pub phase1_slack: Option<f64>,
    pub warm: WarmStart,
}

impl SolveResult {
    /// Feasibility decision with the margin band: only a slack clearly below
    /// zero counts as infeasible.
    pub fn feasible_within_band(&self, params: &SolverParams) -> bool {
        match self.phase1_slack {
            Some(t) => t >= -10.0 * params.eps_primal,
            None => self.primal_residual <= 10.0 * params.eps_primal,
        }
    }
}

struct BlockOp {
    dim: usize,
    constant: DMatrix<f64>,
    entries: Vec<(usize, usize, usize, f64)>,
}

struct RowOp {
    terms: Vec<(usize, f64)>,
    constant: f64,
    nonneg: bool,
}

enum LinSolver {
    Diagonal(Vec<f64>),
    Woodbury { dinv: Vec<f64>, vrows: Vec<Vec<(usize, f64)>>, lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn> },
    Cg { diag: Vec<f64> },
}

struct Operator {
    n: usize,
    blocks: Vec<BlockOp>,
    rows: Vec<RowOp>,
    block_diag: Vec<f64>,
    solver: LinSolver,
}

const WOODBURY_MAX: usize = 2500;

impl Operator {
    fn build(blocks: Vec<BlockOp>, rows: Vec<RowOp>, n: usize) -> Result<Self> {
        let mut block_diag = vec![0.0; n];
        for b in &blocks {
            for &(r, c, v, a) in &b.entries {
                block_diag[v] += if r == c { a * a } else { 2.0 * a * a };
            }
        }
        // Off-diagonal couplings inside blocks appear when two variables share
        // a coordinate; moment relaxations never do this, so treat it as an error.
        let mut seen = std::collections::HashSet::new();
        for (bi, b) in blocks.iter().enumerate() {
            for &(r, c, _, _) in &b.entries {
                if !seen.insert((bi, r, c)) {
                    return Err(Error::Solver(format!("block {bi} coordinate ({r},{c}) has several variables")));
                }
            }
        }
        let mut op = Self { n, blocks, rows, block_diag, solver: LinSolver::Diagonal(Vec::new()) };
        op.solver = op.factor()?;
        Ok(op)
    }

    fn factor(&self) -> Result<LinSolver> {
        let n = self.n;
        let zero_vars: Vec<usize> = (0..n).filter(|&v| self.block_diag[v] == 0.0).collect();
        if self.rows.is_empty() {
            if !zero_vars.is_empty() {
                return Err(Error::Solver(format!("variable {} is unconstrained", zero_vars[0])));
            }
            return Ok(LinSolver::Diagonal(self.block_diag.iter().map(|d| 1.0 / d).collect()));
        }
        let m = self.rows.len() + zero_vars.len();
        if m > WOODBURY_MAX {
            let mut diag = self.block_diag.clone();
            for r in &self.rows {
                for &(v, a) in &r.terms {
                    diag[v] += a * a;
                }
            }
            if diag.iter().any(|&d| d == 0.0) {
                return Err(Error::Solver("unconstrained variable".into()));
            }
            return Ok(LinSolver::Cg { diag });
        }
        // P = D' + V^T C V with D' = D + e_v e_v^T on zero-diagonal variables
        // and C = diag(1 on rows, -1 on those corrections).
        let mut dinv: Vec<f64> = self.block_diag.clone();
        for &v in &zero_vars {
            dinv[v] = 1.0;
        }
        for d in dinv.iter_mut() {
            *d = 1.0 / *d;
        }
        let mut vrows: Vec<Vec<(usize, f64)>> = self.rows.iter().map(|r| r.terms.clone()).collect();
        vrows.extend(zero_vars.iter().map(|&v| vec![(v, 1.0)]));
        let nrows = self.rows.len();
        let mut dense_rows: Vec<Vec<(usize, f64)>> = vrows.clone();
        for r in dense_rows.iter_mut() {
            r.sort_by_key(|&(v, _)| v);
        }
        let mut k = DMatrix::zeros(m, m);
        for i in 0..m {
            k[(i, i)] = if i < nrows { 1.0 } else { -1.0 };
            for j in i..m {
                let v = sparse_dot_scaled(&dense_rows[i], &dense_rows[j], &dinv);
                k[(i, j)] += v;
                if i != j {
                    k[(j, i)] += v;
                }
            }
        }
        Ok(LinSolver::Woodbury { dinv, vrows, lu: k.lu() })
    }

    fn solve(&self, b: &[f64], warm: &[f64]) -> Vec<f64> {
        match &self.solver {
            LinSolver::Diagonal(dinv) => b.iter().zip(dinv).map(|(x, d)| x * d).collect(),
            LinSolver::Woodbury { dinv, vrows, lu } => {
                let db: Vec<f64> = b.iter().zip(dinv).map(|(x, d)| x * d).collect();
                let t = DVector::from_iterator(vrows.len(), vrows.iter().map(|r| r.iter().map(|&(v, a)| a * db[v]).sum::<f64>()));
                let w = lu.solve(&t).unwrap_or_else(|| DVector::zeros(vrows.len()));
                let mut out = db;
                for (r, &wi) in vrows.iter().zip(w.iter()) {
                    for &(v, a) in r {
                        out[v] -= dinv[v] * a * wi;
                    }
                }
                out
            }
            LinSolver::Cg { diag } => self.cg(b, warm, diag),
        }
    }

    fn normal_apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = x.iter().zip(&self.block_diag).map(|(a, d)| a * d).collect();
        for r in &self.rows {
            let s: f64 = r.terms.iter().map(|&(v, a)| a * x[v]).sum();
            for &(v, a) in &r.terms {
                out[v] += a * s;
            }
        }
        out
    }

    fn cg(&self, b: &[f64], warm: &[f64], diag: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut x = warm.to_vec();
        let ax = self.normal_apply(&x);
        let mut r: Vec<f64> = (0..n).map(|i| b[i] - ax[i]).collect();
        let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let mut z: Vec<f64> = (0..n).map(|i| r[i] / diag[i]).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        for _ in 0..500 {
            if r.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-12 * bnorm {
                break;
            }
            let ap = self.normal_apply(&p);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        x
    }

    /// `A(y) + a0`.
    fn forward(&self, y: &[f64]) -> ConeVec {
        let mats = self
            .blocks
            .iter()
            .map(|b| {
                let mut m = b.constant.clone();
                for &(r, c, v, a) in &b.entries {
                    let val = a * y[v];
                    m[(r, c)] += val;
                    if r != c {
                        m[(c, r)] += val;
                    }
                }
                m
            })
            .collect();
        let rows = self.rows.iter().map(|r| r.terms.iter().map(|&(v, a)| a * y[v]).sum::<f64>() + r.constant).collect();
        ConeVec { mats, rows }
    }

    fn constants(&self) -> ConeVec {
        ConeVec {
            mats: self.blocks.iter().map(|b| b.constant.clone()).collect(),
            rows: self.rows.iter().map(|r| r.constant).collect(),
        }
    }

    /// `A^T w` (without constants).
    fn adjoint(&self, w: &ConeVec) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (b, m) in self.blocks.iter().zip(&w.mats) {
            for &(r, c, v, a) in &b.entries {
                out[v] += if r == c { a * m[(r, c)] } else { a * (m[(r, c)] + m[(c, r)]) };
            }
        }
        for (r, &x) in self.rows.iter().zip(&w.rows) {
            for &(v, a) in &r.terms {
                out[v] += a * x;
            }
        }
        out
    }

    fn project(&self, v: &mut ConeVec) {
        for m in v.mats.iter_mut() {
            project_psd(m);
        }
        for (x, r) in v.rows.iter_mut().zip(&self.rows) {
            *x = if r.nonneg { x.max(0.0) } else { 0.0 };
        }
    }
}

fn sparse_dot_scaled(a: &[(usize, f64)], b: &[(usize, f64)], w: &[f64]) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s += a[i].1 * b[j].1 * w[a[i].0];
                i += 1;
                j += 1;
            }
        }
    }
    s
}

/// In-place Euclidean projection of a symmetric matrix onto the PSD cone.
pub fn project_psd(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return;
    }
    if n == 1 {
        m[(0, 0)] = m[(0, 0)].max(0.0);
        return;
    }
    let eig = m.clone().symmetric_eigen();
    let neg = eig.eigenvalues.iter().filter(|&&l| l < 0.0).count();
    if neg == 0 {
        return;
    }
    let q = &eig.eigenvectors;
    if neg <= n / 2 {
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l < 0.0 {
                let col = q.column(k);
                m.ger(-l, &col, &col, 1.0);
            }
        }
    } else {
        m.fill(0.0);
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l > 0.0 {
                let col = q.column(k);
                m.ger(l, &col, &col, 1.0);
            }
        }
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Projects `y` onto the affine set of the equalities (least-norm correction).
fn project_equalities(problem: &SdpProblem, y: &mut [f64]) {
    let rows = &problem.equalities;
    let m = rows.len();
    if m == 0 || m > 4000 {
        return;
    }
    let mut sorted: Vec<Vec<(usize, f64)>> = rows.iter().map(|r| r.terms.clone()).collect();
    for r in sorted.iter_mut() {
        r.sort_by_key(|&(v, _)| v);
    }
    let ones = vec![1.0; problem.num_vars];
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = sparse_dot_scaled(&sorted[i], &sorted[j], &ones);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
        g[(i, i)] += 1e-13;
    }
    let resid = DVector::from_iterator(m, rows.iter().map(|r| r.value(y) - r.rhs));
    let w = match g.clone().cholesky() {
        Some(ch) => ch.solve(&resid),
        None => match g.svd(true, true).solve(&resid, 1e-12) {
            Ok(w) => w,
            Err(_) => return,
        },
    };
    for (r, &wi) in rows.iter().zip(w.iter()) {
        for &(v, a) in &r.terms {
            y[v] -= a * wi;
        }
    }
}

/// Solves the program. `warm` must come from a structurally identical problem.
pub fn solve(problem: &SdpProblem, params: &SolverParams, warm: Option<&WarmStart>) -> Result<SolveResult> {
    problem.check()?;
    let phase1 = problem.mode == Mode::Feasibility && !problem.inequalities.is_empty();
    let n0 = problem.num_vars;
    let n = if phase1 { n0 + 1 } else { n0 };

    let blocks: Vec<BlockOp> = problem
        .blocks
        .iter()
        .map(|b| {
            let mut constant = DMatrix::zeros(b.dim, b.dim);
            for &(r, c, v) in &b.constant {
                constant[(r, c)] += v;
                if r != c {
                    constant[(c, r)] += v;
                }
            }
            BlockOp { dim: b.dim, constant, entries: b.entries.clone() }
        })
        .collect();
    let normalize = |terms: &[(usize, f64)], rhs: f64| -> (Vec<(usize, f64)>, f64) {
        let norm = terms.iter().map(|(_, a)| a * a).sum::<f64>().sqrt();
        let s = if norm > 0.0 { 1.0 / norm } else { 1.0 };
        let mut merged: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
        for &(v, a) in terms {
            *merged.entry(v).or_insert(0.0) += a * s;
        }
        (merged.into_iter().filter(|&(_, a)| a != 0.0).collect(), -rhs * s)
    };
    let mut rows = Vec::new();
    for e in &problem.equalities {
        let (terms, constant) = normalize(&e.terms, e.rhs);
        rows.push(RowOp { terms, constant, nonneg: false });
    }
    for e in &problem.inequalities {
        let (mut terms, constant) = normalize(&e.terms, e.rhs);
        if phase1 {
            terms.push((n0, -1.0));
        }
        rows.push(RowOp { terms, constant, nonneg: true });
    }
    if phase1 {
        rows.push(RowOp { terms: vec![(n0, -1.0)], constant: params.slack_cap, nonneg: true });
    }

    let mut c = vec![0.0; n];
    let mut obj_scale = 1.0;
    if phase1 {
        c[n0] = 1.0;
    } else if problem.mode == Mode::Maximize {
        for &(v, a) in &problem.objective {
            c[v] += a;
        }
        let cmax = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if cmax > 0.0 {
            obj_scale = cmax;
            for v in c.iter_mut() {
                *v /= cmax;
            }
        }
    }

    let op = Operator::build(blocks, rows, n)?;
    let a0 = op.constants();
    let (mut y, mut s, mut u, mut rho) = match warm {
        Some(w) if w.y.len() == n && w.s.same_shape(&ConeVec::zeros_like(&op)) => {
            (w.y.clone(), w.s.clone(), w.u.clone(), w.rho)
        }
        Some(w) if w.y.len() + 1 == n && phase1 && w.s.mats.len() == op.blocks.len() => {
            let mut y = w.y.clone();
            y.push(0.0);
            let mut s = w.s.clone();
            let mut u = w.u.clone();
            s.rows.resize(op.rows.len(), 0.0);
            u.rows.resize(op.rows.len(), 0.0);
            (y, s, u, w.rho)
        }
        _ => (vec![0.0; n], ConeVec::zeros_like(&op), ConeVec::zeros_like(&op), params.rho),
    };

    let alpha = params.alpha;
    let mut iterations = 0;
    let mut converged = false;
    let mut early_status = None;
    let (mut rp, mut gap, mut dual_scaled) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    while iterations < params.max_iter {
        iterations += 1;
        let mut w = s.clone();
        for (((wm, um), cm), _) in w.mats.iter_mut().zip(&u.mats).zip(&a0.mats).zip(0..) {
            *wm -= um;
            *wm -= cm;
        }
        for ((wr, ur), cr) in w.rows.iter_mut().zip(&u.rows).zip(&a0.rows) {
            *wr -= ur + cr;
        }
        let mut rhs = op.adjoint(&w);
        for (r, cv) in rhs.iter_mut().zip(&c) {
            *r += cv / rho;
        }
        y = op.solve(&rhs, &y);
        let ay = op.forward(&y);
        let check = iterations % params.check_every == 0 || iterations == params.max_iter;
        let s_old = s;
        let mut v = ay.clone();
        for ((vm, sm), um) in v.mats.iter_mut().zip(&s_old.mats).zip(&u.mats) {
            *vm *= alpha;
            *vm += sm * (1.0 - alpha);
            *vm += um;
        }
        for ((vr, sr), ur) in v.rows.iter_mut().zip(&s_old.rows).zip(&u.rows) {
            *vr = alpha * *vr + (1.0 - alpha) * sr + ur;
        }
        let mut s_new = v.clone();
        op.project(&mut s_new);
        for (um, (vm, sm)) in u.mats.iter_mut().zip(v.mats.iter().zip(&s_new.mats)) {
            *um = vm - sm;
        }
        for (ur, (vr, sr)) in u.rows.iter_mut().zip(v.rows.iter().zip(&s_new.rows)) {
            *ur = vr - sr;
        }
        s = s_new;
        if !check {
            continue;
        }
        rp = ay.max_abs_diff(&s);
        let mut ds = s.clone();
        for (dm, om) in ds.mats.iter_mut().zip(&s_old.mats) {
            *dm -= om;
        }
        for (dr, or) in ds.rows.iter_mut().zip(&s_old.rows) {
            *dr -= or;
        }
        let rd = rho * op.adjoint(&ds).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let primal_obj: f64 = c.iter().zip(&y).map(|(a, b)| a * b).sum();
        dual_scaled = -rho * u.dot(&a0);
        gap = (dual_scaled - primal_obj).abs() / (1.0 + primal_obj.abs() + dual_scaled.abs());
        if rp <= params.eps_primal && rd <= params.eps_gap && gap <= params.eps_gap {
            converged = true;
            break;
        }
        if phase1 {
            let t = y[n0];
            if rp <= params.eps_primal && t >= 10.0 * params.eps_primal {
                early_status = Some(Status::Feasible);
                break;
            }
            if rd <= params.eps_gap && rp <= 1e2 * params.eps_primal && dual_scaled < -10.0 * params.eps_primal {
                early_status = Some(Status::InfeasibleCertificate);
                break;
            }
        }
        if iterations % 50 == 0 {
            let scale_p = rp;
            let scale_d = rd.max(1e-300);
            if scale_p > 10.0 * scale_d && rho < 1e6 {
                rho *= 2.0;
                scale_cone(&mut u, 0.5);
            } else if scale_d > 10.0 * scale_p && rho > 1e-6 {
                rho *= 0.5;
                scale_cone(&mut u, 2.0);
            }
        }
    }

    let warm_out = WarmStart { y: y.clone(), s: s.clone(), u: u.clone(), rho };
    let slack = phase1.then(|| y[n0]);
    let mut yo = y[..n0].to_vec();
    project_equalities(problem, &mut yo);
    let blocks_out: Vec<DMatrix<f64>> = problem.blocks.iter().map(|b| b.eval(&yo)).collect();
    let psd_residual = blocks_out.iter().map(|m| (-min_eigenvalue(m)).max(0.0)).fold(0.0, f64::max);
    let eq_res = problem.equalities.iter().map(|r| (r.value(&yo) - r.rhs).abs()).fold(0.0, f64::max);
    let ineq_res = problem.inequalities.iter().map(|r| (r.rhs - r.value(&yo)).max(0.0)).fold(0.0, f64::max);
    let status = if let Some(st) = early_status {
        st
    } else if !converged {
        Status::IterationLimit
    } else {
        match problem.mode {
            Mode::Maximize => Status::Optimal,
            Mode::Feasibility => match slack {
                Some(t) if t < -10.0 * params.eps_primal => Status::InfeasibleCertificate,
                _ => Status::Feasible,
            },
        }
    };
    let _ = rp;
    Ok(SolveResult {
        status,
        objective: problem.objective_value(&yo),
        dual_bound: dual_scaled * obj_scale + problem.objective_offset,
        y: yo,
        blocks: blocks_out,
        primal_residual: if phase1 { eq_res } else { eq_res.max(ineq_res) },
        psd_residual,
        gap,
        iterations,
        phase1_slack: slack,
        warm: warm_out,
    })
}

fn scale_cone(v: &mut ConeVec, f: f64) {
    for m in v.mats.iter_mut() {
        *m *= f;
    }
    for r in v.rows.iter_mut() {
        *r *= f;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp_solver::problem::{LinearConstraint, PsdBlock};

    /// Degree-2 hypercube moment matrix for n = 2 with variables
    /// y0 = pE x1, y1 = pE x2, y2 = pE x1x2.
    fn two_var_block() -> PsdBlock {
        let mut b = PsdBlock::new(3);
        b.constant = vec![(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)];
        b.entries = vec![(0, 1, 0, 1.0), (0, 2, 1, 1.0), (1, 2, 2, 1.0)];
        b
    }

    #[test]
    fn projection_is_psd_and_idempotent() {
        let mut m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        project_psd(&mut m);
        assert!(min_eigenvalue(&m) > -1e-12);
        let before = m.clone();
        project_psd(&mut m);
        assert!((m - before).amax() < 1e-12);
    }

    #[test]
    fn maximizes_correlation() {
        let mut p = SdpProblem::new(3, Mode::Maximize);
        p.blocks.push(two_var_block());
        p.objective = vec![(2, 1.0)];
        let r = solve(&p, &SolverParams::default(), None).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-5);
        assert!(r.psd_residual < 1e-5);
    }

    #[test]
    fn triangle_value() {
        // Degree-2 relaxation of max -(x1x2 + x1x3 + x2x3): value 3/2.
        let mut b = PsdBlock::new(3);
        b.constant = vec![(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)];
        b.entries = vec![(0, 1, 0, 1.0), (0, 2, 1, 1.0), (1, 2, 2, 1.0)];
        let mut p = SdpProblem::new(3, Mode::Maximize);
        p.blocks.push(b);
        p.objective = vec![(0, -1.0), (1, -1.0), (2, -1.0)];
        let r = solve(&p, &SolverParams::default(), None).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective - 1.5).abs() < 1e-5, "{}", r.objective);
        assert!((r.dual_bound - 1.5).abs() < 1e-4);
    }

    #[test]
    fn equality_and_inequality_rows() {
        let mut p = SdpProblem::new(3, Mode::Maximize);
        p.blocks.push(two_var_block());
        p.objective = vec![(2, 1.0)];
        p.equalities.push(LinearConstraint { terms: vec![(0, 1.0), (1, 1.0)], rhs: 0.5 });
        p.inequalities.push(LinearConstraint { terms: vec![(2, -1.0)], rhs: -0.4 });
        let r = solve(&p, &SolverParams::default(), None).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective - 0.4).abs() < 1e-5);
        assert!((r.y[0] + r.y[1] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn feasibility_modes() {
        let mut p = SdpProblem::new(3, Mode::Feasibility);
        p.blocks.push(two_var_block());
        let r = solve(&p, &SolverParams::default(), None).unwrap();
        assert_eq!(r.status, Status::Feasible);

        p.inequalities.push(LinearConstraint { terms: vec![(2, 1.0)], rhs: 0.5 });
        let r = solve(&p, &SolverParams::default(), None).unwrap();
        assert_eq!(r.status, Status::Feasible);
        assert!(r.feasible_within_band(&SolverParams::default()));

        p.inequalities[0].rhs = 1.5;
        let r = solve(&p, &SolverParams::default(), None).unwrap();
        assert_eq!(r.status, Status::InfeasibleCertificate);
        assert!(!r.feasible_within_band(&SolverParams::default()));
        // Warm start from the previous iterate reaches the same decision.
        let r2 = solve(&p, &SolverParams::default(), Some(&r.warm)).unwrap();
        assert_eq!(r2.status, Status::InfeasibleCertificate);
        assert!(r2.iterations <= r.iterations);
    }

    #[test]
    fn deterministic_iterates() {
        let mut p = SdpProblem::new(3, Mode::Maximize);
        p.blocks.push(two_var_block());
        p.objective = vec![(0, 0.3), (1, -0.2), (2, 1.0)];
        let a = solve(&p, &SolverParams::default(), None).unwrap();
        let b = solve(&p, &SolverParams::default(), None).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.iterations, b.iterations);
    }
}
