//! Sampling-based roundings of decoupled pseudo-distributions: fix all but the
//! last two variable groups by random directions, fix the resulting scalar by
//! reweighting, then round the remaining bilinear form.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::bilinear::{sphere_bilinear_from_gram, KrivineSampler};
use super::scalar_fix::{scalar_fix, FixBranch};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::rng::SeedTree;
use crate::sdp_solver::decoupled_poly;
use crate::sos_core::{GroupId, Monomial, PseudoDistribution, SparsePoly, VarId};
use crate::tensor_poly::{Domain, Tensor};

/// Hyperplane samples per Grothendieck rounding inside a trial.
pub const GROTHENDIECK_TRIALS: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    /// `None` when the reweighting degenerated and the trial was skipped.
    pub branch: Option<FixBranch>,
    /// `pE_{mu'}[p]` after fixing.
    pub fixed: f64,
    /// `pE_mu[p^{2k}]^{1/2k} / 3`.
    pub target: f64,
    /// `pE_mu[p^2]`.
    pub second_moment: f64,
    /// Whether `pE[p^2] >= SOS^2 / (2 n^{d-2})`.
    pub pz_hit: bool,
    /// Squared norm of the sampled directions (sphere only).
    pub h_norm: f64,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct RoundingOutcome {
    /// One assignment per tensor position.
    pub groups: Vec<Vec<f64>>,
    /// `f~(groups)`, evaluated directly from the tensor.
    pub value: f64,
    /// `pE_mu[f~]`.
    pub sos: f64,
    pub trials: usize,
    pub best_trial: usize,
    /// Directions sampled in the best trial, before sign correction.
    pub h: Vec<Vec<f64>>,
    pub records: Vec<TrialRecord>,
}

impl RoundingOutcome {
    pub fn ratio(&self) -> f64 {
        self.value / self.sos
    }

    pub fn pz_hit_rate(&self) -> f64 {
        self.records.iter().filter(|r| r.pz_hit).count() as f64 / self.records.len().max(1) as f64
    }

    pub fn degenerate_trials(&self) -> usize {
        self.records.iter().filter(|r| r.branch.is_none()).count()
    }

    /// Whether every non-degenerate trial met the scalar-fixing target.
    pub fn fix_guarantee_holds(&self, slack: f64) -> bool {
        self.records.iter().filter(|r| r.branch.is_some()).all(|r| r.fixed.abs() >= r.target - slack)
    }
}

/// Default trial count: `64 n` for `k = 1`, `64 n 4^k` otherwise.
pub fn default_trials(n: usize, k: usize) -> usize {
    if k <= 1 {
        64 * n
    } else {
        64 * n * 4usize.pow(k as u32)
    }
}

/// Bilinear polynomial `sum M[j][k] y_j z_k`.
fn bilinear_poly(m: &DMatrix<f64>, ys: &[VarId], zs: &[VarId], space: &crate::sos_core::VarSpace) -> SparsePoly {
    let mut p = SparsePoly::zero();
    for (j, &y) in ys.iter().enumerate() {
        for (k, &z) in zs.iter().enumerate() {
            let c = m[(j, k)];
            if c != 0.0 {
                p.add_term(Monomial::from_vars(space, &[y, z]), c);
            }
        }
    }
    p
}

/// General pipeline over explicit groups; the first `d-2` are sampled and the
/// last two are rounded as a bilinear form.
pub fn round_decoupled(
    t: &Tensor,
    mu: &PseudoDistribution,
    groups: &[GroupId],
    k: usize,
    trials: usize,
    seed: SeedTree,
    tol: &Tolerances,
) -> Result<RoundingOutcome> {
    let d = t.order();
    let n = t.dim();
    if d < 3 {
        return Err(Error::UnsupportedDegree(d));
    }
    if groups.len() != d {
        return Err(Error::GroupCount { expected: d, found: groups.len() });
    }
    let space = mu.space().clone();
    if groups.iter().any(|&g| space.group(g).len != n) {
        return Err(Error::DimensionMismatch { expected: n, found: space.group(groups[0]).len });
    }
    let domain = mu.domain();
    let sos = mu.pe(&decoupled_poly(t, &space, groups))?;
    if !(sos > 0.0) {
        return Err(Error::Rounding(format!("SOS value {sos} is not positive")));
    }
    let ys: Vec<VarId> = space.group_vars(groups[d - 2]).collect();
    let zs: Vec<VarId> = space.group_vars(groups[d - 1]).collect();
    let mut wvars = ys.clone();
    wvars.extend(&zs);
    let pz_level = sos * sos / (2.0 * (n as f64).powi(d as i32 - 2));

    let mut records = Vec::with_capacity(trials);
    let mut best: Option<(usize, Vec<Vec<f64>>, Vec<Vec<f64>>, f64)> = None;
    for trial in 0..trials.max(1) {
        let mut rng = seed.index(trial as u64).rng();
        let hs: Vec<Vec<f64>> = (0..d - 2)
            .map(|_| match domain {
                Domain::Hypercube => (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect(),
                Domain::Sphere => (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
            })
            .collect();
        let h_norm: f64 = hs.iter().map(|h| h.iter().map(|v| v * v).sum::<f64>()).product();
        let href: Vec<&[f64]> = hs.iter().map(|h| h.as_slice()).collect();
        let m = t.contract_leading(&href)?;
        let p = bilinear_poly(&m, &ys, &zs, &space);
        let mut rec = TrialRecord {
            trial,
            branch: None,
            fixed: 0.0,
            target: 0.0,
            second_moment: 0.0,
            pz_hit: false,
            h_norm,
            value: f64::NEG_INFINITY,
        };
        let fix = match scalar_fix(mu, &p, k, tol) {
            Ok(f) => f,
            Err(Error::DegenerateReweight { .. }) => {
                records.push(rec);
                continue;
            }
            Err(e) => return Err(e),
        };
        rec.branch = Some(fix.branch);
        rec.fixed = fix.value;
        rec.target = fix.target();
        rec.second_moment = fix.second_moment;
        rec.pz_hit = fix.second_moment >= pz_level;
        let gram = match fix.mu.second_moments(&wvars) {
            Ok(g) => g,
            Err(_) => {
                rec.branch = None;
                records.push(rec);
                continue;
            }
        };
        // Round y^T M z; the sign s of the best value selects x = s h.
        let (y, z, s) = match domain {
            Domain::Hypercube => {
                let sampler = KrivineSampler::new(&gram, n)?;
                let mut pick: Option<(Vec<f64>, Vec<f64>, f64)> = None;
                for _ in 0..GROTHENDIECK_TRIALS {
                    let (y, z) = sampler.sample(&mut rng);
                    let v = y.iter().enumerate().map(|(j, &a)| a * z.iter().enumerate().map(|(l, &b)| m[(j, l)] * b).sum::<f64>()).sum::<f64>();
                    if pick.as_ref().is_none_or(|b| v.abs() > b.2.abs()) {
                        pick = Some((y, z, v));
                    }
                }
                let (y, z, v) = pick.unwrap();
                (y, z, if v < 0.0 { -1.0 } else { 1.0 })
            }
            Domain::Sphere => {
                let r = sphere_bilinear_from_gram(&gram, n, &m);
                (r.y, r.z, 1.0)
            }
        };
        let mut xs: Vec<Vec<f64>> = hs.clone();
        if domain == Domain::Sphere {
            for x in &mut xs {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                x.iter_mut().for_each(|v| *v /= norm);
            }
        }
        xs[0].iter_mut().for_each(|v| *v *= s);
        xs.push(y);
        xs.push(z);
        let refs: Vec<&[f64]> = xs.iter().map(|g| g.as_slice()).collect();
        let value = t.eval(&refs)?;
        rec.value = value;
        records.push(rec);
        if best.as_ref().is_none_or(|b| value > b.3) {
            best = Some((trial, xs, hs, value));
        }
    }
    let Some((best_trial, groups_out, h, value)) = best else {
        return Err(Error::Rounding(format!("all {} trials hit a degenerate reweighting", records.len())));
    };
    Ok(RoundingOutcome { groups: groups_out, value, sos, trials: records.len(), best_trial, h, records })
}

fn leading_groups(mu: &PseudoDistribution, d: usize) -> Result<Vec<GroupId>> {
    let count = mu.space().groups().len();
    if count < d {
        return Err(Error::GroupCount { expected: d, found: count });
    }
    Ok((0..d).collect())
}

fn expect_order(t: &Tensor, d: usize) -> Result<()> {
    if t.order() != d {
        return Err(Error::OrderMismatch { expected: d.to_string(), found: t.order() });
    }
    Ok(())
}

/// Degree-6 hypercube rounding of `max f~(x, y, z)`.
pub fn round_cubic_deg6(
    t: &Tensor,
    mu: &PseudoDistribution,
    trials: usize,
    seed: SeedTree,
    tol: &Tolerances,
) -> Result<RoundingOutcome> {
    round_cubic_deg6k(t, mu, 1, trials, seed, tol)
}

/// Level-`k` hypercube rounding using the `k`-th scalar fix.
pub fn round_cubic_deg6k(
    t: &Tensor,
    mu: &PseudoDistribution,
    k: usize,
    trials: usize,
    seed: SeedTree,
    tol: &Tolerances,
) -> Result<RoundingOutcome> {
    expect_order(t, 3)?;
    if mu.domain() != Domain::Hypercube {
        return Err(Error::InvalidInput("expected a hypercube pseudo-distribution".into()));
    }
    round_decoupled(t, mu, &leading_groups(mu, 3)?, k, trials, seed, tol)
}

/// Sphere rounding: Gaussian `h`, `x = +-h/|h|`, lossless bilinear rounding.
pub fn round_cubic_sphere(
    t: &Tensor,
    mu: &PseudoDistribution,
    k: usize,
    trials: usize,
    seed: SeedTree,
    tol: &Tolerances,
) -> Result<RoundingOutcome> {
    expect_order(t, 3)?;
    if mu.domain() != Domain::Sphere {
        return Err(Error::InvalidInput("expected a sphere pseudo-distribution".into()));
    }
    round_decoupled(t, mu, &leading_groups(mu, 3)?, k, trials, seed, tol)
}

/// Order-`d` hypercube rounding: samples `h^(1..d-2)` and rounds the last two groups.
pub fn round_high_degree(
    t: &Tensor,
    mu: &PseudoDistribution,
    trials: usize,
    seed: SeedTree,
    tol: &Tolerances,
) -> Result<RoundingOutcome> {
    let d = t.order();
    if d < 3 {
        return Err(Error::UnsupportedDegree(d));
    }
    if d > 9 {
        return Err(Error::SizeCap { what: "tensor order".into(), size: d, cap: 9 });
    }
    round_decoupled(t, mu, &leading_groups(mu, d)?, 1, trials, seed, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp_solver::{assemble_sos_sdp, tensor_space, Objective, RelaxationSpec, SolverParams};
    use crate::sos_core::{build_basis, MonomialBasis};
    use crate::tensor_poly::{decouple_abs_round, SymTensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn brute_force(t: &Tensor) -> f64 {
        let (n, d) = (t.dim(), t.order());
        let mut best = f64::NEG_INFINITY;
        for mask in 0..1u64 << (n * (d - 1)) {
            let mut groups: Vec<Vec<f64>> = (0..d - 1)
                .map(|g| (0..n).map(|i| if mask >> (g * n + i) & 1 == 1 { -1.0 } else { 1.0 }).collect())
                .collect();
            groups.push(vec![0.0; n]);
            let refs: Vec<&[f64]> = groups.iter().map(|g| g.as_slice()).collect();
            best = best.max(t.contract_except(&refs, d - 1).iter().map(|a| a.abs()).sum());
        }
        best
    }

    fn integral_mu(space_n: usize, d: usize, point: &[Vec<f64>], degree: usize) -> PseudoDistribution {
        let (space, _) = tensor_space(space_n, d, Domain::Hypercube, false);
        let basis = Arc::new(build_basis(space, degree / 2, None, 5000).unwrap());
        let flat: Vec<f64> = point.iter().flatten().copied().collect();
        PseudoDistribution::from_points(basis, degree, Domain::Hypercube, &[(1.0, flat)]).unwrap()
    }

    #[test]
    fn single_entry_tensor() {
        let t = Tensor::from_entries(3, 1, [(vec![0, 0, 0], 1.0)]).unwrap();
        let mu = integral_mu(1, 3, &[vec![1.0], vec![1.0], vec![1.0]], 6);
        let out = round_cubic_deg6(&t, &mu, 8, SeedTree::new(1), &Tolerances::default()).unwrap();
        assert_eq!(out.value, 1.0);
        assert!((out.sos - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planted_integral_mu_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 3;
        let t = Tensor::gaussian(3, n, &mut rng);
        let pt = vec![vec![1.0, -1.0, 1.0], vec![1.0, 1.0, -1.0], vec![-1.0, 1.0, 1.0]];
        let refs: Vec<&[f64]> = pt.iter().map(|g| g.as_slice()).collect();
        let planted = t.eval(&refs).unwrap();
        let t = if planted < 0.0 { t.scaled(-1.0) } else { t };
        let planted = planted.abs();
        let mu = integral_mu(n, 3, &pt, 6);
        let out = round_cubic_deg6(&t, &mu, 64 * n, SeedTree::new(2), &Tolerances::default()).unwrap();
        assert!((out.sos - planted).abs() < 1e-9);
        assert!(out.value >= planted / 8.0);
        assert!(out.fix_guarantee_holds(1e-8));
    }

    #[test]
    fn solver_relaxation_rounds_above_target() {
        let tol = Tolerances::default();
        for seed in 0..3u64 {
            let n = 3;
            let t = Tensor::gaussian(3, n, &mut ChaCha8Rng::seed_from_u64(100 + seed));
            let relax = assemble_sos_sdp(Objective::Decoupled(&t), &RelaxationSpec::new(6, Domain::Hypercube), &[], None)
                .unwrap();
            let sol = relax.solve(&SolverParams::default(), &tol, 1.0, None).unwrap();
            let mu = &sol.extraction.mu;
            let out = round_cubic_deg6(&t, mu, default_trials(n, 1), SeedTree::new(seed), &tol).unwrap();
            let opt = brute_force(&t);
            assert!(out.value <= opt + 1e-9);
            assert!(out.sos >= opt - 1e-5 * t.l1_norm());
            assert!(out.value >= out.sos / (8.0 * (n as f64).sqrt()));
            assert!(out.fix_guarantee_holds(1e-8));
        }
    }

    #[test]
    fn level_two_compact_and_full() {
        let tol = Tolerances::default();
        let t = Tensor::gaussian(3, 2, &mut ChaCha8Rng::seed_from_u64(8));
        let mut spec = RelaxationSpec::new(12, Domain::Hypercube);
        spec.pattern = crate::sdp_solver::BasisPattern::Full;
        let relax = assemble_sos_sdp(Objective::Decoupled(&t), &spec, &[], None).unwrap();
        let sol = relax.solve(&SolverParams::default(), &tol, 1.0, None).unwrap();
        let out = round_cubic_deg6k(&t, &sol.extraction.mu, 2, 128, SeedTree::new(1), &tol).unwrap();
        assert!(out.fix_guarantee_holds(1e-8));
        assert!(out.value >= out.sos * (2.0f64 / 2.0).sqrt() / 8.0);
        assert!(out.value <= brute_force(&t) + 1e-9);
    }

    #[test]
    fn sphere_planted_rank_one() {
        let n = 3;
        let a = vec![0.6, 0.8, 0.0];
        let b = vec![0.0, 1.0, 0.0];
        let c = vec![0.0, 0.6, 0.8];
        let t = Tensor::rank_one(&[a.clone(), b.clone(), c.clone()]).unwrap();
        let (space, _) = tensor_space(n, 3, Domain::Sphere, false);
        let basis = Arc::new(build_basis(space, 3, None, 5000).unwrap());
        let flat: Vec<f64> = [a, b, c].concat();
        let mu = PseudoDistribution::from_points(basis, 6, Domain::Sphere, &[(1.0, flat)]).unwrap();
        let out = round_cubic_sphere(&t, &mu, 1, 64, SeedTree::new(4), &Tolerances::default()).unwrap();
        assert!((out.sos - 1.0).abs() < 1e-9);
        assert!(out.value >= 1.0 / (8.0 * (n as f64).sqrt()));
        assert!(out.value <= 1.0 + 1e-9);
        for g in &out.groups {
            assert!((g.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_tensor_is_rejected() {
        let t = Tensor::zeros(3, 2);
        let mu = integral_mu(2, 3, &vec![vec![1.0, 1.0]; 3], 6);
        assert!(matches!(
            round_cubic_deg6(&t, &mu, 4, SeedTree::new(0), &Tolerances::default()),
            Err(Error::Rounding(_))
        ));
    }

    #[test]
    fn high_degree_single_monomial() {
        let n = 2;
        let t = Tensor::from_entries(5, n, [(vec![0, 1, 0, 1, 1], 1.0)]).unwrap();
        let (space, groups) = tensor_space(n, 5, Domain::Hypercube, false);
        let basis = crate::sdp_solver::decoupled_basis(&space, &groups, crate::sdp_solver::BasisPattern::Compact, 1, 5000)
            .unwrap();
        let basis = Arc::new(MonomialBasis::from_monomials(space.clone(), basis));
        let deg = 2 * basis.max_degree();
        let pt: Vec<f64> = vec![1.0; 10];
        let mu = PseudoDistribution::from_points(basis, deg, Domain::Hypercube, &[(1.0, pt)]).unwrap();
        let out = round_high_degree(&t, &mu, 32, SeedTree::new(0), &Tolerances::default()).unwrap();
        assert_eq!(out.value, 1.0);
        assert_eq!(brute_force(&t), 1.0);
    }

    #[test]
    fn quartic_abs_value_composition() {
        let n = 5;
        let mut sym = SymTensor::new(4, n).unwrap();
        sym.add(&[0, 1, 2, 3], 1.0).unwrap();
        sym.add(&[1, 2, 3, 4], -0.5).unwrap();
        let t = sym.to_tensor();
        let x = vec![1.0, -1.0, 1.0, -1.0, -1.0];
        let (space, groups) = tensor_space(n, 4, Domain::Hypercube, false);
        let basis = crate::sdp_solver::decoupled_basis(&space, &groups, crate::sdp_solver::BasisPattern::Compact, 1, 5000)
            .unwrap();
        let basis = Arc::new(MonomialBasis::from_monomials(space.clone(), basis));
        let deg = 2 * basis.max_degree();
        let mu = PseudoDistribution::from_points(basis, deg, Domain::Hypercube, &[(1.0, x.repeat(4))][..]).unwrap();
        let out = round_high_degree(&t, &mu, 64, SeedTree::new(0), &Tolerances::default()).unwrap();
        assert!(out.value > 0.0);
        let abs = decouple_abs_round(&sym, &out.groups).unwrap();
        assert!(abs.value.abs() >= 24.0 / 256.0 * out.value - 1e-12);
        let opt = (0..32u32)
            .map(|m| {
                let p: Vec<f64> = (0..n).map(|i| if m >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
                sym.eval(&p).unwrap().abs()
            })
            .fold(0.0, f64::max);
        assert!(abs.value.abs() <= opt + 1e-9);
    }
}
