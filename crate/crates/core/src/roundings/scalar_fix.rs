//! Reweightings that make `|pE[p]|` comparable to `pE[p^{2k}]^{1/2k}`.

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::sos_core::{PseudoDistribution, SparsePoly};

/// Which reweighting produced the fixed distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FixBranch {
    /// `mu` unchanged.
    Identity,
    /// Reweight by `p^{2k}`.
    Power,
    /// Reweight by `p^{2k-2}` (only for `k >= 2`).
    LowerPower,
    /// Reweight by `(p + m)^2 p^{2k-2}`.
    Shifted,
}

impl FixBranch {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Power => "power",
            Self::LowerPower => "lower-power",
            Self::Shifted => "shifted",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScalarFix {
    pub mu: PseudoDistribution,
    pub branch: FixBranch,
    /// `pE_{mu'}[p]`, recomputed from the new moments.
    pub value: f64,
    /// `m = pE_mu[p^{2k}]^{1/2k}`.
    pub m: f64,
    /// `pE_mu[p^2]`.
    pub second_moment: f64,
}

impl ScalarFix {
    pub fn target(&self) -> f64 {
        self.m / 3.0
    }

    pub fn guarantee_holds(&self, slack: f64) -> bool {
        self.value.abs() >= self.target() - slack
    }
}

/// Minimum pseudo-distribution degree for `scalar_fix` with a degree-`t` polynomial.
pub fn required_degree(t: usize, k: usize) -> usize {
    if k == 1 {
        3 * t
    } else {
        (2 * k + 2) * t
    }
}

/// Evaluates every reweighting in the case analysis and keeps the one with the
/// largest `|pE'[p]|`; ties go to the earlier case.
pub fn scalar_fix(mu: &PseudoDistribution, p: &SparsePoly, k: usize, tol: &Tolerances) -> Result<ScalarFix> {
    if k == 0 {
        return Err(Error::InvalidInput("scalar_fix needs k >= 1".into()));
    }
    let t = p.degree();
    let need = required_degree(t, k);
    if mu.degree() < need {
        return Err(Error::DegreeOverflow { degree: need, limit: mu.degree() });
    }
    let space = mu.space().clone();
    // pows[j] = p^j for j <= 2k+1.
    let mut pows = vec![SparsePoly::constant(1.0)];
    for j in 1..=2 * k + 1 {
        let next = pows[j - 1].mul(p, &space);
        pows.push(next);
    }
    let e: Vec<f64> = pows.iter().map(|q| mu.pe(q)).collect::<Result<_>>()?;
    let m2k = e[2 * k];
    if m2k < -tol.psd {
        return Err(Error::InvalidMoment(format!("pE[p^{}] = {m2k:e} is negative", 2 * k)));
    }
    let m = m2k.max(0.0).powf(1.0 / (2 * k) as f64);
    let second_moment = e[2];
    if m <= tol.reweight {
        return Ok(ScalarFix { mu: mu.clone(), branch: FixBranch::Identity, value: e[1], m, second_moment });
    }

    let mut cands: Vec<(FixBranch, f64)> = vec![(FixBranch::Identity, e[1])];
    let ratio = |num: f64, den: f64| if den > tol.reweight { Some(num / den) } else { None };
    if let Some(v) = ratio(e[2 * k + 1], e[2 * k]) {
        cands.push((FixBranch::Power, v));
    }
    if k >= 2 {
        if let Some(v) = ratio(e[2 * k - 1], e[2 * k - 2]) {
            cands.push((FixBranch::LowerPower, v));
        }
    }
    let num = e[2 * k + 1] + 2.0 * m * e[2 * k] + m * m * e[2 * k - 1];
    let den = e[2 * k] + 2.0 * m * e[2 * k - 1] + m * m * e[2 * k - 2];
    if let Some(v) = ratio(num, den) {
        cands.push((FixBranch::Shifted, v));
    }
    // Stable order: by |value| descending, case order among near-ties.
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| {
        let (va, vb) = (cands[a].1.abs(), cands[b].1.abs());
        if (va - vb).abs() <= 1e-12 * m.max(1.0) {
            a.cmp(&b)
        } else {
            vb.partial_cmp(&va).unwrap()
        }
    });
    let mut last_err = None;
    for i in order {
        let branch = cands[i].0;
        let squares = match branch {
            FixBranch::Identity => {
                return Ok(ScalarFix { mu: mu.clone(), branch, value: e[1], m, second_moment });
            }
            FixBranch::Power => vec![pows[k].clone()],
            FixBranch::LowerPower => vec![pows[k - 1].clone()],
            FixBranch::Shifted => vec![pows[k].add(&pows[k - 1].scale(m))],
        };
        match mu.reweight(&squares, tol).and_then(|nu| nu.pe(p).map(|v| (nu, v))) {
            Ok((nu, value)) => return Ok(ScalarFix { mu: nu, branch, value, m, second_moment }),
            Err(err) => last_err = Some(err),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Rounding("no reweighting branch applies".into())))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::sos_core::{build_basis, uniform_moment, Monomial, VarKind, VarSpace};
    use crate::tensor_poly::Domain;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube(n: usize, half: usize) -> (Arc<VarSpace>, Arc<crate::sos_core::MonomialBasis>) {
        let mut s = VarSpace::new();
        s.add_group("x", n, VarKind::Boolean);
        let s = Arc::new(s);
        let b = Arc::new(build_basis(s.clone(), half, None, 1000).unwrap());
        (s, b)
    }

    #[test]
    fn uniform_cube_takes_the_shifted_branch() {
        let (s, b) = cube(1, 2);
        let mu = PseudoDistribution::from_moment_fn(b, 4, Domain::Hypercube, None, |m| uniform_moment(&s, m)).unwrap();
        let p = SparsePoly::var(s.var(0, 0));
        let fix = scalar_fix(&mu, &p, 1, &Tolerances::default()).unwrap();
        assert_eq!(fix.branch, FixBranch::Shifted);
        assert!((fix.m - 1.0).abs() < 1e-12);
        assert!((fix.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_keeps_mu() {
        let (s, b) = cube(2, 3);
        let mu = PseudoDistribution::from_points(b, 6, Domain::Hypercube, &[(1.0, vec![1.0, 1.0])]).unwrap();
        let p = SparsePoly::monomial(Monomial::from_vars(&s, &[0, 1]), 1.0);
        let fix = scalar_fix(&mu, &p, 1, &Tolerances::default()).unwrap();
        assert_eq!(fix.branch, FixBranch::Identity);
        assert_eq!(fix.value, 1.0);
    }

    fn random_mixture(rng: &mut ChaCha8Rng, n: usize, half: usize) -> (Arc<VarSpace>, PseudoDistribution) {
        let (s, b) = cube(n, half);
        let pts: Vec<(f64, Vec<f64>)> = (0..3)
            .map(|_| (rng.random::<f64>() + 0.1, (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()))
            .collect();
        (s.clone(), PseudoDistribution::from_points(b, 2 * half, Domain::Hypercube, &pts).unwrap())
    }

    fn random_quadratic(rng: &mut ChaCha8Rng, s: &VarSpace, n: usize) -> SparsePoly {
        let mut p = SparsePoly::zero();
        for i in 0..n {
            for j in i + 1..n {
                p.add_term(Monomial::from_vars(s, &[i as u32, j as u32]), rng.random::<f64>() * 2.0 - 1.0);
            }
        }
        p
    }

    #[test]
    fn guarantee_on_random_mixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tol = Tolerances::default();
        for trial in 0..100 {
            let k = 1 + trial % 2;
            let n = 4;
            let (s, mu) = random_mixture(&mut rng, n, (k + 1) * 2);
            let p = random_quadratic(&mut rng, &s, n);
            let fix = scalar_fix(&mu, &p, k, &tol).unwrap();
            assert!(fix.guarantee_holds(1e-8), "trial {trial}: {} < {}", fix.value.abs(), fix.target());
            assert!(fix.mu.validate(&tol).passed);
        }
    }

    #[test]
    fn guarantee_on_uniform_moments() {
        // Uniform cube moments: pE[p] = 0 for every zero-mean p, so the identity
        // branch never applies.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tol = Tolerances::default();
        let n = 6;
        for k in [1, 2] {
            let (s, b) = cube(n, 3 * k);
            let deg = 2 * b.max_degree();
            let mu = PseudoDistribution::from_moment_fn(b, deg, Domain::Hypercube, None, |m| uniform_moment(&s, m))
                .unwrap();
            for _ in 0..10 {
                let p = random_quadratic(&mut rng, &s, n);
                let fix = scalar_fix(&mu, &p, k, &tol).unwrap();
                assert_ne!(fix.branch, FixBranch::Identity);
                assert!(fix.guarantee_holds(1e-8));
            }
        }
    }

    #[test]
    fn degree_precondition() {
        let (s, b) = cube(3, 1);
        let mu = PseudoDistribution::new(b.clone(), DMatrix::identity(b.len(), b.len()), 2, Domain::Hypercube, None)
            .unwrap();
        let p = SparsePoly::monomial(Monomial::from_vars(&s, &[0, 1]), 1.0);
        assert!(matches!(scalar_fix(&mu, &p, 1, &Tolerances::default()), Err(Error::DegreeOverflow { .. })));
    }
}
