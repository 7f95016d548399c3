//! Exact oracles and simple baselines: brute force, Khot-Naor random
//! restriction, alternating maximization on the sphere and anti-concentration.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::rng::SeedTree;
use crate::roundings::{KrivineSampler, RoundingOutcome, GROTHENDIECK_TRIALS};
use crate::sdp_solver::{solve_bilinear_sdp, SolverParams};
use crate::sos_core::SparsePoly;
use crate::tensor_poly::{Domain, Tensor};

/// Default enumeration cap on `n` for the `2^{2n}` loops.
pub const BRUTE_FORCE_CAP: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    /// One assignment per tensor position.
    pub witness: Vec<Vec<f64>>,
    pub enumerated: u64,
    pub method: &'static str,
}

fn signs(mask: u64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect()
}

fn sgn(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `max f~(x, y, z)` over `{+-1}^{3n}`, using `x_i = sgn <T_i, y (x) z>`.
/// `z_0 = +1` is fixed since `(y, z) -> (-y, -z)` preserves every slice value;
/// `y` runs in Gray-code order with incremental slice updates.
pub fn brute_force_cubic_hypercube(t: &Tensor) -> Result<OracleResult> {
    if t.order() != 3 {
        return Err(Error::OrderMismatch { expected: "3".into(), found: t.order() });
    }
    let n = t.dim();
    if n > BRUTE_FORCE_CAP {
        return Err(Error::SizeCap { what: "brute-force dimension".into(), size: n, cap: BRUTE_FORCE_CAP });
    }
    let mut dense = vec![0.0; n * n * n];
    for (idx, c) in t.entries() {
        dense[(idx[0] * n + idx[1]) * n + idx[2]] += c;
    }
    let mut best = (f64::NEG_INFINITY, Vec::new(), Vec::new());
    let mut count = 0u64;
    // a[i][j] = sum_k T[i,j,k] z_k
    let mut a = vec![0.0; n * n];
    let mut v = vec![0.0; n];
    for zmask in 0..1u64 << n.saturating_sub(1) {
        let z = signs(zmask << 1, n);
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| dense[(i * n + j) * n + k] * z[k]).sum();
            }
        }
        let mut y = vec![1.0; n];
        for i in 0..n {
            v[i] = (0..n).map(|j| a[i * n + j]).sum();
        }
        for step in 0..1u64 << n {
            if step > 0 {
                let j = step.trailing_zeros() as usize;
                for i in 0..n {
                    v[i] -= 2.0 * y[j] * a[i * n + j];
                }
                y[j] = -y[j];
            }
            count += 1;
            let val: f64 = v.iter().map(|x| x.abs()).sum();
            if val > best.0 {
                best = (val, y.clone(), z.clone());
            }
        }
    }
    let (_, y, z) = best;
    let x: Vec<f64> = t.contract_last_two(&y, &z)?.into_iter().map(sgn).collect();
    let value = t.eval(&[&x, &y, &z])?;
    Ok(OracleResult { value, witness: vec![x, y, z], enumerated: count, method: "brute-force-cubic" })
}

/// `max f~` over the cube for any order `d >= 2`, enumerating all but the last group.
pub fn brute_force_decoupled(t: &Tensor) -> Result<OracleResult> {
    let (n, d) = (t.dim(), t.order());
    if d < 2 {
        return Err(Error::UnsupportedDegree(d));
    }
    let bits = n * (d - 1);
    if bits > 2 * BRUTE_FORCE_CAP {
        return Err(Error::SizeCap { what: "brute-force bits".into(), size: bits, cap: 2 * BRUTE_FORCE_CAP });
    }
    let mut best: Option<OracleResult> = None;
    for mask in 0..1u64 << bits {
        let mut groups: Vec<Vec<f64>> = (0..d - 1).map(|g| signs(mask >> (g * n), n)).collect();
        groups.push(vec![0.0; n]);
        let refs: Vec<&[f64]> = groups.iter().map(|g| g.as_slice()).collect();
        let last: Vec<f64> = t.contract_except(&refs, d - 1).into_iter().map(sgn).collect();
        groups[d - 1] = last;
        let refs: Vec<&[f64]> = groups.iter().map(|g| g.as_slice()).collect();
        let value = t.eval(&refs)?;
        if best.as_ref().is_none_or(|b| value > b.value) {
            best = Some(OracleResult { value, witness: groups, enumerated: 0, method: "brute-force-decoupled" });
        }
    }
    let mut out = best.expect("nonempty enumeration");
    out.enumerated = 1u64 << bits;
    Ok(out)
}

/// `max y^T M z` over `{+-1}^{2n}`: enumerate `z`, take `y = sgn(M z)`.
pub fn brute_force_bilinear(m: &DMatrix<f64>) -> Result<OracleResult> {
    let (r, c) = (m.nrows(), m.ncols());
    if c > 2 * BRUTE_FORCE_CAP {
        return Err(Error::SizeCap { what: "brute-force dimension".into(), size: c, cap: 2 * BRUTE_FORCE_CAP });
    }
    let mut best = (f64::NEG_INFINITY, Vec::new(), Vec::new());
    for mask in 0..1u64 << c {
        let z = signs(mask, c);
        let mz: Vec<f64> = (0..r).map(|i| (0..c).map(|k| m[(i, k)] * z[k]).sum()).collect();
        let val: f64 = mz.iter().map(|v| v.abs()).sum();
        if val > best.0 {
            best = (val, mz.iter().map(|&v| sgn(v)).collect(), z);
        }
    }
    let (_, y, z) = best;
    let value = (0..r).map(|i| y[i] * (0..c).map(|k| m[(i, k)] * z[k]).sum::<f64>()).sum();
    Ok(OracleResult { value, witness: vec![y, z], enumerated: 1u64 << c, method: "brute-force-bilinear" })
}

/// Random `x`, degree-2 SDP plus Krivine rounding on `sum x_i T_i`, best of `trials`.
pub fn khot_naor_baseline(
    t: &Tensor,
    trials: usize,
    seed: SeedTree,
    params: &SolverParams,
    tol: &Tolerances,
) -> Result<RoundingOutcome> {
    if t.order() != 3 {
        return Err(Error::OrderMismatch { expected: "3".into(), found: t.order() });
    }
    let n = t.dim();
    let mut best: Option<(usize, Vec<Vec<f64>>, f64, f64)> = None;
    for trial in 0..trials.max(1) {
        let mut rng = seed.index(trial as u64).rng();
        let x: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let m = t.contract_leading(&[&x])?;
        if m.iter().all(|&v| v == 0.0) {
            continue;
        }
        let (relax, sol) = solve_bilinear_sdp(&m, Domain::Hypercube, &[], params, tol)?;
        let vars: Vec<u32> = relax.groups.iter().flat_map(|&g| relax.space.group_vars(g)).collect();
        let gram = sol.extraction.mu.second_moments(&vars)?;
        let sampler = KrivineSampler::new(&gram, n)?;
        for _ in 0..GROTHENDIECK_TRIALS {
            let (y, z) = sampler.sample(&mut rng);
            let value = t.eval(&[&x, &y, &z])?;
            if best.as_ref().is_none_or(|b| value > b.2) {
                best = Some((trial, vec![x.clone(), y, z], value, sol.sos));
            }
        }
    }
    let Some((best_trial, groups, value, sos)) = best else {
        return Ok(RoundingOutcome {
            groups: vec![vec![1.0; n]; 3],
            value: 0.0,
            sos: 0.0,
            trials,
            best_trial: 0,
            h: Vec::new(),
            records: Vec::new(),
        });
    };
    let h = vec![groups[0].clone()];
    Ok(RoundingOutcome { groups, value, sos, trials, best_trial, h, records: Vec::new() })
}

fn normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm < 1e-300 {
        return false;
    }
    v.iter_mut().for_each(|a| *a /= norm);
    true
}

/// Alternating maximization of `f~` over three unit spheres. Each update sets
/// one group to the normalized partial gradient, so `f~` never decreases.
pub fn als_sphere_lower_bound(t: &Tensor, restarts: usize, seed: SeedTree) -> Result<OracleResult> {
    if t.order() != 3 {
        return Err(Error::OrderMismatch { expected: "3".into(), found: t.order() });
    }
    let n = t.dim();
    let mut best: Option<OracleResult> = None;
    for r in 0..restarts.max(1) {
        let mut rng = seed.index(r as u64).rng();
        let mut groups: Vec<Vec<f64>> =
            (0..3).map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        for g in &mut groups {
            normalize(g);
        }
        let eval = |gs: &[Vec<f64>]| t.eval(&[&gs[0], &gs[1], &gs[2]]);
        let mut value = eval(&groups)?;
        for _ in 0..10_000 {
            let before = value;
            for pos in 0..3 {
                let refs: Vec<&[f64]> = groups.iter().map(|g| g.as_slice()).collect();
                let mut grad = t.contract_except(&refs, pos);
                if normalize(&mut grad) {
                    groups[pos] = grad;
                }
            }
            value = eval(&groups)?;
            debug_assert!(value >= before - 1e-12);
            if value - before < 1e-10 {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| value > b.value) {
            best = Some(OracleResult { value, witness: groups, enumerated: r as u64 + 1, method: "als-sphere" });
        }
    }
    let mut out = best.expect("at least one restart");
    out.enumerated = restarts.max(1) as u64;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleDomain {
    Cube,
    Gaussian,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AntiConcentration {
    /// Empirical `Pr[p(x) > E p]`.
    pub frequency: f64,
    pub std_err: f64,
    pub mean: f64,
    pub samples: usize,
    /// `2^{-4/3} 9^{-d}`.
    pub bound: f64,
}

fn double_factorial_odd(a: usize) -> f64 {
    // (a-1)!! for even a
    (1..a).step_by(2).map(|v| v as f64).product()
}

/// Exact `E p` under the uniform cube or the standard Gaussian over the
/// variables `0..n`.
pub fn polynomial_mean(p: &SparsePoly, domain: SampleDomain) -> f64 {
    p.terms()
        .map(|(m, c)| {
            let w: f64 = m
                .powers()
                .iter()
                .map(|&(_, e)| match (domain, e % 2) {
                    (_, 1) => 0.0,
                    (SampleDomain::Cube, _) => 1.0,
                    (SampleDomain::Gaussian, _) => double_factorial_odd(e),
                })
                .product();
            c * w
        })
        .sum()
}

/// Monte-Carlo estimate of `Pr[p(x) > E p]` for `p` of degree at most 4.
/// Polynomials with no non-constant term are rejected.
pub fn anticoncentration_estimate<R: Rng + ?Sized>(
    p: &SparsePoly,
    n: usize,
    domain: SampleDomain,
    samples: usize,
    rng: &mut R,
) -> Result<AntiConcentration> {
    let d = p.degree();
    if d > 4 {
        return Err(Error::UnsupportedDegree(d));
    }
    if p.terms().all(|(m, _)| m.is_one()) {
        return Err(Error::InvalidInput("constant polynomial has no anti-concentration event".into()));
    }
    let mean = polynomial_mean(p, domain);
    let mut hits = 0usize;
    let mut x = vec![0.0; n];
    for _ in 0..samples {
        for v in x.iter_mut() {
            *v = match domain {
                SampleDomain::Cube => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
                SampleDomain::Gaussian => rng.sample(StandardNormal),
            };
        }
        if p.eval(&x) > mean + 1e-12 * p.l1_norm() {
            hits += 1;
        }
    }
    let f = hits as f64 / samples.max(1) as f64;
    Ok(AntiConcentration {
        frequency: f,
        std_err: (f * (1.0 - f) / samples.max(1) as f64).sqrt(),
        mean,
        samples,
        bound: 2f64.powf(-4.0 / 3.0) * 9f64.powi(-(d as i32)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sos_core::{Monomial, VarKind, VarSpace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn naive_cubic(t: &Tensor) -> f64 {
        let n = t.dim();
        let mut best = f64::NEG_INFINITY;
        for mask in 0..1u64 << (3 * n) {
            let x = signs(mask, n);
            let y = signs(mask >> n, n);
            let z = signs(mask >> (2 * n), n);
            best = best.max(t.eval(&[&x, &y, &z]).unwrap());
        }
        best
    }

    #[test]
    fn cubic_brute_force_matches_naive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=4 {
            let t = Tensor::gaussian(3, n, &mut rng);
            let r = brute_force_cubic_hypercube(&t).unwrap();
            let refs: Vec<&[f64]> = r.witness.iter().map(|g| g.as_slice()).collect();
            assert!((t.eval(&refs).unwrap() - r.value).abs() < 1e-12);
            assert!((r.value - naive_cubic(&t)).abs() < 1e-9);
            assert!((brute_force_cubic_hypercube(&t.scaled(-1.0)).unwrap().value - r.value).abs() < 1e-9);
            assert!((brute_force_decoupled(&t).unwrap().value - r.value).abs() < 1e-9);
        }
        let t = Tensor::from_entries(3, 2, [(vec![1, 0, 1], -2.5)]).unwrap();
        assert_eq!(brute_force_cubic_hypercube(&t).unwrap().value, 2.5);
        let t = Tensor::from_entries(3, 2, [(vec![0, 0, 0], 1.0), (vec![0, 1, 1], 1.0)]).unwrap();
        assert_eq!(brute_force_cubic_hypercube(&t).unwrap().value, 2.0);
        assert!(brute_force_cubic_hypercube(&Tensor::zeros(3, 13)).is_err());
    }

    #[test]
    fn bilinear_brute_force() {
        assert_eq!(brute_force_bilinear(&DMatrix::identity(2, 2)).unwrap().value, 2.0);
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 1)] = 1.0;
        assert_eq!(brute_force_bilinear(&m).unwrap().value, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = DMatrix::from_fn(4, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut naive = f64::NEG_INFINITY;
        for a in 0..16u64 {
            for b in 0..16u64 {
                let (y, z) = (signs(a, 4), signs(b, 4));
                naive = naive.max((0..4).map(|i| (0..4).map(|k| y[i] * m[(i, k)] * z[k]).sum::<f64>()).sum());
            }
        }
        assert!((brute_force_bilinear(&m).unwrap().value - naive).abs() < 1e-12);
    }

    #[test]
    fn khot_naor_small_cases() {
        let params = SolverParams::default();
        let tol = Tolerances::default();
        let t = Tensor::from_entries(3, 1, [(vec![0, 0, 0], -3.0)]).unwrap();
        let r = khot_naor_baseline(&t, 4, SeedTree::new(0), &params, &tol).unwrap();
        assert_eq!(r.value, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4;
        let t = Tensor::gaussian(3, n, &mut rng);
        let opt = brute_force_cubic_hypercube(&t).unwrap().value;
        let r = khot_naor_baseline(&t, 32, SeedTree::new(1), &params, &tol).unwrap();
        assert!(r.value <= opt + 1e-9);
        assert!(r.value >= 0.1 * ((n as f64).ln() / n as f64).sqrt() * opt);
    }

    #[test]
    fn als_rank_one_and_monotone() {
        let a = vec![3.0, 4.0];
        let b = vec![1.0, 0.0];
        let c = vec![0.0, 2.0];
        let t = Tensor::rank_one(&[a, b, c]).unwrap();
        let r = als_sphere_lower_bound(&t, 3, SeedTree::new(0)).unwrap();
        assert!((r.value - 10.0).abs() < 1e-9);
        let t = Tensor::gaussian(3, 4, &mut ChaCha8Rng::seed_from_u64(4));
        let r = als_sphere_lower_bound(&t, 5, SeedTree::new(1)).unwrap();
        for g in &r.witness {
            assert!((g.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!(r.value > 0.0);
    }

    #[test]
    fn anticoncentration_examples() {
        let mut s = VarSpace::new();
        s.add_group("x", 3, VarKind::Free);
        let x1 = SparsePoly::var(0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = anticoncentration_estimate(&x1, 3, SampleDomain::Cube, 20_000, &mut rng).unwrap();
        assert!((r.frequency - 0.5).abs() < 0.02 && r.frequency >= r.bound);
        assert!(anticoncentration_estimate(&SparsePoly::constant(2.0), 3, SampleDomain::Cube, 10, &mut rng).is_err());
        let mut p = SparsePoly::zero();
        p.add_term(Monomial::from_vars(&s, &[0, 1]), 1.0);
        p.add_term(Monomial::from_vars(&s, &[2, 2]), -0.5);
        assert!((polynomial_mean(&p, SampleDomain::Gaussian) + 0.5).abs() < 1e-12);
        let r = anticoncentration_estimate(&p, 3, SampleDomain::Gaussian, 100_000, &mut rng).unwrap();
        assert!(r.frequency >= r.bound - 3.0 * r.std_err);
    }
}
