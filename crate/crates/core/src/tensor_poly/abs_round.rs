use rand::Rng;

use super::SymTensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct AbsRounding {
    /// Point in `[-1,1]^n` with `|f(point)| >= d!/d^d * |f~(groups)|`.
    pub point: Vec<f64>,
    /// Sign pattern `eps` that produced `point`.
    pub signs: Vec<f64>,
    pub value: f64,
    pub decoupled_value: f64,
}

/// Searches the `2^d` polarization points `(1/d) sum eps_j x^(j)` for the one
/// maximizing `|f|`.
pub fn decouple_abs_round(t: &SymTensor, groups: &[Vec<f64>]) -> Result<AbsRounding> {
    let d = t.order();
    if groups.len() != d {
        return Err(Error::GroupCount { expected: d, found: groups.len() });
    }
    let refs: Vec<&[f64]> = groups.iter().map(|g| g.as_slice()).collect();
    let decoupled_value = t.eval_decoupled(&refs)?;
    let n = t.dim();
    let mut best: Option<AbsRounding> = None;
    for mask in 0..1usize << d {
        let signs: Vec<f64> = (0..d).map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let point: Vec<f64> =
            (0..n).map(|i| groups.iter().zip(&signs).map(|(g, s)| s * g[i]).sum::<f64>() / d as f64).collect();
        let value = t.eval(&point)?;
        if best.as_ref().is_none_or(|b| value.abs() > b.value.abs()) {
            best = Some(AbsRounding { point, signs, value, decoupled_value });
        }
    }
    Ok(best.expect("at least one sign pattern"))
}

/// Independent coordinate rounding: `+1` with probability `(1+y_i)/2`.
/// Preserves every multilinear polynomial in expectation.
pub fn round_to_cube<R: Rng + ?Sized>(y: &[f64], rng: &mut R) -> Vec<f64> {
    y.iter()
        .map(|&v| if rng.random::<f64>() < (1.0 + v.clamp(-1.0, 1.0)) / 2.0 { 1.0 } else { -1.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_poly::factorial;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cube(n: usize, mask: usize) -> Vec<f64> {
        (0..n).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect()
    }

    fn offdiag_all_ones(n: usize) -> SymTensor {
        let mut t = SymTensor::new(2, n).unwrap();
        for i in 0..n {
            for j in i + 1..n {
                t.add(&[i, j], -2.0).unwrap();
            }
        }
        t
    }

    #[test]
    fn quadratic_non_decouplability_regression() {
        for n in 2..=6 {
            let t = offdiag_all_ones(n);
            // x^T (I - 11^T) x = n - (sum x)^2, so the coupled max is n for even n.
            let coupled = (0..1 << n).map(|m| t.eval(&cube(n, m)).unwrap()).fold(f64::MIN, f64::max);
            assert_eq!(coupled, (n - n % 2) as f64);
            let mut best = f64::MIN;
            let mut arg = (0, 0);
            for a in 0..1 << n {
                for b in 0..1 << n {
                    let v = t.eval_decoupled(&[&cube(n, a), &cube(n, b)]).unwrap();
                    if v > best {
                        best = v;
                        arg = (a, b);
                    }
                }
            }
            assert_eq!(best, (n * n - n) as f64);
            let r = decouple_abs_round(&t, &[cube(n, arg.0), cube(n, arg.1)]).unwrap();
            assert!(r.value.abs() >= best / 2.0 - 1e-12);
        }
    }

    #[test]
    fn equal_groups_reproduce_coupled_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut t = SymTensor::new(3, 4).unwrap();
        for (i, j, k) in [(0, 1, 2), (0, 1, 3), (1, 2, 3)] {
            t.add(&[i, j, k], rng.random_range(-1.0..1.0)).unwrap();
        }
        let g = cube(4, 5);
        let r = decouple_abs_round(&t, &[g.clone(), g.clone(), g.clone()]).unwrap();
        assert!(r.value.abs() >= t.eval(&g).unwrap().abs() - 1e-15);
    }

    #[test]
    fn quartic_guarantee_against_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 4;
        let t = SymTensor::from_monomials(4, n, [(vec![0, 1, 2, 3], rng.random_range(0.5..1.5))]).unwrap();
        let factor = factorial(4) / 4f64.powi(4);
        let mut best = 0.0f64;
        let mut arg = vec![];
        for m in 0..1usize << (4 * n) {
            let gs: Vec<Vec<f64>> = (0..4).map(|p| cube(n, m >> (p * n) & 0xf)).collect();
            let refs: Vec<&[f64]> = gs.iter().map(|g| g.as_slice()).collect();
            let v = t.eval_decoupled(&refs).unwrap();
            if v.abs() > best {
                best = v.abs();
                arg = gs;
            }
        }
        let r = decouple_abs_round(&t, &arg).unwrap();
        assert!(r.value.abs() >= factor * best - 1e-12);
        // The rounding to the cube keeps |f| in expectation, so some sample reaches it.
        let hit = (0..2000).map(|_| t.eval(&round_to_cube(&r.point, &mut rng)).unwrap().abs()).fold(0.0, f64::max);
        assert!(hit >= r.value.abs() - 1e-12);
    }

    #[test]
    fn cube_rounding_preserves_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = [0.3, -0.8, 0.5];
        let t = SymTensor::from_monomials(3, 3, [(vec![0, 1, 2], 1.0)]).unwrap();
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| t.eval(&round_to_cube(&y, &mut rng)).unwrap()).sum::<f64>() / n as f64;
        let exact = t.eval(&y).unwrap();
        assert!((mean - exact).abs() < 4.0 / (n as f64).sqrt());
    }
}
