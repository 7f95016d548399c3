//! Small-support distributions with large moments in every direction.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::SeedTree;
use crate::tensor_poly::Domain;

/// Irreducible polynomials over GF(2) of degree `r`, bit `r` set.
const IRREDUCIBLE: [u32; 13] = [
    0, 0b11, 0b111, 0b1011, 0b10011, 0b100101, 0b1000011, 0b10000011, 0b100011101, 0b1000010001,
    0b10000001001, 0b100000000101, 0b1000001010011,
];

fn gf_mul(mut a: u32, mut b: u32, r: usize) -> u32 {
    let poly = IRREDUCIBLE[r];
    let mut out = 0;
    while b != 0 {
        if b & 1 == 1 {
            out ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a >> r & 1 == 1 {
            a ^= poly;
        }
    }
    out
}

fn parity(v: u32) -> bool {
    v.count_ones() % 2 == 1
}

/// `{+-1}^m` in counting order.
fn full_cube(m: usize) -> Vec<Vec<f64>> {
    (0..1usize << m).map(|s| (0..m).map(|i| if s >> i & 1 == 1 { -1.0 } else { 1.0 }).collect()).collect()
}

/// 4-wise independent `+-1` vectors of length `m`. Coordinate `i` is the parity
/// of `<s1, a_i> + <s2, a_i^3>` for distinct nonzero field elements `a_i` of
/// GF(2^r); any four columns `(a, a^3)` are linearly independent, so every
/// product of at most four distinct coordinates averages to zero.
pub fn fourwise_support(m: usize) -> Vec<Vec<f64>> {
    if m <= 4 {
        return full_cube(m);
    }
    let r = (1..IRREDUCIBLE.len()).find(|&r| (1usize << r) > m).expect("block length below 4096");
    let cols: Vec<(u32, u32)> = (1..=m as u32)
        .map(|a| {
            let a3 = gf_mul(gf_mul(a, a, r), a, r);
            (a, a3)
        })
        .collect();
    let q = 1u32 << r;
    let mut out = Vec::with_capacity((q * q) as usize);
    for s1 in 0..q {
        for s2 in 0..q {
            out.push(
                cols.iter()
                    .map(|&(a, a3)| if parity(s1 & a) ^ parity(s2 & a3) { -1.0 } else { 1.0 })
                    .collect(),
            );
        }
    }
    out
}

/// Uniform distribution over an explicit support.
#[derive(Clone, Debug, PartialEq)]
pub struct HittingSet {
    pub domain: Domain,
    pub support: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
    pub n: usize,
    pub k: usize,
    pub block_len: usize,
    /// Size of the 4-wise (or pairwise) generator's sample space.
    pub seed_space: usize,
}

impl HittingSet {
    fn uniform(domain: Domain, support: Vec<Vec<f64>>, n: usize, k: usize, block_len: usize, seed_space: usize) -> Self {
        let p = 1.0 / support.len() as f64;
        let probs = vec![p; support.len()];
        Self { domain, support, probs, n, k, block_len, seed_space }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Exponent `C` with `|supp| = 2^k n^C` (hypercube) or `|net| n^C` (sphere).
    pub fn size_exponent(&self) -> f64 {
        if self.n <= 1 {
            return 0.0;
        }
        (self.seed_space as f64).ln() / (self.n as f64).ln()
    }

    pub fn is_negation_closed(&self) -> bool {
        let key = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<u64>>();
        let set: std::collections::HashSet<Vec<u64>> = self.support.iter().map(|v| key(v)).collect();
        self.support.iter().all(|v| {
            let neg: Vec<f64> = v.iter().map(|x| if *x == 0.0 { 0.0 } else { -x }).collect();
            set.contains(&key(&neg))
        })
    }

    /// Largest `|<x, w>|` over the support.
    pub fn max_abs_inner(&self, w: &[f64]) -> f64 {
        self.support.iter().map(|x| dot(x, w).abs()).fold(0.0, f64::max)
    }

    /// One support vector per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {} {}\n", self.len(), self.n, self.k, self.domain.name());
        for x in &self.support {
            let row: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
            writeln!(s, "{}", row.join(" ")).unwrap();
        }
        s
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smallest multiple of `k` that is at least `n`.
pub fn padded_dim(n: usize, k: usize) -> usize {
    n.div_ceil(k.max(1)) * k.max(1)
}

fn check_blocks(n: usize, k: usize) -> Result<usize> {
    if k == 0 || n == 0 || n % k != 0 {
        return Err(Error::InvalidInput(format!("k = {k} must divide n = {n}; pad to {}", padded_dim(n, k))));
    }
    Ok(n / k)
}

fn kron(c: &[f64], b: &[f64], scale: f64) -> Vec<f64> {
    c.iter().flat_map(|&cj| b.iter().map(move |&bi| scale * cj * bi)).collect()
}

/// `{c (x) b : c in {+-1}^k, b in fourwise_support(n/k)}`.
pub fn blockwise_hypercube_set(n: usize, k: usize) -> Result<HittingSet> {
    let m = check_blocks(n, k)?;
    let bs = fourwise_support(m);
    let cs = full_cube(k);
    let support: Vec<Vec<f64>> = cs.iter().flat_map(|c| bs.iter().map(move |b| kron(c, b, 1.0))).collect();
    Ok(HittingSet::uniform(Domain::Hypercube, support, n, k, m, bs.len()))
}

/// `{sqrt(k/n) c (x) b : c in an eps-net of S^{k-1}, b in fourwise_support(n/k)}`.
pub fn blockwise_sphere_set(n: usize, k: usize, eps: f64) -> Result<HittingSet> {
    let m = check_blocks(n, k)?;
    let bs = fourwise_support(m);
    let net = epsilon_net_sphere(k, eps)?;
    let scale = (k as f64 / n as f64).sqrt();
    let support: Vec<Vec<f64>> = net.iter().flat_map(|c| bs.iter().map(move |b| kron(c, b, scale))).collect();
    Ok(HittingSet::uniform(Domain::Sphere, support, n, k, m, bs.len()))
}

/// Greedy maximal separated subset of a dense candidate pool on `S^{k-1}`.
/// Points are kept at distance at least `0.98 eps`, so the pool is covered
/// within that radius; the pool spacing makes up the rest.
pub fn epsilon_net_sphere(k: usize, eps: f64) -> Result<Vec<Vec<f64>>> {
    if k == 0 || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon net needs k >= 1 and 0 < eps < 1 (got {k}, {eps})")));
    }
    if k == 1 {
        return Ok(vec![vec![1.0], vec![-1.0]]);
    }
    let mut rng = SeedTree::new(0x6e65_74).rng();
    let mut pool: Vec<Vec<f64>> = if k == 2 {
        let steps = 20_000;
        (0..steps)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / steps as f64;
                vec![a.cos(), a.sin()]
            })
            .collect()
    } else {
        let count = (20_000 * k).min(400_000);
        (0..count)
            .map(|_| {
                let g: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = dot(&g, &g).sqrt();
                g.into_iter().map(|v| v / norm).collect()
            })
            .collect()
    };
    pool.shuffle(&mut rng);
    let sep2 = (0.98 * eps).powi(2);
    let mut net: Vec<Vec<f64>> = Vec::new();
    for p in pool {
        if net.iter().all(|q| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() >= sep2) {
            net.push(p);
        }
    }
    Ok(net)
}

/// Rows of the Sylvester-Hadamard matrix restricted to `n` columns, together
/// with their negations.
pub fn pairwise_set(n: usize) -> HittingSet {
    let r = (0..).find(|&r| (1usize << r) >= n.max(1)).unwrap();
    let rows = 1usize << r;
    let mut support = Vec::with_capacity(2 * rows);
    for s in 0..rows {
        let x: Vec<f64> = (0..n).map(|j| if (s & j).count_ones() % 2 == 1 { -1.0 } else { 1.0 }).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        support.push(x);
        support.push(neg);
    }
    HittingSet::uniform(Domain::Hypercube, support, n, 1, n, rows)
}

/// Exact `E_{x ~ D} <x, w>^{2k}`.
pub fn directional_moment(d: &HittingSet, w: &[f64], k: usize) -> f64 {
    d.support.iter().zip(&d.probs).map(|(x, p)| p * dot(x, w).powi(2 * k as i32)).sum()
}

/// `(3/32) sqrt(k/n)`: the hitting guarantee relative to `|w|_1` (hypercube)
/// or `|w|_2` (sphere, before the `1 - eps` net slack).
pub fn direction_constant(n: usize, k: usize) -> f64 {
    3.0 / 32.0 * (k as f64 / n as f64).sqrt()
}

/// Lower bound `(3/32)^{2k} (k/n)^k |w|^{2k} / |supp|` on the directional moment.
pub fn directional_moment_bound(d: &HittingSet, w_norm: f64, k: usize) -> f64 {
    (direction_constant(d.n, d.k) * w_norm).powi(2 * k as i32) / d.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_kwise(support: &[Vec<f64>], order: usize) {
        let m = support[0].len();
        for mask in 1u32..1 << m {
            let size = mask.count_ones() as usize;
            if size > order {
                continue;
            }
            let mean: f64 = support
                .iter()
                .map(|b| (0..m).filter(|&i| mask >> i & 1 == 1).map(|i| b[i]).product::<f64>())
                .sum::<f64>()
                / support.len() as f64;
            assert!(mean.abs() < 1e-12, "mask {mask:b}: {mean}");
        }
    }

    #[test]
    fn fourwise_small_and_field_cases() {
        assert_eq!(fourwise_support(2).len(), 4);
        for m in [5, 7, 8, 12] {
            let s = fourwise_support(m);
            assert!(s.len() <= 4 * m * m);
            check_kwise(&s, 4);
        }
    }

    #[test]
    fn fourwise_patterns_on_four_coordinates_are_uniform() {
        let s = fourwise_support(8);
        for a in 0..8 {
            for b in a + 1..8 {
                for c in b + 1..8 {
                    for d in c + 1..8 {
                        let mut counts = [0usize; 16];
                        for v in &s {
                            let idx = [a, b, c, d].iter().enumerate().map(|(t, &i)| ((v[i] < 0.0) as usize) << t).sum::<usize>();
                            counts[idx] += 1;
                        }
                        assert!(counts.iter().all(|&c| c == s.len() / 16));
                    }
                }
            }
        }
    }

    #[test]
    fn blockwise_hypercube_shape_and_guarantee() {
        let d = blockwise_hypercube_set(4, 2).unwrap();
        assert_eq!(d.len(), 16);
        assert!(d.is_negation_closed());
        assert!(d.support.iter().flatten().all(|v| v.abs() == 1.0));
        assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (n, k) in [(4, 2), (6, 2), (8, 2), (10, 2)] {
            let d = blockwise_hypercube_set(n, k).unwrap();
            for _ in 0..1000 {
                let w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let l1: f64 = w.iter().map(|v| v.abs()).sum();
                assert!(d.max_abs_inner(&w) >= direction_constant(n, k) * l1);
            }
        }
        assert!(blockwise_hypercube_set(5, 2).is_err());
        assert_eq!(padded_dim(5, 2), 6);
    }

    #[test]
    fn sphere_set_and_nets() {
        assert_eq!(epsilon_net_sphere(1, 0.1).unwrap(), vec![vec![1.0], vec![-1.0]]);
        let net = epsilon_net_sphere(2, 0.1).unwrap();
        assert!(net.len() <= 70);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let a: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            let p = [a.cos(), a.sin()];
            let best = net.iter().map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()).fold(9.0, f64::min);
            assert!(best <= 0.1);
        }
        let d = blockwise_sphere_set(4, 2, 0.1).unwrap();
        assert!(d.support.iter().all(|x| (dot(x, x) - 1.0).abs() < 1e-12));
        for _ in 0..1000 {
            let w: Vec<f64> = (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            assert!(d.max_abs_inner(&w) >= direction_constant(4, 2) * dot(&w, &w).sqrt());
        }
        let d1 = blockwise_sphere_set(3, 1, 0.1).unwrap();
        assert!(d1.is_negation_closed());
    }

    #[test]
    fn pairwise_set_moments() {
        let d = pairwise_set(3);
        assert!(d.len() <= 8 && d.is_negation_closed());
        for i in 0..3 {
            for j in 0..3 {
                let e: f64 = d.support.iter().map(|x| x[i] * x[j]).sum::<f64>() / d.len() as f64;
                assert_eq!(e, if i == j { 1.0 } else { 0.0 });
            }
        }
        let d = pairwise_set(6);
        let v = [0.3, -1.0, 2.0, 0.0, 1.5, -0.2];
        assert!((directional_moment(&d, &v, 1) - dot(&v, &v)).abs() < 1e-12);
    }

    #[test]
    fn directional_moment_examples() {
        let d = blockwise_hypercube_set(4, 2).unwrap();
        assert_eq!(directional_moment(&d, &[1.0, 0.0, 0.0, 0.0], 2), 1.0);
        assert_eq!(directional_moment(&d, &[0.0; 4], 2), 0.0);
        let ones = [1.0; 4];
        assert!(directional_moment(&d, &ones, 2) >= directional_moment_bound(&d, 4.0, 2));
    }
}
