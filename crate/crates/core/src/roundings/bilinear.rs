//! Rounding primitives for degree-2 pseudo-distributions: Krivine's
//! Grothendieck rounding, lossless sphere rounding and Charikar-Wirth sampling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::sos_core::{GroupId, PseudoDistribution, VarId, VarSpace};

/// `ln(1 + sqrt 2)`.
pub fn krivine_c() -> f64 {
    (1.0 + 2f64.sqrt()).ln()
}

fn group_vars(space: &VarSpace, g: GroupId) -> Vec<VarId> {
    space.group_vars(g).collect()
}

/// Clips negative eigenvalues. Fails when the most negative one is far below
/// the matrix scale, which means the moments did not come from a valid `mu`.
fn psd_repair(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let scale = sym.diagonal().iter().fold(1.0f64, |a, &b| a.max(b.abs()));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() || min < -1e-3 * scale {
        return Err(Error::Rounding(format!("Gram matrix is not PSD (min eigenvalue {min:.3e})")));
    }
    if min >= 0.0 {
        return Ok(sym);
    }
    let lam = eig.eigenvalues.map(|v| v.max(0.0));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&lam) * eig.eigenvectors.transpose())
}

/// Rows of `V` with `V V^T = G` for PSD `G`.
fn factor(g: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = g.clone().symmetric_eigen();
    let mut v = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        v.column_mut(j).scale_mut(s);
    }
    v
}

fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Samples sign pairs `(y, z)` from the Krivine-transformed Gram vectors of
/// a joint second-moment matrix over `(y, z)`.
#[derive(Clone, Debug)]
pub struct KrivineSampler {
    rows: DMatrix<f64>,
    ny: usize,
}

impl KrivineSampler {
    /// `gram` is `pE[w w^T]` with `w = (y, z)` and `ny` leading `y` coordinates.
    pub fn new(gram: &DMatrix<f64>, ny: usize) -> Result<Self> {
        let n = gram.nrows();
        if gram.ncols() != n || ny > n {
            return Err(Error::DimensionMismatch { expected: n, found: gram.ncols() });
        }
        let g = psd_repair(gram)?;
        // Unit vectors: rescale to unit diagonal; null rows become e_1-like.
        let d: Vec<f64> = (0..n).map(|i| g[(i, i)]).collect();
        let mut unit = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                unit[(i, j)] = if d[i] > 1e-12 && d[j] > 1e-12 {
                    (g[(i, j)] / (d[i] * d[j]).sqrt()).clamp(-1.0, 1.0)
                } else if i == j {
                    1.0
                } else {
                    0.0
                };
            }
        }
        let c = krivine_c();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let same = (i < ny) == (j < ny);
                k[(i, j)] = if same { (c * unit[(i, j)]).sinh() } else { (c * unit[(i, j)]).sin() };
            }
        }
        let k = psd_repair(&k)?;
        Ok(Self { rows: factor(&k), ny })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let r = self.rows.ncols();
        let g = DVector::from_iterator(r, (0..r).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let proj = &self.rows * g;
        let y = (0..self.ny).map(|i| sign(proj[i])).collect();
        let z = (self.ny..proj.len()).map(|i| sign(proj[i])).collect();
        (y, z)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BilinearRounding {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// `y^T M z` at the returned point.
    pub value: f64,
    /// `pE[y^T M z]`.
    pub pe: f64,
}

fn bilinear(y: &[f64], m: &DMatrix<f64>, z: &[f64]) -> f64 {
    let mut s = 0.0;
    for (j, &yj) in y.iter().enumerate() {
        for (k, &zk) in z.iter().enumerate() {
            s += yj * m[(j, k)] * zk;
        }
    }
    s
}

fn joint_moments(mu: &PseudoDistribution, left: GroupId, right: GroupId) -> Result<(DMatrix<f64>, usize)> {
    let space = mu.space().clone();
    let mut vars = group_vars(&space, left);
    let ny = vars.len();
    vars.extend(group_vars(&space, right));
    Ok((mu.second_moments(&vars)?, ny))
}

fn pe_bilinear(gram: &DMatrix<f64>, ny: usize, m: &DMatrix<f64>) -> f64 {
    let nz = gram.nrows() - ny;
    let mut s = 0.0;
    for j in 0..ny {
        for k in 0..nz {
            s += m[(j, k)] * gram[(j, ny + k)];
        }
    }
    s
}

/// Best of `trials` Krivine roundings of `max y^T M z` over `{+-1}^n x {+-1}^n`.
/// The sign of the pair is normalized so that `y[0] = +1`.
pub fn grothendieck_round<R: Rng + ?Sized>(
    mu: &PseudoDistribution,
    left: GroupId,
    right: GroupId,
    m: &DMatrix<f64>,
    trials: usize,
    rng: &mut R,
) -> Result<BilinearRounding> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let (gram, ny) = joint_moments(mu, left, right)?;
    if m.nrows() != ny || m.ncols() != gram.nrows() - ny {
        return Err(Error::DimensionMismatch { expected: ny, found: m.nrows() });
    }
    let pe = pe_bilinear(&gram, ny, m);
    let sampler = KrivineSampler::new(&gram, ny)?;
    let mut best: Option<BilinearRounding> = None;
    for _ in 0..trials.max(1) {
        let (mut y, mut z) = sampler.sample(rng);
        if y.first().is_some_and(|&v| v < 0.0) {
            y.iter_mut().for_each(|v| *v = -*v);
            z.iter_mut().for_each(|v| *v = -*v);
        }
        let value = bilinear(&y, m, &z);
        if best.as_ref().is_none_or(|b| value > b.value) {
            best = Some(BilinearRounding { y, z, value, pe });
        }
    }
    Ok(best.expect("at least one trial"))
}

fn check_trace(x: &DMatrix<f64>, target: f64) -> Result<()> {
    let tr = x.trace();
    if (tr - target).abs() > 1e-6 * target.max(1.0) {
        return Err(Error::Rounding(format!("second-moment trace {tr} differs from {target}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SphereRounding {
    pub x: Vec<f64>,
    /// `x^T M x` (or `y^T M z` for the bilinear variant).
    pub value: f64,
    pub pe: f64,
}

/// Eigenvector of `X = pE[x x^T]` maximizing `v^T M v`. Since `tr X = 1` and
/// `pE[x^T M x] = sum lambda_i v_i^T M v_i`, the best one is at least `pE`.
pub fn sphere_eigen_round(mu: &PseudoDistribution, group: GroupId, m: &DMatrix<f64>) -> Result<SphereRounding> {
    let vars = group_vars(mu.space(), group);
    let x = mu.second_moments(&vars)?;
    check_trace(&x, 1.0)?;
    let ms = (m + m.transpose()) * 0.5;
    let pe = (&x.component_mul(&ms)).sum();
    let eig = x.symmetric_eigen();
    let mut best: Option<SphereRounding> = None;
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam <= 1e-12 {
            continue;
        }
        let v = eig.eigenvectors.column(i).normalize();
        let value = (v.transpose() * &ms * &v)[(0, 0)];
        if best.as_ref().is_none_or(|b| value > b.value) {
            best = Some(SphereRounding { x: v.iter().copied().collect(), value, pe });
        }
    }
    best.ok_or_else(|| Error::Rounding("second-moment matrix is zero".into()))
}

/// Lossless rounding of `max y^T M z` over two unit spheres. Applies the
/// eigenvector argument to the lifted `w = (y, z)` with `tr pE[w w^T] = 2`,
/// then normalizes each half, which can only increase the bilinear value.
pub fn sphere_bilinear_round(
    mu: &PseudoDistribution,
    left: GroupId,
    right: GroupId,
    m: &DMatrix<f64>,
) -> Result<BilinearRounding> {
    let (gram, ny) = joint_moments(mu, left, right)?;
    check_trace(&gram, 2.0)?;
    Ok(sphere_bilinear_from_gram(&gram, ny, m))
}

pub(crate) fn sphere_bilinear_from_gram(gram: &DMatrix<f64>, ny: usize, m: &DMatrix<f64>) -> BilinearRounding {
    let n = gram.nrows();
    let pe = pe_bilinear(gram, ny, m);
    let eig = gram.clone().symmetric_eigen();
    let mut best: Option<BilinearRounding> = None;
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam <= 1e-12 {
            continue;
        }
        let col = eig.eigenvectors.column(i);
        let a: Vec<f64> = (0..ny).map(|j| col[j]).collect();
        let b: Vec<f64> = (ny..n).map(|j| col[j]).collect();
        let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if na < 1e-12 || nb < 1e-12 {
            continue;
        }
        let y: Vec<f64> = a.iter().map(|v| v / na).collect();
        let mut z: Vec<f64> = b.iter().map(|v| v / nb).collect();
        let mut value = bilinear(&y, m, &z);
        if value < 0.0 {
            z.iter_mut().for_each(|v| *v = -*v);
            value = -value;
        }
        if best.as_ref().is_none_or(|r| value > r.value) {
            best = Some(BilinearRounding { y, z, value, pe });
        }
    }
    best.unwrap_or_else(|| {
        let mut y = vec![0.0; ny];
        let mut z = vec![0.0; n - ny];
        y[0] = 1.0;
        z[0] = 1.0;
        let value = m[(0, 0)];
        BilinearRounding { y, z, value, pe }
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CwOutcome {
    /// Best sample.
    pub x: Vec<f64>,
    pub value: f64,
    /// Empirical mean of `x^T M x` over all samples.
    pub mean: f64,
    pub std_err: f64,
    /// `pE[x^T M x] / T^2 - 8 e^{-T^2/2} sum |M_ij|`.
    pub bound: f64,
    pub samples: usize,
}

/// Charikar-Wirth sampling: `g ~ N(0, pE[x x^T])`, truncate `g_i / T` into
/// `[-1, 1]`, then round each coordinate independently with that bias.
pub fn charikar_wirth_sample<R: Rng + ?Sized>(
    mu: &PseudoDistribution,
    group: GroupId,
    m: &DMatrix<f64>,
    t: f64,
    samples: usize,
    rng: &mut R,
) -> Result<CwOutcome> {
    let vars = group_vars(mu.space(), group);
    let sigma = mu.second_moments(&vars)?;
    charikar_wirth_from_moments(&sigma, m, t, samples, rng)
}

pub fn charikar_wirth_from_moments<R: Rng + ?Sized>(
    sigma: &DMatrix<f64>,
    m: &DMatrix<f64>,
    t: f64,
    samples: usize,
    rng: &mut R,
) -> Result<CwOutcome> {
    let n = sigma.nrows();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: m.nrows() });
    }
    if (0..n).any(|i| m[(i, i)] != 0.0) {
        return Err(Error::InvalidInput("Charikar-Wirth needs a zero-diagonal matrix".into()));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("truncation T = {t} must be positive")));
    }
    let sigma = psd_repair(sigma)?;
    let pe = sigma.component_mul(m).sum();
    let bound = pe / (t * t) - 8.0 * (-t * t / 2.0).exp() * m.iter().map(|v| v.abs()).sum::<f64>();
    let rows = factor(&sigma);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let (mut sum, mut sq) = (0.0, 0.0);
    let samples = samples.max(1);
    let mut x = vec![0.0; n];
    for _ in 0..samples {
        let g = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let proj = &rows * g;
        for i in 0..n {
            let bias = (proj[i] / t).clamp(-1.0, 1.0);
            x[i] = if rng.random::<f64>() < (1.0 + bias) / 2.0 { 1.0 } else { -1.0 };
        }
        let xv = DVector::from_column_slice(&x);
        let v = (xv.transpose() * m * &xv)[(0, 0)];
        sum += v;
        sq += v * v;
        if best.as_ref().is_none_or(|b| v > b.1) {
            best = Some((x.clone(), v));
        }
    }
    let s = samples as f64;
    let mean = sum / s;
    let var = (sq / s - mean * mean).max(0.0);
    let (x, value) = best.expect("at least one sample");
    Ok(CwOutcome { x, value, mean, std_err: (var / s).sqrt(), bound, samples })
}
