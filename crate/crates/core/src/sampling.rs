//! Random-variate generation for the posterior samplers.
//!
//! All randomness flows through [`ChaCha8Rng`]. A sampler seeded with `seed`
//! uses stream 0 of that seed; per-draw work that may run in parallel uses
//! [`stream_rng`] with the draw index as the stream id, so results never
//! depend on thread scheduling.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, spd_inverse, symmetrize};

pub type SamplerRng = ChaCha8Rng;

pub fn chain_rng(seed: u64) -> SamplerRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `stream` of `seed` (stream 0 is reserved for chains).
pub fn stream_rng(seed: u64, stream: u64) -> SamplerRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_add(1));
    rng
}

/// Stream for predictive simulation of draw `index`. Kept apart from the
/// streams that produced the draws, which share the same seed.
pub fn predictive_rng(seed: u64, index: u64) -> SamplerRng {
    stream_rng(seed, (1 << 40) | index)
}

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn std_normal_matrix<R: Rng + ?Sized>(rng: &mut R, nrows: usize, ncols: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..nrows * ncols).map(|_| std_normal(rng)).collect();
    DMatrix::from_vec(nrows, ncols, data)
}

pub fn std_normal_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| std_normal(rng)))
}

/// Draw from `N(mean, P^{-1})` given the lower Cholesky factor of the precision `P`.
pub fn mvn_from_precision_chol<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    precision_chol: &DMatrix<f64>,
) -> DVector<f64> {
    let mut z = std_normal_vector(rng, mean.len());
    // x = L'^{-1} z has covariance (L L')^{-1}.
    precision_chol.tr_solve_lower_triangular_mut(&mut z);
    mean + z
}

/// Draw from `N(mean, S S')` given a square-root factor `S` of the covariance.
pub fn mvn_from_cov_factor<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    cov_factor: &DMatrix<f64>,
) -> DVector<f64> {
    let z = std_normal_vector(rng, cov_factor.ncols());
    mean + cov_factor * z
}

/// Draw a matrix `X` with `vec(X) ~ N(vec(mean), col_cov ⊗ row_cov)` from the
/// lower Cholesky factors of both covariances.
pub fn matrix_normal<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DMatrix<f64>,
    row_chol: &DMatrix<f64>,
    col_chol: &DMatrix<f64>,
) -> DMatrix<f64> {
    let z = std_normal_matrix(rng, mean.nrows(), mean.ncols());
    mean + row_chol * z * col_chol.transpose()
}

/// Inverse-Wishart sampler `IW(dof, scale)` with mean `scale / (dof - k - 1)`.
#[derive(Debug, Clone)]
pub struct InverseWishart {
    dof: f64,
    /// Lower Cholesky factor of `scale^{-1}`.
    inv_scale_chol: DMatrix<f64>,
    chi: Vec<ChiSquared<f64>>,
}

impl InverseWishart {
    pub fn new(dof: f64, scale: &DMatrix<f64>) -> Result<Self> {
        let k = scale.nrows();
        if !(dof > k as f64 - 1.0) {
            return Err(Error::arg(format!(
                "inverse-Wishart degrees of freedom {dof} must exceed k - 1 = {}",
                k as f64 - 1.0
            )));
        }
        let inv = spd_inverse(scale, "inverse-Wishart scale matrix")?;
        let inv_scale_chol = cholesky_lower(&inv, "inverse of inverse-Wishart scale")?;
        let chi = (0..k)
            .map(|i| ChiSquared::new(dof - i as f64).expect("positive chi-square dof"))
            .collect();
        Ok(Self {
            dof,
            inv_scale_chol,
            chi,
        })
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    /// Bartlett construction of `W ~ Wishart(dof, scale^{-1})`, returned as `W^{-1}`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let k = self.inv_scale_chol.nrows();
        let mut a = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            a[(i, i)] = self.chi[i].sample(rng).sqrt();
            for j in 0..i {
                a[(i, j)] = std_normal(rng);
            }
        }
        let b = &self.inv_scale_chol * a;
        let binv = b
            .solve_lower_triangular(&DMatrix::identity(k, k))
            .expect("Bartlett factor has a positive diagonal");
        symmetrize(&(binv.transpose() * binv))
    }
}

/// Draw `IW(dof, scale)` once, checking that the result is positive definite.
pub fn inverse_wishart<R: Rng + ?Sized>(
    rng: &mut R,
    dof: f64,
    scale: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let draw = InverseWishart::new(dof, scale)?.sample(rng);
    ensure_pd(&draw, "inverse-Wishart draw")?;
    Ok(draw)
}

pub fn ensure_pd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) || m.clone().cholesky().is_none() {
        return Err(Error::numeric(format!(
            "{what} is not symmetric positive definite"
        )));
    }
    Ok(())
}

/// Gamma draw with `shape` and `rate` (mean `shape / rate`).
pub fn gamma_rate<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("valid gamma parameters")
        .sample(rng)
}

pub fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// Log density of `N(0, var)` at `x`.
pub fn normal_log_pdf(x: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + x * x / var)
}

/// Quantile of a sample by linear interpolation between order statistics.
///
/// `sorted` must be ascending and non-empty; `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
