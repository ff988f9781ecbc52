//! Dense linear-algebra helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative threshold on `|R_ii| / |R_00|` below which a pivoted QR factor is
/// treated as rank deficient.
pub const RANK_TOL: f64 = 1e-12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Lower Cholesky factor `L` with `m = L L'`.
pub fn cholesky_lower(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.unpack())
        .ok_or_else(|| Error::numeric(format!("{what} is not positive definite")))
}

pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::numeric(format!("{what} is not positive definite")))?;
    Ok(symmetrize(&chol.inverse()))
}

/// Square root factor `S` of a symmetric PSD matrix with `S S' = m`.
///
/// Uses Cholesky when it succeeds and falls back to the symmetric eigen
/// decomposition (negative eigenvalues clamped to zero) for singular inputs
/// such as an all-zero covariance.
pub fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(c) = m.clone().cholesky() {
        return c.unpack();
    }
    let eig = symmetrize(m).symmetric_eigen();
    let mut v = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        v.column_mut(j).scale_mut(s);
    }
    v
}

/// `log det` of an SPD matrix from its lower Cholesky factor.
pub fn log_det_from_chol(l: &DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Column-stacking `vec` operator.
pub fn vec_cols(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &DVector<f64>, nrows: usize, ncols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(nrows, ncols, v.as_slice())
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    (a - b).amax()
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Solves `S = A S A' + Q` for the stationary covariance of `x_t = A x_{t-1} + e_t`.
pub fn discrete_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let lhs = DMatrix::identity(n * n, n * n) - kron(a, a);
    let rhs = vec_cols(q);
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::numeric("Lyapunov system is singular"))?;
    Ok(symmetrize(&unvec(&sol, n, n)))
}

/// Least-squares solver based on Householder QR with column pivoting.
///
/// One factorization is reused for any number of right-hand sides.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    perm: nalgebra::PermutationSequence<nalgebra::Dyn>,
    ncols: usize,
}

impl LeastSquares {
    pub fn new(x: &DMatrix<f64>, what: &str) -> Result<Self> {
        let (n, k) = x.shape();
        if n < k {
            return Err(Error::numeric(format!(
                "{what}: {n} rows cannot identify {k} coefficients"
            )));
        }
        let (q, r, perm) = x.clone().col_piv_qr().unpack();
        let lead = r[(0, 0)].abs();
        for i in 0..k {
            if !(r[(i, i)].abs() > RANK_TOL * lead.max(f64::MIN_POSITIVE)) {
                return Err(Error::numeric(format!(
                    "{what}: design matrix is rank deficient"
                )));
            }
        }
        Ok(Self {
            q,
            r,
            perm,
            ncols: k,
        })
    }

    /// Coefficients minimizing `||x b - y||` column by column.
    pub fn solve(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let k = self.ncols;
        let qty = self.q.transpose() * y;
        let rk = self.r.view((0, 0), (k, k));
        let mut z = qty.rows(0, k).into_owned();
        rk.solve_upper_triangular_mut(&mut z);
        self.perm.inv_permute_rows(&mut z);
        z
    }
}

/// Convenience wrapper for a single least-squares fit.
pub fn lstsq(x: &DMatrix<f64>, y: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Ok(LeastSquares::new(x, what)?.solve(y))
}

/// Sample mean of each column.
pub fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows().max(1) as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

/// Sample covariance with the `n - 1` denominator.
pub fn sample_covariance(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let means = column_means(m);
    let mut c = m.clone();
    for (j, mut col) in c.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    let denom = (n.saturating_sub(1)).max(1) as f64;
    symmetrize(&(c.transpose() * &c / denom))
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}
