//! Impulse responses, the dummy-observation BVAR and sign restrictions.
//!
//! Index conventions used throughout:
//!
//! * `responses[h][(i, j)]` is the response of variable `i` at horizon `h`
//!   to a unit structural shock `j`; horizon 0 is the impact period.
//! * Recursive identification uses the lower Cholesky factor `Z` of `Σ`
//!   (`Σ = ZZ'`), so the impact matrix is `Z`.
//! * Sign restrictions write `Σ = Ω'Ω` with candidate `Ω = QΩ0`, `Ω0` the
//!   upper Cholesky factor. Row `s` of `Ω` holds the impact responses to
//!   shock `s`, so the impact matrix is `Ω'`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::bvar::PosteriorDraws;
use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, symmetrize, LeastSquares};
use crate::ns_factors::FactorSeries;
use crate::sampling::{
    chain_rng, matrix_normal, quantile_sorted, std_normal_matrix, stream_rng, InverseWishart,
    SamplerRng,
};
use crate::var_engine::companion_matrix;

/// Impulse responses of every retained draw and their pointwise summary.
#[derive(Debug, Clone, PartialEq)]
pub struct IrfResult {
    pub names: Vec<String>,
    /// `responses[d][h]` is the `k x k` response matrix of draw `d`.
    pub responses: Vec<Vec<DMatrix<f64>>>,
    /// Impact matrices of the used draws (`Z`, or `Ω'` under sign restrictions).
    pub impact: Vec<DMatrix<f64>>,
    pub median: Vec<DMatrix<f64>>,
    pub lower: Vec<DMatrix<f64>>,
    pub upper: Vec<DMatrix<f64>>,
    /// Band quantile levels `(lower, upper)`.
    pub band: (f64, f64),
    /// Draws skipped (non-PD `Σ`) or dropped (no admissible rotation).
    pub n_skipped: usize,
    /// Candidate rotations tried and accepted, for sign restrictions.
    pub tries: usize,
    pub accepted: usize,
}

impl IrfResult {
    pub fn horizons(&self) -> usize {
        self.median.len()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.tries == 0 {
            1.0
        } else {
            self.accepted as f64 / self.tries as f64
        }
    }

    /// One row per `(h, response, shock)`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["h", "response", "shock", "median", "lower", "upper"])?;
        for h in 0..self.horizons() {
            for (i, ri) in self.names.iter().enumerate() {
                for (j, sj) in self.names.iter().enumerate() {
                    wr.write_record([
                        h.to_string(),
                        ri.clone(),
                        sj.clone(),
                        self.median[h][(i, j)].to_string(),
                        self.lower[h][(i, j)].to_string(),
                        self.upper[h][(i, j)].to_string(),
                    ])?;
                }
            }
        }
        wr.flush().map_err(|e| Error::io("<irf writer>", e))?;
        Ok(())
    }

    pub fn report(&self) -> String {
        format!(
            "draws used: {}\ndraws skipped: {}\ncandidates tried: {}\ncandidates accepted: {}\nacceptance rate: {:.6}\n",
            self.responses.len(),
            self.n_skipped,
            self.tries,
            self.accepted,
            self.acceptance_rate()
        )
    }
}

fn lag_matrices(phi: &DMatrix<f64>, k: usize, p: usize, intercept: bool) -> Vec<DMatrix<f64>> {
    let off = usize::from(intercept);
    (0..p)
        .map(|l| phi.rows(off + l * k, k).transpose())
        .collect()
}

/// Responses `J C^h J' impact` for `h = 0..horizons`.
pub fn trace_responses(
    lags: &[DMatrix<f64>],
    impact: &DMatrix<f64>,
    horizons: usize,
) -> Vec<DMatrix<f64>> {
    let k = impact.nrows();
    let c = companion_matrix(lags);
    let mut x = DMatrix::zeros(c.nrows(), k);
    x.rows_mut(0, k).copy_from(impact);
    let mut out = Vec::with_capacity(horizons);
    for h in 0..horizons {
        if h > 0 {
            x = &c * &x;
        }
        out.push(x.rows(0, k).into_owned());
    }
    out
}

fn summarize(
    responses: &[Vec<DMatrix<f64>>],
    k: usize,
    horizons: usize,
    band: (f64, f64),
) -> [Vec<DMatrix<f64>>; 3] {
    let mut med = vec![DMatrix::zeros(k, k); horizons];
    let mut lo = med.clone();
    let mut hi = med.clone();
    let mut buf = vec![0.0; responses.len()];
    for h in 0..horizons {
        for i in 0..k {
            for j in 0..k {
                for (b, r) in buf.iter_mut().zip(responses) {
                    *b = r[h][(i, j)];
                }
                buf.sort_by(f64::total_cmp);
                med[h][(i, j)] = quantile_sorted(&buf, 0.5);
                lo[h][(i, j)] = quantile_sorted(&buf, band.0);
                hi[h][(i, j)] = quantile_sorted(&buf, band.1);
            }
        }
    }
    [med, lo, hi]
}

fn check_horizons(horizons: usize) -> Result<()> {
    if horizons == 0 {
        return Err(Error::arg("impulse-response horizon must be at least 1"));
    }
    Ok(())
}

/// Cholesky-identified responses with 5th/95th percentile bands.
pub fn irf_recursive(draws: &PosteriorDraws, horizons: usize) -> Result<IrfResult> {
    irf_recursive_with(draws, horizons, (0.05, 0.95))
}

pub fn irf_recursive_with(
    draws: &PosteriorDraws,
    horizons: usize,
    band: (f64, f64),
) -> Result<IrfResult> {
    check_horizons(horizons)?;
    if draws.is_empty() {
        return Err(Error::arg("no posterior draws for impulse responses"));
    }
    let (k, p) = (draws.k, draws.p);
    let per: Vec<Option<(DMatrix<f64>, Vec<DMatrix<f64>>)>> = (0..draws.len())
        .into_par_iter()
        .map(|d| {
            let z = draws.sigma[d].clone().cholesky()?.l();
            let lags = lag_matrices(&draws.phi[d], k, p, draws.intercept);
            let resp = trace_responses(&lags, &z, horizons);
            Some((z, resp))
        })
        .collect();
    let n_skipped = per.iter().filter(|x| x.is_none()).count();
    let (impact, responses): (Vec<_>, Vec<_>) = per.into_iter().flatten().unzip();
    if responses.is_empty() {
        return Err(Error::numeric(
            "no posterior draw has a positive definite error covariance",
        ));
    }
    let [median, lower, upper] = summarize(&responses, k, horizons, band);
    Ok(IrfResult {
        names: draws.names.clone(),
        responses,
        impact,
        median,
        lower,
        upper,
        band,
        n_skipped,
        tries: 0,
        accepted: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
    Free,
}

impl std::str::FromStr for Sign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+" | "pos" | "positive" => Ok(Sign::Positive),
            "-" | "neg" | "negative" => Ok(Sign::Negative),
            "0" | "." | "free" | "?" | "" => Ok(Sign::Free),
            other => Err(Error::arg(format!(
                "unknown sign `{other}` (use +, - or free)"
            ))),
        }
    }
}

/// Sign pattern of the responses to one shock.
#[derive(Debug, Clone, PartialEq)]
pub struct SignRestriction {
    /// Index of the restricted shock (row of `Ω`).
    pub shock: usize,
    /// One sign per responding variable.
    pub signs: Vec<Sign>,
    /// Horizons at which the signs must hold; impact only by default.
    pub horizons: Vec<usize>,
}

impl SignRestriction {
    pub fn new(shock: usize, signs: Vec<Sign>) -> Result<Self> {
        if signs.iter().all(|s| *s == Sign::Free) {
            return Err(Error::arg("sign restriction constrains no response"));
        }
        if shock >= signs.len() {
            return Err(Error::arg(format!(
                "shock index {shock} out of range for {} variables",
                signs.len()
            )));
        }
        Ok(Self {
            shock,
            signs,
            horizons: vec![0],
        })
    }

    /// No sign constraint: every rotation is admissible.
    pub fn rotation_only(k: usize, shock: usize) -> Self {
        Self {
            shock,
            signs: vec![Sign::Free; k],
            horizons: vec![0],
        }
    }

    pub fn with_horizons(mut self, horizons: Vec<usize>) -> Self {
        self.horizons = horizons;
        self
    }

    /// Parse `"+,+,-,free"`-style lists.
    pub fn parse(shock: usize, pattern: &str) -> Result<Self> {
        let signs = pattern
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<Sign>>>()?;
        Self::new(shock, signs)
    }

    fn admits(&self, responses: &[DMatrix<f64>]) -> bool {
        self.horizons.iter().all(|&h| {
            self.signs.iter().enumerate().all(|(i, s)| {
                let v = responses[h][(i, self.shock)];
                match s {
                    Sign::Positive => v > 0.0,
                    Sign::Negative => v < 0.0,
                    Sign::Free => true,
                }
            })
        })
    }
}

/// Haar-distributed orthonormal matrix: Q from the QR decomposition of a
/// standard normal matrix, with columns flipped so that R has a positive
/// diagonal.
pub fn random_rotation(rng: &mut SamplerRng, k: usize) -> DMatrix<f64> {
    let m = std_normal_matrix(rng, k, k);
    let qr = m.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Sign-identified responses with 16th/84th percentile bands.
///
/// Each draw gets up to `max_tries` candidate rotations from its own random
/// stream; draws without an admissible candidate are dropped and counted.
pub fn sign_restricted_irf(
    draws: &PosteriorDraws,
    restriction: &SignRestriction,
    horizons: usize,
    max_tries: usize,
    seed: u64,
) -> Result<IrfResult> {
    check_horizons(horizons)?;
    let (k, p) = (draws.k, draws.p);
    if restriction.signs.len() != k || restriction.shock >= k {
        return Err(Error::arg(format!(
            "sign restriction covers {} variables with shock {}, model has {k}",
            restriction.signs.len(),
            restriction.shock
        )));
    }
    if let Some(h) = restriction.horizons.iter().find(|h| **h >= horizons) {
        return Err(Error::arg(format!(
            "restricted horizon {h} is beyond the {horizons} traced periods"
        )));
    }
    if max_tries == 0 {
        return Err(Error::arg("max_tries must be at least 1"));
    }
    let per: Vec<(usize, Option<(DMatrix<f64>, Vec<DMatrix<f64>>)>)> = (0..draws.len())
        .into_par_iter()
        .map(|d| {
            let Some(chol) = draws.sigma[d].clone().cholesky() else {
                return (0, None);
            };
            let omega0 = chol.l().transpose();
            let lags = lag_matrices(&draws.phi[d], k, p, draws.intercept);
            let mut rng = stream_rng(seed, d as u64);
            for t in 1..=max_tries {
                let q = random_rotation(&mut rng, k);
                let impact = (&q * &omega0).transpose();
                let resp = trace_responses(&lags, &impact, horizons);
                if restriction.admits(&resp) {
                    return (t, Some((impact, resp)));
                }
            }
            (max_tries, None)
        })
        .collect();
    let tries: usize = per.iter().map(|(t, _)| t).sum();
    let n_draws = per.len();
    let (impact, responses): (Vec<_>, Vec<_>) = per.into_iter().filter_map(|(_, r)| r).unzip();
    let accepted = responses.len();
    if accepted == 0 {
        return Err(Error::NoAcceptedDraws {
            draws: n_draws,
            tries,
            rate: 0.0,
        });
    }
    let band = (0.16, 0.84);
    let [median, lower, upper] = summarize(&responses, k, horizons, band);
    Ok(IrfResult {
        names: draws.names.clone(),
        responses,
        impact,
        median,
        lower,
        upper,
        band,
        n_skipped: n_draws - accepted,
        tries,
        accepted,
    })
}

/// Hyperparameters of the dummy-observation prior.
#[derive(Debug, Clone, PartialEq)]
pub struct DummyHyper {
    /// Overall tightness.
    pub f: f64,
    /// Intercept dummy entry.
    pub c: f64,
    /// Sum-of-coefficients weight; larger values shrink less.
    pub theta: f64,
    /// Prior mean of each own first lag; 1 for all variables when `None`.
    pub m: Option<DVector<f64>>,
    /// Lag weights in the sum-of-coefficients block; `1, 2, ..., p` when `None`.
    pub sum_weights: Option<Vec<f64>>,
}

impl Default for DummyHyper {
    fn default() -> Self {
        Self {
            f: 0.95,
            c: 0.95,
            theta: 12.0 * 0.95,
            m: None,
            sum_weights: None,
        }
    }
}

/// Dummy observations for a VAR(p) with regressors `[y_{t-1}', ..., y_{t-p}', 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DummyObs {
    pub p: usize,
    pub hyper: DummyHyper,
    pub m: DVector<f64>,
    pub mu: DVector<f64>,
    pub sigma: DVector<f64>,
    /// Coefficient, covariance and intercept blocks: `(pn + n + 1) x n`.
    pub y_d1: DMatrix<f64>,
    /// `(pn + n + 1) x (pn + 1)`.
    pub x_d1: DMatrix<f64>,
    /// Sum-of-coefficients block: `n x n`.
    pub y_d2: DMatrix<f64>,
    pub x_d2: DMatrix<f64>,
}

impl DummyObs {
    /// Build the blocks from per-variable residual sds `sigma` and means `mu`.
    pub fn from_stats(
        sigma: &DVector<f64>,
        mu: &DVector<f64>,
        p: usize,
        hyper: &DummyHyper,
    ) -> Result<Self> {
        let n = sigma.len();
        if mu.len() != n || n == 0 || p == 0 {
            return Err(Error::arg(
                "dummy observations need matching, non-empty sigma and mu and p >= 1",
            ));
        }
        if let Some(i) = sigma.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::arg(format!(
                "residual sd of variable {} is {}; must be positive",
                i + 1,
                sigma[i]
            )));
        }
        if !(hyper.f > 0.0 && hyper.theta > 0.0) {
            return Err(Error::arg(
                "dummy hyperparameters f and theta must be positive",
            ));
        }
        let m = hyper
            .m
            .clone()
            .unwrap_or_else(|| DVector::from_element(n, 1.0));
        let weights = hyper
            .sum_weights
            .clone()
            .unwrap_or_else(|| (1..=p).map(|l| l as f64).collect());
        if m.len() != n || weights.len() != p {
            return Err(Error::arg(
                "prior lag means or sum weights have the wrong length",
            ));
        }
        let np = n * p;
        let rows1 = np + n + 1;
        let mut y_d1 = DMatrix::zeros(rows1, n);
        let mut x_d1 = DMatrix::zeros(rows1, np + 1);
        for i in 0..n {
            y_d1[(i, i)] = m[i] * sigma[i] / hyper.f;
            for l in 0..p {
                // D = diag(1, ..., p) ⊗ diag(σ).
                x_d1[(l * n + i, l * n + i)] = (l + 1) as f64 * sigma[i] / hyper.f;
            }
            y_d1[(np + i, i)] = sigma[i];
        }
        x_d1[(rows1 - 1, np)] = hyper.c;
        let mut y_d2 = DMatrix::zeros(n, n);
        let mut x_d2 = DMatrix::zeros(n, np + 1);
        for i in 0..n {
            let v = m[i] * mu[i] / hyper.theta;
            y_d2[(i, i)] = v;
            for (l, w) in weights.iter().enumerate() {
                x_d2[(i, l * n + i)] = w * v;
            }
        }
        Ok(Self {
            p,
            hyper: hyper.clone(),
            m,
            mu: mu.clone(),
            sigma: sigma.clone(),
            y_d1,
            x_d1,
            y_d2,
            x_d2,
        })
    }

    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    /// `[Y_d1; Y_d2]`.
    pub fn y_d(&self) -> DMatrix<f64> {
        stack(&self.y_d1, &self.y_d2)
    }

    pub fn x_d(&self) -> DMatrix<f64> {
        stack(&self.x_d1, &self.x_d2)
    }
}

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

/// Dummy observations from the data: `σ_i` from AR(1) fits, `μ_i` sample means.
pub fn build_dummy_obs(data: &FactorSeries, p: usize, hyper: &DummyHyper) -> Result<DummyObs> {
    let sigma = crate::bvar::fit_ar1_residual_scales(data)?.map(f64::sqrt);
    let mu = crate::linalg::column_means(&data.values);
    DummyObs::from_stats(&sigma, &mu, p, hyper)
}

/// Regressors `[y_{t-1}', ..., y_{t-p}', 1]` and responses for `t = p..T`.
pub fn dummy_design(values: &DMatrix<f64>, p: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (y, x) = crate::var_engine::lagged_design(values, p, false, p);
    let mut xa = DMatrix::from_element(x.nrows(), x.ncols() + 1, 1.0);
    xa.columns_mut(0, x.ncols()).copy_from(&x);
    (y, xa)
}

/// Posterior of the augmented regression `Y_a = X_a Θ + E_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPosterior {
    /// `Θ_a` in the `[A_1, ..., A_p, α]'` row order.
    pub theta: DMatrix<f64>,
    pub xtx_inv: DMatrix<f64>,
    pub scale: DMatrix<f64>,
    pub dof: f64,
}

pub fn augmented_posterior(data: &FactorSeries, dummies: &DummyObs) -> Result<AugmentedPosterior> {
    let n = data.k();
    if dummies.n() != n {
        return Err(Error::arg(format!(
            "dummies built for {} variables, data has {n}",
            dummies.n()
        )));
    }
    let (y, x) = dummy_design(&data.values, dummies.p);
    let ya = stack(&y, &dummies.y_d());
    let xa = stack(&x, &dummies.x_d());
    let theta = LeastSquares::new(&xa, "augmented dummy-observation design")?.solve(&ya);
    let resid = &ya - &xa * &theta;
    let scale = symmetrize(&(resid.transpose() * &resid));
    let xtx_inv = spd_inverse(&(xa.transpose() * &xa), "X_a'X_a")?;
    Ok(AugmentedPosterior {
        theta,
        xtx_inv,
        scale,
        dof: xa.nrows() as f64,
    })
}

/// Move the trailing intercept row of `Θ` to the front.
fn intercept_first(theta: &DMatrix<f64>) -> DMatrix<f64> {
    let r = theta.nrows();
    let mut out = DMatrix::zeros(r, theta.ncols());
    out.row_mut(0).copy_from(&theta.row(r - 1));
    out.rows_mut(1, r - 1).copy_from(&theta.rows(0, r - 1));
    out
}

/// Sample `Σ_e ~ IW(T_d + T, Σ_a)` and `vec Θ | Σ_e ~ N(vec Θ_a, Σ_e ⊗ (X_a'X_a)^{-1})`,
/// keeping the last `n_total - n_burn` draws. Returned coefficients use the
/// crate's intercept-first layout.
pub fn gibbs_dummy_bvar(
    data: &FactorSeries,
    dummies: &DummyObs,
    n_total: usize,
    n_burn: usize,
    seed: u64,
) -> Result<PosteriorDraws> {
    if n_total <= n_burn {
        return Err(Error::arg(format!(
            "chain length {n_total} must exceed burn-in {n_burn}"
        )));
    }
    let post = augmented_posterior(data, dummies)?;
    let iw = InverseWishart::new(post.dof, &post.scale)?;
    let row_chol = crate::linalg::cholesky_lower(&post.xtx_inv, "(X_a'X_a)^{-1}")?;
    let mut rng = chain_rng(seed);
    let (n, p) = (data.k(), dummies.p);
    let mut out = PosteriorDraws {
        prior: "dummy".into(),
        k: n,
        p,
        intercept: true,
        names: data.names.clone(),
        phi: Vec::with_capacity(n_total - n_burn),
        sigma: Vec::with_capacity(n_total - n_burn),
        n_total,
        n_burn,
        seed,
        gamma: Vec::new(),
        delta: Vec::new(),
        analytic_mean: Some(intercept_first(&post.theta)),
    };
    for it in 0..n_total {
        let sigma = iw.sample(&mut rng);
        let col_chol =
            crate::linalg::cholesky_lower(&sigma, &format!("inverse-Wishart draw {it}"))?;
        let theta = matrix_normal(&mut rng, &post.theta, &row_chol, &col_chol);
        if it >= n_burn {
            out.phi.push(intercept_first(&theta));
            out.sigma.push(sigma);
        }
    }
    Ok(out)
}
