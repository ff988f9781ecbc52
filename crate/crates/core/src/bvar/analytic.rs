use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::design::VarDesign;
use super::draws::PosteriorDraws;
use super::{check_scales, minnesota_mean, minnesota_variances, ConjugatePrior, MinnesotaPrior};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, spd_inverse, symmetrize, unvec, LeastSquares};
use crate::sampling::{matrix_normal, mvn_from_precision_chol, stream_rng, InverseWishart};

/// `N(mean, precision^{-1})` over `A = vec(Φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub precision: DMatrix<f64>,
}

fn minnesota_setup(
    design: &VarDesign,
    prior: &MinnesotaPrior,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let scales = match &prior.scales {
        Some(s) => s.clone(),
        None => design.ar1_scales()?,
    };
    check_scales(&scales, design.k)?;
    let v = minnesota_variances(
        design.k,
        design.p,
        design.intercept,
        &scales,
        prior.d1,
        prior.d2,
        prior.d3,
    );
    let m = minnesota_mean(design.k, design.p, design.intercept, prior.rho);
    Ok((scales, v, m))
}

/// Minnesota posterior moments from the wide form.
///
/// With a diagonal `Σ̂` the precision `Σ_mp^{-1} + Σ̂^{-1} ⊗ G'G` is block
/// diagonal, so each equation is solved on its own.
pub fn minnesota_moments(design: &VarDesign, prior: &MinnesotaPrior) -> Result<GaussianMoments> {
    let (scales, v, m) = minnesota_setup(design, prior)?;
    let (k, r) = (design.k, design.r());
    let gtg = design.g.transpose() * &design.g;
    let gtf = design.g.transpose() * &design.f;
    let mut mean = DVector::zeros(k * r);
    let mut precision = DMatrix::zeros(k * r, k * r);
    for i in 0..k {
        let mut block = &gtg / scales[i];
        let mut rhs = gtf.column(i) / scales[i];
        for j in 0..r {
            block[(j, j)] += 1.0 / v[i * r + j];
            rhs[j] += m[i * r + j] / v[i * r + j];
        }
        let chol = block.clone().cholesky().ok_or_else(|| {
            Error::numeric(format!(
                "Minnesota posterior precision of equation {} is not positive definite",
                i + 1
            ))
        })?;
        mean.rows_mut(i * r, r).copy_from(&chol.solve(&rhs));
        precision.view_mut((i * r, i * r), (r, r)).copy_from(&block);
    }
    Ok(GaussianMoments { mean, precision })
}

/// The same moments through the long form `f = Ω A + η`, with dense
/// `Ω'(I_T ⊗ Σ̂^{-1})Ω`. Used to cross-check [`minnesota_moments`].
pub fn minnesota_moments_long(
    design: &VarDesign,
    prior: &MinnesotaPrior,
) -> Result<GaussianMoments> {
    let (scales, v, m) = minnesota_setup(design, prior)?;
    let k = design.k;
    let (f, omega) = design.long_form();
    let sig_inv = DMatrix::from_diagonal(&scales.map(|s| 1.0 / s));
    let n = omega.ncols();
    let mut precision = DMatrix::from_diagonal(&v.map(|x| 1.0 / x));
    let mut rhs = m.component_div(&v);
    for t in 0..design.t() {
        let om = omega.rows(t * k, k);
        let w = om.transpose() * &sig_inv;
        precision += &w * om;
        rhs += w * f.rows(t * k, k);
    }
    let precision = symmetrize(&precision);
    let mean = precision
        .clone()
        .cholesky()
        .ok_or_else(|| Error::numeric("Minnesota posterior precision is not positive definite"))?
        .solve(&rhs);
    debug_assert_eq!(mean.len(), n);
    Ok(GaussianMoments { mean, precision })
}

/// Closed-form Minnesota posterior with `n_draws` draws of `A`; `Σ` stays at
/// the fixed `diag(σ̂²)`.
pub fn minnesota_posterior(
    design: &VarDesign,
    prior: &MinnesotaPrior,
    n_draws: usize,
    seed: u64,
) -> Result<PosteriorDraws> {
    let mom = minnesota_moments(design, prior)?;
    let scales = match &prior.scales {
        Some(s) => s.clone(),
        None => design.ar1_scales()?,
    };
    let chol = cholesky_lower(&mom.precision, "Minnesota posterior precision")?;
    let (k, r) = (design.k, design.r());
    let sigma = DMatrix::from_diagonal(&scales);
    let phi: Vec<DMatrix<f64>> = (0..n_draws)
        .into_par_iter()
        .map(|i| {
            unvec(
                &mvn_from_precision_chol(&mut stream_rng(seed, i as u64), &mom.mean, &chol),
                r,
                k,
            )
        })
        .collect();
    let mut out = PosteriorDraws::empty(
        "minnesota",
        k,
        design.p,
        design.intercept,
        &design.names,
        seed,
    );
    out.sigma = vec![sigma; phi.len()];
    out.phi = phi;
    out.n_total = n_draws;
    out.analytic_mean = Some(unvec(&mom.mean, r, k));
    Ok(out)
}

/// Matrix-normal inverse-Wishart posterior `NIW(Φ̂, V_Φ^{-1}, dof, Ŝ_c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateMoments {
    pub phi_hat: DMatrix<f64>,
    /// Posterior precision `V_Φ` of each column of `Φ` (up to `Σ`).
    pub v_phi: DMatrix<f64>,
    pub dof: f64,
    pub s_c: DMatrix<f64>,
}

impl ConjugateMoments {
    /// Posterior mean of `Σ`, `Ŝ_c / (dof - k - 1)`.
    pub fn sigma_mean(&self) -> Option<DMatrix<f64>> {
        let d = self.dof - self.s_c.nrows() as f64 - 1.0;
        (d > 0.0).then(|| &self.s_c / d)
    }
}

/// Natural-conjugate update for `F = G Φ + U` given the prior mean `phi0`,
/// the diagonal prior precision `sigma_phi_inv` of each column and the
/// inverse-Wishart prior `(s_h0, s_c0)`.
pub fn conjugate_update(
    g: &DMatrix<f64>,
    f: &DMatrix<f64>,
    phi0: &DMatrix<f64>,
    sigma_phi_inv: &DVector<f64>,
    s_h0: f64,
    s_c0: &DMatrix<f64>,
) -> Result<ConjugateMoments> {
    let (r, k) = phi0.shape();
    if g.ncols() != r
        || f.ncols() != k
        || g.nrows() != f.nrows()
        || sigma_phi_inv.len() != r
        || s_c0.shape() != (k, k)
    {
        return Err(Error::arg("conjugate update: inconsistent dimensions"));
    }
    let prior_prec = DMatrix::from_diagonal(sigma_phi_inv);
    let v_phi = symmetrize(&(&prior_prec + g.transpose() * g));
    let chol = v_phi.clone().cholesky().ok_or_else(|| {
        Error::numeric("conjugate posterior precision V_Φ is not positive definite")
    })?;
    let phi_hat = chol.solve(&(&prior_prec * phi0 + g.transpose() * f));
    // Ŝ_c = S_c0 − Φ̂'V_ΦΦ̂ + Φ0'Σ_Φ^{-1}Φ0 + F'F, written as a sum of
    // cross-products so that rounding cannot make it indefinite.
    let u = f - g * &phi_hat;
    let dphi = &phi_hat - phi0;
    let s_c = symmetrize(&(s_c0 + u.transpose() * &u + dphi.transpose() * &prior_prec * &dphi));
    if s_c.clone().cholesky().is_none() {
        return Err(Error::numeric(
            "conjugate posterior scale Ŝ_c is not positive definite",
        ));
    }
    Ok(ConjugateMoments {
        phi_hat,
        v_phi,
        dof: s_h0 + f.nrows() as f64,
        s_c,
    })
}

/// Prior precision of one column of `Φ`: `l² σ²_j / d1` for lag `l` of
/// variable `j`, `1 / d2` for the intercept.
pub fn conjugate_prior_precision(
    design: &VarDesign,
    scales: &DVector<f64>,
    d1: f64,
    d2: f64,
) -> DVector<f64> {
    let off = usize::from(design.intercept);
    let mut v = DVector::zeros(design.r());
    if design.intercept {
        v[0] = 1.0 / d2;
    }
    for l in 1..=design.p {
        for j in 0..design.k {
            v[off + (l - 1) * design.k + j] = (l * l) as f64 * scales[j] / d1;
        }
    }
    v
}

pub fn conjugate_moments(design: &VarDesign, prior: &ConjugatePrior) -> Result<ConjugateMoments> {
    let (k, r) = (design.k, design.r());
    let scales = design.ar1_scales()?;
    check_scales(&scales, k)?;
    let phi0 = prior.phi0.clone().unwrap_or_else(|| DMatrix::zeros(r, k));
    let s_h0 = prior.s_h0.unwrap_or((k + k * r) as f64);
    let s_c0 = prior
        .s_c0
        .clone()
        .unwrap_or_else(|| DMatrix::from_diagonal(&scales));
    let prec = conjugate_prior_precision(design, &scales, prior.d1, prior.d2);
    conjugate_update(&design.g, &design.f, &phi0, &prec, s_h0, &s_c0)
}

/// Draw `n_draws` pairs from a matrix-normal inverse-Wishart posterior.
fn niw_draws(
    label: &str,
    design: &VarDesign,
    phi_hat: &DMatrix<f64>,
    row_cov: &DMatrix<f64>,
    dof: f64,
    scale: &DMatrix<f64>,
    n_draws: usize,
    seed: u64,
) -> Result<PosteriorDraws> {
    let iw = InverseWishart::new(dof, scale)?;
    let row_chol = cholesky_lower(row_cov, "posterior coefficient covariance")?;
    let pairs: Vec<Result<(DMatrix<f64>, DMatrix<f64>)>> = (0..n_draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let sigma = iw.sample(&mut rng);
            let col_chol = cholesky_lower(&sigma, &format!("inverse-Wishart draw {i}"))?;
            Ok((
                matrix_normal(&mut rng, phi_hat, &row_chol, &col_chol),
                sigma,
            ))
        })
        .collect();
    let mut out = PosteriorDraws::empty(
        label,
        design.k,
        design.p,
        design.intercept,
        &design.names,
        seed,
    );
    for pair in pairs {
        let (phi, sigma) = pair?;
        out.phi.push(phi);
        out.sigma.push(sigma);
    }
    out.n_total = n_draws;
    out.analytic_mean = Some(phi_hat.clone());
    Ok(out)
}

pub fn conjugate_posterior(
    design: &VarDesign,
    prior: &ConjugatePrior,
    n_draws: usize,
    seed: u64,
) -> Result<PosteriorDraws> {
    let m = conjugate_moments(design, prior)?;
    let row_cov = spd_inverse(&m.v_phi, "V_Φ")?;
    niw_draws(
        "conjugate",
        design,
        &m.phi_hat,
        &row_cov,
        m.dof,
        &m.s_c,
        n_draws,
        seed,
    )
}

/// Posterior under the flat prior `p(Φ, Σ) ∝ |Σ|^{-(k+1)/2}`:
/// `Σ ~ IW(T - r, U'U)` and `vec Φ | Σ ~ N(vec Φ̂, Σ ⊗ (G'G)^{-1})`.
pub fn diffuse_posterior(design: &VarDesign, n_draws: usize, seed: u64) -> Result<PosteriorDraws> {
    let (t, r, k) = (design.t(), design.r(), design.k);
    if t <= r || (t - r) as f64 <= k as f64 - 1.0 {
        return Err(Error::arg(format!(
            "diffuse posterior needs T - r > k - 1; have T = {t}, r = {r}, k = {k}"
        )));
    }
    let ls = LeastSquares::new(&design.g, "diffuse posterior regressors")?;
    let phi_hat = ls.solve(&design.f);
    let u = &design.f - &design.g * &phi_hat;
    let s = symmetrize(&(u.transpose() * &u));
    let gtg_inv = spd_inverse(&(design.g.transpose() * &design.g), "G'G")?;
    if s.clone().cholesky().is_none() {
        return Err(Error::numeric("residual cross-product U'U is singular"));
    }
    niw_draws(
        "diffuse",
        design,
        &phi_hat,
        &gtg_inv,
        (t - r) as f64,
        &s,
        n_draws,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvar::build_design;
    use crate::linalg::{kron, max_abs_diff};
    use crate::ns_factors::FactorSeries;
    use crate::sampling::chain_rng;
    use crate::simulate::simulate_var_series;
    use crate::var_engine::{fit_var, VarModel};
    use proptest::prelude::*;

    fn toy_model() -> VarModel {
        let phi = DMatrix::from_row_slice(3, 2, &[0.3, -0.1, 0.6, 0.1, 0.2, 0.4]);
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        VarModel::from_phi(phi, sigma, 1, true).unwrap()
    }

    fn toy_design(t: usize, seed: u64) -> VarDesign {
        build_design(&simulate_var_series(&toy_model(), t, 50, seed), 1, true).unwrap()
    }

    #[test]
    fn wide_and_long_minnesota_agree() {
        let d = toy_design(60, 1);
        let prior = MinnesotaPrior::default();
        let w = minnesota_moments(&d, &prior).unwrap();
        let l = minnesota_moments_long(&d, &prior).unwrap();
        assert!((&w.mean - &l.mean).amax() < 1e-10);
        assert!(max_abs_diff(&w.precision, &l.precision) < 1e-10 * w.precision.amax());
    }

    #[test]
    fn minnesota_against_dense_ridge_formula() {
        // Independent dense evaluation with explicit I_T ⊗ Σ̂^{-1}.
        let d = toy_design(25, 2);
        let scales = d.ar1_scales().unwrap();
        let prior = MinnesotaPrior {
            d1: 0.05,
            d2: 0.02,
            d3: 10.0,
            ..Default::default()
        };
        let (f, omega) = d.long_form();
        let w = kron(
            &DMatrix::identity(d.t(), d.t()),
            &DMatrix::from_diagonal(&scales.map(|s| 1.0 / s)),
        );
        let v = minnesota_variances(2, 1, true, &scales, 0.05, 0.02, 10.0);
        let m = minnesota_mean(2, 1, true, 0.95);
        let prec = DMatrix::from_diagonal(&v.map(|x| 1.0 / x)) + omega.transpose() * &w * &omega;
        let rhs = m.component_div(&v) + omega.transpose() * &w * f;
        let expect = prec.clone().lu().solve(&rhs).unwrap();
        let got = minnesota_moments(&d, &prior).unwrap();
        assert!((got.mean - expect).amax() < 1e-10);
    }

    #[test]
    fn minnesota_limits() {
        let d = toy_design(80, 3);
        let tight = MinnesotaPrior {
            d1: 1e-14,
            d2: 1e-14,
            d3: 1e-14,
            ..Default::default()
        };
        let m = minnesota_moments(&d, &tight).unwrap().mean;
        assert!((m - minnesota_mean(2, 1, true, 0.95)).amax() < 1e-6);

        let loose = MinnesotaPrior {
            d1: 1e12,
            d2: 1e12,
            d3: 1e12,
            ..Default::default()
        };
        let m = minnesota_moments(&d, &loose).unwrap().mean;
        // Diagonal Σ̂ makes GLS equal to equation-by-equation OLS.
        let ols = fit_var(
            &FactorSeries::from_values(&["a", "b"], d.data.clone()).unwrap(),
            1,
            true,
        )
        .unwrap();
        assert!((m - DVector::from_column_slice(ols.phi.as_slice())).amax() < 1e-8);
    }

    #[test]
    fn minnesota_draws_center_on_mean() {
        let d = toy_design(100, 4);
        let post = minnesota_posterior(&d, &MinnesotaPrior::default(), 4000, 7).unwrap();
        let exact = post.analytic_mean.clone().unwrap();
        let sd = post.phi_sd();
        let mc = post.phi_mean();
        for i in 0..exact.len() {
            assert!((mc[i] - exact[i]).abs() < 4.0 * sd[i] / 4000f64.sqrt());
        }
        let again = minnesota_posterior(&d, &MinnesotaPrior::default(), 4000, 7).unwrap();
        assert_eq!(post, again);
    }

    #[test]
    fn conjugate_diffuse_limit_is_ols() {
        let d = toy_design(80, 5);
        let prior = ConjugatePrior {
            d1: 1e14,
            d2: 1e14,
            s_h0: Some(2.0),
            ..Default::default()
        };
        let m = conjugate_moments(&d, &prior).unwrap();
        let ols = LeastSquares::new(&d.g, "g").unwrap().solve(&d.f);
        assert!(max_abs_diff(&m.phi_hat, &ols) < 1e-8);
    }

    #[test]
    fn conjugate_without_data_returns_prior() {
        let d0 = toy_design(30, 6);
        let d = VarDesign {
            f: DMatrix::zeros(0, 2),
            g: DMatrix::zeros(0, 3),
            ..d0
        };
        let phi0 = DMatrix::from_row_slice(3, 2, &[0.1, 0.2, 0.9, 0.0, 0.0, 0.9]);
        let s_c0 = DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0]);
        let prior = ConjugatePrior {
            phi0: Some(phi0.clone()),
            s_h0: Some(9.0),
            s_c0: Some(s_c0.clone()),
            ..Default::default()
        };
        let m = conjugate_moments(&d, &prior).unwrap();
        let prec = conjugate_prior_precision(&d, &d.ar1_scales().unwrap(), prior.d1, prior.d2);
        assert!(max_abs_diff(&m.phi_hat, &phi0) < 1e-12);
        assert!(max_abs_diff(&m.s_c, &s_c0) < 1e-12);
        assert!(max_abs_diff(&m.v_phi, &DMatrix::from_diagonal(&prec)) == 0.0);
        assert_eq!(m.dof, 9.0);
    }

    #[test]
    fn conjugate_monte_carlo_matches_analytic() {
        let d = toy_design(120, 8);
        let post = conjugate_posterior(&d, &ConjugatePrior::default(), 50_000, 11).unwrap();
        let exact = post.analytic_mean.clone().unwrap();
        let (mc, sd) = (post.phi_mean(), post.phi_sd());
        for i in 0..exact.len() {
            let se = sd[i] / (post.len() as f64).sqrt();
            assert!(
                (mc[i] - exact[i]).abs() < 3.0 * se,
                "coef {i}: {} vs {}",
                mc[i],
                exact[i]
            );
        }
        let m = conjugate_moments(&d, &ConjugatePrior::default()).unwrap();
        let s_mean = m.sigma_mean().unwrap();
        assert!(max_abs_diff(&post.sigma_mean(), &s_mean) < 0.02 * s_mean.amax());
    }

    #[test]
    fn diffuse_posterior_centers_on_ols() {
        let d = toy_design(200, 9);
        let post = diffuse_posterior(&d, 20_000, 3).unwrap();
        let ols = LeastSquares::new(&d.g, "g").unwrap().solve(&d.f);
        assert_eq!(post.analytic_mean.as_ref().unwrap(), &ols);
        let (mc, sd) = (post.phi_mean(), post.phi_sd());
        for i in 0..ols.len() {
            assert!((mc[i] - ols[i]).abs() < 4.0 * sd[i] / (post.len() as f64).sqrt());
        }
        assert!(post.sigma.iter().all(|s| s.clone().cholesky().is_some()));
    }

    #[test]
    fn diffuse_needs_enough_observations() {
        // k = 2, p = 1 with intercept: r = 3, so T = 4 leaves T - r = 1 = k - 1.
        let v = crate::sampling::std_normal_matrix(&mut chain_rng(1), 5, 2);
        let d = build_design(&FactorSeries::from_values(&["a", "b"], v).unwrap(), 1, true).unwrap();
        assert_eq!(d.t(), 4);
        assert!(matches!(
            diffuse_posterior(&d, 10, 1),
            Err(Error::Argument(_))
        ));
    }

    fn small_matrix(r: usize, c: usize) -> impl Strategy<Value = DMatrix<f64>> {
        prop::collection::vec(-2.0..2.0f64, r * c).prop_map(move |v| DMatrix::from_vec(r, c, v))
    }

    proptest! {
        #[test]
        fn quadratic_completion(
            phi in small_matrix(3, 2),
            phi0 in small_matrix(3, 2),
            f in small_matrix(6, 2),
            g in small_matrix(6, 3),
            prec in prop::collection::vec(0.1..5.0f64, 3),
        ) {
            let prec = DVector::from_vec(prec);
            let m = conjugate_update(&g, &f, &phi0, &prec, 5.0, &DMatrix::identity(2, 2));
            prop_assume!(m.is_ok());
            let m = m.unwrap();
            let sp = DMatrix::from_diagonal(&prec);
            let lhs = (&phi - &phi0).transpose() * &sp * (&phi - &phi0) + (&f - &g * &phi).transpose() * (&f - &g * &phi);
            let rhs = (&phi - &m.phi_hat).transpose() * &m.v_phi * (&phi - &m.phi_hat)
                - m.phi_hat.transpose() * &m.v_phi * &m.phi_hat
                + phi0.transpose() * &sp * &phi0
                + f.transpose() * &f;
            prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-10 * lhs.amax().max(1.0));
            // Textbook form of the posterior scale.
            let textbook = DMatrix::identity(2, 2) - m.phi_hat.transpose() * &m.v_phi * &m.phi_hat
                + phi0.transpose() * &sp * &phi0 + f.transpose() * &f;
            prop_assert!(max_abs_diff(&textbook, &m.s_c) < 1e-9 * m.s_c.amax().max(1.0));
        }
    }
}
