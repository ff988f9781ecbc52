use nalgebra::{DMatrix, DVector};

use super::design::VarDesign;
use super::draws::PosteriorDraws;
use super::{check_scales, minnesota_variances, IndepNiwPrior, SsvsPrior};
use crate::error::{Error, Result};
use crate::linalg::{kron, spd_inverse, symmetrize, unvec, vec_cols, LeastSquares};
use crate::sampling::{
    bernoulli, chain_rng, ensure_pd, gamma_rate, mvn_from_precision_chol, normal_log_pdf,
    InverseWishart, SamplerRng,
};

fn check_chain(n_total: usize, n_burn: usize) -> Result<()> {
    if n_total <= n_burn {
        return Err(Error::arg(format!(
            "chain length {n_total} must exceed burn-in {n_burn}"
        )));
    }
    Ok(())
}

/// Sufficient statistics reused by every iteration.
struct Moments {
    gtg: DMatrix<f64>,
    gtf: DMatrix<f64>,
    ftf: DMatrix<f64>,
}

impl Moments {
    fn new(d: &VarDesign) -> Self {
        let gt = d.g.transpose();
        Self {
            gtg: &gt * &d.g,
            gtf: &gt * &d.f,
            ftf: d.f.transpose() * &d.f,
        }
    }

    /// `(F - GΦ)'(F - GΦ)`.
    fn sse(&self, phi: &DMatrix<f64>) -> DMatrix<f64> {
        let cross = phi.transpose() * &self.gtf;
        symmetrize(&(&self.ftf - &cross - cross.transpose() + phi.transpose() * &self.gtg * phi))
    }
}

/// Draw `A | Σ` with diagonal prior variances `v` and prior mean `a0`:
/// precision `diag(1/v) + Σ^{-1} ⊗ G'G`, mean solving
/// `precision · Â = a0 / v + vec(G'F Σ^{-1})`.
fn draw_coefficients(
    rng: &mut SamplerRng,
    m: &Moments,
    sigma_inv: &DMatrix<f64>,
    v: &DVector<f64>,
    a0: &DVector<f64>,
    iter: usize,
) -> Result<DVector<f64>> {
    let mut prec = kron(sigma_inv, &m.gtg);
    for i in 0..v.len() {
        prec[(i, i)] += 1.0 / v[i];
    }
    let rhs = a0.component_div(v) + vec_cols(&(&m.gtf * sigma_inv));
    let chol = prec.cholesky().ok_or_else(|| {
        Error::numeric(format!(
            "conditional precision of the coefficients is not positive definite at draw {iter}"
        ))
    })?;
    let mean = chol.solve(&rhs);
    Ok(mvn_from_precision_chol(rng, &mean, &chol.l()))
}

fn sigma_inverse(sigma: &DMatrix<f64>, iter: usize) -> Result<DMatrix<f64>> {
    spd_inverse(sigma, &format!("error covariance at draw {iter}"))
}

/// Gibbs sampler for the independent normal / inverse-Wishart prior.
///
/// `V_A` has the Minnesota structure of [`minnesota_variances`]; the chain
/// starts from `A0` and alternates `Σ | A` and `A | Σ`.
pub fn gibbs_indep_niw(
    design: &VarDesign,
    prior: &IndepNiwPrior,
    n_total: usize,
    n_burn: usize,
    seed: u64,
) -> Result<PosteriorDraws> {
    check_chain(n_total, n_burn)?;
    let (k, r, t) = (design.k, design.r(), design.t());
    let scales = design.ar1_scales()?;
    check_scales(&scales, k)?;
    let v = minnesota_variances(
        k,
        design.p,
        design.intercept,
        &scales,
        prior.d1,
        prior.d2,
        prior.d3,
    );
    let a0 = prior.a0.clone().unwrap_or_else(|| DVector::zeros(k * r));
    if a0.len() != k * r {
        return Err(Error::arg(format!(
            "prior mean has {} entries, expected {}",
            a0.len(),
            k * r
        )));
    }
    let s_h0 = prior.s_h0.unwrap_or((k + k * r) as f64);
    let s_c0 = prior
        .s_c0
        .clone()
        .unwrap_or_else(|| DMatrix::from_diagonal(&scales));
    let m = Moments::new(design);
    let mut rng = chain_rng(seed);
    let mut out = PosteriorDraws::empty(
        "indep_niw",
        k,
        design.p,
        design.intercept,
        &design.names,
        seed,
    );
    out.phi.reserve(n_total - n_burn);
    let mut phi = unvec(&a0, r, k);
    for it in 0..n_total {
        let scale = &s_c0 + m.sse(&phi);
        let sigma = InverseWishart::new(s_h0 + t as f64, &scale)
            .map_err(|e| Error::numeric(format!("Σ conditional at draw {it}: {e}")))?
            .sample(&mut rng);
        ensure_pd(&sigma, &format!("inverse-Wishart draw {it}"))?;
        let a = draw_coefficients(&mut rng, &m, &sigma_inverse(&sigma, it)?, &v, &a0, it)?;
        phi = unvec(&a, r, k);
        if it >= n_burn {
            out.phi.push(phi.clone());
            out.sigma.push(sigma);
        }
    }
    out.n_total = n_total;
    out.n_burn = n_burn;
    Ok(out)
}

/// Probability of the slab given a draw `x` (log-space Bernoulli conditional).
fn slab_probability(x: f64, var0: f64, var1: f64, p: f64) -> f64 {
    let l1 = p.ln() + normal_log_pdf(x, var1);
    let l0 = (1.0 - p).ln() + normal_log_pdf(x, var0);
    1.0 / (1.0 + (l0 - l1).exp())
}

/// Full-SSVS draw of the upper-triangular factor `Ψ` with `Σ^{-1} = ΨΨ'`,
/// column by column, followed by the indicators of its off-diagonal part.
fn draw_precision_factor(
    rng: &mut SamplerRng,
    s: &DMatrix<f64>,
    t: usize,
    delta: &mut [bool],
    prior: &SsvsPrior,
    it: usize,
) -> Result<DMatrix<f64>> {
    let k = s.nrows();
    let shape = prior.gamma_shape + t as f64 / 2.0;
    let mut psi = DMatrix::zeros(k, k);
    let mut pos = 0;
    for j in 0..k {
        if j == 0 {
            psi[(0, 0)] = gamma_rate(rng, shape, prior.gamma_rate + 0.5 * s[(0, 0)]).sqrt();
            continue;
        }
        let sj = s.view((0, j), (j, 1)).into_owned();
        let mut prec = s.view((0, 0), (j, j)).into_owned();
        for i in 0..j {
            let tau = if delta[pos + i] {
                prior.tau1
            } else {
                prior.tau0
            };
            prec[(i, i)] += 1.0 / (tau * tau);
        }
        let chol = prec.cholesky().ok_or_else(|| {
            Error::numeric(format!(
                "precision-factor conditional of column {} is singular at draw {it}",
                j + 1
            ))
        })?;
        let delta_s = chol.solve(&sj);
        let quad = s[(j, j)] - sj.dot(&delta_s);
        let psi_jj = gamma_rate(rng, shape, prior.gamma_rate + 0.5 * quad.max(0.0)).sqrt();
        let mean = DVector::from_column_slice((-&delta_s * psi_jj).as_slice());
        let eta = mvn_from_precision_chol(rng, &mean, &chol.l());
        psi[(j, j)] = psi_jj;
        for i in 0..j {
            psi[(i, j)] = eta[i];
            let v0 = prior.tau0 * prior.tau0;
            let v1 = prior.tau1 * prior.tau1;
            delta[pos + i] = bernoulli(rng, slab_probability(eta[i], v0, v1, prior.q_incl));
        }
        pos += j;
    }
    Ok(psi)
}

/// Stochastic search variable selection. The design must exclude intercepts.
///
/// Spike and slab scales are `c0` and `c1` times the standard errors of the
/// unrestricted least-squares VAR. With `prior.full` the error covariance is
/// parameterized as `Σ^{-1} = ΨΨ'` (upper-triangular `Ψ`) and the
/// off-diagonal elements of `Ψ` are selected as well.
pub fn gibbs_ssvs(
    design: &VarDesign,
    prior: &SsvsPrior,
    n_total: usize,
    n_burn: usize,
    seed: u64,
) -> Result<PosteriorDraws> {
    check_chain(n_total, n_burn)?;
    if design.intercept {
        return Err(Error::arg("SSVS expects a design without intercepts"));
    }
    let (k, r, t) = (design.k, design.r(), design.t());
    let n = k * r;
    let ols = LeastSquares::new(&design.g, "unrestricted VAR for SSVS scales")?.solve(&design.f);
    let resid = &design.f - &design.g * &ols;
    let sigma_ml = symmetrize(&(resid.transpose() * &resid / t as f64));
    let gtg_inv = spd_inverse(&(design.g.transpose() * &design.g), "G'G")?;
    let var_a = kron(&sigma_ml, &gtg_inv).diagonal();
    if var_a.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::numeric(
            "unrestricted VAR has a zero coefficient variance",
        ));
    }
    let var0 = var_a.map(|v| prior.c0 * prior.c0 * v);
    let var1 = var_a.map(|v| prior.c1 * prior.c1 * v);
    let s_h0 = prior.s_h0.unwrap_or((k + n) as f64);
    let s_c0 = prior
        .s_c0
        .clone()
        .unwrap_or_else(|| DMatrix::identity(k, k));
    let zeros = DVector::zeros(n);
    let m = Moments::new(design);

    let mut rng = chain_rng(seed);
    let label = if prior.full { "ssvs_full" } else { "ssvs" };
    let mut out = PosteriorDraws::empty(label, k, design.p, false, &design.names, seed);
    let mut gamma = vec![true; n];
    let mut delta = vec![true; k * (k - 1) / 2];
    let mut sigma = sigma_ml.clone();
    ensure_pd(&sigma, "unrestricted VAR error covariance")?;
    for it in 0..n_total {
        let v = DVector::from_iterator(n, (0..n).map(|i| if gamma[i] { var1[i] } else { var0[i] }));
        let a = draw_coefficients(&mut rng, &m, &sigma_inverse(&sigma, it)?, &v, &zeros, it)?;
        for i in 0..n {
            gamma[i] = bernoulli(
                &mut rng,
                slab_probability(a[i], var0[i], var1[i], prior.p_incl),
            );
        }
        let phi = unvec(&a, r, k);
        let sse = m.sse(&phi);
        sigma = if prior.full {
            let psi = draw_precision_factor(&mut rng, &sse, t, &mut delta, prior, it)?;
            spd_inverse(&(&psi * psi.transpose()), &format!("precision draw {it}"))?
        } else {
            InverseWishart::new(s_h0 + t as f64, &(&s_c0 + sse))
                .map_err(|e| Error::numeric(format!("Σ conditional at draw {it}: {e}")))?
                .sample(&mut rng)
        };
        ensure_pd(&sigma, &format!("error covariance draw {it}"))?;
        if it >= n_burn {
            out.phi.push(phi);
            out.sigma.push(sigma.clone());
            out.gamma.push(gamma.clone());
            if prior.full {
                out.delta.push(delta.clone());
            }
        }
    }
    out.n_total = n_total;
    out.n_burn = n_burn;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvar::{build_design, diffuse_posterior};
    use crate::simulate::simulate_var_series;
    use crate::var_engine::VarModel;

    fn model(intercept: bool) -> VarModel {
        let mut rows = vec![];
        if intercept {
            rows.extend([0.2, -0.1]);
        }
        rows.extend([0.5, 0.3, 0.0, 0.4]);
        let phi = DMatrix::from_row_slice(usize::from(intercept) + 2, 2, &rows);
        VarModel::from_phi(
            phi,
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]),
            1,
            intercept,
        )
        .unwrap()
    }

    fn design(intercept: bool, t: usize, seed: u64) -> VarDesign {
        build_design(
            &simulate_var_series(&model(intercept), t, 100, seed),
            1,
            intercept,
        )
        .unwrap()
    }

    #[test]
    fn dogmatic_prior_pins_coefficients() {
        let d = design(true, 100, 1);
        let a0 = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let prior = IndepNiwPrior {
            a0: Some(a0.clone()),
            d1: 1e-12,
            d2: 1e-12,
            d3: 1e-12,
            ..Default::default()
        };
        let post = gibbs_indep_niw(&d, &prior, 600, 100, 3).unwrap();
        assert_eq!(post.len(), 500);
        let sd = post.phi_sd();
        assert!(sd.amax() < 1e-3);
        assert!((post.phi_mean() - unvec(&a0, 3, 2)).amax() < 1e-3);
    }

    #[test]
    fn chain_is_deterministic() {
        let d = design(true, 80, 2);
        let a = gibbs_indep_niw(&d, &IndepNiwPrior::default(), 300, 50, 17).unwrap();
        let b = gibbs_indep_niw(&d, &IndepNiwPrior::default(), 300, 50, 17).unwrap();
        assert_eq!(a, b);
        let c = gibbs_indep_niw(&d, &IndepNiwPrior::default(), 300, 50, 18).unwrap();
        assert_ne!(a.phi, c.phi);
        let d0 = design(false, 80, 2);
        let s1 = gibbs_ssvs(
            &d0,
            &SsvsPrior {
                full: true,
                ..Default::default()
            },
            200,
            50,
            5,
        )
        .unwrap();
        let s2 = gibbs_ssvs(
            &d0,
            &SsvsPrior {
                full: true,
                ..Default::default()
            },
            200,
            50,
            5,
        )
        .unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn diffuse_indep_niw_matches_diffuse_posterior() {
        let d = design(true, 300, 4);
        let prior = IndepNiwPrior {
            d1: 1e6,
            d2: 1e6,
            d3: 1e6,
            s_h0: Some(2.0),
            s_c0: Some(DMatrix::identity(2, 2) * 1e-6),
            ..Default::default()
        };
        let g = gibbs_indep_niw(&d, &prior, 11_000, 1_000, 9).unwrap();
        let exact = diffuse_posterior(&d, 10, 1).unwrap().analytic_mean.unwrap();
        let (mean, sd) = (g.phi_mean(), g.phi_sd());
        // Lag-1 autocorrelation of this chain is small, but allow for it.
        let mc_sd = sd.map(|s| 2.0 * s / (g.len() as f64).sqrt());
        for i in 0..exact.len() {
            assert!(
                (mean[i] - exact[i]).abs() < 3.0 * mc_sd[i],
                "{i}: {} vs {}",
                mean[i],
                exact[i]
            );
        }
    }

    #[test]
    fn argument_checks() {
        let d = design(true, 50, 1);
        assert!(gibbs_indep_niw(&d, &IndepNiwPrior::default(), 10, 10, 1).is_err());
        assert!(matches!(
            gibbs_ssvs(&d, &SsvsPrior::default(), 10, 5, 1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn degenerate_mixture_returns_prior_inclusion() {
        let d = design(false, 200, 5);
        let prior = SsvsPrior {
            c0: 1.0,
            c1: 1.0,
            ..Default::default()
        };
        let post = gibbs_ssvs(&d, &prior, 5_000, 500, 6).unwrap();
        let incl = post.inclusion_probabilities().unwrap();
        // Binomial sd for 4,500 independent draws is 0.006.
        assert!(incl.iter().all(|p| (p - 0.2).abs() < 0.03), "{incl:?}");
    }

    #[test]
    fn ssvs_finds_the_zero_coefficient() {
        let d = design(false, 500, 6);
        for full in [false, true] {
            let post = gibbs_ssvs(
                &d,
                &SsvsPrior {
                    full,
                    ..Default::default()
                },
                5_000,
                1_000,
                8,
            )
            .unwrap();
            let incl = post.inclusion_probabilities().unwrap();
            // vec(Φ) index 1 is the lag of y2 in the y1 equation, which is zero.
            assert!(incl[1] < 0.5, "{incl:?}");
            for i in [0, 2, 3] {
                assert!(incl[i] > 0.5, "{incl:?}");
            }
            assert!(post.gamma.iter().flatten().count() == 4 * post.len());
            if full {
                assert_eq!(post.delta[0].len(), 1);
            }
            assert!(post.sigma.iter().all(|s| s.clone().cholesky().is_some()));
        }
    }

    #[test]
    fn precision_factor_reconstructs_inverse() {
        // With huge T the prior is negligible and (ΨΨ')^{-1} ≈ S / T.
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]) * 1e6;
        let mut delta = vec![true];
        let mut rng = chain_rng(2);
        let prior = SsvsPrior {
            tau1: 1e3,
            ..Default::default()
        };
        let mut acc = DMatrix::zeros(2, 2);
        for it in 0..400 {
            let psi =
                draw_precision_factor(&mut rng, &s, 1_000_000, &mut delta, &prior, it).unwrap();
            assert_eq!(psi[(1, 0)], 0.0);
            acc += spd_inverse(&(&psi * psi.transpose()), "x").unwrap();
        }
        let avg = acc / 400.0;
        let target = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        assert!((avg - target).amax() < 0.02);
    }
}
