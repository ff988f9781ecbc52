//! Bayesian VARs on the factor series.
//!
//! Coefficients use the wide layout of [`crate::var_engine`]: `Φ` is `r x k`
//! with the intercept row first, and the long-form vector is `A = vec(Φ)`,
//! one block of `r` coefficients per equation. Inverse-Wishart parameters
//! follow the convention `E[Σ] = S / (ν - k - 1)`.

mod analytic;
mod design;
mod draws;
mod gibbs;
mod predict;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use analytic::{
    conjugate_moments, conjugate_posterior, conjugate_prior_precision, conjugate_update,
    diffuse_posterior, minnesota_moments,
    minnesota_moments_long, minnesota_posterior, ConjugateMoments, GaussianMoments,
};
pub use design::{build_design, fit_ar1_residual_scales, VarDesign};
pub use draws::PosteriorDraws;
pub use gibbs::{gibbs_indep_niw, gibbs_ssvs};
pub use predict::{
    predict, predict_with, reconstruct_from_path, reconstruct_yields, reconstruct_yields_draws,
    PredictOptions, PredictiveDistribution, YieldForecast, DEFAULT_QUANTILES,
};

#[derive(Debug, Clone, PartialEq)]
pub struct MinnesotaPrior {
    /// Prior mean of each own first lag.
    pub rho: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    /// Fixed residual variances; AR(1) estimates when `None`.
    pub scales: Option<DVector<f64>>,
}

impl Default for MinnesotaPrior {
    fn default() -> Self {
        Self {
            rho: 0.95,
            d1: 0.001,
            d2: 0.001,
            d3: 100.0,
            scales: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugatePrior {
    /// Prior mean of `Φ`; zero when `None`.
    pub phi0: Option<DMatrix<f64>>,
    pub d1: f64,
    pub d2: f64,
    /// `k + kr` when `None`.
    pub s_h0: Option<f64>,
    /// `diag(σ̂²)` when `None`.
    pub s_c0: Option<DMatrix<f64>>,
}

impl Default for ConjugatePrior {
    fn default() -> Self {
        Self {
            phi0: None,
            d1: 0.03 * 0.03,
            d2: 400.0,
            s_h0: None,
            s_c0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndepNiwPrior {
    /// Prior mean of `A = vec(Φ)`; zero when `None`.
    pub a0: Option<DVector<f64>>,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub s_h0: Option<f64>,
    pub s_c0: Option<DMatrix<f64>>,
}

impl Default for IndepNiwPrior {
    fn default() -> Self {
        Self {
            a0: None,
            d1: 0.03 * 0.03,
            d2: 0.04 * 0.04,
            d3: 400.0,
            s_h0: None,
            s_c0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SsvsPrior {
    /// Spike and slab scale multipliers of the unrestricted-VAR sd.
    pub c0: f64,
    pub c1: f64,
    /// Prior inclusion probability of each coefficient.
    pub p_incl: f64,
    /// Also select the off-diagonal elements of the precision factor.
    pub full: bool,
    pub tau0: f64,
    pub tau1: f64,
    pub q_incl: f64,
    /// Gamma(shape, rate) prior on the squared diagonal of the factor.
    pub gamma_shape: f64,
    pub gamma_rate: f64,
    pub s_h0: Option<f64>,
    /// Identity when `None`.
    pub s_c0: Option<DMatrix<f64>>,
}

impl Default for SsvsPrior {
    fn default() -> Self {
        Self {
            c0: 0.01,
            c1: 20.0,
            p_incl: 0.2,
            full: false,
            tau0: 0.01,
            tau1: 10.0,
            q_incl: 0.2,
            gamma_shape: 0.01,
            gamma_rate: 0.01,
            s_h0: None,
            s_c0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    Diffuse,
    Minnesota(MinnesotaPrior),
    NaturalConjugate(ConjugatePrior),
    IndepNiw(IndepNiwPrior),
    Ssvs(SsvsPrior),
}

impl PriorSpec {
    /// Parse a prior family name with default hyperparameters.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "diffuse" => PriorSpec::Diffuse,
            "minnesota" => PriorSpec::Minnesota(MinnesotaPrior::default()),
            "conjugate" | "natural_conjugate" => PriorSpec::NaturalConjugate(ConjugatePrior::default()),
            "indep_niw" | "independent_niw" => PriorSpec::IndepNiw(IndepNiwPrior::default()),
            "ssvs" | "ssvs_partial" => PriorSpec::Ssvs(SsvsPrior::default()),
            "ssvs_full" => PriorSpec::Ssvs(SsvsPrior { full: true, ..SsvsPrior::default() }),
            other => {
                return Err(Error::arg(format!(
                    "unknown prior `{other}` (expected diffuse, minnesota, conjugate, indep_niw, ssvs or ssvs_full)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            PriorSpec::Diffuse => "diffuse",
            PriorSpec::Minnesota(_) => "minnesota",
            PriorSpec::NaturalConjugate(_) => "conjugate",
            PriorSpec::IndepNiw(_) => "indep_niw",
            PriorSpec::Ssvs(s) if s.full => "ssvs_full",
            PriorSpec::Ssvs(_) => "ssvs",
        }
    }

    /// Closed-form posteriors need no chain.
    pub fn is_analytic(&self) -> bool {
        matches!(
            self,
            PriorSpec::Diffuse | PriorSpec::Minnesota(_) | PriorSpec::NaturalConjugate(_)
        )
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        match self {
            PriorSpec::Diffuse => Ok(()),
            PriorSpec::Minnesota(m) => positive(&[("d1", m.d1), ("d2", m.d2), ("d3", m.d3)]),
            PriorSpec::NaturalConjugate(c) => {
                positive(&[("d1", c.d1), ("d2", c.d2)])?;
                dof_ok(c.s_h0, k)
            }
            PriorSpec::IndepNiw(n) => {
                positive(&[("d1", n.d1), ("d2", n.d2), ("d3", n.d3)])?;
                dof_ok(n.s_h0, k)
            }
            PriorSpec::Ssvs(s) => {
                positive(&[
                    ("c0", s.c0),
                    ("c1", s.c1),
                    ("tau0", s.tau0),
                    ("tau1", s.tau1),
                    ("gamma_shape", s.gamma_shape),
                    ("gamma_rate", s.gamma_rate),
                ])?;
                probability("p_incl", s.p_incl)?;
                probability("q_incl", s.q_incl)?;
                dof_ok(s.s_h0, k)
            }
        }
    }
}

fn positive(vals: &[(&str, f64)]) -> Result<()> {
    match vals.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        Some((name, v)) => Err(Error::arg(format!(
            "prior hyperparameter {name} = {v} must be positive"
        ))),
        None => Ok(()),
    }
}

fn probability(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("{name} = {v} must lie in (0, 1)")))
    }
}

fn dof_ok(s_h0: Option<f64>, k: usize) -> Result<()> {
    match s_h0 {
        Some(v) if !(v > k as f64 - 1.0) => Err(Error::arg(format!(
            "prior degrees of freedom {v} must exceed k - 1 = {}",
            k - 1
        ))),
        _ => Ok(()),
    }
}

/// Chain and draw counts shared by the samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerSettings {
    /// Draws taken from closed-form posteriors.
    pub n_draws: usize,
    pub n_total: usize,
    pub n_burn: usize,
    pub seed: u64,
}

impl Default for SamplerSettings {
    /// The desk preset: 11,000 iterations with 1,000 burned.
    fn default() -> Self {
        Self {
            n_draws: 10_000,
            n_total: 11_000,
            n_burn: 1_000,
            seed: 0,
        }
    }
}

impl SamplerSettings {
    /// Chain length used for publication-scale runs.
    pub fn long_chain(seed: u64) -> Self {
        Self {
            n_draws: 100_000,
            n_total: 500_000,
            n_burn: 400_000,
            seed,
        }
    }
}

/// Run the posterior for any prior family.
pub fn sample_posterior(
    design: &VarDesign,
    prior: &PriorSpec,
    s: &SamplerSettings,
) -> Result<PosteriorDraws> {
    match prior {
        PriorSpec::Diffuse => diffuse_posterior(design, s.n_draws, s.seed),
        PriorSpec::Minnesota(m) => minnesota_posterior(design, m, s.n_draws, s.seed),
        PriorSpec::NaturalConjugate(c) => conjugate_posterior(design, c, s.n_draws, s.seed),
        PriorSpec::IndepNiw(n) => gibbs_indep_niw(design, n, s.n_total, s.n_burn, s.seed),
        PriorSpec::Ssvs(v) => gibbs_ssvs(design, v, s.n_total, s.n_burn, s.seed),
    }
}

/// Diagonal Minnesota-type prior variances of `A = vec(Φ)`.
///
/// Own lag `l`: `d1 / l²`; lag `l` of variable `j` in equation `i`:
/// `d2 σ²_i / (l² σ²_j)`; intercept: `d3 σ²_i`.
pub fn minnesota_variances(
    k: usize,
    p: usize,
    intercept: bool,
    scales: &DVector<f64>,
    d1: f64,
    d2: f64,
    d3: f64,
) -> DVector<f64> {
    let off = usize::from(intercept);
    let r = off + k * p;
    let mut v = DVector::zeros(k * r);
    for i in 0..k {
        if intercept {
            v[i * r] = d3 * scales[i];
        }
        for l in 1..=p {
            let l2 = (l * l) as f64;
            for j in 0..k {
                v[i * r + off + (l - 1) * k + j] = if i == j {
                    d1 / l2
                } else {
                    d2 * scales[i] / (l2 * scales[j])
                };
            }
        }
    }
    v
}

/// Minnesota prior mean: `rho` on each own first lag, zero elsewhere.
pub fn minnesota_mean(k: usize, p: usize, intercept: bool, rho: f64) -> DVector<f64> {
    let off = usize::from(intercept);
    let r = off + k * p;
    let mut m = DVector::zeros(k * r);
    for i in 0..k {
        m[i * r + off + i] = rho;
    }
    m
}

fn check_scales(scales: &DVector<f64>, k: usize) -> Result<()> {
    if scales.len() != k {
        return Err(Error::arg(format!(
            "{} residual scales given for {k} variables",
            scales.len()
        )));
    }
    if let Some(i) = scales.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::numeric(format!(
            "residual variance of variable {} is {}; the prior scale needs a positive value",
            i + 1,
            scales[i]
        )));
    }
    Ok(())
}
