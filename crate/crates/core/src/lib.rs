//! Yield-curve factor models and Bayesian VAR forecasting.
//!
//! The crate decomposes a panel of Treasury yields into Nelson-Siegel
//! level/slope/curvature factors (cross-sectional least squares, principal
//! components, or a one-step Kalman-filter likelihood), fits frequentist and
//! Bayesian VARs to the factor series, and derives forecasts, impulse
//! responses and out-of-sample error tables from them.
//!
//! Module map:
//!
//! * [`data_io`] loads, validates, splits and summarizes the yield panel.
//! * [`ns_factors`] builds loadings and extracts factors.
//! * [`var_engine`] estimates VAR(p) models by multivariate least squares and
//!   produces path forecasts with Gaussian bands.
//! * [`state_space`] holds the Kalman filter, smoother and likelihood fit.
//! * [`bvar`] implements the prior families, their samplers and predictive
//!   distributions.
//! * [`structural`] computes recursive and sign-restricted impulse responses
//!   and the dummy-observation BVAR.
//! * [`evaluation`] scores forecasts by mean squared forecast error.

pub mod bvar;
pub mod data_io;
pub mod error;
pub mod evaluation;
pub mod kv;
pub mod linalg;
pub mod ns_factors;
pub mod optim;
pub mod sampling;
pub mod simulate;
pub mod state_space;
pub mod structural;
pub mod var_engine;

pub use bvar::{
    build_design, conjugate_posterior, diffuse_posterior, fit_ar1_residual_scales, gibbs_indep_niw,
    gibbs_ssvs, minnesota_posterior, predict, predict_with, reconstruct_yields, sample_posterior,
    ConjugatePrior, IndepNiwPrior, MinnesotaPrior, PosteriorDraws, PredictOptions,
    PredictiveDistribution, PriorSpec, SamplerSettings, SsvsPrior, VarDesign, YieldForecast,
};
pub use data_io::{
    describe, load_panel, split_panel, DescriptiveStats, MissingPolicy, MonthStamp, PanelSchema,
    SplitPanel, YieldPanel,
};
pub use error::{Error, Result};
pub use evaluation::{evaluate_horizons, msfe, EvalMode, EvalReport, MethodForecast};
pub use ns_factors::{
    empirical_proxies, fit_cross_section, ns_loadings, pca, solve_lambda, FactorSeries, NsLoadings,
    PcaResult,
};
pub use optim::BfgsOptions;
pub use state_space::{
    fit_mle, forecast_factors, init_from_two_step, kalman_filter, kalman_smoother, SsmParams,
};
pub use structural::{
    build_dummy_obs, gibbs_dummy_bvar, irf_recursive, sign_restricted_irf, DummyHyper, DummyObs,
    IrfResult, Sign, SignRestriction,
};
pub use var_engine::{fit_var, forecast_path, select_lag_aic, PathForecast, VarModel};
