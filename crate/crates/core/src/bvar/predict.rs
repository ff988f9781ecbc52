use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::design::VarDesign;
use super::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::linalg::{log_det_from_chol, psd_factor, spectral_radius, symmetrize};
use crate::ns_factors::NsLoadings;
use crate::sampling::{log_sum_exp, predictive_rng, quantile_sorted, std_normal_vector};
use crate::var_engine::{companion_matrix, PathForecast};

pub const DEFAULT_QUANTILES: [f64; 5] = [0.05, 0.16, 0.5, 0.84, 0.95];

#[derive(Debug, Clone, PartialEq)]
pub struct PredictOptions {
    /// Seed of the per-draw innovation streams.
    pub seed: u64,
    pub quantiles: Vec<f64>,
    /// Observation at the first horizon, for the log predictive likelihood.
    pub realized: Option<DVector<f64>>,
    /// Drop draws whose companion matrix has an eigenvalue on or outside the unit circle.
    pub stability_filter: bool,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            quantiles: DEFAULT_QUANTILES.to_vec(),
            realized: None,
            stability_filter: false,
        }
    }
}

/// Simulated predictive distribution of the factors.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDistribution {
    pub names: Vec<String>,
    pub horizons: Vec<usize>,
    /// `n_h x k`.
    pub mean: DMatrix<f64>,
    pub sd: DMatrix<f64>,
    /// `(level, n_h x k)` pairs in increasing level.
    pub quantiles: Vec<(f64, DMatrix<f64>)>,
    /// Sample covariance across draws, per horizon.
    pub covariance: Vec<DMatrix<f64>>,
    /// One `n_h x k` simulated path per used draw.
    pub paths: Vec<DMatrix<f64>>,
    /// Log of the draw-averaged one-step density at the realized vector.
    pub log_pred_lik: Option<f64>,
    pub n_dropped: usize,
}

impl PredictiveDistribution {
    /// Long table: one row per horizon and variable.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = vec![
            "horizon".into(),
            "variable".into(),
            "mean".into(),
            "sd".into(),
        ];
        header.extend(
            self.quantiles
                .iter()
                .map(|(q, _)| format!("q{}", fmt_level(*q))),
        );
        wr.write_record(&header)?;
        for (hi, h) in self.horizons.iter().enumerate() {
            for (j, name) in self.names.iter().enumerate() {
                let mut rec = vec![
                    h.to_string(),
                    name.clone(),
                    self.mean[(hi, j)].to_string(),
                    self.sd[(hi, j)].to_string(),
                ];
                rec.extend(self.quantiles.iter().map(|(_, m)| m[(hi, j)].to_string()));
                wr.write_record(&rec)?;
            }
        }
        wr.flush()
            .map_err(|e| Error::io("<predictive writer>", e))?;
        Ok(())
    }
}

fn fmt_level(q: f64) -> String {
    let pct = q * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{:02}", pct.round() as i64)
    } else {
        format!("{pct}")
    }
}

/// Predictive distribution from the design's forecast origin, seeded by the draws.
pub fn predict(
    draws: &PosteriorDraws,
    design: &VarDesign,
    horizons: &[usize],
) -> Result<PredictiveDistribution> {
    let opts = PredictOptions {
        seed: draws.seed,
        ..Default::default()
    };
    predict_with(draws, &design.last_obs(), horizons, &opts)
}

/// Composition sampling: every draw simulates one path with its own `Σ`.
///
/// `origin` holds the last `p` observations, oldest first. Draw `i` has its
/// own random stream derived from `opts.seed`, so the result does not depend on thread
/// scheduling.
pub fn predict_with(
    draws: &PosteriorDraws,
    origin: &DMatrix<f64>,
    horizons: &[usize],
    opts: &PredictOptions,
) -> Result<PredictiveDistribution> {
    let (k, p) = (draws.k, draws.p);
    if draws.is_empty() {
        return Err(Error::arg("no posterior draws to predict from"));
    }
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(Error::arg(
            "forecast horizons must be positive and non-empty",
        ));
    }
    if origin.shape() != (p, k) {
        return Err(Error::arg(format!(
            "forecast origin must be {p}x{k}, got {}x{}",
            origin.nrows(),
            origin.ncols()
        )));
    }
    if let Some(q) = opts.quantiles.iter().find(|q| !(**q >= 0.0 && **q <= 1.0)) {
        return Err(Error::arg(format!("quantile level {q} outside [0, 1]")));
    }
    if let Some(y) = &opts.realized {
        if y.len() != k {
            return Err(Error::arg(format!(
                "realized vector has {} entries, expected {k}",
                y.len()
            )));
        }
    }
    let h_max = *horizons.iter().max().expect("non-empty");
    let off = usize::from(draws.intercept);
    let sims: Vec<Option<(DMatrix<f64>, Option<f64>)>> = (0..draws.len())
        .into_par_iter()
        .map(|i| {
            let phi = &draws.phi[i];
            let lags: Vec<DMatrix<f64>> = (0..p)
                .map(|l| phi.rows(off + l * k, k).transpose())
                .collect();
            if opts.stability_filter && spectral_radius(&companion_matrix(&lags)) >= 1.0 {
                return None;
            }
            let kp = k * p;
            let c = companion_matrix(&lags);
            let mut shift = DVector::zeros(kp);
            if draws.intercept {
                shift.rows_mut(0, k).copy_from(&phi.row(0).transpose());
            }
            let sigma = &draws.sigma[i];
            let chol = psd_factor(sigma);
            let mut rng = predictive_rng(opts.seed, i as u64);
            // Companion state, newest observation first; the same recursion
            // as the frequentist path forecast.
            let mut state = DVector::zeros(kp);
            for l in 0..p {
                state
                    .rows_mut(l * k, k)
                    .copy_from(&origin.row(p - 1 - l).transpose());
            }
            let mut path = DMatrix::zeros(horizons.len(), k);
            let mut one_step = None;
            for step in 1..=h_max {
                state = &c * &state + &shift;
                if step == 1 {
                    let mean = state.rows(0, k).into_owned();
                    one_step = opts
                        .realized
                        .as_ref()
                        .map(|y| gaussian_log_density(y, &mean, sigma));
                }
                let shock = &chol * std_normal_vector(&mut rng, k);
                for j in 0..k {
                    state[j] += shock[j];
                }
                for (hi, _) in horizons.iter().enumerate().filter(|(_, h)| **h == step) {
                    path.row_mut(hi).copy_from(&state.rows(0, k).transpose());
                }
            }
            Some((path, one_step.flatten()))
        })
        .collect();

    let n_dropped = sims.iter().filter(|s| s.is_none()).count();
    let kept: Vec<(DMatrix<f64>, Option<f64>)> = sims.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::numeric(
            "every posterior draw was removed by the stability filter",
        ));
    }
    let log_pred_lik = match &opts.realized {
        Some(_) => kept
            .iter()
            .map(|(_, l)| *l)
            .collect::<Option<Vec<f64>>>()
            .map(|ls| log_sum_exp(&ls) - (ls.len() as f64).ln()),
        None => None,
    };
    let paths: Vec<DMatrix<f64>> = kept.into_iter().map(|(p, _)| p).collect();
    let mut dist = summarize(&paths, &opts.quantiles);
    dist.names = draws.names.clone();
    dist.horizons = horizons.to_vec();
    dist.log_pred_lik = log_pred_lik;
    dist.n_dropped = n_dropped;
    Ok(dist)
}

/// `log N(y; mean, sigma)`, `None` when `sigma` is not positive definite.
fn gaussian_log_density(
    y: &DVector<f64>,
    mean: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Option<f64> {
    let chol = sigma.clone().cholesky()?;
    let l = chol.l();
    let mut z = y - mean;
    l.solve_lower_triangular_mut(&mut z);
    let k = y.len() as f64;
    Some(-0.5 * (k * (2.0 * std::f64::consts::PI).ln() + log_det_from_chol(&l) + z.norm_squared()))
}

fn summarize(paths: &[DMatrix<f64>], levels: &[f64]) -> PredictiveDistribution {
    let (nh, k) = paths[0].shape();
    let n = paths.len() as f64;
    let mut mean = DMatrix::zeros(nh, k);
    for p in paths {
        mean += p;
    }
    mean /= n;
    let denom = (n - 1.0).max(1.0);
    let covariance: Vec<DMatrix<f64>> = (0..nh)
        .map(|h| {
            let mut c = DMatrix::zeros(k, k);
            for p in paths {
                let d = (p.row(h) - mean.row(h)).transpose();
                c += &d * d.transpose();
            }
            symmetrize(&(c / denom))
        })
        .collect();
    let sd = DMatrix::from_fn(nh, k, |h, j| covariance[h][(j, j)].max(0.0).sqrt());
    let mut sorted_levels = levels.to_vec();
    sorted_levels.sort_by(f64::total_cmp);
    let mut quantiles: Vec<(f64, DMatrix<f64>)> = sorted_levels
        .iter()
        .map(|q| (*q, DMatrix::zeros(nh, k)))
        .collect();
    let mut buf = vec![0.0; paths.len()];
    for h in 0..nh {
        for j in 0..k {
            for (b, p) in buf.iter_mut().zip(paths) {
                *b = p[(h, j)];
            }
            buf.sort_by(f64::total_cmp);
            for (q, m) in quantiles.iter_mut() {
                m[(h, j)] = quantile_sorted(&buf, *q);
            }
        }
    }
    PredictiveDistribution {
        names: Vec::new(),
        horizons: Vec::new(),
        mean,
        sd,
        quantiles,
        covariance,
        paths: paths.to_vec(),
        log_pred_lik: None,
        n_dropped: 0,
    }
}

/// Yield forecasts per horizon and maturity.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldForecast {
    pub maturities: Vec<f64>,
    pub horizons: Vec<usize>,
    /// `n_h x M`.
    pub mean: DMatrix<f64>,
    pub sd: DMatrix<f64>,
}

impl YieldForecast {
    /// Maturities down the rows, `mean` and `sd` columns per horizon.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["maturity".to_string()];
        for h in &self.horizons {
            header.push(format!("h{h}_mean"));
            header.push(format!("h{h}_sd"));
        }
        wr.write_record(&header)?;
        for (m, mat) in self.maturities.iter().enumerate() {
            let mut rec = vec![mat.to_string()];
            for hi in 0..self.horizons.len() {
                rec.push(self.mean[(hi, m)].to_string());
                rec.push(self.sd[(hi, m)].to_string());
            }
            wr.write_record(&rec)?;
        }
        wr.flush()
            .map_err(|e| Error::io("<yield forecast writer>", e))?;
        Ok(())
    }
}

fn factor_block(k: usize, loadings: &NsLoadings) -> Result<()> {
    if loadings.matrix.ncols() != 3 {
        return Err(Error::arg(format!(
            "loadings have {} columns, expected 3",
            loadings.matrix.ncols()
        )));
    }
    if k < 3 {
        return Err(Error::arg(format!(
            "yield reconstruction needs the three factors, forecast has {k} variables"
        )));
    }
    Ok(())
}

fn map_moments(
    loadings: &NsLoadings,
    horizons: &[usize],
    mean: &DMatrix<f64>,
    cov: &[DMatrix<f64>],
) -> YieldForecast {
    let lam = &loadings.matrix;
    let fm = mean.columns(0, 3);
    let ymean = fm * lam.transpose();
    let sd = DMatrix::from_fn(horizons.len(), lam.nrows(), |h, m| {
        let row = lam.row(m);
        let c = cov[h].view((0, 0), (3, 3));
        (row * c * row.transpose())[(0, 0)].max(0.0).sqrt()
    });
    YieldForecast {
        maturities: loadings.maturities.clone(),
        horizons: horizons.to_vec(),
        mean: ymean,
        sd,
    }
}

/// Yield mean `Λ f̄` and sd `sqrt(diag(Λ Σ_f Λ'))` from the factor moments.
/// Columns beyond the first three (macro variables) are ignored.
pub fn reconstruct_yields(
    pred: &PredictiveDistribution,
    loadings: &NsLoadings,
) -> Result<YieldForecast> {
    factor_block(pred.mean.ncols(), loadings)?;
    Ok(map_moments(
        loadings,
        &pred.horizons,
        &pred.mean,
        &pred.covariance,
    ))
}

/// Yield moments computed path by path from the simulated factor draws.
pub fn reconstruct_yields_draws(
    pred: &PredictiveDistribution,
    loadings: &NsLoadings,
) -> Result<YieldForecast> {
    factor_block(pred.mean.ncols(), loadings)?;
    if pred.paths.is_empty() {
        return Err(Error::arg(
            "predictive distribution holds no simulated paths",
        ));
    }
    let lt = loadings.matrix.transpose();
    let ys: Vec<DMatrix<f64>> = pred.paths.iter().map(|p| p.columns(0, 3) * &lt).collect();
    let s = summarize(&ys, &[]);
    Ok(YieldForecast {
        maturities: loadings.maturities.clone(),
        horizons: pred.horizons.clone(),
        mean: s.mean,
        sd: s.sd,
    })
}

/// Yield forecasts from a frequentist path forecast.
pub fn reconstruct_from_path(path: &PathForecast, loadings: &NsLoadings) -> Result<YieldForecast> {
    factor_block(path.mean.ncols(), loadings)?;
    Ok(map_moments(
        loadings,
        &path.horizons,
        &path.mean,
        &path.covariance,
    ))
}
