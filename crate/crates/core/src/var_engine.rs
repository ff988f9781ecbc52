//! VAR(p) estimation by multivariate least squares, lag selection and
//! Gaussian path forecasts.
//!
//! Coefficients are kept in the wide layout `Phi` (`r x k`): row 0 is the
//! intercept when present, followed by `A_1'`, ..., `A_p'` stacked by lag, so
//! that `f_t' = [1, f_{t-1}', ..., f_{t-p}'] Phi + e_t'`.

use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::{psd_factor, symmetrize, LeastSquares};
use crate::ns_factors::FactorSeries;

/// Divisor of the residual cross-product in the covariance estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaDenominator {
    /// `T_eff - r`.
    #[default]
    DegreesOfFreedom,
    /// `T_eff` (maximum likelihood).
    MaximumLikelihood,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    pub p: usize,
    pub intercept: bool,
    pub names: Vec<String>,
    /// `r x k` wide-form coefficients.
    pub phi: DMatrix<f64>,
    /// Intercept `a0` (zeros when the model has none).
    pub a0: DVector<f64>,
    /// `A_1, ..., A_p`, each `k x k`.
    pub coeffs: Vec<DMatrix<f64>>,
    pub sigma: DMatrix<f64>,
    /// `(T - p) x k`; empty for models assembled from coefficients.
    pub residuals: DMatrix<f64>,
}

/// Response matrix and lagged regressors for rows `start..T`.
///
/// Row `t - start` of the regressor matrix is `[1, f_{t-1}', ..., f_{t-p}']`
/// (without the leading 1 when `intercept` is false).
pub fn lagged_design(
    values: &DMatrix<f64>,
    p: usize,
    intercept: bool,
    start: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (t, k) = values.shape();
    assert!(start >= p && start <= t);
    let n = t - start;
    let off = usize::from(intercept);
    let mut x = DMatrix::zeros(n, off + k * p);
    for row in 0..n {
        let tt = start + row;
        if intercept {
            x[(row, 0)] = 1.0;
        }
        for l in 1..=p {
            for j in 0..k {
                x[(row, off + (l - 1) * k + j)] = values[(tt - l, j)];
            }
        }
    }
    (values.rows(start, n).into_owned(), x)
}

impl VarModel {
    /// Assemble a model from wide-form coefficients and an error covariance.
    pub fn from_phi(
        phi: DMatrix<f64>,
        sigma: DMatrix<f64>,
        p: usize,
        intercept: bool,
    ) -> Result<Self> {
        let k = sigma.nrows();
        let r = usize::from(intercept) + k * p;
        if phi.shape() != (r, k) || !sigma.is_square() {
            return Err(Error::arg(format!(
                "coefficient matrix is {}x{}, expected {r}x{k}",
                phi.nrows(),
                phi.ncols()
            )));
        }
        let off = usize::from(intercept);
        let a0 = if intercept {
            phi.row(0).transpose()
        } else {
            DVector::zeros(k)
        };
        let coeffs = (0..p)
            .map(|l| phi.rows(off + l * k, k).transpose())
            .collect();
        let names = (1..=k).map(|i| format!("y{i}")).collect();
        Ok(Self {
            p,
            intercept,
            names,
            phi,
            a0,
            coeffs,
            sigma,
            residuals: DMatrix::zeros(0, k),
        })
    }

    pub fn k(&self) -> usize {
        self.sigma.nrows()
    }

    /// Regressors per equation.
    pub fn r(&self) -> usize {
        self.phi.nrows()
    }

    /// `kp x kp` companion matrix.
    pub fn companion(&self) -> DMatrix<f64> {
        companion_matrix(&self.coeffs)
    }

    pub fn companion_eigenvalues(&self) -> Vec<Complex<f64>> {
        let c = self.companion();
        let mut ev: Vec<Complex<f64>> = c.complex_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        ev
    }

    /// `(I - sum A_i)^{-1} a0`, when it exists.
    pub fn unconditional_mean(&self) -> Result<DVector<f64>> {
        let k = self.k();
        let mut m = DMatrix::identity(k, k);
        for a in &self.coeffs {
            m -= a;
        }
        m.lu()
            .solve(&self.a0)
            .ok_or_else(|| Error::numeric("I - sum(A_i) is singular (unit root)"))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["block".to_string(), "row".to_string()];
        header.extend(self.names.iter().cloned());
        wr.write_record(&header)?;
        let mut put = |block: String, row: &str, v: Vec<f64>| -> Result<()> {
            let mut rec = vec![block, row.to_string()];
            rec.extend(v.iter().map(|x| x.to_string()));
            wr.write_record(&rec)?;
            Ok(())
        };
        put("a0".into(), "", self.a0.iter().copied().collect())?;
        for (l, a) in self.coeffs.iter().enumerate() {
            for (i, name) in self.names.iter().enumerate() {
                put(
                    format!("A{}", l + 1),
                    name,
                    a.row(i).iter().copied().collect(),
                )?;
            }
        }
        for (i, name) in self.names.iter().enumerate() {
            put(
                "sigma".into(),
                name,
                self.sigma.row(i).iter().copied().collect(),
            )?;
        }
        wr.flush().map_err(|e| Error::io("<model writer>", e))?;
        Ok(())
    }
}

pub fn companion_matrix(coeffs: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = coeffs.len();
    let k = coeffs[0].nrows();
    let mut c = DMatrix::zeros(k * p, k * p);
    for (l, a) in coeffs.iter().enumerate() {
        c.view_mut((0, l * k), (k, k)).copy_from(a);
    }
    if p > 1 {
        c.view_mut((k, 0), (k * (p - 1), k * (p - 1)))
            .fill_with_identity();
    }
    c
}

/// Least-squares VAR(p) with the degrees-of-freedom covariance.
pub fn fit_var(data: &FactorSeries, p: usize, intercept: bool) -> Result<VarModel> {
    fit_var_with(data, p, intercept, SigmaDenominator::default())
}

pub fn fit_var_with(
    data: &FactorSeries,
    p: usize,
    intercept: bool,
    denom: SigmaDenominator,
) -> Result<VarModel> {
    let (t, k) = data.values.shape();
    if p == 0 {
        return Err(Error::arg("lag order must be at least 1"));
    }
    let r = usize::from(intercept) + k * p;
    if t <= p || t - p <= k * p + 1 || t - p <= r {
        return Err(Error::arg(format!(
            "{t} observations cannot support a VAR({p}) in {k} variables"
        )));
    }
    let (y, x) = lagged_design(&data.values, p, intercept, p);
    let phi = LeastSquares::new(&x, "VAR regressor matrix")?.solve(&y);
    let residuals = &y - &x * &phi;
    let t_eff = (t - p) as f64;
    let div = match denom {
        SigmaDenominator::DegreesOfFreedom => t_eff - r as f64,
        SigmaDenominator::MaximumLikelihood => t_eff,
    };
    let sigma = symmetrize(&(residuals.transpose() * &residuals / div));
    let mut m = VarModel::from_phi(phi, sigma, p, intercept)?;
    m.residuals = residuals;
    m.names = data.names.clone();
    Ok(m)
}

/// AIC-minimizing lag order over `1..=p_max`, all candidates fitted on the
/// common sample that drops the first `p_max` rows.
pub fn select_lag_aic(data: &FactorSeries, p_max: usize) -> Result<usize> {
    Ok(aic_table(data, p_max)?
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, _)| p)
        .expect("p_max >= 1"))
}

/// `(p, AIC)` for every candidate lag order.
pub fn aic_table(data: &FactorSeries, p_max: usize) -> Result<Vec<(usize, f64)>> {
    if p_max == 0 {
        return Err(Error::arg("p_max must be at least 1"));
    }
    let (t, k) = data.values.shape();
    if t <= p_max + 1 + k * p_max {
        return Err(Error::arg(format!(
            "{t} observations cannot support lag order {p_max}"
        )));
    }
    let t_eff = (t - p_max) as f64;
    let mut out = Vec::with_capacity(p_max);
    for p in 1..=p_max {
        let (y, x) = lagged_design(&data.values, p_max, true, p_max);
        let x = x.columns(0, 1 + k * p).into_owned();
        let phi = LeastSquares::new(&x, "VAR regressor matrix")?.solve(&y);
        let u = &y - &x * &phi;
        let sigma_ml = symmetrize(&(u.transpose() * &u / t_eff));
        let log_det = match sigma_ml.clone().cholesky() {
            Some(c) => 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
            None => f64::NEG_INFINITY,
        };
        out.push((p, log_det + 2.0 * (k * k * p + k) as f64 / t_eff));
    }
    Ok(out)
}

pub const DEFAULT_BAND_LEVELS: [f64; 3] = [0.5, 0.8, 0.95];
pub const DEFAULT_HORIZON: usize = 56;

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastBand {
    /// Central coverage, e.g. `0.95`.
    pub level: f64,
    pub lower: DMatrix<f64>,
    pub upper: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathForecast {
    pub names: Vec<String>,
    /// Horizons `1..=H`.
    pub horizons: Vec<usize>,
    /// `H x k`.
    pub mean: DMatrix<f64>,
    /// Forecast-error covariance per horizon.
    pub covariance: Vec<DMatrix<f64>>,
    pub bands: Vec<ForecastBand>,
}

impl PathForecast {
    pub fn sd(&self) -> DMatrix<f64> {
        let k = self.mean.ncols();
        DMatrix::from_fn(self.horizons.len(), k, |h, j| {
            self.covariance[h][(j, j)].max(0.0).sqrt()
        })
    }

    /// Long layout: one row per horizon and variable.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec![
            "h".to_string(),
            "variable".into(),
            "mean".into(),
            "sd".into(),
        ];
        for b in &self.bands {
            header.push(format!("lower{}", pct(b.level)));
            header.push(format!("upper{}", pct(b.level)));
        }
        wr.write_record(&header)?;
        let sd = self.sd();
        for (hi, h) in self.horizons.iter().enumerate() {
            for (j, name) in self.names.iter().enumerate() {
                let mut rec = vec![
                    h.to_string(),
                    name.clone(),
                    self.mean[(hi, j)].to_string(),
                    sd[(hi, j)].to_string(),
                ];
                for b in &self.bands {
                    rec.push(b.lower[(hi, j)].to_string());
                    rec.push(b.upper[(hi, j)].to_string());
                }
                wr.write_record(&rec)?;
            }
        }
        wr.flush().map_err(|e| Error::io("<forecast writer>", e))?;
        Ok(())
    }
}

pub(crate) fn pct(level: f64) -> String {
    let v = level * 100.0;
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v}")
    }
}

/// Path forecast from the last `p` observations (`last_obs` rows oldest first).
pub fn forecast_path(model: &VarModel, last_obs: &DMatrix<f64>, h: usize) -> Result<PathForecast> {
    forecast_path_with(model, last_obs, h, &DEFAULT_BAND_LEVELS)
}

pub fn forecast_path_with(
    model: &VarModel,
    last_obs: &DMatrix<f64>,
    h: usize,
    levels: &[f64],
) -> Result<PathForecast> {
    let (k, p) = (model.k(), model.p);
    if h == 0 {
        return Err(Error::arg("forecast horizon must be at least 1"));
    }
    if last_obs.shape() != (p, k) {
        return Err(Error::arg(format!(
            "forecast origin must be {p}x{k}, got {}x{}",
            last_obs.nrows(),
            last_obs.ncols()
        )));
    }
    if let Some(l) = levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(Error::arg(format!("band level {l} must lie in (0, 1)")));
    }
    let c = model.companion();
    let kp = k * p;
    let mut shift = DVector::zeros(kp);
    shift.rows_mut(0, k).copy_from(&model.a0);
    let mut sigma_big = DMatrix::zeros(kp, kp);
    sigma_big.view_mut((0, 0), (k, k)).copy_from(&model.sigma);

    // State stacks the newest observation first.
    let mut state = DVector::zeros(kp);
    for l in 0..p {
        state
            .rows_mut(l * k, k)
            .copy_from(&last_obs.row(p - 1 - l).transpose());
    }
    let mut cov_big = DMatrix::<f64>::zeros(kp, kp);
    let mut mean = DMatrix::zeros(h, k);
    let mut covariance = Vec::with_capacity(h);
    let ct = c.transpose();
    for step in 0..h {
        state = &c * &state + &shift;
        cov_big = symmetrize(&(&c * &cov_big * &ct + &sigma_big));
        mean.row_mut(step).copy_from(&state.rows(0, k).transpose());
        covariance.push(cov_big.view((0, 0), (k, k)).into_owned());
    }
    let normal = Normal::standard();
    let bands = levels
        .iter()
        .map(|&level| {
            let z = normal.inverse_cdf(0.5 + level / 2.0);
            let sd = DMatrix::from_fn(h, k, |s, j| covariance[s][(j, j)].max(0.0).sqrt());
            ForecastBand {
                level,
                lower: &mean - &sd * z,
                upper: &mean + &sd * z,
            }
        })
        .collect();
    Ok(PathForecast {
        names: model.names.clone(),
        horizons: (1..=h).collect(),
        mean,
        covariance,
        bands,
    })
}

/// Simulate `n` observations from a VAR with Gaussian errors.
pub fn simulate_var<R: rand::Rng + ?Sized>(
    model: &VarModel,
    init: &DMatrix<f64>,
    n: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let (k, p) = (model.k(), model.p);
    let chol = psd_factor(&model.sigma);
    let mut out = DMatrix::zeros(p + n, k);
    out.rows_mut(0, p).copy_from(init);
    for t in p..p + n {
        let mut v = model.a0.clone();
        for (l, a) in model.coeffs.iter().enumerate() {
            v += a * out.row(t - 1 - l).transpose();
        }
        v += &chol * crate::sampling::std_normal_vector(rng, k);
        out.row_mut(t).copy_from(&v.transpose());
    }
    out.rows(p, n).into_owned()
}
