//! One-step dynamic Nelson-Siegel state space: Kalman filter, smoother and
//! maximum-likelihood fit.
//!
//! Measurement: `Y_t - Λμ = Λ X_t + e_t`, `e_t ~ N(0, diag(w^2))`.
//! Transition: `X_t = A X_{t-1} + η_t`, `η_t ~ N(0, Z Z')`, with `X_t = f_t - μ`.
//!
//! Packed parameter order (length `19 + M`): `A` row-major (9), `μ` (3),
//! `ln λ`, `[ln z11, z21, ln z22, z31, z32, ln z33]`, `ln w_1 .. ln w_M`.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::data_io::YieldPanel;
use crate::error::{Error, Result};
use crate::kv::KvConfig;
use crate::linalg::{discrete_lyapunov, log_det_from_chol, spectral_radius, symmetrize};
use crate::ns_factors::{cross_section, ns_loadings};
use crate::optim::{minimize, BfgsOptions, OptimResult, TraceRow};
use crate::var_engine::{fit_var_with, PathForecast, SigmaDenominator};

/// Lower bound on measurement standard deviations from the two-step start.
pub const W_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SsmParams {
    /// `3 x 3` transition matrix.
    pub a: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub lambda: f64,
    /// `3 x 3` lower triangular, positive diagonal; `Σ_η = Z Z'`.
    pub z: DMatrix<f64>,
    /// Measurement standard deviations, one per maturity.
    pub w: DVector<f64>,
}

impl SsmParams {
    pub fn n_packed(m: usize) -> usize {
        19 + m
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.shape() != (3, 3) || self.mu.len() != 3 || self.z.shape() != (3, 3) {
            return Err(Error::arg(
                "state-space parameters must be three-dimensional",
            ));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::arg(format!(
                "decay rate must be positive, got {}",
                self.lambda
            )));
        }
        for i in 0..3 {
            if !(self.z[(i, i)] > 0.0) {
                return Err(Error::arg("Z must have a positive diagonal"));
            }
            for j in i + 1..3 {
                if self.z[(i, j)] != 0.0 {
                    return Err(Error::arg("Z must be lower triangular"));
                }
            }
        }
        if self.w.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::arg(
                "measurement standard deviations must be positive",
            ));
        }
        Ok(())
    }

    pub fn sigma_eta(&self) -> DMatrix<f64> {
        &self.z * self.z.transpose()
    }

    pub fn sigma_eps(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.w.map(|w| w * w))
    }

    pub fn pack(&self) -> DVector<f64> {
        let m = self.w.len();
        let mut v = Vec::with_capacity(Self::n_packed(m));
        for i in 0..3 {
            for j in 0..3 {
                v.push(self.a[(i, j)]);
            }
        }
        v.extend(self.mu.iter());
        v.push(self.lambda.ln());
        let z = &self.z;
        v.extend([
            z[(0, 0)].ln(),
            z[(1, 0)],
            z[(1, 1)].ln(),
            z[(2, 0)],
            z[(2, 1)],
            z[(2, 2)].ln(),
        ]);
        v.extend(self.w.iter().map(|w| w.ln()));
        DVector::from_vec(v)
    }

    /// Inverse of [`SsmParams::pack`] for `m` maturities.
    pub fn unpack(v: &DVector<f64>, m: usize) -> Result<Self> {
        if v.len() != Self::n_packed(m) {
            return Err(Error::arg(format!(
                "packed vector has length {}, expected {} for {m} maturities",
                v.len(),
                Self::n_packed(m)
            )));
        }
        let a = DMatrix::from_row_slice(3, 3, &v.as_slice()[0..9]);
        let mu = DVector::from_column_slice(&v.as_slice()[9..12]);
        let lambda = v[12].exp();
        let mut z = DMatrix::zeros(3, 3);
        z[(0, 0)] = v[13].exp();
        z[(1, 0)] = v[14];
        z[(1, 1)] = v[15].exp();
        z[(2, 0)] = v[16];
        z[(2, 1)] = v[17];
        z[(2, 2)] = v[18].exp();
        let w = DVector::from_iterator(m, v.iter().skip(19).map(|x| x.exp()));
        Ok(Self {
            a,
            mu,
            lambda,
            z,
            w,
        })
    }

    /// Full-precision `key = value` text.
    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        let list = |it: &mut dyn Iterator<Item = f64>| {
            it.map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        };
        kv.set("lambda", self.lambda.to_string());
        kv.set("a", list(&mut self.a.transpose().iter().copied()));
        kv.set("mu", list(&mut self.mu.iter().copied()));
        kv.set("z", list(&mut self.z.transpose().iter().copied()));
        kv.set("w", list(&mut self.w.iter().copied()));
        kv
    }

    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let need = |k: &str| -> Result<Vec<f64>> {
            kv.get_list::<f64>(k)?
                .ok_or_else(|| Error::Schema(format!("parameter file lacks `{k}`")))
        };
        let (a, mu, z, w) = (need("a")?, need("mu")?, need("z")?, need("w")?);
        if a.len() != 9 || mu.len() != 3 || z.len() != 9 {
            return Err(Error::Schema("parameter file has wrong dimensions".into()));
        }
        let p = Self {
            a: DMatrix::from_row_slice(3, 3, &a),
            mu: DVector::from_vec(mu),
            lambda: kv
                .get_parsed("lambda")?
                .ok_or_else(|| Error::Schema("parameter file lacks `lambda`".into()))?,
            z: DMatrix::from_row_slice(3, 3, &z),
            w: DVector::from_vec(w),
        };
        p.validate()?;
        Ok(p)
    }
}

impl fmt::Display for SsmParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_kv())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub filtered_states: Vec<DVector<f64>>,
    pub filtered_cov: Vec<DMatrix<f64>>,
    pub predicted_states: Vec<DVector<f64>>,
    pub predicted_cov: Vec<DMatrix<f64>>,
    pub innovations: Vec<DVector<f64>>,
    pub innovation_cov: Vec<DMatrix<f64>>,
    pub loglik: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmootherOutput {
    pub states: Vec<DVector<f64>>,
    pub cov: Vec<DMatrix<f64>>,
}

impl SmootherOutput {
    /// `T x n` matrix of smoothed states with `shift` added to every row.
    pub fn states_plus(&self, shift: &DVector<f64>) -> DMatrix<f64> {
        let n = shift.len();
        DMatrix::from_fn(self.states.len(), n, |t, j| self.states[t][j] + shift[j])
    }
}

/// Linear Gaussian state space `y_t = H x_t + e_t`, `x_t = F x_{t-1} + u_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussian {
    pub h: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl LinearGaussian {
    /// Filter the rows of `y` starting from `x_{0|0} = x0`, `P_{0|0} = p0`.
    pub fn filter(
        &self,
        y: &DMatrix<f64>,
        x0: &DVector<f64>,
        p0: &DMatrix<f64>,
    ) -> Result<FilterOutput> {
        let (t_len, m) = y.shape();
        let n = self.f.nrows();
        if self.h.shape() != (m, n) {
            return Err(Error::arg(format!(
                "observation matrix is {}x{}, data have {m} series",
                self.h.nrows(),
                self.h.ncols()
            )));
        }
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let ft = self.f.transpose();
        let ht = self.h.transpose();
        let eye = DMatrix::<f64>::identity(n, n);
        let mut out = FilterOutput {
            filtered_states: Vec::with_capacity(t_len),
            filtered_cov: Vec::with_capacity(t_len),
            predicted_states: Vec::with_capacity(t_len),
            predicted_cov: Vec::with_capacity(t_len),
            innovations: Vec::with_capacity(t_len),
            innovation_cov: Vec::with_capacity(t_len),
            loglik: 0.0,
        };
        let mut x = x0.clone();
        let mut p = p0.clone();
        for t in 0..t_len {
            let xp = &self.f * &x;
            let pp = symmetrize(&(&self.f * &p * &ft + &self.q));
            let e = y.row(t).transpose() - &self.h * &xp;
            let s = symmetrize(&(&self.h * &pp * &ht + &self.r));
            let chol = s.clone().cholesky().ok_or_else(|| {
                Error::numeric(format!(
                    "innovation covariance is not positive definite at t = {}",
                    t + 1
                ))
            })?;
            // K' = S^{-1} H P.
            let k = chol.solve(&(&self.h * &pp)).transpose();
            let sinv_e = chol.solve(&e);
            out.loglik += -0.5 * (m as f64 * ln2pi + log_det_from_chol(&chol.l()) + e.dot(&sinv_e));
            x = &xp + &k * &e;
            let ikh = &eye - &k * &self.h;
            p = symmetrize(&(&ikh * &pp * ikh.transpose() + &k * &self.r * k.transpose()));
            out.predicted_states.push(xp);
            out.predicted_cov.push(pp);
            out.innovations.push(e);
            out.innovation_cov.push(s);
            out.filtered_states.push(x.clone());
            out.filtered_cov.push(p.clone());
        }
        Ok(out)
    }

    /// Rauch-Tung-Striebel fixed-interval smoother.
    pub fn smooth(&self, filt: &FilterOutput) -> Result<SmootherOutput> {
        let t_len = filt.filtered_states.len();
        let mut states = filt.filtered_states.clone();
        let mut cov = filt.filtered_cov.clone();
        for t in (0..t_len.saturating_sub(1)).rev() {
            let pp = &filt.predicted_cov[t + 1];
            let chol = pp.clone().cholesky().ok_or_else(|| {
                Error::numeric(format!(
                    "predicted state covariance is singular at t = {}",
                    t + 2
                ))
            })?;
            // J = P_{t|t} F' P_{t+1|t}^{-1}
            let j = chol.solve(&(&self.f * &filt.filtered_cov[t])).transpose();
            let dx = &states[t + 1] - &filt.predicted_states[t + 1];
            states[t] = &filt.filtered_states[t] + &j * dx;
            let dp = &cov[t + 1] - pp;
            cov[t] = symmetrize(&(&filt.filtered_cov[t] + &j * dp * j.transpose()));
        }
        Ok(SmootherOutput { states, cov })
    }
}

/// Stationary initial covariance when the transition is stable, else `10 I`.
pub fn default_initial_cov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    if spectral_radius(a) < 1.0 {
        if let Ok(p) = discrete_lyapunov(a, q) {
            if p.clone().cholesky().is_some() || q.amax() == 0.0 {
                return p;
            }
        }
    }
    DMatrix::identity(n, n) * 10.0
}

fn check_panel(params: &SsmParams, panel: &YieldPanel) -> Result<()> {
    params.validate()?;
    if panel.maturities().len() != params.w.len() {
        return Err(Error::arg(format!(
            "{} maturities in the panel but {} measurement standard deviations",
            panel.maturities().len(),
            params.w.len()
        )));
    }
    Ok(())
}

/// The DNS model as a generic state space plus the intercept-adjusted data.
pub fn dns_system(
    params: &SsmParams,
    panel: &YieldPanel,
) -> Result<(LinearGaussian, DMatrix<f64>)> {
    check_panel(params, panel)?;
    let lam = ns_loadings(params.lambda, &panel.maturities_f64())?.matrix;
    let offset = &lam * &params.mu;
    let mut y1 = panel.yields().clone();
    for mut row in y1.row_iter_mut() {
        row -= offset.transpose();
    }
    let sys = LinearGaussian {
        h: lam,
        f: params.a.clone(),
        q: params.sigma_eta(),
        r: params.sigma_eps(),
    };
    Ok((sys, y1))
}

pub fn kalman_filter(
    params: &SsmParams,
    panel: &YieldPanel,
    init_state: &DVector<f64>,
    init_cov: &DMatrix<f64>,
) -> Result<FilterOutput> {
    if init_state.len() != 3 || init_cov.shape() != (3, 3) {
        return Err(Error::arg("initial state must be 3-dimensional"));
    }
    if (init_cov - init_cov.transpose()).amax() > 1e-12 {
        return Err(Error::arg("initial covariance must be symmetric"));
    }
    let (sys, y1) = dns_system(params, panel)?;
    sys.filter(&y1, init_state, init_cov)
}

/// Filter from `X_{0|0} = 0` and the default initial covariance.
pub fn kalman_filter_default(params: &SsmParams, panel: &YieldPanel) -> Result<FilterOutput> {
    let p0 = default_initial_cov(&params.a, &params.sigma_eta());
    kalman_filter(params, panel, &DVector::zeros(3), &p0)
}

pub fn kalman_smoother(filter: &FilterOutput, params: &SsmParams) -> Result<SmootherOutput> {
    let sys = LinearGaussian {
        h: DMatrix::zeros(params.w.len(), 3),
        f: params.a.clone(),
        q: params.sigma_eta(),
        r: params.sigma_eps(),
    };
    sys.smooth(filter)
}

/// Smoothed factors `X_{t|T} + μ`, `T x 3`.
pub fn smoothed_factors(params: &SsmParams, panel: &YieldPanel) -> Result<DMatrix<f64>> {
    let filt = kalman_filter_default(params, panel)?;
    Ok(kalman_smoother(&filt, params)?.states_plus(&params.mu))
}

/// Log-likelihood at packed parameters; `-inf` where the model is invalid.
pub fn packed_loglik(v: &DVector<f64>, panel: &YieldPanel) -> f64 {
    let Ok(p) = SsmParams::unpack(v, panel.maturities().len()) else {
        return f64::NEG_INFINITY;
    };
    match kalman_filter_default(&p, panel) {
        Ok(f) if f.loglik.is_finite() => f.loglik,
        _ => f64::NEG_INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub params: SsmParams,
    pub filter: FilterOutput,
    pub converged: bool,
    pub iterations: usize,
    pub evals: usize,
    pub trace: Vec<TraceRow>,
}

impl MleFit {
    pub fn write_trace<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["iteration", "loglik", "first_order_optimality", "evals"])?;
        for r in &self.trace {
            wr.write_record([
                r.iteration.to_string(),
                (-r.objective).to_string(),
                r.grad_norm.to_string(),
                r.evals.to_string(),
            ])?;
        }
        wr.flush().map_err(|e| Error::io("<trace writer>", e))?;
        Ok(())
    }
}

/// Maximize the filter likelihood over the packed parameters by BFGS.
pub fn fit_mle(panel: &YieldPanel, init: &SsmParams, options: &BfgsOptions) -> Result<MleFit> {
    check_panel(init, panel)?;
    let m = panel.maturities().len();
    let x0 = init.pack();
    if !packed_loglik(&x0, panel).is_finite() {
        return Err(Error::arg(
            "log-likelihood is not finite at the initial parameters",
        ));
    }
    let obj = |v: &DVector<f64>| -packed_loglik(v, panel);
    let OptimResult {
        x,
        converged,
        iterations,
        evals,
        trace,
        ..
    } = minimize(&obj, &x0, options)?;
    let params = SsmParams::unpack(&x, m)?;
    let filter = kalman_filter_default(&params, panel)?;
    Ok(MleFit {
        params,
        filter,
        converged,
        iterations,
        evals,
        trace,
    })
}

/// Starting values from the two-step fit: cross-sectional factors, then VAR(1).
pub fn init_from_two_step(panel: &YieldPanel, lambda0: f64) -> Result<SsmParams> {
    let cs = cross_section(panel, lambda0)?;
    let var = fit_var_with(&cs.factors, 1, true, SigmaDenominator::DegreesOfFreedom)?;
    let mu = crate::linalg::column_means(&cs.factors.values);
    let z = var
        .sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::numeric("two-step VAR residual covariance is not positive definite"))?
        .unpack();
    let t = panel.len();
    let w = DVector::from_iterator(
        panel.maturities().len(),
        cs.residuals.column_iter().map(|c| {
            let mean = c.mean();
            let var = c.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
                / (t.saturating_sub(1)).max(1) as f64;
            var.sqrt().max(W_FLOOR)
        }),
    );
    let p = SsmParams {
        a: var.coeffs[0].clone(),
        mu,
        lambda: lambda0,
        z,
        w,
    };
    p.validate()?;
    Ok(p)
}

/// Factor path forecast `μ + A^h X_{T|T}` from the end of the filtered sample.
///
/// The covariance carries the filtered state uncertainty forward with the
/// transition noise, `P_{T+h} = A P_{T+h-1} A' + Z Z'`.
pub fn forecast_factors(params: &SsmParams, filter: &FilterOutput, h: usize) -> Result<PathForecast> {
    if h == 0 {
        return Err(Error::arg("forecast horizon must be at least 1"));
    }
    let (Some(x_last), Some(p_last)) = (filter.filtered_states.last(), filter.filtered_cov.last())
    else {
        return Err(Error::arg("filter output is empty"));
    };
    let a = &params.a;
    let at = a.transpose();
    let q = params.sigma_eta();
    let mut x = x_last.clone();
    let mut p = p_last.clone();
    let mut mean = DMatrix::zeros(h, 3);
    let mut covariance = Vec::with_capacity(h);
    for step in 0..h {
        x = a * &x;
        p = symmetrize(&(a * &p * &at + &q));
        mean.row_mut(step).copy_from(&(&x + &params.mu).transpose());
        covariance.push(p.clone());
    }
    Ok(PathForecast {
        names: vec!["level".into(), "slope".into(), "curvature".into()],
        horizons: (1..=h).collect(),
        mean,
        covariance,
        bands: Vec::new(),
    })
}
