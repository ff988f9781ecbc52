use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::ns_factors::FactorSeries;
use crate::var_engine::lagged_design;

/// Stacked VAR data in wide form, `F = G Φ + U`.
///
/// The long form `f = Ω A + η` (with `f = vec(F')`, `A = vec(Φ)` and
/// `Ω_t = I_k ⊗ g_t'`) is built on demand by [`VarDesign::long_form`].
#[derive(Debug, Clone, PartialEq)]
pub struct VarDesign {
    pub k: usize,
    pub p: usize,
    pub intercept: bool,
    pub names: Vec<String>,
    /// `T x k` responses (rows `p+1..` of the data).
    pub f: DMatrix<f64>,
    /// `T x r` regressors `[1, f_{t-1}', ..., f_{t-p}']`.
    pub g: DMatrix<f64>,
    /// Full data the design was built from, for prior scale estimates.
    pub data: DMatrix<f64>,
}

impl VarDesign {
    /// Regressors per equation.
    pub fn r(&self) -> usize {
        self.g.ncols()
    }

    /// Usable observations.
    pub fn t(&self) -> usize {
        self.f.nrows()
    }

    pub fn n_coefficients(&self) -> usize {
        self.k * self.r()
    }

    /// Row of `Φ` holding lag `lag` (1-based) of variable `j`.
    pub fn lag_row(&self, lag: usize, j: usize) -> usize {
        usize::from(self.intercept) + (lag - 1) * self.k + j
    }

    /// Last `p` observations, oldest first: the forecast origin.
    pub fn last_obs(&self) -> DMatrix<f64> {
        let n = self.data.nrows();
        self.data.rows(n - self.p, self.p).into_owned()
    }

    /// `(f, Ω)` with `f` of length `T k` and `Ω` of shape `T k x k r`.
    pub fn long_form(&self) -> (DVector<f64>, DMatrix<f64>) {
        let (t, k, r) = (self.t(), self.k, self.r());
        let f = DVector::from_iterator(t * k, self.f.transpose().iter().copied());
        let mut omega = DMatrix::zeros(t * k, k * r);
        for s in 0..t {
            for i in 0..k {
                omega
                    .view_mut((s * k + i, i * r), (1, r))
                    .copy_from(&self.g.row(s));
            }
        }
        (f, omega)
    }

    /// AR(1) residual variances of the underlying data.
    pub fn ar1_scales(&self) -> Result<DVector<f64>> {
        ar1_scales_of(&self.data)
    }
}

pub fn build_design(data: &FactorSeries, p: usize, intercept: bool) -> Result<VarDesign> {
    let (t, k) = data.values.shape();
    if p == 0 {
        return Err(Error::arg("lag order must be at least 1"));
    }
    if t <= p {
        return Err(Error::arg(format!(
            "{t} observations cannot support {p} lags"
        )));
    }
    let (f, g) = lagged_design(&data.values, p, intercept, p);
    Ok(VarDesign {
        k,
        p,
        intercept,
        names: data.names.clone(),
        f,
        g,
        data: data.values.clone(),
    })
}

/// Residual variance of an AR(1) with intercept fitted to each column.
pub fn fit_ar1_residual_scales(data: &FactorSeries) -> Result<DVector<f64>> {
    ar1_scales_of(&data.values)
}

fn ar1_scales_of(values: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (t, k) = values.shape();
    if t < 3 {
        return Err(Error::arg(format!(
            "AR(1) scale estimates need at least 3 observations, got {t}"
        )));
    }
    let mut out = DVector::zeros(k);
    for j in 0..k {
        let y = values.view((1, j), (t - 1, 1)).into_owned();
        let x = DMatrix::from_fn(t - 1, 2, |r, c| if c == 0 { 1.0 } else { values[(r, j)] });
        let resid = if x.column(1).iter().all(|v| *v == x[(0, 1)]) {
            // Constant regressor: the intercept alone explains the mean.
            y.add_scalar(-y.mean())
        } else {
            &y - &x * lstsq(&x, &y, "AR(1) regressors")?
        };
        out[j] = resid.norm_squared() / (t - 1 - 2).max(1) as f64;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{chain_rng, std_normal_matrix};

    #[test]
    fn desk_dimensions() {
        let data = FactorSeries::from_values(
            &["L", "S", "C"],
            DMatrix::from_fn(60, 3, |r, c| (r * 3 + c) as f64),
        )
        .unwrap();
        let d = build_design(&data, 13, true).unwrap();
        assert_eq!((d.r(), d.n_coefficients()), (40, 120));
        let names: Vec<String> = (0..7).map(|i| format!("v{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let data7 = FactorSeries::from_values(&refs, DMatrix::zeros(30, 7)).unwrap();
        assert_eq!(
            build_design(&data7, 13, true).unwrap().n_coefficients(),
            644
        );
    }

    #[test]
    fn tiny_design_by_hand() {
        let data =
            FactorSeries::from_values(&["y"], DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]))
                .unwrap();
        let d = build_design(&data, 1, false).unwrap();
        assert_eq!(d.g, DMatrix::from_column_slice(2, 1, &[1.0, 2.0]));
        assert_eq!(d.f, DMatrix::from_column_slice(2, 1, &[2.0, 3.0]));
        assert!(build_design(&data, 3, true).is_err());
    }

    #[test]
    fn long_and_wide_forms_agree() {
        let v = std_normal_matrix(&mut chain_rng(1), 12, 2);
        let d = build_design(&FactorSeries::from_values(&["a", "b"], v).unwrap(), 2, true).unwrap();
        let (f, omega) = d.long_form();
        assert_eq!(
            f,
            DVector::from_iterator(f.len(), d.f.transpose().iter().copied())
        );
        let phi = std_normal_matrix(&mut chain_rng(2), d.r(), 2);
        let a = DVector::from_column_slice(phi.as_slice());
        let wide = &d.g * &phi;
        let long = &omega * a;
        let wide_vec = DVector::from_iterator(long.len(), wide.transpose().iter().copied());
        assert!((long - wide_vec).amax() < 1e-12);
        for s in 0..d.t() {
            for i in 0..2 {
                assert_eq!(
                    omega.view((s * 2 + i, i * d.r()), (1, d.r())).into_owned(),
                    d.g.row(s).into_owned()
                );
            }
        }
    }

    #[test]
    fn ar1_scales() {
        let wn = std_normal_matrix(&mut chain_rng(3), 1000, 1);
        let s = fit_ar1_residual_scales(&FactorSeries::from_values(&["x"], wn).unwrap()).unwrap();
        assert!((s[0] - 1.0).abs() < 0.1);
        let mut ar = DMatrix::zeros(50, 1);
        ar[(0, 0)] = 4.0;
        for t in 1..50 {
            ar[(t, 0)] = 0.3 + 0.8 * ar[(t - 1, 0)];
        }
        let s = fit_ar1_residual_scales(&FactorSeries::from_values(&["x"], ar).unwrap()).unwrap();
        assert!(s[0] < 1e-20);
        let c = fit_ar1_residual_scales(
            &FactorSeries::from_values(&["x"], DMatrix::from_element(9, 1, 2.5)).unwrap(),
        )
        .unwrap();
        assert_eq!(c[0], 0.0);
    }
}
