//! Nelson-Siegel loadings, decay-rate calibration and factor extraction.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::data_io::{MonthStamp, YieldPanel};
use crate::error::{Error, Result};
use crate::linalg::{column_means, sample_covariance, LeastSquares};

/// Below this value of `lambda * tau` the loadings use series expansions.
const SMALL_X: f64 = 1e-6;

/// Slope loading `(1 - e^{-x}) / x`.
pub fn slope_loading(x: f64) -> f64 {
    if x < SMALL_X {
        1.0 - x / 2.0 + x * x / 6.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// Curvature loading `(1 - e^{-x}) / x - e^{-x}`.
pub fn curvature_loading(x: f64) -> f64 {
    if x < SMALL_X {
        x / 2.0 - x * x / 3.0
    } else {
        -(-x).exp_m1() / x - (-x).exp()
    }
}

/// Derivative of [`curvature_loading`] with respect to `x`.
fn curvature_slope(x: f64) -> f64 {
    if x < SMALL_X {
        return 0.5 - 2.0 * x / 3.0;
    }
    let e = (-x).exp();
    (x * e + (-x).exp_m1()) / (x * x) + e
}

/// Loading matrix `M x 3` for decay rate `lambda` (per month).
#[derive(Debug, Clone, PartialEq)]
pub struct NsLoadings {
    pub lambda: f64,
    pub maturities: Vec<f64>,
    pub matrix: DMatrix<f64>,
}

impl NsLoadings {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["maturity", "level", "slope", "curvature"])?;
        for (i, tau) in self.maturities.iter().enumerate() {
            let row = self.matrix.row(i);
            wr.write_record([
                tau.to_string(),
                row[0].to_string(),
                row[1].to_string(),
                row[2].to_string(),
            ])?;
        }
        wr.flush().map_err(|e| Error::io("<loadings writer>", e))?;
        Ok(())
    }
}

pub fn ns_loadings(lambda: f64, maturities: &[f64]) -> Result<NsLoadings> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::arg(format!(
            "decay rate must be positive, got {lambda}"
        )));
    }
    if let Some(t) = maturities.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::arg(format!("maturities must be positive, got {t}")));
    }
    let matrix = DMatrix::from_fn(maturities.len(), 3, |i, j| {
        let x = lambda * maturities[i];
        match j {
            0 => 1.0,
            1 => slope_loading(x),
            _ => curvature_loading(x),
        }
    });
    Ok(NsLoadings {
        lambda,
        maturities: maturities.to_vec(),
        matrix,
    })
}

/// The unique positive root of `e^x = 1 + x + x^2`, where the curvature
/// loading peaks as a function of `x = lambda * tau`.
pub fn curvature_peak() -> Result<f64> {
    // h(x) = ln(1 + x + x^2) - x is positive on (0, x*) and negative beyond.
    let h = |x: f64| (1.0 + x + x * x).ln() - x;
    let dh = |x: f64| (1.0 + 2.0 * x) / (1.0 + x + x * x) - 1.0;
    let (mut lo, mut hi) = (1.0, 3.0);
    let mut x = 1.8;
    for _ in 0..100 {
        let fx = h(x);
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = fx / dh(x);
        let mut next = x - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::numeric(
        "curvature peak root-finder did not converge",
    ))
}

/// Decay rate whose curvature loading peaks at `target_maturity` months.
pub fn solve_lambda(target_maturity: f64) -> Result<f64> {
    if !(target_maturity > 0.0 && target_maturity.is_finite()) {
        return Err(Error::arg(format!(
            "target maturity must be positive, got {target_maturity}"
        )));
    }
    let x = curvature_peak()?;
    let lambda = x / target_maturity;
    // d/dtau of the curvature loading at the target.
    let resid = lambda * curvature_slope(lambda * target_maturity);
    if resid.abs() >= 1e-10 {
        return Err(Error::numeric(format!(
            "stationarity residual {resid:e} too large"
        )));
    }
    Ok(lambda)
}

/// Dated, named multivariate series used as VAR data.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSeries {
    pub dates: Vec<MonthStamp>,
    pub names: Vec<String>,
    /// `T x k`.
    pub values: DMatrix<f64>,
}

impl FactorSeries {
    pub fn new(dates: Vec<MonthStamp>, names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != dates.len() || values.ncols() != names.len() {
            return Err(Error::arg(format!(
                "factor series shape {}x{} does not match {} dates and {} names",
                values.nrows(),
                values.ncols(),
                dates.len(),
                names.len()
            )));
        }
        if dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Data(
                "factor series dates must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            dates,
            names,
            values,
        })
    }

    /// Undated series; dates count up from 2000-01.
    pub fn from_values(names: &[&str], values: DMatrix<f64>) -> Result<Self> {
        let dates = month_range(
            MonthStamp {
                year: 2000,
                month: 1,
            },
            values.nrows(),
        );
        Self::new(dates, names.iter().map(|s| s.to_string()).collect(), values)
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn k(&self) -> usize {
        self.values.ncols()
    }

    /// Append columns on the right (for macro-augmented VARs).
    pub fn with_columns(&self, names: &[String], values: &DMatrix<f64>) -> Result<Self> {
        if values.nrows() != self.len() {
            return Err(Error::arg("appended columns must have one row per date"));
        }
        let mut all = DMatrix::zeros(self.len(), self.k() + values.ncols());
        all.columns_mut(0, self.k()).copy_from(&self.values);
        all.columns_mut(self.k(), values.ncols()).copy_from(values);
        let mut n = self.names.clone();
        n.extend(names.iter().cloned());
        Self::new(self.dates.clone(), n, all)
    }

    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            dates: self.dates[start..end].to_vec(),
            names: self.names.clone(),
            values: self.values.rows(start, end - start).into_owned(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["date".to_string()];
        header.extend(self.names.iter().cloned());
        wr.write_record(&header)?;
        for (t, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.to_string()];
            rec.extend(self.values.row(t).iter().map(|v| v.to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(|e| Error::io("<factor writer>", e))?;
        Ok(())
    }

    /// Lines starting with `#` are skipped.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.get(0) != Some("date") {
            return Err(Error::Schema(
                "factor CSV must start with a `date` column".into(),
            ));
        }
        let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut dates = Vec::new();
        let mut data = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            dates.push(rec.get(0).unwrap_or("").parse::<MonthStamp>()?);
            for (j, cell) in rec.iter().skip(1).enumerate() {
                data.push(cell.parse::<f64>().map_err(|_| {
                    Error::Data(format!(
                        "line {}, column `{}`: cannot parse `{cell}`",
                        i + 2,
                        names[j]
                    ))
                })?);
            }
        }
        let values = DMatrix::from_row_slice(dates.len(), names.len(), &data);
        Self::new(dates, names, values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }
}

pub(crate) fn month_range(start: MonthStamp, n: usize) -> Vec<MonthStamp> {
    std::iter::successors(Some(start), |d| Some(d.next()))
        .take(n)
        .collect()
}

/// Cross-sectional fit with the per-date residuals kept.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSectionFit {
    pub factors: FactorSeries,
    pub loadings: NsLoadings,
    /// `T x M` fitted-minus-observed residuals `y_t - Λ f_t`.
    pub residuals: DMatrix<f64>,
}

/// Per-date least-squares level, slope and curvature for a fixed `lambda`.
pub fn fit_cross_section(panel: &YieldPanel, lambda: f64) -> Result<FactorSeries> {
    Ok(cross_section(panel, lambda)?.factors)
}

pub fn cross_section(panel: &YieldPanel, lambda: f64) -> Result<CrossSectionFit> {
    if panel.maturities().len() < 3 {
        return Err(Error::arg(
            "cross-sectional fit needs at least three maturities",
        ));
    }
    let loadings = ns_loadings(lambda, &panel.maturities_f64())?;
    let ls = LeastSquares::new(&loadings.matrix, "Nelson-Siegel loading matrix")?;
    // One factorization serves every date: columns of Y' are the cross sections.
    let yt = panel.yields().transpose();
    let f = ls.solve(&yt).transpose();
    let residuals = panel.yields() - &f * loadings.matrix.transpose();
    let factors = FactorSeries::new(
        panel.dates().to_vec(),
        vec!["L".into(), "S".into(), "C".into()],
        f,
    )?;
    Ok(CrossSectionFit {
        factors,
        loadings,
        residuals,
    })
}

/// Level `y(120)`, slope `y(3) - y(120)`, curvature `2 y(24) - y(120) - y(3)`.
pub fn empirical_proxies(panel: &YieldPanel) -> Result<FactorSeries> {
    let col = |m: u32| {
        panel
            .maturity_index(m)
            .map(|i| panel.yields().column(i).into_owned())
            .ok_or_else(|| Error::arg(format!("empirical proxies need the {m}-month yield")))
    };
    let (y3, y24, y120) = (col(3)?, col(24)?, col(120)?);
    let mut v = DMatrix::zeros(panel.len(), 3);
    v.set_column(0, &y120);
    v.set_column(1, &(&y3 - &y120));
    v.set_column(2, &(&y24 * 2.0 - &y120 - &y3));
    FactorSeries::new(
        panel.dates().to_vec(),
        vec!["level".into(), "slope".into(), "curvature".into()],
        v,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaResult {
    pub means: DVector<f64>,
    /// Column scales divided out before the decomposition (all ones unless standardized).
    pub scales: DVector<f64>,
    /// `M x k`, orthonormal columns.
    pub components: DMatrix<f64>,
    /// `T x k`.
    pub scores: DMatrix<f64>,
    /// Share of total variance per component, descending.
    pub explained: Vec<f64>,
    /// All `M` eigenvalues of the sample covariance, descending.
    pub eigenvalues: Vec<f64>,
}

/// Principal components of the demeaned columns of `data`.
pub fn pca(data: &DMatrix<f64>, k: usize) -> Result<PcaResult> {
    pca_with(data, k, false)
}

/// As [`pca`], optionally scaling each column to unit sample variance first.
pub fn pca_with(data: &DMatrix<f64>, k: usize, standardize: bool) -> Result<PcaResult> {
    let (t, m) = data.shape();
    if k == 0 || k > t.min(m) {
        return Err(Error::arg(format!(
            "component count {k} must lie in 1..={}",
            t.min(m)
        )));
    }
    let means = column_means(data);
    let mut x = data.clone();
    for (j, mut c) in x.column_iter_mut().enumerate() {
        c.add_scalar_mut(-means[j]);
    }
    let mut scales = DVector::from_element(m, 1.0);
    if standardize {
        for (j, mut c) in x.column_iter_mut().enumerate() {
            let sd = (c.norm_squared() / (t.saturating_sub(1)).max(1) as f64).sqrt();
            if sd > 0.0 {
                c /= sd;
                scales[j] = sd;
            }
        }
    }
    let cov = sample_covariance(&x);
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();

    let mut components = DMatrix::zeros(m, k);
    for (c, &i) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v.neg_mut();
        }
        components.set_column(c, &v);
    }
    let scores = &x * &components;
    let explained = eigenvalues
        .iter()
        .take(k)
        .map(|l| if total > 0.0 { l / total } else { 0.0 })
        .collect();
    Ok(PcaResult {
        means,
        scales,
        components,
        scores,
        explained,
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{correlation, max_abs_diff};
    use proptest::prelude::*;

    const MATS: [f64; 10] = [3.0, 6.0, 12.0, 24.0, 36.0, 60.0, 84.0, 120.0, 240.0, 360.0];

    fn panel_from(factors: &DMatrix<f64>, lambda: f64, mats: &[u32]) -> YieldPanel {
        let mf: Vec<f64> = mats.iter().map(|&m| m as f64).collect();
        let l = ns_loadings(lambda, &mf).unwrap();
        let y = factors * l.matrix.transpose();
        YieldPanel::new(
            month_range(
                MonthStamp {
                    year: 1990,
                    month: 1,
                },
                factors.nrows(),
            ),
            mats.to_vec(),
            y,
        )
        .unwrap()
    }

    #[test]
    fn loadings_match_closed_form() {
        // Reference values evaluated independently in extended precision.
        let l = ns_loadings(0.0598, &[120.0]).unwrap();
        let x: f64 = 0.0598 * 120.0;
        let c2 = (1.0 - (-x).exp()) / x;
        assert!((l.matrix[(0, 1)] - c2).abs() < 1e-15);
        assert!((l.matrix[(0, 1)] - 0.139_246_833_805_045_3).abs() < 1e-14);
        assert!((l.matrix[(0, 2)] - 0.138_482_113_190_050_5).abs() < 1e-14);
        assert!(l.matrix.column(0).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn series_branch_is_continuous() {
        for x in [1e-7, 5e-7, 9.99e-7] {
            let direct2 = (1.0 - (-x as f64).exp()) / x;
            assert!((slope_loading(x) - direct2).abs() < 1e-9);
            assert!((curvature_loading(x) - (direct2 - (-x as f64).exp())).abs() < 1e-9);
        }
        let l = ns_loadings(1e-9, &[1.0]).unwrap();
        assert!((l.matrix[(0, 1)] - 1.0).abs() < 1e-9);
        assert!(l.matrix[(0, 2)].abs() < 1e-9);
    }

    #[test]
    fn loading_shapes() {
        let taus: Vec<f64> = (1..=400).map(|t| t as f64).collect();
        let l = ns_loadings(0.0598, &taus).unwrap();
        let c2: Vec<f64> = l.matrix.column(1).iter().copied().collect();
        let c3: Vec<f64> = l.matrix.column(2).iter().copied().collect();
        assert!(c2.windows(2).all(|w| w[1] < w[0]));
        assert!(c2.iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(c3.iter().all(|&v| v >= 0.0));
        let imax = (0..c3.len())
            .max_by(|&a, &b| c3[a].total_cmp(&c3[b]))
            .unwrap();
        assert!(imax > 0 && imax < c3.len() - 1);
        assert!(c3[..imax].windows(2).all(|w| w[1] > w[0]));
        assert!(c3[imax..].windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn bad_arguments() {
        assert!(ns_loadings(0.0, &[1.0]).is_err());
        assert!(ns_loadings(0.1, &[0.0]).is_err());
        assert!(solve_lambda(-1.0).is_err());
    }

    #[test]
    fn solve_lambda_thirty_months() {
        let l = solve_lambda(30.0).unwrap();
        assert!((l - 0.0598).abs() < 5e-4, "{l}");
        assert!((curvature_peak().unwrap() - 1.793_282_132_900_761).abs() < 1e-13);
    }

    #[test]
    fn solve_lambda_scales_inversely() {
        for tau in [5.0, 28.58, 30.0, 97.0] {
            let a = solve_lambda(tau).unwrap();
            let b = solve_lambda(2.0 * tau).unwrap();
            assert!((b - a / 2.0).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn argmax_round_trip(tau in 1.0f64..400.0) {
            let lambda = solve_lambda(tau).unwrap();
            // Golden-section search for the maximizer over tau.
            let f = |t: f64| curvature_loading(lambda * t);
            let (mut a, mut b) = (tau / 4.0, tau * 4.0);
            let g = (5f64.sqrt() - 1.0) / 2.0;
            while b - a > 1e-9 * tau {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if f(c) > f(d) { b = d } else { a = c }
            }
            // The loading is flat at the peak; bound by the attainable resolution.
            prop_assert!(((a + b) / 2.0 - tau).abs() < 1e-6 * tau.max(1.0) * 10.0);
        }

        #[test]
        fn level_shift_equivariance(c in -5.0f64..5.0, seed in 0u64..50) {
            let t = 20;
            let f = DMatrix::from_fn(t, 3, |r, j| ((r * 7 + j * 3 + seed as usize) % 11) as f64 / 3.0 - 1.0);
            let clean = panel_from(&f, 0.0598, &[3, 6, 12, 24, 60, 120]);
            // Perturb so the fit has nonzero residuals.
            let noisy = clean.yields().map(|v| v + (v * 13.0).sin() * 0.01);
            let base_panel = YieldPanel::new(clean.dates().to_vec(), clean.maturities().to_vec(), noisy.clone()).unwrap();
            let shifted_panel = YieldPanel::new(clean.dates().to_vec(), clean.maturities().to_vec(), noisy.map(|v| v + c)).unwrap();
            let base = fit_cross_section(&base_panel, 0.0598).unwrap();
            let shifted = fit_cross_section(&shifted_panel, 0.0598).unwrap();
            for r in 0..t {
                prop_assert!((shifted.values[(r, 0)] - base.values[(r, 0)] - c).abs() < 1e-9);
                prop_assert!((shifted.values[(r, 1)] - base.values[(r, 1)]).abs() < 1e-9);
                prop_assert!((shifted.values[(r, 2)] - base.values[(r, 2)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cross_section_recovers_noiseless_factors() {
        let f = DMatrix::from_fn(5, 3, |_, j| [5.0, -2.0, 1.0][j]);
        let p = panel_from(&f, 0.0598, &[3, 6, 12, 24, 36, 60, 84, 120, 240, 360]);
        let fit = cross_section(&p, 0.0598).unwrap();
        assert!(max_abs_diff(&fit.factors.values, &f) < 1e-10);
        assert!(fit.residuals.amax() < 1e-10);
    }

    #[test]
    fn square_loadings_interpolate_exactly() {
        let y = DMatrix::from_row_slice(2, 3, &[1.0, 3.0, 2.0, 4.0, 4.5, 4.9]);
        let p = YieldPanel::new(
            month_range(
                MonthStamp {
                    year: 2000,
                    month: 1,
                },
                2,
            ),
            vec![3, 24, 120],
            y,
        )
        .unwrap();
        let fit = cross_section(&p, 0.0598).unwrap();
        assert!(fit.residuals.amax() < 1e-12);
    }

    #[test]
    fn cross_section_recovers_factor_path() {
        // Factor path from a deterministic recursion; yields built by the loadings formula.
        let t = 60;
        let mut f = DMatrix::zeros(t, 3);
        let mut s = [6.0, -1.5, 0.5];
        for r in 0..t {
            s = [
                0.99 * s[0] + 0.05 * (r as f64 * 0.3).sin(),
                0.95 * s[1] + 0.1 * (r as f64 * 0.7).cos(),
                0.9 * s[2] - 0.08 * (r as f64 * 1.1).sin(),
            ];
            for j in 0..3 {
                f[(r, j)] = s[j];
            }
        }
        let mats: Vec<u32> = MATS.iter().map(|&m| m as u32).collect();
        let p = panel_from(&f, 0.0609, &mats);
        let fit = fit_cross_section(&p, 0.0609).unwrap();
        assert!(max_abs_diff(&fit.values, &f) < 1e-8);
    }

    #[test]
    fn cross_section_requires_three_maturities() {
        let p = YieldPanel::new(
            month_range(
                MonthStamp {
                    year: 2000,
                    month: 1,
                },
                2,
            ),
            vec![3, 6],
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        assert!(matches!(
            fit_cross_section(&p, 0.06),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn proxies_hand_arithmetic() {
        let y = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 4.0, 4.0]);
        let p = YieldPanel::new(
            month_range(
                MonthStamp {
                    year: 2000,
                    month: 1,
                },
                2,
            ),
            vec![3, 24, 120],
            y,
        )
        .unwrap();
        let e = empirical_proxies(&p).unwrap();
        assert_eq!(
            e.values.row(0).iter().copied().collect::<Vec<_>>(),
            vec![3.0, -2.0, 0.0]
        );
        assert_eq!(
            e.values.row(1).iter().copied().collect::<Vec<_>>(),
            vec![4.0, 0.0, 0.0]
        );
        let p2 = p.select_maturities(&[3, 24]).unwrap();
        assert!(empirical_proxies(&p2).is_err());
    }

    #[test]
    fn proxies_track_fitted_level() {
        let t = 80;
        let f = DMatrix::from_fn(t, 3, |r, j| match j {
            0 => 5.0 + (r as f64 / 9.0).sin(),
            1 => -1.0 + 0.5 * (r as f64 / 5.0).cos(),
            _ => 0.3 * (r as f64 / 3.0).sin(),
        });
        let mats: Vec<u32> = MATS.iter().map(|&m| m as u32).collect();
        let p = panel_from(&f, 0.0598, &mats);
        let e = empirical_proxies(&p).unwrap();
        let fit = fit_cross_section(&p, 0.0598).unwrap();
        let a: Vec<f64> = e.values.column(0).iter().copied().collect();
        let b: Vec<f64> = fit.values.column(0).iter().copied().collect();
        assert!(correlation(&a, &b) > 0.9);
    }

    #[test]
    fn pca_rank_one_and_hand_case() {
        let d = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
        let r = pca(&d, 2).unwrap();
        assert!((r.explained[0] - 1.0).abs() < 1e-12 && r.explained[1].abs() < 1e-12);
        assert!((r.components[(0, 0)] - 1.0).abs() < 1e-12);

        let dir = [0.6, 0.8, 0.0];
        let d = DMatrix::from_fn(7, 3, |r, j| (r as f64 - 2.0) * dir[j]);
        let r = pca(&d, 3).unwrap();
        assert!((r.explained[0] - 1.0).abs() < 1e-12);
        assert!(r.explained[1].abs() < 1e-12);
        assert!(pca(&d, 0).is_err() && pca(&d, 4).is_err());
    }

    proptest! {
        #[test]
        fn pca_invariants(vals in proptest::collection::vec(-3.0f64..3.0, 40), k in 1usize..=4) {
            let d = DMatrix::from_row_slice(10, 4, &vals);
            let r = pca(&d, k).unwrap();
            let ctc = r.components.transpose() * &r.components;
            prop_assert!(max_abs_diff(&ctc, &DMatrix::identity(k, k)) < 1e-10);
            prop_assert!(r.explained.windows(2).all(|w| w[0] >= w[1] - 1e-15));
            prop_assert!(r.explained.iter().all(|&e| (0.0..=1.0 + 1e-12).contains(&e)));
            for c in r.scores.column_iter() {
                prop_assert!(c.sum().abs() / 10.0 < 1e-10);
            }
            let cov = sample_covariance(&r.scores);
            for i in 0..k { for j in 0..k { if i != j { prop_assert!(cov[(i, j)].abs() < 1e-8); } } }
            for c in r.components.column_iter() {
                let m = c.iamax();
                prop_assert!(c[m] > 0.0);
            }
            let full = pca(&d, 4).unwrap();
            prop_assert!((full.explained.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn factor_csv_round_trip() {
        let fs = FactorSeries::from_values(
            &["L", "S"],
            DMatrix::from_row_slice(2, 2, &[0.1, 1.0 / 3.0, -2.5, 1e-300]),
        )
        .unwrap();
        let mut buf = Vec::new();
        fs.write_csv(&mut buf).unwrap();
        assert_eq!(FactorSeries::read_csv(buf.as_slice()).unwrap(), fs);
    }
}
