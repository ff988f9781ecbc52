//! Out-of-sample scoring by mean squared forecast error.
//!
//! Forecasts are yield paths issued at the end of the training sample:
//! row `h - 1` of a forecast matrix is the prediction for `T + h`, and row
//! `h - 1` of the test panel is the realized value.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::data_io::YieldPanel;
use crate::error::{Error, Result};

/// Mean over rows of the squared errors, per column.
pub fn msfe(forecast: &DMatrix<f64>, actual: &DMatrix<f64>) -> Result<DVector<f64>> {
    if forecast.shape() != actual.shape() {
        return Err(Error::arg(format!(
            "forecast is {}x{} but actual is {}x{}",
            forecast.nrows(),
            forecast.ncols(),
            actual.nrows(),
            actual.ncols()
        )));
    }
    if forecast.nrows() == 0 {
        return Err(Error::arg("no evaluation points"));
    }
    let n = forecast.nrows() as f64;
    Ok(DVector::from_fn(forecast.ncols(), |j, _| {
        forecast
            .column(j)
            .iter()
            .zip(actual.column(j).iter())
            .map(|(f, a)| (f - a) * (f - a))
            .sum::<f64>()
            / n
    }))
}

/// Which test points enter the MSFE at horizon `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    /// The single point `T + h`.
    #[default]
    Point,
    /// Every point `T + 1, ..., T + h`.
    PathAverage,
}

/// A method's yield path forecast from the end of the training sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodForecast {
    pub name: String,
    /// `H x M`.
    pub path: DMatrix<f64>,
}

/// Provenance recorded with a report.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalMeta {
    pub train_end: String,
    pub test_start: String,
    pub seeds: Vec<u64>,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub methods: Vec<String>,
    pub horizons: Vec<usize>,
    pub maturities: Vec<u32>,
    pub mode: EvalMode,
    /// Per method, `n_h x M`.
    pub msfe: Vec<DMatrix<f64>>,
    /// Per method, forecast-error mean and sd by maturity over `T+1..T+max h`.
    pub error_mean: Vec<DVector<f64>>,
    pub error_sd: Vec<DVector<f64>>,
    pub meta: EvalMeta,
}

/// Score each method at each horizon against the test panel.
pub fn evaluate_horizons(
    methods: &[MethodForecast],
    test: &YieldPanel,
    horizons: &[usize],
    mode: EvalMode,
) -> Result<EvalReport> {
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(Error::arg(
            "evaluation horizons must be positive and non-empty",
        ));
    }
    let h_max = *horizons.iter().max().expect("non-empty");
    if h_max > test.len() {
        return Err(Error::arg(format!(
            "horizon {h_max} exceeds the {}-month test sample",
            test.len()
        )));
    }
    let m = test.maturities().len();
    let actual = test.yields();
    let mut out = EvalReport {
        methods: Vec::new(),
        horizons: horizons.to_vec(),
        maturities: test.maturities().to_vec(),
        mode,
        msfe: Vec::new(),
        error_mean: Vec::new(),
        error_sd: Vec::new(),
        meta: EvalMeta::default(),
    };
    for method in methods {
        if method.path.ncols() != m || method.path.nrows() < h_max {
            return Err(Error::arg(format!(
                "forecast `{}` is {}x{}, need at least {h_max} rows and {m} maturities",
                method.name,
                method.path.nrows(),
                method.path.ncols()
            )));
        }
        let mut table = DMatrix::zeros(horizons.len(), m);
        for (hi, &h) in horizons.iter().enumerate() {
            let (start, n) = match mode {
                EvalMode::Point => (h - 1, 1),
                EvalMode::PathAverage => (0, h),
            };
            let v = msfe(
                &method.path.rows(start, n).into_owned(),
                &actual.rows(start, n).into_owned(),
            )?;
            table.row_mut(hi).copy_from(&v.transpose());
        }
        let err = method.path.rows(0, h_max) - actual.rows(0, h_max);
        let mean = DVector::from_fn(m, |j, _| err.column(j).mean());
        let sd = DVector::from_fn(m, |j, _| {
            if h_max < 2 {
                0.0
            } else {
                let mu = mean[j];
                (err.column(j)
                    .iter()
                    .map(|e| (e - mu) * (e - mu))
                    .sum::<f64>()
                    / (h_max - 1) as f64)
                    .sqrt()
            }
        });
        out.methods.push(method.name.clone());
        out.msfe.push(table);
        out.error_mean.push(mean);
        out.error_sd.push(sd);
    }
    Ok(out)
}

/// Re-estimate at every origin and average squared errors across origins.
///
/// `forecaster` gets the panel up to (not including) the origin and returns
/// an `H x M` path. Origins run from `min_train` to the last one whose
/// longest horizon is still observed.
pub fn rolling_evaluation<F>(
    panel: &YieldPanel,
    min_train: usize,
    horizons: &[usize],
    forecaster: F,
) -> Result<DMatrix<f64>>
where
    F: Fn(&YieldPanel) -> Result<DMatrix<f64>>,
{
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(Error::arg(
            "evaluation horizons must be positive and non-empty",
        ));
    }
    let h_max = *horizons.iter().max().expect("non-empty");
    if min_train + h_max > panel.len() {
        return Err(Error::arg(format!(
            "{} observations leave no origin with {min_train} training months and horizon {h_max}",
            panel.len()
        )));
    }
    let m = panel.maturities().len();
    let mut acc = DMatrix::zeros(horizons.len(), m);
    let origins = min_train..=panel.len() - h_max;
    let n = origins.clone().count();
    for origin in origins {
        let path = forecaster(&panel.slice(0, origin))?;
        if path.nrows() < h_max || path.ncols() != m {
            return Err(Error::arg(
                "rolling forecaster returned a path of the wrong shape",
            ));
        }
        for (hi, &h) in horizons.iter().enumerate() {
            for j in 0..m {
                let e = path[(h - 1, j)] - panel.yields()[(origin + h - 1, j)];
                acc[(hi, j)] += e * e;
            }
        }
    }
    Ok(acc / n as f64)
}

impl EvalReport {
    fn header<W: Write>(&self, w: &mut W) -> Result<()> {
        let io = |e| Error::io("<report writer>", e);
        let seeds: Vec<String> = self.meta.seeds.iter().map(u64::to_string).collect();
        let mode = match self.mode {
            EvalMode::Point => "point",
            EvalMode::PathAverage => "path_average",
        };
        writeln!(w, "# train_end = {}", self.meta.train_end).map_err(io)?;
        writeln!(w, "# test_start = {}", self.meta.test_start).map_err(io)?;
        writeln!(w, "# seeds = {}", seeds.join(",")).map_err(io)?;
        writeln!(w, "# config_hash = {}", self.meta.config_hash).map_err(io)?;
        writeln!(w, "# mode = {mode}").map_err(io)?;
        Ok(())
    }

    /// Long table: `method, horizon, maturity, msfe`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        self.header(&mut w)?;
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["method", "horizon", "maturity", "msfe"])?;
        for (mi, name) in self.methods.iter().enumerate() {
            for (hi, h) in self.horizons.iter().enumerate() {
                for (j, mat) in self.maturities.iter().enumerate() {
                    wr.write_record([
                        name.clone(),
                        h.to_string(),
                        mat.to_string(),
                        self.msfe[mi][(hi, j)].to_string(),
                    ])?;
                }
            }
        }
        wr.flush().map_err(|e| Error::io("<report writer>", e))?;
        Ok(())
    }

    /// One method as maturities by horizons, the layout of a printed MSFE table.
    pub fn write_method_table<W: Write>(&self, method: usize, mut w: W) -> Result<()> {
        self.header(&mut w)?;
        let mut wr = csv::Writer::from_writer(w);
        let mut head = vec!["maturity".to_string()];
        head.extend(self.horizons.iter().map(|h| format!("h{h}")));
        wr.write_record(&head)?;
        for (j, mat) in self.maturities.iter().enumerate() {
            let mut rec = vec![mat.to_string()];
            rec.extend((0..self.horizons.len()).map(|hi| self.msfe[method][(hi, j)].to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(|e| Error::io("<report writer>", e))?;
        Ok(())
    }

    /// Forecast-error means and sds by maturity for every method.
    pub fn write_error_summary<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut head = vec!["maturity".to_string()];
        for name in &self.methods {
            head.push(format!("{name}_mean"));
            head.push(format!("{name}_sd"));
        }
        wr.write_record(&head)?;
        for (j, mat) in self.maturities.iter().enumerate() {
            let mut rec = vec![mat.to_string()];
            for mi in 0..self.methods.len() {
                rec.push(self.error_mean[mi][j].to_string());
                rec.push(self.error_sd[mi][j].to_string());
            }
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(|e| Error::io("<report writer>", e))?;
        Ok(())
    }
}
