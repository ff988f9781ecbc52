//! Loading, validation, splitting and description of the yield panel.
//!
//! Input files are UTF-8 CSV with a `.` decimal separator and ISO-8601 month
//! stamps (`YYYY-MM`; a trailing `-DD` day is accepted and ignored). Which
//! columns hold the date, the yields and any macro series is described by a
//! [`PanelSchema`], itself written in the flat key-value format of
//! [`crate::kv`]:
//!
//! ```text
//! date = DATE
//! yield.3 = DGS3MO
//! yield.120 = DGS10
//! macro.unrate = UNRATE
//! missing = interpolate
//! ```

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kv::KvConfig;

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthStamp {
    pub year: i32,
    pub month: u8,
}

impl MonthStamp {
    pub fn new(year: i32, month: u8) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Data(format!("month {month} out of range")));
        }
        Ok(Self { year, month })
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            Self {
                year: self.year + 1,
                month: 1,
            }
        } else {
            Self {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    /// Months elapsed from `self` to `other`.
    pub fn months_until(self, other: Self) -> i64 {
        (other.year as i64 - self.year as i64) * 12 + (other.month as i64 - self.month as i64)
    }
}

impl fmt::Display for MonthStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthStamp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut parts = s.split('-');
        let bad = || Error::Data(format!("`{s}` is not a YYYY-MM month stamp"));
        let year: i32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let month_str = parts.next().ok_or_else(bad)?;
        if month_str.len() != 2 {
            return Err(bad());
        }
        let month: u8 = month_str.parse().map_err(|_| bad())?;
        if let Some(day) = parts.next() {
            day.parse::<u8>().map_err(|_| bad())?;
        }
        if parts.next().is_some() {
            return Err(bad());
        }
        MonthStamp::new(year, month).map_err(|_| bad())
    }
}

/// What to do with empty or `NA` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingPolicy {
    #[default]
    Reject,
    /// Linear interpolation across time within a column. Gaps at either end
    /// of a column cannot be interpolated and are still rejected.
    Interpolate,
}

impl FromStr for MissingPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "reject" => Ok(Self::Reject),
            "interpolate" => Ok(Self::Interpolate),
            other => Err(Error::Schema(format!(
                "unknown missing-value policy `{other}` (expected reject or interpolate)"
            ))),
        }
    }
}

/// Mapping from logical roles to CSV column names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelSchema {
    pub date_column: String,
    /// `(maturity in months, column name)`; sorted by maturity on load.
    pub yields: Vec<(u32, String)>,
    /// `(variable name, column name)` in output order.
    pub macros: Vec<(String, String)>,
    pub missing: MissingPolicy,
}

impl PanelSchema {
    pub fn from_kv(cfg: &KvConfig) -> Result<Self> {
        let date_column = cfg.get("date").unwrap_or("date").to_string();
        let mut yields = Vec::new();
        for (m, col) in cfg.with_prefix("yield") {
            let months: u32 = m.parse().map_err(|_| {
                Error::Schema(format!("`yield.{m}`: maturity must be whole months"))
            })?;
            yields.push((months, col.to_string()));
        }
        let macros = cfg
            .with_prefix("macro")
            .map(|(name, col)| (name.to_string(), col.to_string()))
            .collect();
        let missing = cfg
            .get("missing")
            .map(str::parse)
            .transpose()?
            .unwrap_or_default();
        if yields.is_empty() {
            return Err(Error::Schema(
                "schema maps no yield columns (`yield.<months> = column`)".into(),
            ));
        }
        Ok(Self {
            date_column,
            yields,
            macros,
            missing,
        })
    }

    /// Schema for a CSV whose date column is `date` and whose yield columns are
    /// headed by their maturity in months; `macro_columns` are taken verbatim.
    pub fn infer(headers: &[&str], macro_columns: &[&str]) -> Result<Self> {
        let date_column = headers
            .iter()
            .find(|h| h.eq_ignore_ascii_case("date"))
            .ok_or_else(|| Error::Schema("no `date` column".into()))?
            .to_string();
        let yields: Vec<(u32, String)> = headers
            .iter()
            .filter_map(|h| h.trim().parse::<u32>().ok().map(|m| (m, h.to_string())))
            .collect();
        if yields.is_empty() {
            return Err(Error::Schema(
                "no columns headed by a maturity in months".into(),
            ));
        }
        let macros = macro_columns
            .iter()
            .map(|c| (c.to_string(), c.to_string()))
            .collect();
        Ok(Self {
            date_column,
            yields,
            macros,
            missing: MissingPolicy::Reject,
        })
    }

    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        kv.set("date", self.date_column.clone());
        for (m, c) in &self.yields {
            kv.set(format!("yield.{m}"), c.clone());
        }
        for (n, c) in &self.macros {
            kv.set(format!("macro.{n}"), c.clone());
        }
        kv.set(
            "missing",
            match self.missing {
                MissingPolicy::Reject => "reject",
                MissingPolicy::Interpolate => "interpolate",
            },
        );
        kv
    }
}

/// Dated matrix of yields (percent per annum) with optional macro columns.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldPanel {
    dates: Vec<MonthStamp>,
    maturities: Vec<u32>,
    yields: DMatrix<f64>,
    macro_names: Vec<String>,
    macros: DMatrix<f64>,
}

impl YieldPanel {
    pub fn new(dates: Vec<MonthStamp>, maturities: Vec<u32>, yields: DMatrix<f64>) -> Result<Self> {
        let t = dates.len();
        Self::with_macros(dates, maturities, yields, Vec::new(), DMatrix::zeros(t, 0))
    }

    pub fn with_macros(
        dates: Vec<MonthStamp>,
        maturities: Vec<u32>,
        yields: DMatrix<f64>,
        macro_names: Vec<String>,
        macros: DMatrix<f64>,
    ) -> Result<Self> {
        if yields.nrows() != dates.len() || macros.nrows() != dates.len() {
            return Err(Error::Data(format!(
                "{} dates but {} yield rows and {} macro rows",
                dates.len(),
                yields.nrows(),
                macros.nrows()
            )));
        }
        if yields.ncols() != maturities.len() || macros.ncols() != macro_names.len() {
            return Err(Error::Data("column count does not match names".into()));
        }
        if maturities.is_empty() {
            return Err(Error::Data("panel needs at least one maturity".into()));
        }
        if maturities[0] < 1 || maturities.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Data(
                "maturities must be strictly increasing and at least 1".into(),
            ));
        }
        check_dates(&dates)?;
        if let Some(((r, c), _)) = yields
            .iter()
            .enumerate()
            .map(|(i, v)| ((i % dates.len().max(1), i / dates.len().max(1)), v))
            .find(|(_, v)| !v.is_finite())
        {
            return Err(Error::Data(format!(
                "non-finite yield at {} for maturity {}",
                dates[r], maturities[c]
            )));
        }
        Ok(Self {
            dates,
            maturities,
            yields,
            macro_names,
            macros,
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[MonthStamp] {
        &self.dates
    }

    pub fn maturities(&self) -> &[u32] {
        &self.maturities
    }

    pub fn maturities_f64(&self) -> Vec<f64> {
        self.maturities.iter().map(|&m| m as f64).collect()
    }

    /// `T x M` yields.
    pub fn yields(&self) -> &DMatrix<f64> {
        &self.yields
    }

    pub fn macro_names(&self) -> &[String] {
        &self.macro_names
    }

    /// `T x n_macro` macro series.
    pub fn macros(&self) -> &DMatrix<f64> {
        &self.macros
    }

    pub fn maturity_index(&self, months: u32) -> Option<usize> {
        self.maturities.iter().position(|&m| m == months)
    }

    pub fn macro_index(&self, name: &str) -> Option<usize> {
        self.macro_names.iter().position(|n| n == name)
    }

    /// Column names: maturities as integers, then macro names.
    pub fn column_names(&self) -> Vec<String> {
        self.maturities
            .iter()
            .map(|m| m.to_string())
            .chain(self.macro_names.iter().cloned())
            .collect()
    }

    /// Yields and macro columns side by side, `T x (M + n_macro)`.
    pub fn all_columns(&self) -> DMatrix<f64> {
        let (t, m) = self.yields.shape();
        let n = self.macros.ncols();
        let mut out = DMatrix::zeros(t, m + n);
        out.columns_mut(0, m).copy_from(&self.yields);
        out.columns_mut(m, n).copy_from(&self.macros);
        out
    }

    /// Contiguous sub-panel of rows `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let n = end - start;
        Self {
            dates: self.dates[start..end].to_vec(),
            maturities: self.maturities.clone(),
            yields: self.yields.rows(start, n).into_owned(),
            macro_names: self.macro_names.clone(),
            macros: self.macros.rows(start, n).into_owned(),
        }
    }

    /// Panel restricted to the listed maturities, dropping macro columns.
    pub fn select_maturities(&self, months: &[u32]) -> Result<Self> {
        let idx: Vec<usize> = months
            .iter()
            .map(|&m| {
                self.maturity_index(m)
                    .ok_or_else(|| Error::arg(format!("maturity {m} not in panel")))
            })
            .collect::<Result<_>>()?;
        let yields = self.yields.select_columns(&idx);
        YieldPanel::new(self.dates.clone(), months.to_vec(), yields)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["date".to_string()];
        header.extend(self.column_names());
        wr.write_record(&header)?;
        let all = self.all_columns();
        for (t, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.to_string()];
            rec.extend(all.row(t).iter().map(|v| v.to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(|e| Error::io("<panel writer>", e))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Schema that reads back what [`YieldPanel::write_csv`] writes.
    pub fn schema(&self) -> PanelSchema {
        PanelSchema {
            date_column: "date".into(),
            yields: self
                .maturities
                .iter()
                .map(|m| (*m, m.to_string()))
                .collect(),
            macros: self
                .macro_names
                .iter()
                .map(|n| (n.clone(), n.clone()))
                .collect(),
            missing: MissingPolicy::Reject,
        }
    }
}

fn check_dates(dates: &[MonthStamp]) -> Result<()> {
    for w in dates.windows(2) {
        let gap = w[0].months_until(w[1]);
        if gap == 0 {
            return Err(Error::Data(format!("duplicate month {}", w[1])));
        }
        if gap < 0 {
            return Err(Error::Data(format!(
                "month {} follows {}: dates must increase",
                w[1], w[0]
            )));
        }
        if gap > 1 {
            return Err(Error::Data(format!(
                "dates are not consecutive months: {} is followed by {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

fn is_missing_token(s: &str) -> bool {
    matches!(s, "" | "NA" | "N/A" | "NaN" | "nan" | ".")
}

/// Load a panel from a CSV file.
pub fn load_panel(path: &Path, schema: &PanelSchema) -> Result<YieldPanel> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_panel_from_reader(f, schema)
}

pub fn load_panel_from_reader<R: Read>(rdr: R, schema: &PanelSchema) -> Result<YieldPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(rdr);
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in CSV header")))
    };
    let date_idx = find(&schema.date_column)?;
    let mut yields_spec = schema.yields.clone();
    yields_spec.sort_by_key(|(m, _)| *m);
    if yields_spec.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Schema("schema maps the same maturity twice".into()));
    }
    let yield_idx: Vec<usize> = yields_spec
        .iter()
        .map(|(_, c)| find(c))
        .collect::<Result<_>>()?;
    let macro_idx: Vec<usize> = schema
        .macros
        .iter()
        .map(|(_, c)| find(c))
        .collect::<Result<_>>()?;
    let names: Vec<&str> = yields_spec
        .iter()
        .map(|(_, c)| c.as_str())
        .chain(schema.macros.iter().map(|(_, c)| c.as_str()))
        .collect();

    let mut dates = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        // Header is line 1.
        let line = i + 2;
        let cell = |j: usize| rec.get(j).unwrap_or("");
        let date: MonthStamp = cell(date_idx).parse().map_err(|e| {
            Error::Data(format!("line {line}, column `{}`: {e}", schema.date_column))
        })?;
        let mut row = Vec::with_capacity(names.len());
        for (k, &j) in yield_idx.iter().chain(macro_idx.iter()).enumerate() {
            let raw = cell(j);
            if is_missing_token(raw) {
                row.push(f64::NAN);
                continue;
            }
            let v: f64 = raw.parse().map_err(|_| {
                Error::Data(format!(
                    "line {line}, column `{}`: cannot parse `{raw}` as a number",
                    names[k]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "line {line}, column `{}`: non-finite value",
                    names[k]
                )));
            }
            row.push(v);
        }
        dates.push(date);
        rows.push(row);
    }
    if dates.is_empty() {
        return Err(Error::Data("CSV contains no data rows".into()));
    }
    check_dates(&dates)?;

    let t = rows.len();
    let ncol = names.len();
    let mut all = DMatrix::from_fn(t, ncol, |r, c| rows[r][c]);
    resolve_missing(&mut all, &dates, &names, schema.missing)?;

    let m = yields_spec.len();
    YieldPanel::with_macros(
        dates,
        yields_spec.iter().map(|(mat, _)| *mat).collect(),
        all.columns(0, m).into_owned(),
        schema.macros.iter().map(|(n, _)| n.clone()).collect(),
        all.columns(m, ncol - m).into_owned(),
    )
}

fn resolve_missing(
    all: &mut DMatrix<f64>,
    dates: &[MonthStamp],
    names: &[&str],
    policy: MissingPolicy,
) -> Result<()> {
    let t = all.nrows();
    for c in 0..all.ncols() {
        let missing: Vec<usize> = (0..t).filter(|&r| all[(r, c)].is_nan()).collect();
        let Some(&first) = missing.first() else {
            continue;
        };
        if policy == MissingPolicy::Reject {
            return Err(Error::Data(format!(
                "missing value at {} in column `{}` (policy: reject)",
                dates[first], names[c]
            )));
        }
        for &r in &missing {
            let prev = (0..r).rev().find(|&q| !all[(q, c)].is_nan());
            let next = (r + 1..t).find(|&q| !all[(q, c)].is_nan());
            match (prev, next) {
                (Some(a), Some(b)) => {
                    let w = (r - a) as f64 / (b - a) as f64;
                    all[(r, c)] = all[(a, c)] * (1.0 - w) + all[(b, c)] * w;
                }
                _ => {
                    return Err(Error::Data(format!(
                        "missing value at {} in column `{}` lies at the edge of the sample and cannot be interpolated",
                        dates[r], names[c]
                    )))
                }
            }
        }
    }
    Ok(())
}

/// Train/test partition of a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPanel {
    pub train: YieldPanel,
    pub test: YieldPanel,
}

/// First `floor(train_fraction * T)` rows to train, the rest to test.
pub fn split_panel(panel: &YieldPanel, train_fraction: f64) -> Result<SplitPanel> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::arg(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    let t = panel.len();
    if t < 4 {
        return Err(Error::arg(format!(
            "cannot split a panel of {t} rows (need at least 4)"
        )));
    }
    let n_train = (train_fraction * t as f64).floor() as usize;
    if n_train < 2 || n_train >= t {
        return Err(Error::arg(format!(
            "train fraction {train_fraction} leaves {n_train} of {t} rows for training"
        )));
    }
    Ok(SplitPanel {
        train: panel.slice(0, n_train),
        test: panel.slice(n_train, t),
    })
}

/// Per-column summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptiveStats {
    pub columns: Vec<String>,
    pub min: Vec<f64>,
    pub median: Vec<f64>,
    pub mean: Vec<f64>,
    pub max: Vec<f64>,
    /// Sample standard deviation (`T - 1` denominator; zero when `T = 1`).
    pub sd: Vec<f64>,
}

impl DescriptiveStats {
    pub fn of_matrix(columns: Vec<String>, data: &DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::arg("cannot describe an empty panel"));
        }
        let mut out = DescriptiveStats {
            columns,
            min: vec![],
            median: vec![],
            mean: vec![],
            max: vec![],
            sd: vec![],
        };
        let n = data.nrows();
        for col in data.column_iter() {
            let mut v: Vec<f64> = col.iter().copied().collect();
            v.sort_by(f64::total_cmp);
            let mean = v.iter().sum::<f64>() / n as f64;
            let median = if n % 2 == 1 {
                v[n / 2]
            } else {
                0.5 * (v[n / 2 - 1] + v[n / 2])
            };
            let var = if n > 1 {
                v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            out.min.push(v[0]);
            out.max.push(v[n - 1]);
            out.median.push(median);
            out.mean.push(mean.clamp(v[0], v[n - 1]));
            out.sd.push(var.sqrt());
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["column", "min", "median", "mean", "max", "sd"])?;
        for i in 0..self.columns.len() {
            wr.write_record([
                self.columns[i].clone(),
                self.min[i].to_string(),
                self.median[i].to_string(),
                self.mean[i].to_string(),
                self.max[i].to_string(),
                self.sd[i].to_string(),
            ])?;
        }
        wr.flush().map_err(|e| Error::io("<stats writer>", e))?;
        Ok(())
    }
}

/// Summary statistics of every yield and macro column.
pub fn describe(panel: &YieldPanel) -> Result<DescriptiveStats> {
    DescriptiveStats::of_matrix(panel.column_names(), &panel.all_columns())
}
