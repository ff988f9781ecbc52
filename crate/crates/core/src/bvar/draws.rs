use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::var_engine::VarModel;

/// Retained posterior draws of `(Φ, Σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    /// Prior family label.
    pub prior: String,
    pub k: usize,
    pub p: usize,
    pub intercept: bool,
    pub names: Vec<String>,
    /// `r x k` coefficient draws.
    pub phi: Vec<DMatrix<f64>>,
    pub sigma: Vec<DMatrix<f64>>,
    /// Chain length including burn-in (the draw count for closed forms).
    pub n_total: usize,
    pub n_burn: usize,
    pub seed: u64,
    /// SSVS coefficient indicators, in `vec(Φ)` order.
    pub gamma: Vec<Vec<bool>>,
    /// Full-SSVS indicators of the strictly upper factor entries, column by column.
    pub delta: Vec<Vec<bool>>,
    /// Exact posterior mean of `Φ` for closed-form posteriors.
    pub analytic_mean: Option<DMatrix<f64>>,
}

impl PosteriorDraws {
    pub(crate) fn empty(
        prior: &str,
        k: usize,
        p: usize,
        intercept: bool,
        names: &[String],
        seed: u64,
    ) -> Self {
        Self {
            prior: prior.to_string(),
            k,
            p,
            intercept,
            names: names.to_vec(),
            phi: Vec::new(),
            sigma: Vec::new(),
            n_total: 0,
            n_burn: 0,
            seed,
            gamma: Vec::new(),
            delta: Vec::new(),
            analytic_mean: None,
        }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn r(&self) -> usize {
        usize::from(self.intercept) + self.k * self.p
    }

    pub fn is_analytic(&self) -> bool {
        self.analytic_mean.is_some()
    }

    /// Draw `i` as `A = vec(Φ)`.
    pub fn a_vector(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(self.phi[i].as_slice())
    }

    pub fn model(&self, i: usize) -> VarModel {
        let mut m = VarModel::from_phi(
            self.phi[i].clone(),
            self.sigma[i].clone(),
            self.p,
            self.intercept,
        )
        .expect("draw shapes are consistent");
        m.names = self.names.clone();
        m
    }

    pub fn phi_mean(&self) -> DMatrix<f64> {
        mean_of(&self.phi, self.r(), self.k)
    }

    pub fn sigma_mean(&self) -> DMatrix<f64> {
        mean_of(&self.sigma, self.k, self.k)
    }

    /// Sample standard deviation of each coefficient (`n - 1` divisor).
    pub fn phi_sd(&self) -> DMatrix<f64> {
        let m = self.phi_mean();
        let n = self.len();
        let mut acc = DMatrix::zeros(self.r(), self.k);
        for d in &self.phi {
            acc += (d - &m).map(|v| v * v);
        }
        acc.map(|v| (v / (n.max(2) - 1) as f64).sqrt())
    }

    /// Posterior inclusion probabilities of the coefficients (SSVS only).
    pub fn inclusion_probabilities(&self) -> Option<DVector<f64>> {
        share_true(&self.gamma)
    }

    pub fn delta_probabilities(&self) -> Option<DVector<f64>> {
        share_true(&self.delta)
    }

    /// CSV with `# key = value` header lines, then one row per draw.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        let io = |e| Error::io("<draws writer>", e);
        let names = self.names.join(",");
        let meta = [
            ("prior", self.prior.clone()),
            ("seed", self.seed.to_string()),
            ("n_total", self.n_total.to_string()),
            ("n_burn", self.n_burn.to_string()),
            ("retained", self.len().to_string()),
            ("k", self.k.to_string()),
            ("p", self.p.to_string()),
            ("intercept", self.intercept.to_string()),
            ("names", names),
        ];
        for (key, v) in meta {
            writeln!(w, "# {key} = {v}").map_err(io)?;
        }
        if let Some(m) = &self.analytic_mean {
            let vals: Vec<String> = m.iter().map(f64::to_string).collect();
            writeln!(w, "# analytic_mean = {}", vals.join(" ")).map_err(io)?;
        }
        let (r, k) = (self.r(), self.k);
        let n_gamma = self.gamma.first().map_or(0, Vec::len);
        let n_delta = self.delta.first().map_or(0, Vec::len);
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["draw".to_string()];
        for c in 0..k {
            for row in 0..r {
                header.push(format!("phi_{row}_{c}"));
            }
        }
        for c in 0..k {
            for row in 0..k {
                header.push(format!("sigma_{row}_{c}"));
            }
        }
        header.extend((0..n_gamma).map(|i| format!("gamma_{i}")));
        header.extend((0..n_delta).map(|i| format!("delta_{i}")));
        wr.write_record(&header)?;
        for d in 0..self.len() {
            let mut rec = vec![d.to_string()];
            rec.extend(self.phi[d].iter().map(f64::to_string));
            rec.extend(self.sigma[d].iter().map(f64::to_string));
            if n_gamma > 0 {
                rec.extend(self.gamma[d].iter().map(|g| u8::from(*g).to_string()));
            }
            if n_delta > 0 {
                rec.extend(self.delta[d].iter().map(|g| u8::from(*g).to_string()));
            }
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(io)?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.write_csv(File::create(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader);
        let mut meta = std::collections::BTreeMap::new();
        let mut body = String::new();
        let mut line = String::new();
        loop {
            line.clear();
            if lines
                .read_line(&mut line)
                .map_err(|e| Error::io("<draws reader>", e))?
                == 0
            {
                break;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((key, v)) = rest.split_once('=') {
                    meta.insert(key.trim().to_string(), v.trim().to_string());
                }
            } else {
                body.push_str(&line);
                lines
                    .read_to_string(&mut body)
                    .map_err(|e| Error::io("<draws reader>", e))?;
                break;
            }
        }
        let get = |key: &str| -> Result<&String> {
            meta.get(key)
                .ok_or_else(|| Error::Schema(format!("draws file lacks `# {key}` header")))
        };
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Schema(format!("bad `{key}` header value `{v}`")))
        }
        let k: usize = num("k", get("k")?)?;
        let p: usize = num("p", get("p")?)?;
        let intercept: bool = num("intercept", get("intercept")?)?;
        let names: Vec<String> = get("names")?.split(',').map(str::to_string).collect();
        let mut out = PosteriorDraws::empty(
            get("prior")?,
            k,
            p,
            intercept,
            &names,
            num("seed", get("seed")?)?,
        );
        out.n_total = num("n_total", get("n_total")?)?;
        out.n_burn = num("n_burn", get("n_burn")?)?;
        let r = out.r();
        if let Some(m) = meta.get("analytic_mean") {
            let vals: Vec<f64> = m
                .split_whitespace()
                .map(|v| num("analytic_mean", v))
                .collect::<Result<_>>()?;
            if vals.len() != r * k {
                return Err(Error::Schema(format!(
                    "analytic_mean has {} values, expected {}",
                    vals.len(),
                    r * k
                )));
            }
            out.analytic_mean = Some(DMatrix::from_vec(r, k, vals));
        }
        let mut rd = csv::Reader::from_reader(body.as_bytes());
        let headers = rd.headers()?.clone();
        let n_gamma = headers.iter().filter(|h| h.starts_with("gamma_")).count();
        let n_delta = headers.iter().filter(|h| h.starts_with("delta_")).count();
        let width = 1 + r * k + k * k + n_gamma + n_delta;
        if headers.len() != width {
            return Err(Error::Schema(format!(
                "draws file has {} columns, expected {width}",
                headers.len()
            )));
        }
        for rec in rd.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .skip(1)
                .map(|v| num("draw", v))
                .collect::<Result<_>>()?;
            let (phi, rest) = vals.split_at(r * k);
            let (sigma, rest) = rest.split_at(k * k);
            out.phi.push(DMatrix::from_column_slice(r, k, phi));
            out.sigma.push(DMatrix::from_column_slice(k, k, sigma));
            if n_gamma > 0 {
                out.gamma
                    .push(rest[..n_gamma].iter().map(|v| *v != 0.0).collect());
            }
            if n_delta > 0 {
                out.delta
                    .push(rest[n_gamma..].iter().map(|v| *v != 0.0).collect());
            }
        }
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::read_csv(File::open(path).map_err(|e| Error::io(path, e))?)
    }
}

fn mean_of(ms: &[DMatrix<f64>], r: usize, c: usize) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(r, c);
    for m in ms {
        acc += m;
    }
    acc / ms.len().max(1) as f64
}

fn share_true(ind: &[Vec<bool>]) -> Option<DVector<f64>> {
    let n = ind.first()?.len();
    let mut acc = DVector::zeros(n);
    for g in ind {
        for (a, v) in acc.iter_mut().zip(g) {
            *a += f64::from(u8::from(*v));
        }
    }
    Some(acc / ind.len() as f64)
}
