//! Run configuration: a flat key-value file plus command-line overrides.
//!
//! Every recognized key has a default, so the resolved configuration written
//! next to the outputs (`config.txt`) is complete and can be fed back with
//! `--config` to repeat a run. An empty value means "unset".

use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use termstruct::kv::KvConfig;
use termstruct::{
    ConjugatePrior, DummyHyper, EvalMode, IndepNiwPrior, MinnesotaPrior, PriorSpec,
    SamplerSettings, SsvsPrior,
};

use crate::error::{CliError, Result};

/// Keys with their defaults, in the order they are written out.
const DEFAULTS: &[(&str, &str)] = &[
    ("panel", ""),
    ("macros", ""),
    ("train_fraction", "0.85"),
    ("lambda", ""),
    ("lambda.peak", "30"),
    ("factors.file", ""),
    ("var.lags", "1"),
    ("var.intercept", "auto"),
    ("var.macros", "false"),
    ("bvar.prior", "minnesota"),
    ("bvar.stability_filter", "false"),
    ("chain.total", "11000"),
    ("chain.burn", "1000"),
    ("chain.draws", "10000"),
    ("seed", "0"),
    ("horizons", "6,12,18,24,30,36,42,48,54"),
    ("forecast.horizon", "56"),
    ("irf.horizon", "24"),
    ("irf.model", "bvar"),
    ("irf.draws", ""),
    ("sign.shock", "0"),
    ("sign.pattern", ""),
    ("sign.horizons", "0"),
    ("sign.max_tries", "1000"),
    ("dummy.f", "0.95"),
    ("dummy.c", "0.95"),
    ("dummy.theta", "11.4"),
    ("dummy.sum_weights", ""),
    ("kalman.max_evals", "30000"),
    ("pca.components", "3"),
    ("pca.standardize", "false"),
    ("evaluate.methods", "random_walk,two_step,minnesota"),
    ("evaluate.mode", "point"),
    ("evaluate.rolling", "false"),
    ("evaluate.min_train", ""),
    ("output", "runs"),
];

/// Prior hyperparameters; only written out when given.
const PRIOR_KEYS: &[&str] = &[
    "rho",
    "d1",
    "d2",
    "d3",
    "s_h0",
    "c0",
    "c1",
    "p_incl",
    "tau0",
    "tau1",
    "q_incl",
    "gamma_shape",
    "gamma_rate",
];

/// Keys that do not change results and stay out of the hash.
const UNHASHED: &[&str] = &["output"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrfModel {
    Bvar,
    Dummy,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSpec {
    Fixed(f64),
    /// Maturity in months at which the curvature loading should peak.
    Peak(f64),
}

/// Resolved configuration of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kv: KvConfig,
    pub panel: Option<PathBuf>,
    pub macros: Vec<String>,
    /// `schema.*` entries with the prefix stripped.
    pub schema: KvConfig,
    pub train_fraction: f64,
    pub lambda: LambdaSpec,
    pub factors_file: Option<PathBuf>,
    pub var_lags: usize,
    /// `None` picks per prior: no intercept for SSVS, one otherwise.
    pub var_intercept: Option<bool>,
    pub var_macros: bool,
    pub prior: PriorSpec,
    pub stability_filter: bool,
    pub chain: SamplerSettings,
    pub seed: u64,
    pub horizons: Vec<usize>,
    pub forecast_horizon: usize,
    pub irf_horizon: usize,
    pub irf_model: IrfModel,
    pub irf_draws: Option<PathBuf>,
    pub sign_shock: usize,
    pub sign_pattern: Option<String>,
    pub sign_horizons: Vec<usize>,
    pub sign_max_tries: usize,
    pub dummy: DummyHyper,
    pub kalman_max_evals: usize,
    pub pca_components: usize,
    pub pca_standardize: bool,
    pub eval_methods: Vec<String>,
    pub eval_mode: EvalMode,
    pub eval_rolling: bool,
    pub eval_min_train: Option<usize>,
    pub output: PathBuf,
}

/// Command-line overrides, applied over the file in this order.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub set: Vec<String>,
    pub panel: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn known(key: &str) -> bool {
    DEFAULTS.iter().any(|(k, _)| *k == key)
        || key.starts_with("schema.")
        || key
            .strip_prefix("bvar.")
            .is_some_and(|h| PRIOR_KEYS.contains(&h))
}

/// Merge defaults, the config file and overrides into one ordered table.
pub fn resolve(file: Option<&Path>, ov: &Overrides) -> Result<KvConfig> {
    let user = match file {
        Some(p) => KvConfig::read(p)?,
        None => KvConfig::new(),
    };
    let mut given = user.clone();
    for item in &ov.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
        given.set(k.trim(), v.trim());
    }
    if let Some(p) = &ov.panel {
        given.set("panel", p.display().to_string());
    }
    if let Some(s) = ov.seed {
        given.set("seed", s.to_string());
    }
    if let Some(o) = &ov.out {
        given.set("output", o.display().to_string());
    }
    if let Some(bad) = given.keys().find(|k| !known(k)) {
        return Err(CliError::Config(format!("unknown configuration key `{bad}`")));
    }
    let mut kv = KvConfig::new();
    for (k, d) in DEFAULTS {
        kv.set(*k, given.get(k).unwrap_or(d));
    }
    let mut extra: Vec<(&str, &str)> = given.entries().filter(|(k, _)| kv.get(k).is_none()).collect();
    extra.sort();
    for (k, v) in extra {
        kv.set(k, v);
    }
    Ok(kv)
}

fn opt(kv: &KvConfig, key: &str) -> Option<String> {
    kv.get(key).filter(|v| !v.is_empty()).map(str::to_string)
}

fn req<T: FromStr>(kv: &KvConfig, key: &str) -> Result<T> {
    let v = kv.get(key).unwrap_or_default();
    v.parse()
        .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn opt_parsed<T: FromStr>(kv: &KvConfig, key: &str) -> Result<Option<T>> {
    match opt(kv, key) {
        Some(_) => req(kv, key).map(Some),
        None => Ok(None),
    }
}

fn list<T: FromStr>(kv: &KvConfig, key: &str) -> Result<Vec<T>> {
    let v = kv.get(key).unwrap_or_default();
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{s}`")))
        })
        .collect()
}

fn flag(kv: &KvConfig, key: &str) -> Result<bool> {
    match kv.get(key).unwrap_or_default() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(CliError::Config(format!(
            "`{key}`: expected true or false, got `{other}`"
        ))),
    }
}

fn apply_hyper(prior: &mut PriorSpec, kv: &KvConfig) -> Result<()> {
    for key in PRIOR_KEYS {
        let Some(v) = opt_parsed::<f64>(kv, &format!("bvar.{key}"))? else {
            continue;
        };
        let slot: Option<&mut f64> = match (&mut *prior, *key) {
            (PriorSpec::Minnesota(MinnesotaPrior { rho, .. }), "rho") => Some(rho),
            (PriorSpec::Minnesota(MinnesotaPrior { d1, .. }), "d1") => Some(d1),
            (PriorSpec::Minnesota(MinnesotaPrior { d2, .. }), "d2") => Some(d2),
            (PriorSpec::Minnesota(MinnesotaPrior { d3, .. }), "d3") => Some(d3),
            (PriorSpec::NaturalConjugate(ConjugatePrior { d1, .. }), "d1") => Some(d1),
            (PriorSpec::NaturalConjugate(ConjugatePrior { d2, .. }), "d2") => Some(d2),
            (PriorSpec::IndepNiw(IndepNiwPrior { d1, .. }), "d1") => Some(d1),
            (PriorSpec::IndepNiw(IndepNiwPrior { d2, .. }), "d2") => Some(d2),
            (PriorSpec::IndepNiw(IndepNiwPrior { d3, .. }), "d3") => Some(d3),
            (PriorSpec::Ssvs(s), "c0") => Some(&mut s.c0),
            (PriorSpec::Ssvs(s), "c1") => Some(&mut s.c1),
            (PriorSpec::Ssvs(s), "p_incl") => Some(&mut s.p_incl),
            (PriorSpec::Ssvs(s), "tau0") => Some(&mut s.tau0),
            (PriorSpec::Ssvs(s), "tau1") => Some(&mut s.tau1),
            (PriorSpec::Ssvs(s), "q_incl") => Some(&mut s.q_incl),
            (PriorSpec::Ssvs(s), "gamma_shape") => Some(&mut s.gamma_shape),
            (PriorSpec::Ssvs(s), "gamma_rate") => Some(&mut s.gamma_rate),
            _ => None,
        };
        match (slot, *key) {
            (Some(s), _) => *s = v,
            (None, "s_h0") => match prior {
                PriorSpec::NaturalConjugate(ConjugatePrior { s_h0, .. })
                | PriorSpec::IndepNiw(IndepNiwPrior { s_h0, .. })
                | PriorSpec::Ssvs(SsvsPrior { s_h0, .. }) => *s_h0 = Some(v),
                _ => return Err(not_applicable(key, prior)),
            },
            (None, _) => return Err(not_applicable(key, prior)),
        }
    }
    Ok(())
}

fn not_applicable(key: &str, prior: &PriorSpec) -> CliError {
    CliError::Config(format!(
        "`bvar.{key}` does not apply to the {} prior",
        prior.name()
    ))
}

impl RunConfig {
    pub fn load(file: Option<&Path>, ov: &Overrides) -> Result<Self> {
        Self::from_kv(resolve(file, ov)?)
    }

    pub fn from_kv(kv: KvConfig) -> Result<Self> {
        let mut schema = KvConfig::new();
        for (k, v) in kv.with_prefix("schema") {
            schema.set(k, v);
        }
        let lambda = match opt_parsed::<f64>(&kv, "lambda")? {
            Some(l) => LambdaSpec::Fixed(l),
            None => LambdaSpec::Peak(req(&kv, "lambda.peak")?),
        };
        let var_intercept = match kv.get("var.intercept").unwrap_or_default() {
            "auto" => None,
            _ => Some(flag(&kv, "var.intercept")?),
        };
        let mut prior = PriorSpec::from_name(kv.get("bvar.prior").unwrap_or_default())
            .map_err(|e| CliError::Config(e.to_string()))?;
        apply_hyper(&mut prior, &kv)?;
        let seed: u64 = req(&kv, "seed")?;
        let chain = SamplerSettings {
            n_draws: req(&kv, "chain.draws")?,
            n_total: req(&kv, "chain.total")?,
            n_burn: req(&kv, "chain.burn")?,
            seed,
        };
        let irf_model = match kv.get("irf.model").unwrap_or_default() {
            "bvar" => IrfModel::Bvar,
            "dummy" => IrfModel::Dummy,
            other => {
                return Err(CliError::Config(format!(
                    "`irf.model`: expected bvar or dummy, got `{other}`"
                )))
            }
        };
        let sum_weights: Vec<f64> = list(&kv, "dummy.sum_weights")?;
        let dummy = DummyHyper {
            f: req(&kv, "dummy.f")?,
            c: req(&kv, "dummy.c")?,
            theta: req(&kv, "dummy.theta")?,
            m: None,
            sum_weights: (!sum_weights.is_empty()).then_some(sum_weights),
        };
        let eval_mode = match kv.get("evaluate.mode").unwrap_or_default() {
            "point" => EvalMode::Point,
            "path_average" | "path" => EvalMode::PathAverage,
            other => {
                return Err(CliError::Config(format!(
                    "`evaluate.mode`: expected point or path_average, got `{other}`"
                )))
            }
        };
        Ok(Self {
            panel: opt(&kv, "panel").map(PathBuf::from),
            macros: list(&kv, "macros")?,
            schema,
            train_fraction: req(&kv, "train_fraction")?,
            lambda,
            factors_file: opt(&kv, "factors.file").map(PathBuf::from),
            var_lags: req(&kv, "var.lags")?,
            var_intercept,
            var_macros: flag(&kv, "var.macros")?,
            prior,
            stability_filter: flag(&kv, "bvar.stability_filter")?,
            chain,
            seed,
            horizons: list(&kv, "horizons")?,
            forecast_horizon: req(&kv, "forecast.horizon")?,
            irf_horizon: req(&kv, "irf.horizon")?,
            irf_model,
            irf_draws: opt(&kv, "irf.draws").map(PathBuf::from),
            sign_shock: req(&kv, "sign.shock")?,
            sign_pattern: opt(&kv, "sign.pattern"),
            sign_horizons: list(&kv, "sign.horizons")?,
            sign_max_tries: req(&kv, "sign.max_tries")?,
            dummy,
            kalman_max_evals: req(&kv, "kalman.max_evals")?,
            pca_components: req(&kv, "pca.components")?,
            pca_standardize: flag(&kv, "pca.standardize")?,
            eval_methods: list(&kv, "evaluate.methods")?,
            eval_mode,
            eval_rolling: flag(&kv, "evaluate.rolling")?,
            eval_min_train: opt_parsed(&kv, "evaluate.min_train")?,
            output: PathBuf::from(kv.get("output").unwrap_or("runs")),
            kv,
        })
    }

    /// The result-relevant part of the configuration as text.
    pub fn canonical(&self) -> String {
        let mut out = KvConfig::new();
        for (k, v) in self.kv.entries().filter(|(k, _)| !UNHASHED.contains(k)) {
            out.set(k, v);
        }
        out.to_string()
    }

    /// Hex SHA-256 of [`RunConfig::canonical`].
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.canonical().as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(lines: &str) -> Result<RunConfig> {
        RunConfig::from_kv(resolve_text(lines)?)
    }

    fn resolve_text(lines: &str) -> Result<KvConfig> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, lines).unwrap();
        resolve(Some(&p), &Overrides::default())
    }

    #[test]
    fn defaults_are_complete() {
        let c = cfg("").unwrap();
        assert_eq!(c.train_fraction, 0.85);
        assert_eq!(c.lambda, LambdaSpec::Peak(30.0));
        assert_eq!(c.horizons, vec![6, 12, 18, 24, 30, 36, 42, 48, 54]);
        assert_eq!(c.chain, SamplerSettings::default());
        assert_eq!(c.prior.name(), "minnesota");
        assert_eq!(c.var_intercept, None);
        assert_eq!(c.kv.entries().count(), DEFAULTS.len());
    }

    #[test]
    fn canonical_text_round_trips() {
        let c = cfg("bvar.prior = ssvs\nbvar.c1 = 10\nschema.yield.3 = DGS3MO\nseed = 7\n").unwrap();
        let again = RunConfig::from_kv(KvConfig::parse(&c.kv.to_string()).unwrap()).unwrap();
        assert_eq!(again.hash(), c.hash());
        match &c.prior {
            PriorSpec::Ssvs(s) => assert_eq!(s.c1, 10.0),
            p => panic!("{p:?}"),
        }
        assert_eq!(c.schema.get("yield.3"), Some("DGS3MO"));
    }

    #[test]
    fn output_does_not_change_the_hash() {
        let a = cfg("output = a").unwrap();
        let b = cfg("output = b").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), cfg("seed = 1").unwrap().hash());
    }

    #[test]
    fn overrides_win() {
        let ov = Overrides {
            set: vec!["var.lags = 2".into()],
            seed: Some(9),
            ..Default::default()
        };
        let c = RunConfig::load(None, &ov).unwrap();
        assert_eq!((c.var_lags, c.seed, c.chain.seed), (2, 9, 9));
    }

    #[test]
    fn rejects_unknown_and_misapplied_keys() {
        assert!(matches!(cfg("var.lag = 2"), Err(CliError::Config(_))));
        assert!(matches!(cfg("bvar.c0 = 0.1"), Err(CliError::Config(_))));
        assert!(matches!(cfg("bvar.prior = laplace"), Err(CliError::Config(_))));
        assert!(matches!(cfg("seed = -1"), Err(CliError::Config(_))));
    }
}
