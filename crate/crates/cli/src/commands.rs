use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use termstruct::evaluation::{rolling_evaluation, EvalMeta};
use termstruct::linalg::correlation;
use termstruct::ns_factors::{cross_section, pca_with};
use termstruct::state_space::smoothed_factors;
use termstruct::{
    build_design, build_dummy_obs, describe, empirical_proxies, evaluate_horizons,
    fit_cross_section, fit_mle, fit_var, forecast_factors, forecast_path, gibbs_dummy_bvar,
    init_from_two_step, irf_recursive, load_panel, ns_loadings, predict_with, reconstruct_yields,
    sample_posterior, sign_restricted_irf, solve_lambda, split_panel, BfgsOptions, Error,
    FactorSeries, MethodForecast, NsLoadings, PanelSchema, PosteriorDraws, PredictOptions,
    PriorSpec, SignRestriction, SplitPanel, VarDesign, YieldPanel,
};

use crate::config::{IrfModel, LambdaSpec, RunConfig};
use crate::error::{CliError, Result};
use crate::output::RunDir;

struct Data {
    panel: YieldPanel,
    split: SplitPanel,
}

fn first_line(path: &Path) -> Result<String> {
    let f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut line = String::new();
    BufReader::new(f)
        .read_line(&mut line)
        .map_err(|e| CliError::io(path, e))?;
    Ok(line)
}

/// Explicit `schema.yield.*` entries, or inference from the header row.
fn schema_for(cfg: &RunConfig, path: &Path) -> Result<PanelSchema> {
    if cfg.schema.keys().any(|k| k.starts_with("yield.")) {
        return Ok(PanelSchema::from_kv(&cfg.schema)?);
    }
    let header = first_line(path)?;
    let cols: Vec<&str> = header
        .trim_end()
        .split(',')
        .map(|c| c.trim().trim_matches('"'))
        .collect();
    let macros: Vec<&str> = cfg.macros.iter().map(String::as_str).collect();
    let mut schema = PanelSchema::infer(&cols, &macros)?;
    if let Some(m) = cfg.schema.get("missing") {
        schema.missing = m.parse()?;
    }
    Ok(schema)
}

fn load_data(cfg: &RunConfig, run: &mut RunDir) -> Result<Data> {
    let path = cfg
        .panel
        .as_ref()
        .ok_or_else(|| CliError::Config("no input panel: set `panel` or pass --panel".into()))?;
    let schema = schema_for(cfg, path)?;
    let panel = load_panel(path, &schema)?;
    run.input("panel", path)?;
    let split = split_panel(&panel, cfg.train_fraction)?;
    Ok(Data { panel, split })
}

fn lambda(cfg: &RunConfig) -> Result<f64> {
    Ok(match cfg.lambda {
        LambdaSpec::Fixed(l) => l,
        LambdaSpec::Peak(months) => solve_lambda(months)?,
    })
}

fn with_macros(cfg: &RunConfig, factors: FactorSeries, panel: &YieldPanel) -> Result<FactorSeries> {
    if !cfg.var_macros {
        return Ok(factors);
    }
    if panel.macro_names().is_empty() {
        return Err(CliError::Config(
            "`var.macros = true` but the panel has no macro columns".into(),
        ));
    }
    Ok(factors.with_columns(panel.macro_names(), panel.macros())?)
}

/// Two-step factors (plus macros when configured) of a panel.
fn factor_series(cfg: &RunConfig, panel: &YieldPanel, lambda: f64) -> Result<FactorSeries> {
    with_macros(cfg, fit_cross_section(panel, lambda)?, panel)
}

fn origin(series: &FactorSeries, p: usize) -> DMatrix<f64> {
    series.values.rows(series.len() - p, p).into_owned()
}

/// VAR data: a factor file as is, or the two-step factors of the training panel.
struct VarInput {
    series: FactorSeries,
    panel: Option<(Data, f64)>,
}

fn var_input(cfg: &RunConfig, run: &mut RunDir) -> Result<VarInput> {
    if let Some(p) = &cfg.factors_file {
        run.input("factors", p)?;
        return Ok(VarInput {
            series: FactorSeries::load(p)?,
            panel: None,
        });
    }
    let data = load_data(cfg, run)?;
    let lam = lambda(cfg)?;
    let series = factor_series(cfg, &data.split.train, lam)?;
    Ok(VarInput {
        series,
        panel: Some((data, lam)),
    })
}

fn intercept_for(cfg: &RunConfig, prior: &PriorSpec) -> bool {
    cfg.var_intercept
        .unwrap_or(!matches!(prior, PriorSpec::Ssvs(_)))
}

fn posterior(
    cfg: &RunConfig,
    prior: &PriorSpec,
    series: &FactorSeries,
) -> Result<(VarDesign, PosteriorDraws)> {
    prior.validate(series.k())?;
    let design = build_design(series, cfg.var_lags, intercept_for(cfg, prior))?;
    let draws = sample_posterior(&design, prior, &cfg.chain)?;
    Ok((design, draws))
}

fn dummy_draws(cfg: &RunConfig, series: &FactorSeries) -> Result<PosteriorDraws> {
    let obs = build_dummy_obs(series, cfg.var_lags, &cfg.dummy)?;
    Ok(gibbs_dummy_bvar(
        series,
        &obs,
        cfg.chain.n_total,
        cfg.chain.n_burn,
        cfg.seed,
    )?)
}

fn term_names(names: &[String], p: usize, intercept: bool) -> Vec<String> {
    let mut out = Vec::new();
    if intercept {
        out.push("const".to_string());
    }
    for l in 1..=p {
        out.extend(names.iter().map(|n| format!("L{l}.{n}")));
    }
    out
}

fn table(w: &mut Vec<u8>, header: &[String], rows: Vec<Vec<String>>) -> termstruct::Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    w.extend_from_slice(s.as_bytes());
    Ok(())
}

fn strings<I: IntoIterator<Item = T>, T: ToString>(it: I) -> Vec<String> {
    it.into_iter().map(|v| v.to_string()).collect()
}

/// `h` down the rows, one column per maturity.
fn write_path(w: &mut Vec<u8>, mats: &[u32], path: &DMatrix<f64>) -> termstruct::Result<()> {
    let mut head = vec!["h".to_string()];
    head.extend(mats.iter().map(|m| m.to_string()));
    let rows = (0..path.nrows())
        .map(|h| {
            let mut r = vec![(h + 1).to_string()];
            r.extend(path.row(h).iter().map(f64::to_string));
            r
        })
        .collect();
    table(w, &head, rows)
}

fn loadings_for(panel: &YieldPanel, lambda: f64) -> Result<NsLoadings> {
    Ok(ns_loadings(lambda, &panel.maturities_f64())?)
}

pub fn describe_cmd(cfg: &RunConfig) -> Result<PathBuf> {
    let mut run = RunDir::create(cfg, "describe")?;
    let data = load_data(cfg, &mut run)?;
    let (train, test) = (&data.split.train, &data.split.test);
    for (name, panel) in [
        ("stats.csv", &data.panel),
        ("train_stats.csv", train),
        ("test_stats.csv", test),
    ] {
        let stats = describe(panel)?;
        run.csv(name, |w| stats.write_csv(w))?;
    }
    let d = |p: &YieldPanel, last: bool| {
        let dates = p.dates();
        if last { dates[dates.len() - 1] } else { dates[0] }.to_string()
    };
    let body = format!(
        "rows = {}\ntrain_rows = {}\ntest_rows = {}\ntrain_start = {}\ntrain_end = {}\ntest_start = {}\ntest_end = {}\n",
        data.panel.len(),
        train.len(),
        test.len(),
        d(train, false),
        d(train, true),
        d(test, false),
        d(test, true)
    );
    run.text("split.txt", &body)?;
    run.finish()
}

pub fn fit_two_step(cfg: &RunConfig) -> Result<PathBuf> {
    let mut run = RunDir::create(cfg, "fit-two-step")?;
    let data = load_data(cfg, &mut run)?;
    let train = &data.split.train;
    let lam = lambda(cfg)?;
    // Each date's factors use only that date's yields, so the whole panel is
    // reported; the VAR sees the training rows only.
    let cs = cross_section(&data.panel, lam)?;
    run.csv("factors.csv", |w| cs.factors.write_csv(w))?;
    run.csv("loadings.csv", |w| cs.loadings.write_csv(w))?;
    let resid_sd: Vec<String> = cs
        .residuals
        .column_iter()
        .zip(data.panel.maturities())
        .map(|(c, m)| format!("{m},{}", (c.norm_squared() / c.len() as f64).sqrt()))
        .collect();
    run.csv("fit_rmse.csv", |w| {
        w.extend_from_slice(format!("maturity,rmse\n{}\n", resid_sd.join("\n")).as_bytes());
        Ok(())
    })?;
    let series = with_macros(cfg, cs.factors.slice(0, train.len()), train)?;
    let p = cfg.var_lags;
    let model = fit_var(&series, p, cfg.var_intercept.unwrap_or(true))?;
    run.csv("var_model.csv", |w| model.write_csv(w))?;
    let fc = forecast_path(&model, &origin(&series, p), cfg.forecast_horizon)?;
    run.csv("forecast_factors.csv", |w| fc.write_csv(w))?;
    let yields = termstruct::bvar::reconstruct_from_path(&fc, &cs.loadings)?;
    run.csv("forecast_yields.csv", |w| yields.write_csv(w))?;
    let radius = model
        .companion_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let body = format!(
        "lambda = {lam}\ntrain_rows = {}\nvariables = {}\nlags = {p}\ncompanion_spectral_radius = {radius}\n",
        train.len(),
        series.names.join(","),
    );
    run.text("summary.txt", &body)?;
    run.finish()
}

pub fn fit_pca(cfg: &RunConfig) -> Result<PathBuf> {
    let mut run = RunDir::create(cfg, "fit-pca")?;
    let data = load_data(cfg, &mut run)?;
    let train = &data.split.train;
    let k = cfg.pca_components;
    let pc = pca_with(train.yields(), k, cfg.pca_standardize)?;
    let total: f64 = pc.eigenvalues.iter().sum();
    let mut cum = 0.0;
    let rows = pc
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, e)| {
            cum += e / total;
            strings([
                (i + 1).to_string(),
                e.to_string(),
                (e / total).to_string(),
                cum.to_string(),
            ])
        })
        .collect();
    let pcs: Vec<String> = (1..=k).map(|i| format!("pc{i}")).collect();
    run.csv("explained.csv", |w| {
        table(w, &strings(["component", "eigenvalue", "explained", "cumulative"]), rows)
    })?;
    let comp_rows = train
        .maturities()
        .iter()
        .enumerate()
        .map(|(m, mat)| {
            let mut r = vec![mat.to_string()];
            r.extend(pc.components.row(m).iter().map(f64::to_string));
            r
        })
        .collect();
    let mut head = vec!["maturity".to_string()];
    head.extend(pcs.iter().cloned());
    run.csv("components.csv", |w| table(w, &head, comp_rows))?;
    let scores = FactorSeries::new(train.dates().to_vec(), pcs.clone(), pc.scores.clone())?;
    run.csv("scores.csv", |w| scores.write_csv(w))?;

    // Components against the two-step factors and, when the panel has the
    // maturities they need, the empirical level/slope/curvature.
    let two_step = fit_cross_section(train, lambda(cfg)?)?;
    let mut sources = vec![("two_step", two_step.clone())];
    match empirical_proxies(train) {
        Ok(p) => sources.push(("empirical", p)),
        Err(Error::Argument(_)) => {}
        Err(e) => return Err(e.into()),
    }
    let mut rows = Vec::new();
    for (source, s) in &sources {
        for (j, name) in s.names.iter().enumerate() {
            let b: Vec<f64> = s.values.column(j).iter().copied().collect();
            for (i, pname) in pcs.iter().enumerate() {
                let a: Vec<f64> = pc.scores.column(i).iter().copied().collect();
                rows.push(strings([
                    pname.clone(),
                    format!("{source}.{name}"),
                    correlation(&a, &b).to_string(),
                ]));
            }
        }
    }
    if let Some(j) = train.maturity_index(120) {
        let y10: Vec<f64> = train.yields().column(j).iter().copied().collect();
        let level: Vec<f64> = two_step.values.column(0).iter().copied().collect();
        rows.push(strings([
            "yield120".to_string(),
            "two_step.level".to_string(),
            correlation(&y10, &level).to_string(),
        ]));
    }
    run.csv("correlations.csv", |w| {
        table(w, &strings(["series", "factor", "correlation"]), rows)
    })?;
    run.finish()
}

pub fn fit_kalman(cfg: &RunConfig) -> Result<PathBuf> {
    let mut run = RunDir::create(cfg, "fit-kalman")?;
    let data = load_data(cfg, &mut run)?;
    let train = &data.split.train;
    let init = init_from_two_step(train, lambda(cfg)?)?;
    run.text("start_params.txt", &init.to_kv().to_string())?;
    let opts = BfgsOptions {
        max_evals: cfg.kalman_max_evals,
        ..Default::default()
    };
    let fit = fit_mle(train, &init, &opts)?;
    run.text("params.txt", &fit.params.to_kv().to_string())?;
    run.csv("trace.csv", |w| fit.write_trace(w))?;
    let smoothed = FactorSeries::new(
        train.dates().to_vec(),
        strings(["level", "slope", "curvature"]),
        smoothed_factors(&fit.params, train)?,
    )?;
    run.csv("smoothed.csv", |w| smoothed.write_csv(w))?;
    let fc = forecast_factors(&fit.params, &fit.filter, cfg.forecast_horizon)?;
    run.csv("forecast_factors.csv", |w| fc.write_csv(w))?;
    let yields = termstruct::bvar::reconstruct_from_path(&fc, &loadings_for(train, fit.params.lambda)?)?;
    run.csv("forecast_yields.csv", |w| yields.write_csv(w))?;
    let body = format!(
        "converged = {}\nloglik = {}\niterations = {}\nevals = {}\nlambda = {}\n",
        fit.converged, fit.filter.loglik, fit.iterations, fit.evals, fit.params.lambda
    );
    run.text("summary.txt", &body)?;
    run.finish()
}

/// Factors of the first test month, the realized value for the predictive likelihood.
fn realized_next(cfg: &RunConfig, data: &Data, lambda: f64) -> Result<DVector<f64>> {
    let next = data.split.test.slice(0, 1);
    let s = factor_series(cfg, &next, lambda)?;
    Ok(s.values.row(0).transpose())
}

pub fn bvar(cfg: &RunConfig) -> Result<PathBuf> {
    let mut run = RunDir::create(cfg, "bvar")?;
    let input = var_input(cfg, &mut run)?;
    let (design, draws) = posterior(cfg, &cfg.prior, &input.series)?;
    run.csv("draws.csv", |w| draws.write_csv(w))?;

    let terms = term_names(&draws.names, draws.p, draws.intercept);
    let (mean, sd) = (draws.phi_mean(), draws.phi_sd());
    let mut rows = Vec::new();
    for (eq, name) in draws.names.iter().enumerate() {
        for (r, term) in terms.iter().enumerate() {
            rows.push(strings([
                term.clone(),
                name.clone(),
                mean[(r, eq)].to_string(),
                sd[(r, eq)].to_string(),
            ]));
        }
    }
    run.csv("posterior.csv", |w| {
        table(w, &strings(["term", "equation", "mean", "sd"]), rows)
    })?;
    let sigma = draws.sigma_mean();
    let mut head = vec!["variable".to_string()];
    head.extend(draws.names.iter().cloned());
    let rows = draws
        .names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let mut r = vec![n.clone()];
            r.extend(sigma.row(i).iter().map(f64::to_string));
            r
        })
        .collect();
    run.csv("sigma.csv", |w| table(w, &head, rows))?;
    if let Some(pi) = draws.inclusion_probabilities() {
        let r = terms.len();
        let rows = (0..pi.len())
            .map(|i| strings([terms[i % r].clone(), draws.names[i / r].clone(), pi[i].to_string()]))
            .collect();
        run.csv("inclusion.csv", |w| {
            table(w, &strings(["term", "equation", "probability"]), rows)
        })?;
    }
    if let Some(pd) = draws.delta_probabilities() {
        let rows = pd
            .iter()
            .enumerate()
            .map(|(i, v)| strings([i.to_string(), v.to_string()]))
            .collect();
        run.csv("delta_inclusion.csv", |w| {
            table(w, &strings(["index", "probability"]), rows)
        })?;
    }

    let realized = match &input.panel {
        Some((data, lam)) => Some(realized_next(cfg, data, *lam)?),
        None => None,
    };
    let opts = PredictOptions {
        seed: cfg.seed,
        realized,
        stability_filter: cfg.stability_filter,
        ..Default::default()
    };
    let pred = predict_with(&draws, &design.last_obs(), &cfg.horizons, &opts)?;
    run.csv("predictive.csv", |w| pred.write_csv(w))?;
    if let Some((data, lam)) = &input.panel {
        let yields = reconstruct_yields(&pred, &loadings_for(&data.split.train, *lam)?)?;
        run.csv("predictive_yields.csv", |w| yields.write_csv(w))?;
    }
    let lpl = pred
        .log_pred_lik
        .map_or_else(|| "na".to_string(), |v| v.to_string());
    let body = format!(
        "prior = {}\nvariables = {}\nlags = {}\nintercept = {}\nobservations = {}\ndraws = {}\nlog_pred_lik = {lpl}\nunstable_draws_dropped = {}\n",
        draws.prior,
        draws.names.join(","),
        draws.p,
        draws.intercept,
        design.t(),
        draws.len(),
        pred.n_dropped
    );
    run.text("summary.txt", &body)?;
    run.finish()
}

fn irf_draws(cfg: &RunConfig, run: &mut RunDir) -> Result<PosteriorDraws> {
    if let Some(p) = &cfg.irf_draws {
        run.input("draws", p)?;
        return Ok(PosteriorDraws::load(p)?);
    }
    let input = var_input(cfg, run)?;
    match cfg.irf_model {
        IrfModel::Bvar => Ok(posterior(cfg, &cfg.prior, &input.series)?.1),
        IrfModel::Dummy => dummy_draws(cfg, &input.series),
    }
}

fn check_irf_horizon(cfg: &RunConfig) -> Result<()> {
    if cfg.irf_horizon == 0 {
        return Err(Error::Argument("impulse response horizon must be at least 1".into()).into());
    }
    Ok(())
}

pub fn irf(cfg: &RunConfig) -> Result<PathBuf> {
    check_irf_horizon(cfg)?;
    let mut run = RunDir::create(cfg, "irf")?;
    let draws = irf_draws(cfg, &mut run)?;
    let res = irf_recursive(&draws, cfg.irf_horizon)?;
    run.csv("irf.csv", |w| res.write_csv(w))?;
    run.text("report.txt", &res.report())?;
    run.finish()
}

pub fn sign_irf(cfg: &RunConfig) -> Result<PathBuf> {
    check_irf_horizon(cfg)?;
    let pattern = cfg
        .sign_pattern
        .as_deref()
        .ok_or_else(|| CliError::Config("sign-irf needs `sign.pattern`, e.g. `+,-,free`".into()))?;
    let restriction =
        SignRestriction::parse(cfg.sign_shock, pattern)?.with_horizons(cfg.sign_horizons.clone());
    let mut run = RunDir::create(cfg, "sign-irf")?;
    let draws = irf_draws(cfg, &mut run)?;
    match sign_restricted_irf(
        &draws,
        &restriction,
        cfg.irf_horizon,
        cfg.sign_max_tries,
        cfg.seed,
    ) {
        Ok(res) => {
            run.csv("irf.csv", |w| res.write_csv(w))?;
            run.text("report.txt", &res.report())?;
            run.finish()
        }
        Err(e @ Error::NoAcceptedDraws { .. }) => {
            run.text("report.txt", &format!("{e}\n"))?;
            run.finish()?;
            Err(e.into())
        }
        Err(e) => Err(e.into()),
    }
}

/// `h_max x M` yield path of one method from the end of `train`.
fn method_path(cfg: &RunConfig, name: &str, train: &YieldPanel, lam: f64, h_max: usize) -> Result<DMatrix<f64>> {
    let m = train.maturities().len();
    let loadings = loadings_for(train, lam)?;
    let bayes = |draws: &PosteriorDraws, origin: DMatrix<f64>| -> Result<DMatrix<f64>> {
        let opts = PredictOptions {
            seed: cfg.seed,
            stability_filter: cfg.stability_filter,
            ..Default::default()
        };
        let hs: Vec<usize> = (1..=h_max).collect();
        let pred = predict_with(draws, &origin, &hs, &opts)?;
        Ok(reconstruct_yields(&pred, &loadings)?.mean)
    };
    match name {
        "random_walk" => {
            let last = train.yields().row(train.len() - 1).into_owned();
            Ok(DMatrix::from_fn(h_max, m, |_, j| last[j]))
        }
        "two_step" => {
            let series = factor_series(cfg, train, lam)?;
            let model = fit_var(&series, cfg.var_lags, cfg.var_intercept.unwrap_or(true))?;
            let fc = forecast_path(&model, &origin(&series, cfg.var_lags), h_max)?;
            Ok(termstruct::bvar::reconstruct_from_path(&fc, &loadings)?.mean)
        }
        "kalman" => {
            let init = init_from_two_step(train, lam)?;
            let opts = BfgsOptions {
                max_evals: cfg.kalman_max_evals,
                ..Default::default()
            };
            let fit = fit_mle(train, &init, &opts)?;
            let fc = forecast_factors(&fit.params, &fit.filter, h_max)?;
            let own = loadings_for(train, fit.params.lambda)?;
            Ok(termstruct::bvar::reconstruct_from_path(&fc, &own)?.mean)
        }
        "dummy" => {
            let series = factor_series(cfg, train, lam)?;
            let draws = dummy_draws(cfg, &series)?;
            bayes(&draws, origin(&series, cfg.var_lags))
        }
        other => {
            let family = PriorSpec::from_name(other).map_err(|_| {
                CliError::Config(format!(
                    "unknown evaluation method `{other}` (expected random_walk, two_step, kalman, dummy, oracle or a prior name)"
                ))
            })?;
            let prior = if family.name() == cfg.prior.name() {
                cfg.prior.clone()
            } else {
                family
            };
            let series = factor_series(cfg, train, lam)?;
            let (_, draws) = posterior(cfg, &prior, &series)?;
            bayes(&draws, origin(&series, cfg.var_lags))
        }
    }
}

fn msfe_table(w: &mut Vec<u8>, mats: &[u32], horizons: &[usize], t: &DMatrix<f64>) -> termstruct::Result<()> {
    let mut head = vec!["maturity".to_string()];
    head.extend(horizons.iter().map(|h| format!("h{h}")));
    let rows = mats
        .iter()
        .enumerate()
        .map(|(j, mat)| {
            let mut r = vec![mat.to_string()];
            r.extend(t.column(j).iter().map(f64::to_string));
            r
        })
        .collect();
    table(w, &head, rows)
}

pub fn evaluate(cfg: &RunConfig) -> Result<PathBuf> {
    let mut run = RunDir::create(cfg, "evaluate")?;
    let data = load_data(cfg, &mut run)?;
    let (train, test) = (&data.split.train, &data.split.test);
    let lam = lambda(cfg)?;
    let h_max = cfg.horizons.iter().copied().max().ok_or_else(|| {
        CliError::Config("`horizons` is empty".into())
    })?;
    if h_max > test.len() {
        return Err(Error::Argument(format!(
            "horizon {h_max} exceeds the {}-month test sample",
            test.len()
        ))
        .into());
    }
    if cfg.eval_methods.is_empty() {
        return Err(CliError::Config("`evaluate.methods` is empty".into()));
    }
    let oracle = |origin: usize| -> Result<DMatrix<f64>> {
        // Rolling origins never run past the panel.
        Ok(data.panel.yields().rows(origin, h_max).into_owned())
    };
    let mut methods = Vec::new();
    for name in &cfg.eval_methods {
        let path = if name == "oracle" {
            oracle(train.len())?
        } else {
            method_path(cfg, name, train, lam, h_max)?
        };
        methods.push(MethodForecast {
            name: name.clone(),
            path,
        });
    }
    let mut report = evaluate_horizons(&methods, test, &cfg.horizons, cfg.eval_mode)?;
    report.meta = EvalMeta {
        train_end: train.dates()[train.len() - 1].to_string(),
        test_start: test.dates()[0].to_string(),
        seeds: vec![cfg.seed],
        config_hash: run.hash().to_string(),
    };
    run.raw("msfe.csv", |w| report.write_csv(w))?;
    for (i, m) in methods.iter().enumerate() {
        run.raw(&format!("msfe_{}.csv", m.name), |w| report.write_method_table(i, w))?;
        run.csv(&format!("forecast_{}.csv", m.name), |w| {
            write_path(w, train.maturities(), &m.path)
        })?;
    }
    run.csv("errors.csv", |w| report.write_error_summary(w))?;

    if cfg.eval_rolling {
        let min_train = cfg.eval_min_train.unwrap_or(train.len());
        for name in &cfg.eval_methods {
            let table = rolling_evaluation(&data.panel, min_train, &cfg.horizons, |p| {
                let r = if name == "oracle" {
                    oracle(p.len())
                } else {
                    method_path(cfg, name, p, lam, h_max)
                };
                r.map_err(|e| match e {
                    CliError::Core(c) => c,
                    other => Error::Argument(other.to_string()),
                })
            })?;
            run.csv(&format!("rolling_{name}.csv"), |w| {
                msfe_table(w, train.maturities(), &cfg.horizons, &table)
            })?;
        }
    }
    run.finish()
}
