//! Shared fixtures for the estimator benchmarks.

use termstruct::simulate::{reference_params, simulate_dns, STANDARD_MATURITIES};
use termstruct::{build_design, fit_cross_section, FactorSeries, SsmParams, VarDesign, YieldPanel};

pub struct Fixture {
    pub params: SsmParams,
    pub panel: YieldPanel,
    pub factors: FactorSeries,
}

/// A simulated panel of `months` rows at the standard maturities.
pub fn fixture(months: usize) -> Fixture {
    let params = reference_params(STANDARD_MATURITIES.len());
    let (panel, _) = simulate_dns(&params, &STANDARD_MATURITIES, months, 1).expect("simulated panel");
    let factors = fit_cross_section(&panel, params.lambda).expect("factors");
    Fixture {
        params,
        panel,
        factors,
    }
}

pub fn design(f: &Fixture, intercept: bool) -> VarDesign {
    build_design(&f.factors, 1, intercept).expect("design")
}
