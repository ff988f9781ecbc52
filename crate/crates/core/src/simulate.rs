//! Synthetic data generators for tests, examples and benchmarks.

use nalgebra::{DMatrix, DVector};

use crate::data_io::{MonthStamp, YieldPanel};
use crate::error::Result;
use crate::linalg::psd_factor;
use crate::ns_factors::{month_range, ns_loadings, FactorSeries};
use crate::sampling::{chain_rng, std_normal_vector};
use crate::state_space::{default_initial_cov, SsmParams};
use crate::var_engine::{simulate_var, VarModel};

/// The ten-maturity grid (months) of the usual Treasury panel.
pub const STANDARD_MATURITIES: [u32; 10] = [3, 6, 12, 24, 36, 60, 84, 120, 240, 360];

/// A persistent, plausible DNS parameter set with `m` maturities.
pub fn reference_params(m: usize) -> SsmParams {
    SsmParams {
        a: DMatrix::from_row_slice(3, 3, &[0.98, 0.02, 0.0, -0.01, 0.94, 0.03, 0.0, 0.02, 0.88]),
        mu: DVector::from_vec(vec![5.5, -2.0, -1.0]),
        lambda: 0.0598,
        z: DMatrix::from_row_slice(3, 3, &[0.25, 0.0, 0.0, -0.1, 0.35, 0.0, 0.05, 0.1, 0.6]),
        w: DVector::from_iterator(m, (0..m).map(|i| 0.04 + 0.01 * (i % 3) as f64)),
    }
}

/// Simulate `t` months of yields from the DNS state space. Returns the panel
/// and the `T x 3` factor path `f_t = μ + X_t`.
pub fn simulate_dns(
    params: &SsmParams,
    maturities: &[u32],
    t: usize,
    seed: u64,
) -> Result<(YieldPanel, DMatrix<f64>)> {
    let mats: Vec<f64> = maturities.iter().map(|&m| m as f64).collect();
    let lam = ns_loadings(params.lambda, &mats)?.matrix;
    let mut rng = chain_rng(seed);
    let q = params.sigma_eta();
    let x0_cov = default_initial_cov(&params.a, &q);
    let mut x = psd_factor(&x0_cov) * std_normal_vector(&mut rng, 3);
    let mut factors = DMatrix::zeros(t, 3);
    let mut y = DMatrix::zeros(t, maturities.len());
    for s in 0..t {
        x = &params.a * &x + &params.z * std_normal_vector(&mut rng, 3);
        let f = &x + &params.mu;
        let e = std_normal_vector(&mut rng, maturities.len()).component_mul(&params.w);
        factors.row_mut(s).copy_from(&f.transpose());
        y.row_mut(s).copy_from(&(&lam * &f + e).transpose());
    }
    let dates = month_range(
        MonthStamp {
            year: 1990,
            month: 1,
        },
        t,
    );
    Ok((YieldPanel::new(dates, maturities.to_vec(), y)?, factors))
}

/// Simulate a VAR after discarding `burn` start-up observations.
pub fn simulate_var_series(model: &VarModel, t: usize, burn: usize, seed: u64) -> FactorSeries {
    let mut rng = chain_rng(seed);
    let init = DMatrix::zeros(model.p, model.k());
    let all = simulate_var(model, &init, t + burn, &mut rng);
    let names: Vec<String> = if model.names.len() == model.k() {
        model.names.clone()
    } else {
        (1..=model.k()).map(|i| format!("y{i}")).collect()
    };
    FactorSeries::new(
        month_range(
            MonthStamp {
                year: 1990,
                month: 1,
            },
            t,
        ),
        names,
        all.rows(burn, t).into_owned(),
    )
    .expect("simulated series is well formed")
}
