//! BFGS minimizer with finite-difference gradients.
//!
//! Points where the objective is not finite are treated as `+inf`, so the
//! backtracking line search simply steps back from them.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOptions {
    /// Hard cap on objective evaluations, gradient evaluations included.
    pub max_evals: usize,
    /// Stop when `max|step| / max(max|x|, 1)` falls below this.
    pub rel_step_tol: f64,
    /// Relative central-difference step.
    pub fd_step: f64,
    pub max_iters: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_evals: 30_000,
            rel_step_tol: 1e-9,
            fd_step: 1e-6,
            max_iters: usize::MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    /// Infinity norm of the gradient (first-order optimality).
    pub grad_norm: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: DVector<f64>,
    pub fx: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evals: usize,
    pub trace: Vec<TraceRow>,
}

struct Counted<'a, F> {
    f: &'a F,
    evals: usize,
    cap: usize,
}

impl<F: Fn(&DVector<f64>) -> f64 + Sync> Counted<'_, F> {
    fn remaining(&self) -> usize {
        self.cap.saturating_sub(self.evals)
    }

    fn eval(&mut self, x: &DVector<f64>) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }

    /// Central differences; falls back to one-sided differences next to an
    /// infeasible region.
    fn gradient(&mut self, x: &DVector<f64>, fx: f64, rel: f64) -> DVector<f64> {
        let n = x.len();
        self.evals += 2 * n;
        let f = self.f;
        let parts: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let h = rel * x[i].abs().max(1.0);
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let fp = f(&xp);
                let fm = f(&xm);
                match (fp.is_finite(), fm.is_finite()) {
                    (true, true) => (fp - fm) / (2.0 * h),
                    (true, false) => (fp - fx) / h,
                    (false, true) => (fx - fm) / h,
                    (false, false) => 0.0,
                }
            })
            .collect();
        DVector::from_vec(parts)
    }
}

/// Minimize `f` from `x0`.
pub fn minimize<F>(f: &F, x0: &DVector<f64>, opts: &BfgsOptions) -> Result<OptimResult>
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    let n = x0.len();
    let mut c = Counted {
        f,
        evals: 0,
        cap: opts.max_evals.max(1),
    };
    let f0 = (c.f)(x0);
    c.evals = 1;
    if !f0.is_finite() {
        return Err(Error::arg(format!(
            "objective is not finite at the initial point ({f0})"
        )));
    }
    let mut x = x0.clone();
    let mut fx = f0;
    let mut trace = Vec::new();
    let done = |x: DVector<f64>, fx, converged, iterations, evals, trace| {
        Ok(OptimResult {
            x,
            fx,
            converged,
            iterations,
            evals,
            trace,
        })
    };
    if c.remaining() < 2 * n {
        return done(x, fx, false, 0, c.evals, trace);
    }
    let mut g = c.gradient(&x, fx, opts.fd_step);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    trace.push(TraceRow {
        iteration: 0,
        objective: fx,
        grad_norm: g.amax(),
        evals: c.evals,
    });

    let mut iter = 0;
    while iter < opts.max_iters {
        iter += 1;
        let mut d = -(&hinv * &g);
        if g.dot(&d) >= 0.0 {
            hinv.fill_with_identity();
            fresh = true;
            d = -g.clone();
        }
        let scale = x.amax().max(1.0);
        if d.amax() == 0.0 {
            return done(x, fx, true, iter, c.evals, trace);
        }
        // Backtracking Armijo search.
        let slope = g.dot(&d);
        let mut alpha = 1.0;
        let accepted = loop {
            if c.remaining() == 0 {
                return done(x, fx, false, iter, c.evals, trace);
            }
            let xn = &x + &d * alpha;
            let fn_ = c.eval(&xn);
            if fn_ <= fx + 1e-4 * alpha * slope {
                break Some((xn, fn_));
            }
            alpha *= 0.5;
            if alpha * d.amax() / scale < opts.rel_step_tol {
                break None;
            }
        };
        let Some((xn, fn_)) = accepted else {
            if !fresh {
                // Stale curvature: retry along steepest descent.
                hinv.fill_with_identity();
                fresh = true;
                continue;
            }
            return done(x, fx, true, iter, c.evals, trace);
        };
        let s = &xn - &x;
        let rel_step = s.amax() / scale;
        x = xn;
        fx = fn_;
        if rel_step < opts.rel_step_tol {
            trace.push(TraceRow {
                iteration: iter,
                objective: fx,
                grad_norm: g.amax(),
                evals: c.evals,
            });
            return done(x, fx, true, iter, c.evals, trace);
        }
        if c.remaining() < 2 * n {
            trace.push(TraceRow {
                iteration: iter,
                objective: fx,
                grad_norm: g.amax(),
                evals: c.evals,
            });
            return done(x, fx, false, iter, c.evals, trace);
        }
        let gn = c.gradient(&x, fx, opts.fd_step);
        let y = &gn - &g;
        g = gn;
        trace.push(TraceRow {
            iteration: iter,
            objective: fx,
            grad_norm: g.amax(),
            evals: c.evals,
        });
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                hinv *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (H y s' + s y' H) + (rho^2 y'Hy + rho) s s'
            hinv -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho);
            fresh = false;
        }
    }
    done(x, fx, false, iter, c.evals, trace)
}
