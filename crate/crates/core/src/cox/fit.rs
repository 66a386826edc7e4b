use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::likelihood::{Derivatives, LikelihoodEval, PartialLikelihood};
use crate::cohort::EncodedCohort;
use crate::error::{Error, Result};
use crate::stats::ln_two_sided_p;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Convergence threshold on `max |delta beta|`.
    pub tol: f64,
    pub max_iter: usize,
    /// L2 penalty `ridge / 2 * |beta|^2`; zero unless separation must be rescued.
    pub ridge: f64,
    /// Any `|beta_j|` beyond this is treated as monotone likelihood.
    pub separation_bound: f64,
    /// Prediction horizon recorded in the fitted model (years).
    pub horizon: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_iter: 100,
            ridge: 0.0,
            separation_bound: 30.0,
            horizon: 10.0,
        }
    }
}

const REL_LOGLIK_TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub iterations: usize,
    /// Log partial likelihood (not negated) at the returned coefficients.
    pub final_loglik: f64,
    pub standard_errors: Vec<f64>,
    pub ci95_low: Vec<f64>,
    pub ci95_high: Vec<f64>,
    /// Wald test `-log2(p)`.
    pub neg_log2_p: Vec<f64>,
}

struct Penalized<'a> {
    lik: PartialLikelihood<'a>,
    ridge: f64,
}

impl Penalized<'_> {
    fn eval(&self, beta: &[f64], want: Derivatives) -> Result<LikelihoodEval> {
        let mut e = self.lik.evaluate(beta, want)?;
        if self.ridge > 0.0 {
            e.value += 0.5 * self.ridge * beta.iter().map(|b| b * b).sum::<f64>();
            for (g, b) in e.gradient.iter_mut().zip(beta) {
                *g += self.ridge * b;
            }
            for j in 0..e.hessian.nrows() {
                e.hessian[[j, j]] += self.ridge;
            }
        }
        Ok(e)
    }
}

fn to_nalgebra(e: &LikelihoodEval) -> (DMatrix<f64>, DVector<f64>) {
    let p = e.gradient.len();
    let h = DMatrix::from_fn(p, p, |a, b| e.hessian[[a, b]]);
    (h, DVector::from_column_slice(&e.gradient))
}

/// Newton step `H^{-1} g`, with increasing diagonal damping if `H` is not
/// numerically positive definite.
fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Ok(ch.solve(g));
    }
    let scale = h.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let mut lambda = 1e-10 * scale;
    while lambda < 1e6 * scale {
        let damped = h + DMatrix::identity(h.nrows(), h.ncols()) * lambda;
        if let Some(ch) = damped.cholesky() {
            return Ok(ch.solve(g));
        }
        lambda *= 10.0;
    }
    Err(Error::SingularHessian)
}

/// Maximizes the partial likelihood by Newton iterations from zero with
/// step halving. Returns the coefficients and fit diagnostics; running out of
/// iterations is reported through `converged = false`, not as an error.
pub fn fit_coefficients(cohort: &EncodedCohort, opts: &FitOptions) -> Result<(Vec<f64>, FitDiagnostics)> {
    if !(opts.ridge >= 0.0) {
        return Err(Error::InvalidArgument("ridge must be non-negative".into()));
    }
    if cohort.n() <= cohort.p() {
        return Err(Error::InvalidArgument(format!(
            "need more rows than features, got n = {} and p = {}",
            cohort.n(),
            cohort.p()
        )));
    }
    let obj = Penalized {
        lik: PartialLikelihood::for_cohort(cohort)?,
        ridge: opts.ridge,
    };
    let p = cohort.p();
    let mut beta = vec![0.0; p];
    let mut cur = obj.eval(&beta, Derivatives::Hessian)?;
    let mut converged = p == 0;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let (h, g) = to_nalgebra(&cur);
        let step = newton_direction(&h, &g)?;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b - t * s).collect();
            match obj.eval(&cand, Derivatives::None) {
                Ok(e) if e.value <= cur.value => {
                    accepted = Some(cand);
                    break;
                }
                // overflow along a long step is a reason to shorten it
                Ok(_) | Err(Error::Overflow(_)) => t *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some(next) = accepted else {
            // no decrease possible along the Newton direction: at the optimum to
            // working precision
            converged = true;
            break;
        };
        let max_delta = beta.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let next_eval = obj.eval(&next, Derivatives::Hessian)?;
        let rel = (cur.value - next_eval.value).abs() / cur.value.abs().max(1.0);
        beta = next;
        cur = next_eval;
        if let Some(j) = beta.iter().position(|b| b.abs() > opts.separation_bound) {
            return Err(Error::Separation {
                feature: cohort.feature_names[j].clone(),
                bound: opts.separation_bound,
            });
        }
        if max_delta < opts.tol && rel < REL_LOGLIK_TOL {
            converged = true;
        }
    }

    let (h, _) = to_nalgebra(&cur);
    let cov = if p == 0 {
        DMatrix::zeros(0, 0)
    } else {
        h.cholesky().ok_or(Error::SingularHessian)?.inverse()
    };
    let standard_errors: Vec<f64> = (0..p).map(|j| cov[(j, j)].sqrt()).collect();
    let ci95_low = beta.iter().zip(&standard_errors).map(|(b, s)| b - 1.96 * s).collect();
    let ci95_high = beta.iter().zip(&standard_errors).map(|(b, s)| b + 1.96 * s).collect();
    let neg_log2_p = beta
        .iter()
        .zip(&standard_errors)
        .map(|(b, s)| (-ln_two_sided_p(b / s) / std::f64::consts::LN_2).max(0.0))
        .collect();
    let penalty = 0.5 * opts.ridge * beta.iter().map(|b| b * b).sum::<f64>();
    let diagnostics = FitDiagnostics {
        converged,
        iterations,
        final_loglik: -(cur.value - penalty),
        standard_errors,
        ci95_low,
        ci95_high,
        neg_log2_p,
    };
    Ok((beta, diagnostics))
}
