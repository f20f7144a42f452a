//! Gaussian process machinery: covariance assembly, log marginal likelihood
//! and its gradient, multi-restart fitting, BIC, and the full
//! series-by-kernel evaluation sweep.
//!
//! All hyperparameters are optimized in log space except the LIN shift;
//! observation noise is appended at the model level as one extra variance
//! parameter and counted in the BIC parameter total.

mod kernels;
mod optimize;
mod sweep;

pub use optimize::{draw_initial, fit, FitConfig};
pub use sweep::{evaluate_all, BicMatrix, CellReport, FitReport, SweepConfig};

use crate::error::{Error, Result};
use crate::grammar::{param_layout, KernelExpr};
use crate::series::TimeSeries;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

const LN_2PI: f64 = 1.8378770664093453;

/// Hyperparameter vector aligned with the expression's
/// [`ParamLayout`](crate::grammar::ParamLayout): scale-like entries in log
/// space, the LIN shift untransformed, one trailing log noise variance.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HyperParams(pub Vec<f64>);

impl HyperParams {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn noise_variance(&self) -> f64 {
        self.0.last().copied().unwrap_or(f64::NAN).exp()
    }
}

/// One optimized (kernel, series) fit.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FittedModel {
    /// Canonical kernel string.
    pub kernel: String,
    pub params: HyperParams,
    /// Log marginal likelihood in nats.
    pub lml: f64,
    pub bic: f64,
    /// Restarts that completed without numerical failure.
    pub restarts_used: usize,
}

/// Bayesian information criterion: `-2 * lml + param_count * ln(n)`.
pub fn bic(lml: f64, param_count: usize, n: usize) -> f64 {
    -2.0 * lml + param_count as f64 * (n as f64).ln()
}

fn check_alignment(e: &KernelExpr, params: &HyperParams) -> Result<()> {
    let expected = param_layout(e).count();
    if params.len() != expected {
        return Err(Error::validation(format!(
            "kernel {} expects {expected} parameters, got {}",
            e.canonical_string(),
            params.len()
        )));
    }
    Ok(())
}

/// Full covariance of `e` at inputs `x`: kernel matrix plus noise variance on
/// the diagonal. Exactly symmetric by construction.
pub fn covariance(e: &KernelExpr, params: &HyperParams, x: &[f64]) -> Result<DMatrix<f64>> {
    check_alignment(e, params)?;
    let (k, _) = kernels::build(e, params, x, false)?;
    Ok(k)
}

/// Covariance plus the gradient matrix for every parameter, noise last.
pub fn covariance_with_grads(
    e: &KernelExpr,
    params: &HyperParams,
    x: &[f64],
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    check_alignment(e, params)?;
    kernels::build(e, params, x, true)
}

/// Cholesky with escalating diagonal jitter: raw, then 1e-8 through 1e-2 in
/// decade steps. Returns the factorization and the jitter that was needed.
fn cholesky_jittered(
    k: &DMatrix<f64>,
    context: &str,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(chol) = k.clone().cholesky() {
        return Ok((chol, 0.0));
    }
    let n = k.nrows();
    let mut jitter = 1e-8;
    while jitter <= 1e-2 {
        let mut jittered = k.clone();
        for i in 0..n {
            jittered[(i, i)] += jitter;
        }
        if let Some(chol) = jittered.cholesky() {
            return Ok((chol, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::numeric(
        context.to_string(),
        "covariance not positive definite after jitter escalation to 1e-2",
    ))
}

/// Zero-mean GP evidence via Cholesky:
/// `-0.5 * y' K^-1 y - 0.5 * log|K| - 0.5 * n * ln(2 pi)`.
pub fn log_marginal_likelihood(
    e: &KernelExpr,
    params: &HyperParams,
    series: &TimeSeries,
) -> Result<f64> {
    let k = covariance(e, params, &series.x)?;
    lml_from_cov(&k, &series.y, &e.canonical_string())
}

fn lml_from_cov(k: &DMatrix<f64>, y: &[f64], context: &str) -> Result<f64> {
    let (chol, _) = cholesky_jittered(k, context)?;
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve(&yv);
    let half_logdet: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
    let n = y.len() as f64;
    let lml = -0.5 * yv.dot(&alpha) - half_logdet - 0.5 * n * LN_2PI;
    if lml.is_finite() {
        Ok(lml)
    } else {
        Err(Error::numeric(context.to_string(), "non-finite log marginal likelihood"))
    }
}

/// Analytic gradient of the log marginal likelihood with respect to the
/// optimization-space parameters, via `0.5 * (a' dK a - tr(K^-1 dK))` with
/// `a = K^-1 y`.
pub fn lml_gradient(
    e: &KernelExpr,
    params: &HyperParams,
    series: &TimeSeries,
) -> Result<Vec<f64>> {
    lml_and_gradient(e, params, series).map(|(_, g)| g)
}

/// Value and gradient from one covariance build and one factorization.
pub(crate) fn lml_and_gradient(
    e: &KernelExpr,
    params: &HyperParams,
    series: &TimeSeries,
) -> Result<(f64, Vec<f64>)> {
    let context = e.canonical_string();
    let (k, grads) = covariance_with_grads(e, params, &series.x)?;
    let (chol, _) = cholesky_jittered(&k, &context)?;
    let yv = DVector::from_column_slice(&series.y);
    let alpha = chol.solve(&yv);
    let half_logdet: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
    let n = series.y.len() as f64;
    let lml = -0.5 * yv.dot(&alpha) - half_logdet - 0.5 * n * LN_2PI;
    if !lml.is_finite() {
        return Err(Error::numeric(context, "non-finite log marginal likelihood"));
    }
    let k_inv = chol.inverse();
    let mut out = Vec::with_capacity(grads.len());
    for dk in &grads {
        let quad = alpha.dot(&(dk * &alpha));
        let trace = k_inv.zip_fold(dk, 0.0, |acc, a, b| acc + a * b);
        let g = 0.5 * (quad - trace);
        if !g.is_finite() {
            return Err(Error::numeric(context, "non-finite gradient entry"));
        }
        out.push(g);
    }
    Ok((lml, out))
}
