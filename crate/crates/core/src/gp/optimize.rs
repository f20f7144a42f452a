//! Hyperparameter optimization: best-of-restarts gradient ascent with a
//! backtracking line search on the log marginal likelihood.

use crate::error::{Error, Result};
use crate::gp::{bic, log_marginal_likelihood, lml_gradient, FittedModel, HyperParams};
use crate::grammar::{param_layout, KernelExpr, ParamLayout, ParamRole};
use crate::seed;
use crate::series::TimeSeries;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Optimizer settings. Convergence is declared when the relative change in
/// lml drops below `tol` or the gradient infinity norm drops below
/// [`GRAD_TOL`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FitConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            restarts: 3,
            max_iters: 200,
            tol: 1e-6,
            seed: 0,
        }
    }
}

const GRAD_TOL: f64 = 1e-5;
const ARMIJO: f64 = 1e-4;
const STEP_INIT: f64 = 0.05;
const STEP_GROWTH: f64 = 2.0;
const STEP_MAX: f64 = 1.0;
const STEP_MIN: f64 = 1e-14;
/// Optimization-space parameters are kept in this box; with x in [0,1] and y
/// standardized, every useful optimum is interior.
const PARAM_BOUND: f64 = 15.0;

/// Draws restart initializations matched to normalized inputs: log variances
/// near 0, lengthscales near 0.2, periods between 0.05 and 0.5, shifts in
/// [0,1], noise variance near 0.1.
pub fn draw_initial(layout: &ParamLayout, rng: &mut impl Rng) -> HyperParams {
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let values = layout
        .entries
        .iter()
        .map(|spec| match spec.role {
            ParamRole::LogVariance => std_normal.sample(rng),
            ParamRole::LogLengthscale => (0.2f64).ln() + std_normal.sample(rng),
            ParamRole::LogPeriod => rng.random_range((0.05f64).ln()..(0.5f64).ln()),
            ParamRole::Shift => rng.random_range(0.0..1.0),
            ParamRole::LogNoiseVariance => (0.1f64).ln() + std_normal.sample(rng),
        })
        .collect();
    HyperParams(values)
}

fn clamp_params(theta: &mut [f64]) {
    for v in theta.iter_mut() {
        *v = v.clamp(-PARAM_BOUND, PARAM_BOUND);
    }
}

struct Ascent {
    theta: HyperParams,
    lml: f64,
    initial_lml: f64,
}

/// One restart: Polak-Ribiere conjugate gradient ascent with Armijo
/// backtracking. Errors only if the initial point cannot be evaluated;
/// numerical trouble later on just ends the climb at the last good point.
fn ascend(
    e: &KernelExpr,
    series: &TimeSeries,
    mut theta: HyperParams,
    max_iters: usize,
    tol: f64,
) -> Result<Ascent> {
    clamp_params(&mut theta.0);
    let (mut f, mut grad) = crate::gp::lml_and_gradient(e, &theta, series)?;
    let initial_lml = f;
    let mut direction = grad.clone();
    let mut step = STEP_INIT;

    for _ in 0..max_iters {
        let grad_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_inf < GRAD_TOL {
            break;
        }
        // Fall back to steepest ascent whenever the conjugate direction
        // stops pointing uphill.
        let mut slope: f64 = direction.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if slope <= 0.0 {
            direction.copy_from_slice(&grad);
            slope = grad.iter().map(|g| g * g).sum();
        }

        let mut alpha = (step * STEP_GROWTH).min(STEP_MAX);
        let mut accepted = None;
        while alpha >= STEP_MIN {
            let mut candidate = theta.clone();
            for (t, d) in candidate.0.iter_mut().zip(&direction) {
                *t += alpha * d;
            }
            clamp_params(&mut candidate.0);
            if let Ok(f_new) = log_marginal_likelihood(e, &candidate, series) {
                if f_new > f + ARMIJO * alpha * slope {
                    accepted = Some((candidate, f_new, alpha));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((candidate, f_new, used)) = accepted else {
            break;
        };
        let Ok((_, grad_new)) = crate::gp::lml_and_gradient(e, &candidate, series) else {
            theta = candidate;
            f = f_new;
            break;
        };
        // PR+ coefficient; non-positive values reset to steepest ascent.
        let grad_sq: f64 = grad.iter().map(|g| g * g).sum();
        let beta = grad_new
            .iter()
            .zip(&grad)
            .map(|(gn, go)| gn * (gn - go))
            .sum::<f64>()
            / grad_sq.max(f64::MIN_POSITIVE);
        let beta = beta.max(0.0);
        for (d, gn) in direction.iter_mut().zip(&grad_new) {
            *d = gn + beta * *d;
        }
        let rel_change = (f_new - f).abs() / f_new.abs().max(1.0);
        theta = candidate;
        f = f_new;
        grad = grad_new;
        step = used;
        if rel_change < tol {
            break;
        }
    }
    Ok(Ascent { theta, lml: f, initial_lml })
}

/// Best-of-restarts fit of `e` to a standardized series. Deterministic given
/// the config seed; the restart with the highest final lml wins, earlier
/// restarts winning ties.
pub fn fit(e: &KernelExpr, series: &TimeSeries, config: &FitConfig) -> Result<FittedModel> {
    if config.restarts == 0 {
        return Err(Error::validation("fit needs at least one restart"));
    }
    let layout = param_layout(e);
    let mut best: Option<Ascent> = None;
    let mut succeeded = 0usize;
    let mut last_error = None;

    for restart in 0..config.restarts {
        let mut rng = seed::rng(config.seed, &[restart as u64]);
        let theta0 = draw_initial(&layout, &mut rng);
        match ascend(e, series, theta0, config.max_iters, config.tol) {
            Ok(result) => {
                succeeded += 1;
                let better = best
                    .as_ref()
                    .map(|b| result.lml > b.lml)
                    .unwrap_or(true);
                if better {
                    best = Some(result);
                }
            }
            Err(err) => last_error = Some(err),
        }
    }

    let best = best.ok_or_else(|| {
        Error::numeric(
            e.canonical_string(),
            format!(
                "all {} restarts failed on series {:?}: {}",
                config.restarts,
                series.id,
                last_error.map(|e| e.to_string()).unwrap_or_default()
            ),
        )
    })?;
    debug_assert!(best.lml >= best.initial_lml);
    Ok(FittedModel {
        kernel: e.canonical_string(),
        bic: bic(best.lml, layout.count(), series.n()),
        params: best.theta,
        lml: best.lml,
        restarts_used: succeeded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::BaseKernel;
    use crate::series::standardize_series;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    fn noiseless_sine(n: usize) -> TimeSeries {
        let x = grid(n);
        let raw: Vec<f64> = x.iter().map(|t| (2.0 * PI * 4.0 * t).sin()).collect();
        let (y, _) = standardize_series(&raw);
        TimeSeries::new("sine", x, y).unwrap()
    }

    #[test]
    fn fit_is_deterministic() {
        let series = noiseless_sine(40);
        let e = KernelExpr::base(BaseKernel::Se);
        let config = FitConfig { restarts: 2, max_iters: 60, ..Default::default() };
        let a = fit(&e, &series, &config).unwrap();
        let b = fit(&e, &series, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fit_improves_on_every_restart_initialization() {
        // White-noise series fit with SE: the winner must be at least as good
        // as its own starting point (checked for every restart's init).
        let x = grid(50);
        let mut rng = seed::rng(99, &[]);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let (y, _) = standardize_series(
            &(0..50).map(|_| noise.sample(&mut rng)).collect::<Vec<f64>>(),
        );
        let series = TimeSeries::new("noise", x, y).unwrap();
        let e = KernelExpr::base(BaseKernel::Se);
        let config = FitConfig { seed: 5, ..Default::default() };
        let model = fit(&e, &series, &config).unwrap();
        let layout = param_layout(&e);
        for restart in 0..config.restarts {
            let mut rng = seed::rng(config.seed, &[restart as u64]);
            let theta0 = draw_initial(&layout, &mut rng);
            let init_lml = log_marginal_likelihood(&e, &theta0, &series).unwrap();
            assert!(
                model.lml >= init_lml - 1e-9,
                "fit lml {} below restart {restart} init {init_lml}",
                model.lml
            );
        }
    }

    #[test]
    fn periodic_kernel_beats_linear_on_a_sine() {
        let series = noiseless_sine(60);
        let config = FitConfig::default();
        let per = fit(&KernelExpr::base(BaseKernel::Per), &series, &config).unwrap();
        let lin = fit(&KernelExpr::base(BaseKernel::Lin), &series, &config).unwrap();
        assert!(
            per.lml > lin.lml,
            "PER lml {} should exceed LIN lml {}",
            per.lml,
            lin.lml
        );
    }

    #[test]
    fn fitted_bic_recomputes_exactly() {
        let series = noiseless_sine(30);
        let e = KernelExpr::base(BaseKernel::Se);
        let model = fit(&e, &series, &FitConfig::default()).unwrap();
        let expected = bic(model.lml, param_layout(&e).count(), series.n());
        assert_eq!(model.bic, expected);
        assert!(model.lml.is_finite());
        assert_eq!(model.restarts_used, 3);
    }

    #[test]
    fn gradient_is_small_at_the_returned_optimum() {
        // Smooth series with moderate noise: interior optimum, loose bound.
        let x = grid(40);
        let mut rng = seed::rng(3, &[]);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let raw: Vec<f64> = x
            .iter()
            .map(|t| (3.0 * t).sin() + 0.1 * noise.sample(&mut rng))
            .collect();
        let (y, _) = standardize_series(&raw);
        let series = TimeSeries::new("smooth", x, y).unwrap();
        let e = KernelExpr::base(BaseKernel::Se);
        let config = FitConfig { max_iters: 2000, tol: 0.0, ..Default::default() };
        let model = fit(&e, &series, &config).unwrap();
        let grad = lml_gradient(&e, &model.params, &series).unwrap();
        let inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        assert!(inf <= 1e-3, "gradient inf-norm at optimum = {inf}");
    }

    #[test]
    fn draw_initial_respects_roles() {
        let e = KernelExpr::base(BaseKernel::Per);
        let layout = param_layout(&e);
        let mut rng = seed::rng(0, &[]);
        for _ in 0..50 {
            let theta = draw_initial(&layout, &mut rng);
            let period = theta.0[2].exp();
            assert!((0.05..=0.5).contains(&period));
        }
    }

    #[test]
    fn zero_restarts_is_rejected() {
        let series = noiseless_sine(20);
        let e = KernelExpr::base(BaseKernel::Se);
        let config = FitConfig { restarts: 0, ..Default::default() };
        assert!(fit(&e, &series, &config).is_err());
    }

    #[test]
    fn fit_lml_is_scale_free_sanity() {
        // BIC ordering between SE and PER on a sine must favor PER.
        let series = noiseless_sine(60);
        let config = FitConfig::default();
        let per = fit(&KernelExpr::base(BaseKernel::Per), &series, &config).unwrap();
        assert_abs_diff_eq!(
            per.bic,
            -2.0 * per.lml + 4.0 * (60f64).ln(),
            epsilon = 1e-12
        );
    }
}
