//! CoCAViaR recursions.
//!
//! Both equations are linear in their own lag:
//!
//! ```text
//! v_t = omega_v + a_v' w_{t-1} + b_v v_{t-1}
//! c_t = omega_c + a_c' w~_{t-1} [+ b_vc v_{t-1}] + b_c c_{t-1}
//! ```
//!
//! where `w_{t-1}` collects the transforms selected by the covariate mask.
//! Gradients follow the companion recursion
//! `grad_t = (1, w_{t-1}', [v_{t-1}], lag_{t-1})' + b grad_{t-1}` with a zero
//! initial gradient; starting values do not depend on the parameters.
//!
//! Series index `t = 0` is the first period. The pre-sample regressor row is
//! the zero vector, so `v_0 = omega + b * v_start`.

use crate::error::{Error, Result};
use crate::stats;
use crate::types::{Covariate, LossSeries, ModelSpec, ParamSet, ProbLevels, RiskPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartPolicy {
    Explicit,
    EmpiricalQuantile,
}

/// Initial values `v_start`, `c_start` of the two recursions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartValues {
    pub v0: f64,
    pub c0: f64,
    pub policy: StartPolicy,
}

impl StartValues {
    pub fn explicit(v0: f64, c0: f64) -> Result<Self> {
        if !v0.is_finite() || !c0.is_finite() {
            return Err(Error::InvalidParameter(
                "explicit start values must be finite".into(),
            ));
        }
        Ok(Self {
            v0,
            c0,
            policy: StartPolicy::Explicit,
        })
    }
}

/// Minimum exceedances of `v0` before the CoVaR start value uses the
/// conditional sample instead of the unconditional one.
pub const MIN_START_EXCEEDANCES: usize = 5;

/// Empirical VaR and CoVaR of the sample as starting values.
///
/// `v0` is the `beta`-quantile of `x`; `c0` the `alpha`-quantile of
/// `{y_t : x_t >= v0}`, or of all `y` if fewer than
/// [`MIN_START_EXCEEDANCES`] periods qualify.
pub fn default_start_values(series: &LossSeries, levels: ProbLevels) -> Result<StartValues> {
    const MIN_LEN: usize = 20;
    if series.len() < MIN_LEN {
        return Err(Error::TooShort {
            needed: MIN_LEN,
            got: series.len(),
        });
    }
    let v0 = stats::quantile(&series.x, levels.beta);
    let mut stressed: Vec<f64> = series
        .x
        .iter()
        .zip(&series.y)
        .filter(|(x, _)| **x >= v0)
        .map(|(_, y)| *y)
        .collect();
    let c0 = if stressed.len() < MIN_START_EXCEEDANCES {
        stats::quantile(&series.y, levels.alpha)
    } else {
        stats::quantile_in_place(&mut stressed, levels.alpha)
    };
    Ok(StartValues {
        v0,
        c0,
        policy: StartPolicy::EmpiricalQuantile,
    })
}

/// Row-major covariate matrix: row `t` holds the mask's transforms of the
/// observation at `t - 1`; row 0 is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressors {
    k: usize,
    n: usize,
    data: Vec<f64>,
}

impl Regressors {
    pub fn width(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.k..(t + 1) * self.k]
    }
}

pub fn build_regressors(series: &LossSeries, mask: &[Covariate]) -> Result<Regressors> {
    let dim = series.covariate_dim();
    for c in mask {
        if let Covariate::Z(i) = c {
            if *i >= dim {
                return Err(Error::MissingCovariate {
                    index: *i,
                    available: dim,
                });
            }
        }
    }
    let n = series.len();
    let k = mask.len();
    let mut data = vec![0.0; n * k];
    for t in 1..n {
        let z = series.z.as_ref().map(|z| z[t - 1].as_slice());
        for (j, c) in mask.iter().enumerate() {
            data[t * k + j] = c.eval(series.x[t - 1], series.y[t - 1], z);
        }
    }
    Ok(Regressors { k, n, data })
}

/// A filtered path with its gradient with respect to the equation's own
/// parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredPath {
    pub values: Vec<f64>,
    pub grads: Vec<Vec<f64>>,
}

/// Optional `v_{t-1}` regressor of the CoVaR equation.
#[derive(Clone, Copy)]
pub(crate) struct LaggedVar<'a> {
    pub path: &'a [f64],
    pub start: f64,
}

impl LaggedVar<'_> {
    #[inline]
    fn at(&self, t: usize) -> f64 {
        if t == 0 {
            self.start
        } else {
            self.path[t - 1]
        }
    }
}

/// Value-only recursion. Writes into `out` and returns the first index
/// where the path became non-finite, if any.
///
/// `theta = [omega, a_1..a_k, (b_lagged_var), b_own]`.
#[inline]
pub(crate) fn recursion_values(
    theta: &[f64],
    reg: &Regressors,
    lagged_var: Option<LaggedVar<'_>>,
    start: f64,
    out: &mut [f64],
) -> Option<usize> {
    let k = reg.k;
    let omega = theta[0];
    let loadings = &theta[1..1 + k];
    let b = theta[theta.len() - 1];
    let b_cross = if lagged_var.is_some() { theta[1 + k] } else { 0.0 };
    let mut prev = start;
    for (t, slot) in out.iter_mut().enumerate() {
        let row = reg.row(t);
        let mut val = omega + b * prev;
        for j in 0..k {
            val += loadings[j] * row[j];
        }
        if let Some(lv) = &lagged_var {
            val += b_cross * lv.at(t);
        }
        if !val.is_finite() {
            return Some(t);
        }
        *slot = val;
        prev = val;
    }
    None
}

fn recursion_with_grad(
    theta: &[f64],
    reg: &Regressors,
    lagged_var: Option<LaggedVar<'_>>,
    start: f64,
) -> Result<FilteredPath> {
    let n = reg.n;
    let dim = theta.len();
    let b = theta[dim - 1];
    let mut values = vec![0.0; n];
    if let Some(t) = recursion_values(theta, reg, lagged_var, start, &mut values) {
        return Err(Error::Explosive { index: t });
    }
    let mut grads = Vec::with_capacity(n);
    let mut prev_grad = vec![0.0; dim];
    for t in 0..n {
        let prev_val = if t == 0 { start } else { values[t - 1] };
        let mut g = Vec::with_capacity(dim);
        g.push(1.0);
        g.extend_from_slice(reg.row(t));
        if let Some(lv) = &lagged_var {
            g.push(lv.at(t));
        }
        g.push(prev_val);
        for (gi, pi) in g.iter_mut().zip(&prev_grad) {
            *gi += b * pi;
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Explosive { index: t });
        }
        prev_grad.clone_from(&g);
        grads.push(g);
    }
    Ok(FilteredPath { values, grads })
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::ParamLength { expected, got });
    }
    Ok(())
}

/// Filters the VaR path and its gradient.
pub fn filter_var(
    spec: &ModelSpec,
    theta_v: &[f64],
    series: &LossSeries,
    start: StartValues,
) -> Result<FilteredPath> {
    check_len(spec.p(), theta_v.len())?;
    let reg = build_regressors(series, &spec.var_covariates)?;
    recursion_with_grad(theta_v, &reg, None, start.v0)
}

/// Filters the CoVaR path and its gradient with respect to `theta_c`.
///
/// The VaR path, when required by the spec, is treated as fixed data.
pub fn filter_covar(
    spec: &ModelSpec,
    theta_c: &[f64],
    series: &LossSeries,
    v_path: Option<&[f64]>,
    start: StartValues,
) -> Result<FilteredPath> {
    check_len(spec.q(), theta_c.len())?;
    let reg = build_regressors(series, &spec.covar_covariates)?;
    let lagged = if spec.include_lagged_var_in_covar {
        let path = v_path.ok_or(Error::MissingVarPath)?;
        if path.len() != series.len() {
            return Err(Error::LengthMismatch {
                what: "v_path",
                expected: series.len(),
                got: path.len(),
            });
        }
        Some(LaggedVar {
            path,
            start: start.v0,
        })
    } else {
        None
    };
    recursion_with_grad(theta_c, &reg, lagged, start.c0)
}

/// Filters both equations at `params`.
pub fn filter_paths(
    spec: &ModelSpec,
    params: &ParamSet,
    series: &LossSeries,
    start: StartValues,
) -> Result<RiskPath> {
    let v = filter_var(spec, &params.theta_v, series, start)?;
    let c = filter_covar(spec, &params.theta_c, series, Some(&v.values), start)?;
    Ok(RiskPath {
        v: v.values,
        c: c.values,
        grad_v: v.grads,
        grad_c: c.grads,
    })
}

/// Stationarity of the lag matrix: with `B_12 = 0` it is triangular, so its
/// spectral radius is `max(|b_v|, |b_c|)`.
pub fn spectral_radius_ok(theta_v: &[f64], theta_c: &[f64], spec: &ModelSpec) -> bool {
    if theta_v.len() != spec.p() || theta_c.len() != spec.q() {
        return false;
    }
    let bv = theta_v[spec.p() - 1];
    let bc = theta_c[spec.q() - 1];
    bv.abs().max(bc.abs()) < 1.0
}
