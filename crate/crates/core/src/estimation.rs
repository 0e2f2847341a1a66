//! Two-step M-estimation: minimize the mean VaR score over `theta_v`, then
//! the mean CoVaR score over `theta_c` with the fitted VaR path held fixed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cocaviar::{
    build_regressors, default_start_values, filter_paths, recursion_values, LaggedVar, Regressors,
    StartValues,
};
use crate::error::{Error, Result};
use crate::inference;
use crate::optim::{multi_start, Bounds, MultiStart, NelderMeadOptions};
use crate::par::derive_seed;
use crate::scoring::{average_scores, mean_score_covar, mean_score_var};
use crate::stats;
use crate::types::{
    Diagnostics, FitResult, LossSeries, ModelSpec, ParamRole, ParamSet, StageDiagnostics,
};

const VAR_STREAM: u64 = 0x5641_5200;
const COVAR_STREAM: u64 = 0x434f_5641;

/// Lag coefficient used by the moment-matched start.
pub const START_LAG: f64 = 0.85;
/// Covariate loading used by the moment-matched start.
pub const START_LOADING: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Total starts per stage: one moment-matched start plus `restarts - 1` uniform draws.
    pub restarts: usize,
    pub max_iters: usize,
    pub tolerance: f64,
    pub polish_rounds: usize,
    /// Overrides the default VaR box.
    pub var_bounds: Option<Bounds>,
    /// Overrides the default CoVaR box.
    pub covar_bounds: Option<Bounds>,
    pub start_values: Option<StartValues>,
    pub seed: u64,
    /// Run restarts on the rayon pool.
    pub parallel: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iters: 2000,
            tolerance: 1e-10,
            polish_rounds: 3,
            var_bounds: None,
            covar_bounds: None,
            start_values: None,
            seed: 0,
            parallel: true,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }

    fn nm_options(&self) -> NelderMeadOptions {
        NelderMeadOptions {
            max_iters: self.max_iters,
            ftol: self.tolerance,
            polish_rounds: self.polish_rounds,
            ..NelderMeadOptions::default()
        }
    }
}

/// Result of one estimation stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageFit {
    pub theta: Vec<f64>,
    /// Fitted in-sample path at `theta`.
    pub path: Vec<f64>,
    pub start: StartValues,
    pub diagnostics: StageDiagnostics,
}

fn resolve_start(spec: &ModelSpec, series: &LossSeries, opt: &OptimizerConfig) -> Result<StartValues> {
    match opt.start_values {
        Some(s) => Ok(s),
        None => default_start_values(series, spec.levels),
    }
}

fn scale(data: &[f64]) -> f64 {
    let m = stats::mad(data);
    if m > 0.0 && m.is_finite() {
        m
    } else {
        let mean_abs = data.iter().map(|v| v.abs()).sum::<f64>() / data.len() as f64;
        if mean_abs > 0.0 {
            mean_abs
        } else {
            1.0
        }
    }
}

/// Default box for one equation: intercept within `10 * MAD` of the series,
/// loadings in `[-2, 2]`, lag coefficients in `[-0.999, 0.999]`.
pub fn default_bounds(roles: &[ParamRole], data: &[f64]) -> Bounds {
    let s = 10.0 * scale(data);
    let mut lo = Vec::with_capacity(roles.len());
    let mut hi = Vec::with_capacity(roles.len());
    for r in roles {
        let (l, h) = match r {
            ParamRole::Intercept => (-s, s),
            ParamRole::Loading(_) | ParamRole::LaggedVar => (-2.0, 2.0),
            ParamRole::OwnLag => (-0.999, 0.999),
        };
        lo.push(l);
        hi.push(h);
    }
    Bounds::new(lo, hi)
}

fn check_bounds(bounds: &Bounds, dim: usize) -> Result<()> {
    if bounds.dim() != dim {
        return Err(Error::ParamLength {
            expected: dim,
            got: bounds.dim(),
        });
    }
    Ok(())
}

/// Moment-matched start: intercept chosen so that the stationary mean of the
/// recursion equals `target` when loadings are small and the lag is 0.85.
fn moment_start(roles: &[ParamRole], reg: &Regressors, target: f64) -> Vec<f64> {
    let n = reg.len().max(1) as f64;
    let k = reg.width();
    let mut reg_mean = vec![0.0; k];
    for t in 0..reg.len() {
        for (j, m) in reg_mean.iter_mut().enumerate() {
            *m += reg.row(t)[j] / n;
        }
    }
    let mut theta = Vec::with_capacity(roles.len());
    let mut j = 0;
    let mut intercept = target * (1.0 - START_LAG);
    for r in roles {
        match r {
            ParamRole::Intercept => theta.push(0.0),
            ParamRole::Loading(_) => {
                intercept -= START_LOADING * reg_mean[j];
                j += 1;
                theta.push(START_LOADING);
            }
            ParamRole::LaggedVar => theta.push(0.0),
            ParamRole::OwnLag => theta.push(START_LAG),
        }
    }
    theta[0] = intercept;
    theta
}

fn starts(moment: Vec<f64>, bounds: &Bounds, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut first = moment;
    bounds.clamp(&mut first);
    out.push(first);
    for _ in 1..count {
        let x = bounds
            .lower
            .iter()
            .zip(&bounds.upper)
            .map(|(&l, &h)| if h > l { rng.random_range(l..=h) } else { l })
            .collect();
        out.push(x);
    }
    out
}

fn diagnostics(ms: &MultiStart) -> StageDiagnostics {
    StageDiagnostics {
        objective: ms.best.value,
        iterations: ms.runs.iter().map(|r| r.iterations).sum(),
        evaluations: ms.runs.iter().map(|r| r.evaluations).sum(),
        restarts: ms.runs.len(),
        converged_restarts: ms.runs.iter().filter(|r| r.converged).count(),
        converged: ms.best.converged,
    }
}

fn finish(ms: MultiStart, stage: &str) -> Result<(Vec<f64>, StageDiagnostics)> {
    if !ms.best.value.is_finite() {
        return Err(Error::Optimizer(format!(
            "{stage}: every restart produced a non-finite objective"
        )));
    }
    let d = diagnostics(&ms);
    Ok((ms.best.x, d))
}

/// First stage: minimizes the mean tick loss of the VaR path.
pub fn fit_var(spec: &ModelSpec, series: &LossSeries, opt: &OptimizerConfig) -> Result<StageFit> {
    spec.validate()?;
    opt.validate()?;
    let p = spec.p();
    let n = series.len();
    let layout = spec.layout();
    let bounds = match &opt.var_bounds {
        Some(b) => b.clone(),
        None => default_bounds(&layout.var, &series.x),
    };
    check_bounds(&bounds, p)?;
    // Coordinates frozen by the bounds do not count towards identification.
    let needed = 10 * bounds.free().len();
    if n < needed {
        return Err(Error::TooShort { needed, got: n });
    }
    let start = resolve_start(spec, series, opt)?;
    let reg = build_regressors(series, &spec.var_covariates)?;

    let beta = spec.levels.beta;
    let x = &series.x;
    let objective = |theta: &[f64], buf: &mut Vec<f64>| {
        buf.resize(n, 0.0);
        if recursion_values(theta, &reg, None, start.v0, buf).is_some() {
            return f64::INFINITY;
        }
        mean_score_var(x, buf, beta)
    };

    let target = stats::quantile(x, beta);
    let init = starts(
        moment_start(&layout.var, &reg, target),
        &bounds,
        opt.restarts,
        derive_seed(opt.seed, VAR_STREAM),
    );
    let ms = multi_start(&objective, &init, &bounds, &opt.nm_options(), opt.parallel);
    let (theta, diagnostics) = finish(ms, "VaR stage")?;
    let mut path = vec![0.0; n];
    if let Some(t) = recursion_values(&theta, &reg, None, start.v0, &mut path) {
        return Err(Error::Explosive { index: t });
    }
    Ok(StageFit {
        theta,
        path,
        start,
        diagnostics,
    })
}

/// Number of periods with `x_t > v_t`.
pub fn exceedances(x: &[f64], v: &[f64]) -> usize {
    x.iter().zip(v).filter(|(x, v)| x > v).count()
}

/// Second stage: minimizes the mean CoVaR score given the VaR path implied
/// by `theta_v`.
pub fn fit_covar(
    spec: &ModelSpec,
    series: &LossSeries,
    theta_v: &[f64],
    opt: &OptimizerConfig,
) -> Result<StageFit> {
    spec.validate()?;
    opt.validate()?;
    let q = spec.q();
    let n = series.len();
    if theta_v.len() != spec.p() {
        return Err(Error::ParamLength {
            expected: spec.p(),
            got: theta_v.len(),
        });
    }
    let start = resolve_start(spec, series, opt)?;
    let reg_v = build_regressors(series, &spec.var_covariates)?;
    let mut v = vec![0.0; n];
    if let Some(t) = recursion_values(theta_v, &reg_v, None, start.v0, &mut v) {
        return Err(Error::Explosive { index: t });
    }
    let layout = spec.layout();
    let bounds = match &opt.covar_bounds {
        Some(b) => b.clone(),
        None => default_bounds(&layout.covar, &series.y),
    };
    check_bounds(&bounds, q)?;
    let needed = (10 * bounds.free().len()).max(20);
    let got = exceedances(&series.x, &v);
    if got < needed {
        return Err(Error::TooFewExceedances { needed, got });
    }

    let reg = build_regressors(series, &spec.covar_covariates)?;
    let lagged = spec.include_lagged_var_in_covar.then_some(LaggedVar {
        path: &v,
        start: start.v0,
    });

    let alpha = spec.levels.alpha;
    let (x, y) = (&series.x, &series.y);
    let objective = |theta: &[f64], buf: &mut Vec<f64>| {
        buf.resize(n, 0.0);
        if recursion_values(theta, &reg, lagged, start.c0, buf).is_some() {
            return f64::INFINITY;
        }
        mean_score_covar(x, y, &v, buf, alpha)
    };

    let mut stressed: Vec<f64> = x
        .iter()
        .zip(y)
        .zip(&v)
        .filter(|((x, _), v)| *x > *v)
        .map(|((_, y), _)| *y)
        .collect();
    let target = stats::quantile_in_place(&mut stressed, alpha);
    let init = starts(
        moment_start(&layout.covar, &reg, target),
        &bounds,
        opt.restarts,
        derive_seed(opt.seed, COVAR_STREAM),
    );
    let ms = multi_start(&objective, &init, &bounds, &opt.nm_options(), opt.parallel);
    let (theta, diagnostics) = finish(ms, "CoVaR stage")?;
    let mut path = vec![0.0; n];
    if let Some(t) = recursion_values(&theta, &reg, lagged, start.c0, &mut path) {
        return Err(Error::Explosive { index: t });
    }
    Ok(StageFit {
        theta,
        path,
        start,
        diagnostics,
    })
}

/// Point estimates of both stages without covariance estimation.
pub fn fit_params(
    spec: &ModelSpec,
    series: &LossSeries,
    opt: &OptimizerConfig,
) -> Result<(ParamSet, StartValues, Diagnostics)> {
    let var = fit_var(spec, series, opt)?;
    let covar = fit_covar(spec, series, &var.theta, opt)?;
    let params = ParamSet::new(spec, var.theta, covar.theta)?;
    Ok((
        params,
        var.start,
        Diagnostics {
            var: var.diagnostics,
            covar: covar.diagnostics,
        },
    ))
}

/// Both stages followed by asymptotic covariance estimation.
pub fn fit_two_step(spec: &ModelSpec, series: &LossSeries, opt: &OptimizerConfig) -> Result<FitResult> {
    let (params, start, diagnostics) = fit_params(spec, series, opt)?;
    let path = filter_paths(spec, &params, series, start)?;
    let scores = average_scores(series, &path, spec.levels)?;
    let components = inference::avar_components(series, &path, spec.levels)?;
    let cov = inference::assemble_covariances(&components, series.len())?;
    let se = |m: &nalgebra::DMatrix<f64>| (0..m.nrows()).map(|i| m[(i, i)].max(0.0).sqrt()).collect();
    Ok(FitResult {
        spec: spec.clone(),
        params,
        avg_score_var: scores.s_var,
        avg_score_covar: scores.s_covar,
        se_v: se(&cov.cov_v),
        se_c: se(&cov.cov_c),
        cov_v: cov.cov_v,
        cov_c: cov.cov_c,
        cov_joint: cov.cov_joint,
        bandwidths: (components.bw_x, components.bw_y),
        start,
        diagnostics,
    })
}
