//! CCC-GARCH benchmark: univariate Gaussian-QML GARCH(1,1) fits with a
//! constant correlation, and (VaR, CoVaR) extraction from a decomposition
//! `H = Sigma Sigma'` of the forecast covariance matrix.
//!
//! The decomposition is not unique and the implied CoVaR depends on it.

use crate::error::{Error, Result};
use crate::optim::{multi_start, Bounds, NelderMeadOptions};
use crate::stats;
use crate::types::{LossSeries, ProbLevels};

pub type Mat2 = [[f64; 2]; 2];

/// Positive definite 2x2 covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovMatrix2 {
    pub sxx: f64,
    pub syy: f64,
    pub sxy: f64,
}

impl CovMatrix2 {
    pub fn new(sxx: f64, syy: f64, sxy: f64) -> Result<Self> {
        let h = Self { sxx, syy, sxy };
        h.check()?;
        Ok(h)
    }

    fn check(&self) -> Result<()> {
        let ok = self.sxx > 0.0 && self.syy > 0.0 && self.sxx * self.syy - self.sxy * self.sxy > 0.0;
        if !ok || !(self.sxx.is_finite() && self.syy.is_finite() && self.sxy.is_finite()) {
            return Err(Error::NotPositiveDefinite(format!(
                "[[{}, {}], [{}, {}]]",
                self.sxx, self.sxy, self.sxy, self.syy
            )));
        }
        Ok(())
    }

    pub fn det(&self) -> f64 {
        self.sxx * self.syy - self.sxy * self.sxy
    }

    /// `H = D R D` with volatilities `d` and correlation `rho`.
    pub fn from_vol_corr(sx: f64, sy: f64, rho: f64) -> Result<Self> {
        Self::new(sx * sx, sy * sy, rho * sx * sy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decomposition {
    Cholesky,
    Symmetric,
}

impl Decomposition {
    pub const ALL: [Decomposition; 2] = [Decomposition::Cholesky, Decomposition::Symmetric];

    pub fn name(&self) -> &'static str {
        match self {
            Decomposition::Cholesky => "cholesky",
            Decomposition::Symmetric => "symmetric",
        }
    }

    pub fn apply(&self, h: &CovMatrix2) -> Result<Mat2> {
        match self {
            Decomposition::Cholesky => chol_lower(h),
            Decomposition::Symmetric => sym_sqrt(h),
        }
    }
}

impl std::str::FromStr for Decomposition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cholesky" | "chol" => Ok(Decomposition::Cholesky),
            "symmetric" | "sym" => Ok(Decomposition::Symmetric),
            other => Err(Error::UnknownVariant(other.to_string())),
        }
    }
}

/// Lower-triangular `Sigma` with positive diagonal and `Sigma Sigma' = H`.
pub fn chol_lower(h: &CovMatrix2) -> Result<Mat2> {
    h.check()?;
    let l11 = h.sxx.sqrt();
    let l21 = h.sxy / l11;
    let l22 = (h.syy - l21 * l21).sqrt();
    Ok([[l11, 0.0], [l21, l22]])
}

/// Symmetric positive definite `Sigma` with `Sigma Sigma = H`.
///
/// Closed form for 2x2 matrices: `(H + s I) / t` with `s = sqrt(det H)` and
/// `t = sqrt(tr H + 2 s)`.
pub fn sym_sqrt(h: &CovMatrix2) -> Result<Mat2> {
    h.check()?;
    let s = h.det().sqrt();
    let t = (h.sxx + h.syy + 2.0 * s).sqrt();
    Ok([[(h.sxx + s) / t, h.sxy / t], [h.sxy / t, (h.syy + s) / t]])
}

pub fn mat_mul_t(a: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * a[j][0] + a[i][1] * a[j][1];
        }
    }
    out
}

pub(crate) fn mat_inv(a: &Mat2) -> Mat2 {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]]
}

/// Minimum residual count for the empirical quantiles.
pub const MIN_RESIDUALS: usize = 100;
/// Exceedance count below which the CoVaR is flagged as poorly determined.
pub const RECOMMENDED_EXCEEDANCES: usize = 20;

/// Empirical `beta`-quantile of `row1(Sigma) . eps_i`.
pub fn var_from_sigma(sigma: &Mat2, residuals: &[(f64, f64)], beta: f64) -> Result<f64> {
    if residuals.len() < MIN_RESIDUALS {
        return Err(Error::TooShort {
            needed: MIN_RESIDUALS,
            got: residuals.len(),
        });
    }
    let mut comb: Vec<f64> = residuals
        .iter()
        .map(|(ex, ey)| sigma[0][0] * ex + sigma[0][1] * ey)
        .collect();
    Ok(stats::quantile_in_place(&mut comb, beta))
}

/// Empirical `alpha`-quantile of `row2(Sigma) . eps_i` over the residuals
/// whose first-row combination reaches `var_forecast`.
pub fn covar_from_sigma(sigma: &Mat2, residuals: &[(f64, f64)], var_forecast: f64, alpha: f64) -> Result<f64> {
    let mut stressed: Vec<f64> = residuals
        .iter()
        .filter(|(ex, ey)| sigma[0][0] * ex + sigma[0][1] * ey >= var_forecast)
        .map(|(ex, ey)| sigma[1][0] * ex + sigma[1][1] * ey)
        .collect();
    if stressed.is_empty() {
        return Err(Error::TooFewExceedances { needed: 1, got: 0 });
    }
    if stressed.len() < RECOMMENDED_EXCEEDANCES {
        log::warn!(
            "CoVaR from only {} stressed residuals (recommended at least {RECOMMENDED_EXCEEDANCES})",
            stressed.len()
        );
    }
    Ok(stats::quantile_in_place(&mut stressed, alpha))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchParams {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl GarchParams {
    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.beta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GarchFit {
    pub params: GarchParams,
    /// In-sample conditional variances `h_1..h_n`.
    pub variances: Vec<f64>,
    /// One-step-ahead variance `h_{n+1}`.
    pub next_variance: f64,
    pub neg_loglik: f64,
}

/// Conditional variances `h_t = omega + alpha r_{t-1}^2 + beta h_{t-1}`,
/// with `h_1` the sample second moment. Returns `h_1..h_{n+1}`.
pub fn garch_variances(r: &[f64], p: &GarchParams, h1: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(r.len() + 1);
    h.push(h1);
    for t in 0..r.len() {
        let next = p.omega + p.alpha * r[t] * r[t] + p.beta * h[t];
        h.push(next);
    }
    h
}

fn neg_loglik(r: &[f64], p: &GarchParams, h1: f64) -> f64 {
    if p.alpha + p.beta >= 1.0 || p.omega <= 0.0 {
        return f64::INFINITY;
    }
    let mut h = h1;
    let mut s = 0.0;
    for &x in r {
        if !(h > 0.0) {
            return f64::INFINITY;
        }
        s += h.ln() + x * x / h;
        h = p.omega + p.alpha * x * x + p.beta * h;
    }
    0.5 * s / r.len() as f64
}

pub const MIN_GARCH_LEN: usize = 500;

/// Zero-mean Gaussian QML fit of a GARCH(1,1).
pub fn fit_garch11(r: &[f64]) -> Result<GarchFit> {
    if r.len() < MIN_GARCH_LEN {
        return Err(Error::TooShort {
            needed: MIN_GARCH_LEN,
            got: r.len(),
        });
    }
    let var = r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64;
    if !(var > 0.0) {
        return Err(Error::Optimizer("GARCH input has zero variance".into()));
    }
    let bounds = Bounds::new(vec![1e-6 * var, 0.0, 0.0], vec![10.0 * var, 0.999, 0.999]);
    let objective = |th: &[f64], _: &mut Vec<f64>| {
        neg_loglik(
            r,
            &GarchParams {
                omega: th[0],
                alpha: th[1],
                beta: th[2],
            },
            var,
        )
    };
    let starts = vec![
        vec![0.05 * var, 0.05, 0.9],
        vec![0.2 * var, 0.1, 0.7],
        vec![0.5 * var, 0.2, 0.3],
        vec![0.9 * var, 0.05, 0.05],
    ];
    let opts = NelderMeadOptions {
        max_iters: 4000,
        ftol: 1e-12,
        ..Default::default()
    };
    let best = multi_start(&objective, &starts, &bounds, &opts, false).best;
    if !best.value.is_finite() || !best.converged {
        return Err(Error::Optimizer(format!(
            "GARCH(1,1) QML did not converge (objective {})",
            best.value
        )));
    }
    let params = GarchParams {
        omega: best.x[0],
        alpha: best.x[1],
        beta: best.x[2],
    };
    let mut variances = garch_variances(r, &params, var);
    let next_variance = variances.pop().expect("n + 1 variances");
    Ok(GarchFit {
        params,
        variances,
        next_variance,
        neg_loglik: best.value,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CccGarchFit {
    pub x: GarchFit,
    pub y: GarchFit,
    /// Correlation of the volatility-standardized residuals.
    pub rho: f64,
    /// Volatility-standardized residuals `(x_t / sigma_x, y_t / sigma_y)`.
    pub std_residuals: Vec<(f64, f64)>,
    /// One-step-ahead covariance forecast.
    pub next_h: CovMatrix2,
}

impl CccGarchFit {
    /// In-sample covariance matrix at `t`.
    pub fn h_at(&self, t: usize) -> Result<CovMatrix2> {
        CovMatrix2::from_vol_corr(self.x.variances[t].sqrt(), self.y.variances[t].sqrt(), self.rho)
    }

    /// Residuals `eps_t = Sigma_t^{-1} (x_t, y_t)'` for the chosen
    /// decomposition; these are uncorrelated with unit variance under the model.
    pub fn decomposed_residuals(&self, series: &LossSeries, decomposition: Decomposition) -> Result<Vec<(f64, f64)>> {
        (0..series.len())
            .map(|t| {
                let inv = mat_inv(&decomposition.apply(&self.h_at(t)?)?);
                let (x, y) = (series.x[t], series.y[t]);
                Ok((inv[0][0] * x + inv[0][1] * y, inv[1][0] * x + inv[1][1] * y))
            })
            .collect()
    }
}

/// Fits GARCH(1,1) to both margins and a constant correlation.
pub fn fit_ccc_garch(series: &LossSeries) -> Result<CccGarchFit> {
    let x = fit_garch11(&series.x)?;
    let y = fit_garch11(&series.y)?;
    let std_residuals: Vec<(f64, f64)> = (0..series.len())
        .map(|t| (series.x[t] / x.variances[t].sqrt(), series.y[t] / y.variances[t].sqrt()))
        .collect();
    let (ux, uy): (Vec<f64>, Vec<f64>) = std_residuals.iter().copied().unzip();
    let rho = stats::correlation(&ux, &uy);
    let next_h = CovMatrix2::from_vol_corr(x.next_variance.sqrt(), y.next_variance.sqrt(), rho)?;
    Ok(CccGarchFit {
        x,
        y,
        rho,
        std_residuals,
        next_h,
    })
}

/// One-step (VaR, CoVaR) forecast from the last `window` observations.
pub fn benchmark_forecast(
    series: &LossSeries,
    window: usize,
    decomposition: Decomposition,
    levels: ProbLevels,
) -> Result<(f64, f64)> {
    let n = series.len();
    if window > n || window == 0 {
        return Err(Error::InvalidParameter(format!(
            "window {window} must lie in 1..={n}"
        )));
    }
    let sample = series.slice(n - window..n);
    let fit = fit_ccc_garch(&sample)?;
    let eps = fit.decomposed_residuals(&sample, decomposition)?;
    let sigma = decomposition.apply(&fit.next_h)?;
    let v = var_from_sigma(&sigma, &eps, levels.beta)?;
    let c = covar_from_sigma(&sigma, &eps, v, levels.alpha)?;
    Ok((v, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{sample_innovations, Innovation};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn close(a: &Mat2, b: &Mat2, tol: f64) -> bool {
        (0..2).all(|i| (0..2).all(|j| (a[i][j] - b[i][j]).abs() <= tol))
    }

    fn h(sxx: f64, syy: f64, sxy: f64) -> CovMatrix2 {
        CovMatrix2::new(sxx, syy, sxy).unwrap()
    }

    #[test]
    fn decompositions_of_example_matrix() {
        let m = h(10.0, 10.0, 6.0);
        let l = chol_lower(&m).unwrap();
        assert!((l[0][0] - 10f64.sqrt()).abs() < 1e-12);
        assert!((l[1][0] - 1.897_366_596_101_027_6).abs() < 1e-12);
        assert!((l[1][1] - 2.529_822_128_134_703_5).abs() < 1e-12);
        assert_eq!(l[0][1], 0.0);
        assert!(close(&mat_mul_t(&l), &[[10.0, 6.0], [6.0, 10.0]], 1e-12));

        let s = sym_sqrt(&m).unwrap();
        assert!(close(&s, &[[3.0, 1.0], [1.0, 3.0]], 1e-12));
        assert!(close(&mat_mul_t(&s), &[[10.0, 6.0], [6.0, 10.0]], 1e-12));
    }

    #[test]
    fn trivial_decompositions() {
        let id = h(1.0, 1.0, 0.0);
        assert!(close(&chol_lower(&id).unwrap(), &[[1.0, 0.0], [0.0, 1.0]], 0.0));
        assert!(close(&sym_sqrt(&id).unwrap(), &[[1.0, 0.0], [0.0, 1.0]], 1e-15));
        let d = h(4.0, 9.0, 0.0);
        assert!(close(&sym_sqrt(&d).unwrap(), &[[2.0, 0.0], [0.0, 3.0]], 1e-12));
        assert!(CovMatrix2::new(1.0, 1.0, 1.0).is_err());
        assert!(CovMatrix2::new(-1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn var_from_sigma_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let eps: Vec<(f64, f64)> = (0..200_000)
            .map(|_| (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let id = [[1.0, 0.0], [0.0, 1.0]];
        let v = var_from_sigma(&id, &eps, 0.95).unwrap();
        assert!((v - 1.644_853_626_951_472_2).abs() < 0.02);
        let tri = [[2.5, 0.0], [1.0, 1.0]];
        let ex: Vec<f64> = eps.iter().map(|e| e.0).collect();
        assert!((var_from_sigma(&tri, &eps, 0.9).unwrap() - 2.5 * stats::quantile(&ex, 0.9)).abs() < 1e-12);
        let s = [[1.0, 0.4], [0.4, 2.0]];
        let s2 = [[2.0, 0.8], [0.8, 4.0]];
        let a = var_from_sigma(&s, &eps, 0.9).unwrap();
        assert!((var_from_sigma(&s2, &eps, 0.9).unwrap() - 2.0 * a).abs() < 1e-12);
        assert!(var_from_sigma(&id, &eps[..50], 0.9).is_err());
    }

    #[test]
    fn covar_from_sigma_independent_and_monotone() {
        let eps = sample_innovations(400_000, Innovation::Gaussian { rho: 0.0 }, 3).unwrap();
        let d = [[1.0, 0.0], [0.0, 2.0]];
        let v = var_from_sigma(&d, &eps, 0.9).unwrap();
        let c = covar_from_sigma(&d, &eps, v, 0.9).unwrap();
        assert!((c - 2.0 * 1.281_551_565_544_600_4).abs() < 0.03, "{c}");
        let mut last = f64::NEG_INFINITY;
        for a in [0.1, 0.3, 0.5, 0.7, 0.9, 0.99] {
            let c = covar_from_sigma(&d, &eps, v, a).unwrap();
            assert!(c >= last);
            last = c;
        }
        assert!(covar_from_sigma(&d, &eps, 1e9, 0.9).is_err());
    }

    fn simulate_garch(p: GarchParams, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = p.unconditional_variance();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n + 500 {
            let z: f64 = StandardNormal.sample(&mut rng);
            let r = h.sqrt() * z;
            out.push(r);
            h = p.omega + p.alpha * r * r + p.beta * h;
        }
        out.split_off(500)
    }

    #[test]
    fn garch_recovers_parameters() {
        let truth = GarchParams {
            omega: 0.05,
            alpha: 0.1,
            beta: 0.85,
        };
        let mut good = 0;
        for rep in 0..20 {
            let r = simulate_garch(truth, 5000, 100 + rep);
            let f = fit_garch11(&r).unwrap();
            let err = (f.params.omega - truth.omega)
                .abs()
                .max((f.params.alpha - truth.alpha).abs())
                .max((f.params.beta - truth.beta).abs());
            if err <= 0.05 {
                good += 1;
            }
        }
        assert!(good >= 16, "{good} of 20 within tolerance");
    }

    #[test]
    fn garch_on_iid_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let r: Vec<f64> = (0..3000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                2.0 * z
            })
            .collect();
        let f = fit_garch11(&r).unwrap();
        let sample_var = r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64;
        assert!(f.params.alpha < 0.05, "{:?}", f.params);
        let uncond = f.params.unconditional_variance();
        assert!((uncond / sample_var - 1.0).abs() < 0.1, "{uncond} vs {sample_var}");
        assert_eq!(fit_garch11(&r).unwrap(), f);
        assert!(fit_garch11(&r[..100]).is_err());
    }

    #[test]
    fn benchmark_depends_on_decomposition() {
        let eps = sample_innovations(1500, Innovation::StudentT { nu: 6.0, rho: 0.6 }, 4).unwrap();
        let x = eps.iter().map(|e| e.0).collect();
        let y = eps.iter().map(|e| 1.5 * e.1).collect();
        let s = LossSeries::new(x, y).unwrap();
        let lv = ProbLevels::symmetric(0.95).unwrap();
        let chol = benchmark_forecast(&s, 1000, Decomposition::Cholesky, lv).unwrap();
        let sym = benchmark_forecast(&s, 1000, Decomposition::Symmetric, lv).unwrap();
        assert!(chol.0.is_finite() && chol.1.is_finite() && sym.0.is_finite() && sym.1.is_finite());
        assert!((chol.1 - sym.1).abs() > 1e-6);
        assert!(benchmark_forecast(&s, 2000, Decomposition::Cholesky, lv).is_err());
    }

    #[test]
    fn cholesky_var_matches_volatility_times_quantile() {
        let eps = sample_innovations(800, Innovation::Gaussian { rho: 0.3 }, 5).unwrap();
        let s = LossSeries::new(eps.iter().map(|e| e.0).collect(), eps.iter().map(|e| e.1).collect()).unwrap();
        let fit = fit_ccc_garch(&s).unwrap();
        let res = fit.decomposed_residuals(&s, Decomposition::Cholesky).unwrap();
        let sigma = chol_lower(&fit.next_h).unwrap();
        let ux: Vec<f64> = fit.std_residuals.iter().map(|r| r.0).collect();
        let v = var_from_sigma(&sigma, &res, 0.9).unwrap();
        let expected = fit.x.next_variance.sqrt() * stats::quantile(&ux, 0.9);
        assert!((v - expected).abs() < 1e-10);
    }
}
