//! Rolling-window forecasting, hit statistics, Diebold–Mariano tests and the
//! two-stage traffic-light comparison of (VaR, CoVaR) forecasts.

use std::fmt;

use crate::cocaviar::{default_start_values, filter_paths, StartValues};
use crate::error::{Error, Result};
use crate::estimation::{fit_params, OptimizerConfig};
use crate::garch::{
    covar_from_sigma, fit_ccc_garch, garch_variances, mat_inv, var_from_sigma, CovMatrix2, Decomposition, GarchParams,
};
use crate::par;
use crate::scoring::{lex_compare, score_covar, score_var, ScorePair};
use crate::stats;
use crate::types::{LossSeries, ModelSpec, ParamSet, ProbLevels};

/// One out-of-sample forecast with its realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    /// Zero-based index of the forecast period in the input series.
    pub t: usize,
    pub label: Option<String>,
    pub v: f64,
    pub c: f64,
    pub x: f64,
    pub y: f64,
    pub model: String,
}

impl ForecastRecord {
    pub fn scores(&self, levels: ProbLevels) -> ScorePair {
        ScorePair {
            s_var: score_var(self.v, self.x, levels.beta),
            s_covar: score_covar(self.v, self.c, self.x, self.y, levels.alpha),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForecastModel {
    CoCaviar(ModelSpec),
    Garch(Decomposition),
}

impl ForecastModel {
    pub fn name(&self) -> String {
        match self {
            ForecastModel::CoCaviar(spec) => spec.variant.name().to_string(),
            ForecastModel::Garch(d) => format!("CCC-GARCH-{}", d.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingConfig {
    pub window: usize,
    pub refit_every: usize,
    pub levels: ProbLevels,
    pub optimizer: OptimizerConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingOutcome {
    pub records: Vec<ForecastRecord>,
    /// First forecast index of every block that reused the previous fit.
    pub carried_forward: Vec<usize>,
}

#[derive(Debug, Clone)]
enum Fitted {
    CoCaviar(ParamSet),
    Garch {
        x: GarchParams,
        y: GarchParams,
        rho: f64,
    },
}

fn fit_block(model: &ForecastModel, sample: &LossSeries, levels: ProbLevels, opt: &OptimizerConfig) -> Result<Fitted> {
    match model {
        ForecastModel::CoCaviar(spec) => {
            let spec = spec.with_levels(levels);
            let (params, _, _) = fit_params(&spec, sample, opt)?;
            Ok(Fitted::CoCaviar(params))
        }
        ForecastModel::Garch(_) => {
            let f = fit_ccc_garch(sample)?;
            Ok(Fitted::Garch {
                x: f.x.params,
                y: f.y.params,
                rho: f.rho,
            })
        }
    }
}

/// Forecasts for `block` (absolute indices), using the estimation sample
/// `est_start..block.start` and data strictly before each forecast period.
fn forecast_block(
    model: &ForecastModel,
    fitted: &Fitted,
    series: &LossSeries,
    est_start: usize,
    block: std::ops::Range<usize>,
    levels: ProbLevels,
) -> Result<Vec<(f64, f64)>> {
    let est = series.slice(est_start..block.start);
    // The slice runs to block.end - 1 only: forecasts at t never see (x_t, y_t).
    let through = series.slice(est_start..block.end);
    let offset = block.start - est_start;
    match (model, fitted) {
        (ForecastModel::CoCaviar(spec), Fitted::CoCaviar(params)) => {
            let spec = spec.with_levels(levels);
            let start: StartValues = default_start_values(&est, levels)?;
            let path = filter_paths(&spec, params, &through, start)?;
            Ok((offset..through.len()).map(|i| (path.v[i], path.c[i])).collect())
        }
        (ForecastModel::Garch(decomp), Fitted::Garch { x, y, rho }) => {
            let m2 = |d: &[f64]| d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64;
            let hx = garch_variances(&through.x, x, m2(&est.x));
            let hy = garch_variances(&through.y, y, m2(&est.y));
            let h_at = |t: usize| CovMatrix2::from_vol_corr(hx[t].sqrt(), hy[t].sqrt(), *rho);
            let residuals = (0..offset)
                .map(|t| {
                    let inv = mat_inv(&decomp.apply(&h_at(t)?)?);
                    let (a, b) = (est.x[t], est.y[t]);
                    Ok((inv[0][0] * a + inv[0][1] * b, inv[1][0] * a + inv[1][1] * b))
                })
                .collect::<Result<Vec<_>>>()?;
            (offset..through.len())
                .map(|t| {
                    let sigma = decomp.apply(&h_at(t)?)?;
                    let v = var_from_sigma(&sigma, &residuals, levels.beta)?;
                    let c = covar_from_sigma(&sigma, &residuals, v, levels.alpha)?;
                    Ok((v, c))
                })
                .collect()
        }
        _ => unreachable!("fit and model kinds always match"),
    }
}

/// Rolling-window one-step forecasts for every period after the first
/// `window` observations.
///
/// Parameters are re-estimated on the trailing `window` observations every
/// `refit_every` periods and held fixed in between. A failed refit reuses the
/// previous parameters and is logged; a failure of the first fit is an error.
pub fn rolling_forecast(series: &LossSeries, model: &ForecastModel, cfg: &RollingConfig) -> Result<RollingOutcome> {
    let n = series.len();
    if cfg.window == 0 || cfg.window >= n {
        return Err(Error::InvalidParameter(format!(
            "window {} must lie in 1..{n}",
            cfg.window
        )));
    }
    if cfg.refit_every == 0 {
        return Err(Error::InvalidParameter("refit_every must be at least 1".into()));
    }
    let starts: Vec<usize> = (cfg.window..n).step_by(cfg.refit_every).collect();
    let opt = OptimizerConfig {
        parallel: false,
        ..cfg.optimizer.clone()
    };
    let fits = par::map_indexed(starts.len(), |b| {
        let s = starts[b];
        fit_block(model, &series.slice(s - cfg.window..s), cfg.levels, &opt)
    });

    let name = model.name();
    let mut records = Vec::with_capacity(n - cfg.window);
    let mut carried_forward = Vec::new();
    let mut current: Option<Fitted> = None;
    for (b, fit) in fits.into_iter().enumerate() {
        let s = starts[b];
        match fit {
            Ok(f) => current = Some(f),
            Err(e) => {
                if current.is_none() {
                    return Err(e);
                }
                log::warn!("refit at t={s} failed ({e}); carrying the previous parameters forward");
                carried_forward.push(s);
            }
        }
        let fitted = current.as_ref().expect("first block fitted");
        let end = (s + cfg.refit_every).min(n);
        let forecasts = forecast_block(model, fitted, series, s - cfg.window, s..end, cfg.levels)?;
        for (k, (v, c)) in forecasts.into_iter().enumerate() {
            let t = s + k;
            records.push(ForecastRecord {
                t,
                label: series.labels.as_ref().map(|l| l[t].clone()),
                v,
                c,
                x: series.x[t],
                y: series.y[t],
                model: name.clone(),
            });
        }
    }
    Ok(RollingOutcome {
        records,
        carried_forward,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitStats {
    pub n: usize,
    pub var_hits: usize,
    pub covar_hits: usize,
    /// Share of periods with `x_t >= v_t`.
    pub var_rate: f64,
    /// Share of VaR-hit periods with `y_t >= c_t`; `None` without VaR hits.
    pub covar_rate: Option<f64>,
}

pub fn hit_stats(records: &[ForecastRecord]) -> Result<HitStats> {
    if records.is_empty() {
        return Err(Error::Empty("forecast records"));
    }
    let var_hits = records.iter().filter(|r| r.x >= r.v).count();
    let covar_hits = records.iter().filter(|r| r.x >= r.v && r.y >= r.c).count();
    Ok(HitStats {
        n: records.len(),
        var_hits,
        covar_hits,
        var_rate: var_hits as f64 / records.len() as f64,
        covar_rate: (var_hits > 0).then(|| covar_hits as f64 / var_hits as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TestSides {
    #[default]
    TwoSided,
    /// One-sided in the direction of the observed mean difference.
    OneSided,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmResult {
    pub statistic: f64,
    pub p_value: f64,
    pub mean: f64,
    pub long_run_variance: f64,
    pub lags: usize,
}

pub const MIN_DM_LEN: usize = 30;

/// Default Bartlett truncation lag `floor(N^(1/3))`.
pub fn default_hac_lags(n: usize) -> usize {
    (n as f64).cbrt().floor() as usize
}

/// Bartlett (Newey–West) long-run variance of `d`.
pub fn long_run_variance(d: &[f64], lags: usize) -> f64 {
    let n = d.len();
    let m = stats::mean(d);
    let gamma = |l: usize| (l..n).map(|t| (d[t] - m) * (d[t - l] - m)).sum::<f64>() / n as f64;
    let mut lrv = gamma(0);
    for l in 1..=lags.min(n.saturating_sub(1)) {
        lrv += 2.0 * (1.0 - l as f64 / (lags as f64 + 1.0)) * gamma(l);
    }
    lrv
}

/// Diebold–Mariano test of `E[d] = 0` with a HAC variance.
///
/// Fails with [`Error::DegenerateVariance`] when the long-run variance is
/// zero up to rounding relative to `mean(d^2)`.
pub fn dm_test(diffs: &[f64], hac_lags: Option<usize>, sides: TestSides) -> Result<DmResult> {
    let n = diffs.len();
    if n < MIN_DM_LEN {
        return Err(Error::TooShort {
            needed: MIN_DM_LEN,
            got: n,
        });
    }
    if let Some(i) = diffs.iter().position(|d| !d.is_finite()) {
        return Err(Error::NonFinite { what: "score difference", index: i });
    }
    let lags = hac_lags.unwrap_or_else(|| default_hac_lags(n));
    let mean = stats::mean(diffs);
    let lrv = long_run_variance(diffs, lags);
    let scale = diffs.iter().map(|d| d * d).sum::<f64>() / n as f64;
    if !(lrv > f64::EPSILON * f64::EPSILON * scale) || !(lrv > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let statistic = mean / (lrv / n as f64).sqrt();
    let tail = 1.0 - stats::norm_cdf(statistic.abs());
    let p_value = match sides {
        TestSides::TwoSided => 2.0 * tail,
        TestSides::OneSided => tail,
    };
    Ok(DmResult {
        statistic,
        p_value: p_value.clamp(0.0, 1.0),
        mean,
        long_run_variance: lrv,
        lags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Zone {
    /// Baseline VaR significantly better.
    Red,
    /// Alternative VaR significantly better.
    Grey,
    /// VaR tie; baseline CoVaR significantly better.
    Orange,
    /// VaR tie; alternative CoVaR significantly better.
    Green,
    /// No significant difference.
    Yellow,
}

impl Zone {
    pub fn name(&self) -> &'static str {
        match self {
            Zone::Red => "red",
            Zone::Grey => "grey",
            Zone::Orange => "orange",
            Zone::Green => "green",
            Zone::Yellow => "yellow",
        }
    }

    /// Zone after swapping baseline and alternative.
    pub fn mirrored(&self) -> Zone {
        match self {
            Zone::Red => Zone::Grey,
            Zone::Grey => Zone::Red,
            Zone::Orange => Zone::Green,
            Zone::Green => Zone::Orange,
            Zone::Yellow => Zone::Yellow,
        }
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficZone {
    pub zone: Zone,
    pub p_var: f64,
    pub stat_var: f64,
    /// Present iff the CoVaR stage ran.
    pub p_covar: Option<f64>,
    pub stat_covar: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficConfig {
    pub significance: f64,
    pub sides: TestSides,
    pub hac_lags: Option<usize>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            significance: 0.10,
            sides: TestSides::TwoSided,
            hac_lags: None,
        }
    }
}

/// Per-period score differences `alt - base`. Differences within rounding
/// of the scores themselves are set to zero.
pub fn score_differences(
    base: &[ForecastRecord],
    alt: &[ForecastRecord],
    levels: ProbLevels,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if base.len() != alt.len() {
        return Err(Error::LengthMismatch {
            what: "alternative forecasts",
            expected: base.len(),
            got: alt.len(),
        });
    }
    let mut dv = Vec::with_capacity(base.len());
    let mut dc = Vec::with_capacity(base.len());
    for (b, a) in base.iter().zip(alt) {
        if b.t != a.t {
            return Err(Error::InvalidParameter(format!(
                "forecast streams are not aligned: t={} vs t={}",
                b.t, a.t
            )));
        }
        let (sb, sa) = (b.scores(levels), a.scores(levels));
        let clean = |x: f64, y: f64| {
            let d = x - y;
            if d.abs() <= 8.0 * f64::EPSILON * (x.abs() + y.abs()) {
                0.0
            } else {
                d
            }
        };
        dv.push(clean(sa.s_var, sb.s_var));
        dc.push(clean(sa.s_covar, sb.s_covar));
    }
    Ok((dv, dc))
}

/// `(statistic, p)` with constant differences treated as exact: zero means
/// no evidence (`p = 1`), a non-zero constant is decisive (`p = 0`).
fn stage_test(d: &[f64], cfg: &TrafficConfig) -> Result<(f64, f64)> {
    match dm_test(d, cfg.hac_lags, cfg.sides) {
        Ok(r) => Ok((r.statistic, r.p_value)),
        Err(Error::DegenerateVariance) => {
            let m = stats::mean(d);
            if m == 0.0 {
                Ok((0.0, 1.0))
            } else {
                Ok((m.signum() * f64::INFINITY, 0.0))
            }
        }
        Err(e) => Err(e),
    }
}

/// Two-stage comparison of an alternative against a baseline.
///
/// Stage one tests VaR scores; only if it does not reject are CoVaR scores
/// tested. Positive statistics mean the alternative scores worse.
pub fn traffic_light(
    base: &[ForecastRecord],
    alt: &[ForecastRecord],
    levels: ProbLevels,
    cfg: &TrafficConfig,
) -> Result<TrafficZone> {
    if !(cfg.significance > 0.0 && cfg.significance < 1.0) {
        return Err(Error::InvalidLevel {
            name: "significance",
            value: cfg.significance,
        });
    }
    let (dv, dc) = score_differences(base, alt, levels)?;
    let (stat_var, p_var) = stage_test(&dv, cfg)?;
    if p_var < cfg.significance {
        let zone = if stat_var > 0.0 { Zone::Red } else { Zone::Grey };
        return Ok(TrafficZone {
            zone,
            p_var,
            stat_var,
            p_covar: None,
            stat_covar: None,
        });
    }
    let (stat_c, p_c) = stage_test(&dc, cfg)?;
    let zone = if p_c < cfg.significance {
        if stat_c > 0.0 {
            Zone::Orange
        } else {
            Zone::Green
        }
    } else {
        Zone::Yellow
    };
    Ok(TrafficZone {
        zone,
        p_var,
        stat_var,
        p_covar: Some(p_c),
        stat_covar: Some(stat_c),
    })
}

/// One row of a model comparison report.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: String,
    pub scores: ScorePair,
    /// Lexicographic rank by mean (VaR, CoVaR) score, 1 = best.
    pub rank: usize,
    pub hits: HitStats,
    /// Verdict against the baseline; `None` for the baseline itself.
    pub zone: Option<TrafficZone>,
}

/// Compares every model against the first one (the baseline).
pub fn compare_models(
    streams: &[Vec<ForecastRecord>],
    levels: ProbLevels,
    cfg: &TrafficConfig,
) -> Result<Vec<ComparisonRow>> {
    let base = streams.first().ok_or(Error::Empty("forecast streams"))?;
    let mut rows = Vec::with_capacity(streams.len());
    for (i, s) in streams.iter().enumerate() {
        if s.is_empty() {
            return Err(Error::Empty("forecast records"));
        }
        let n = s.len() as f64;
        let (mut sv, mut sc) = (0.0, 0.0);
        for r in s {
            let p = r.scores(levels);
            sv += p.s_var;
            sc += p.s_covar;
        }
        rows.push(ComparisonRow {
            model: s[0].model.clone(),
            scores: ScorePair {
                s_var: sv / n,
                s_covar: sc / n,
            },
            rank: 0,
            hits: hit_stats(s)?,
            zone: if i == 0 { None } else { Some(traffic_light(base, s, levels, cfg)?) },
        });
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| lex_compare(rows[a].scores, rows[b].scores, 0.0).then(a.cmp(&b)));
    for (rank, &i) in order.iter().enumerate() {
        rows[i].rank = rank + 1;
    }
    Ok(rows)
}

/// Orders records by `t`; used when merging streams from files.
pub fn sort_records(records: &mut [ForecastRecord]) {
    records.sort_by_key(|r| r.t);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{simulate_eccc, EcccParams};
    use crate::types::{expand_spec, Variant};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn rec(t: usize, v: f64, c: f64, x: f64, y: f64) -> ForecastRecord {
        ForecastRecord {
            t,
            label: None,
            v,
            c,
            x,
            y,
            model: "m".into(),
        }
    }

    #[test]
    fn hit_stats_hand_count() {
        let r = vec![rec(0, 0.0, 4.0, 1.0, 5.0), rec(1, 1.0, 9.0, 0.0, 0.0)];
        let h = hit_stats(&r).unwrap();
        assert_eq!(h.var_rate, 0.5);
        assert_eq!(h.covar_rate, Some(1.0));
        let r = vec![rec(0, 5.0, 0.0, 1.0, 1.0)];
        let h = hit_stats(&r).unwrap();
        assert_eq!((h.var_rate, h.covar_rate), (0.0, None));
        assert!(hit_stats(&[]).is_err());
    }

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn ideal_forecasts_are_calibrated() {
        // Independent standard normal losses: the true VaR and CoVaR are the
        // marginal normal quantiles.
        let n = 200_000;
        let (x, y) = (normals(n, 21), normals(n, 22));
        let (v, c) = (stats::norm_ppf(0.9), stats::norm_ppf(0.9));
        let r: Vec<ForecastRecord> = (0..n).map(|t| rec(t, v, c, x[t], y[t])).collect();
        let h = hit_stats(&r).unwrap();
        assert!((h.var_rate - 0.10).abs() <= 0.005, "{}", h.var_rate);
        assert!((h.covar_rate.unwrap() - 0.10).abs() <= 0.01, "{:?}", h.covar_rate);
    }

    #[test]
    fn dm_power_and_guards() {
        let d: Vec<f64> = normals(500, 1).iter().map(|z| 1.0 + 1e-3 * z).collect();
        let r = dm_test(&d, None, TestSides::TwoSided).unwrap();
        assert!(r.p_value < 1e-6);
        assert_eq!(r.lags, 7);
        assert_eq!(dm_test(&[0.0; 100], None, TestSides::TwoSided), Err(Error::DegenerateVariance));
        assert_eq!(dm_test(&[2.5; 100], None, TestSides::TwoSided), Err(Error::DegenerateVariance));
        assert!(matches!(dm_test(&[1.0; 10], None, TestSides::TwoSided), Err(Error::TooShort { .. })));
        let one = dm_test(&normals(200, 2), Some(3), TestSides::OneSided).unwrap();
        let two = dm_test(&normals(200, 2), Some(3), TestSides::TwoSided).unwrap();
        assert!((two.p_value - 2.0 * one.p_value).abs() < 1e-15);
    }

    #[test]
    fn long_run_variance_hand_value() {
        // d = (1, -1, 1, -1): gamma0 = 1, gamma1 = -3/4; L = 1 -> 1 + 2 * 0.5 * (-0.75)
        let lrv = long_run_variance(&[1.0, -1.0, 1.0, -1.0], 1);
        assert!((lrv - 0.25).abs() < 1e-15);
    }

    #[test]
    fn traffic_light_constructed_streams() {
        let lv = ProbLevels::symmetric(0.9).unwrap();
        let x = normals(300, 3);
        let y = normals(300, 4);
        let base: Vec<ForecastRecord> = (0..300).map(|t| rec(t, 1.28, 1.5, x[t], y[t])).collect();

        let same = traffic_light(&base, &base, lv, &TrafficConfig::default()).unwrap();
        assert_eq!(same.zone, Zone::Yellow);
        assert_eq!(same.p_var, 1.0);
        assert!(same.p_covar.is_some());

        // Alternative VaR at the period's realized loss scores zero everywhere.
        let alt: Vec<ForecastRecord> = base.iter().map(|r| ForecastRecord { v: r.x, ..r.clone() }).collect();
        let z = traffic_light(&base, &alt, lv, &TrafficConfig::default()).unwrap();
        assert_eq!(z.zone, Zone::Grey);
        assert!(z.p_covar.is_none());
        let z = traffic_light(&alt, &base, lv, &TrafficConfig::default()).unwrap();
        assert_eq!(z.zone, Zone::Red);

        // Same VaR, alternative CoVaR exact on stressed days.
        let alt: Vec<ForecastRecord> = base.iter().map(|r| ForecastRecord { c: r.y, ..r.clone() }).collect();
        let z = traffic_light(&base, &alt, lv, &TrafficConfig::default()).unwrap();
        assert_eq!(z.zone, Zone::Green);
        assert_eq!(traffic_light(&alt, &base, lv, &TrafficConfig::default()).unwrap().zone, Zone::Orange);
    }

    #[test]
    fn misaligned_streams_rejected() {
        let lv = ProbLevels::symmetric(0.9).unwrap();
        let a: Vec<ForecastRecord> = (0..40).map(|t| rec(t, 0.0, 0.0, 1.0, 1.0)).collect();
        let b: Vec<ForecastRecord> = (1..41).map(|t| rec(t, 0.0, 0.0, 1.0, 1.0)).collect();
        assert!(traffic_light(&a, &b, lv, &TrafficConfig::default()).is_err());
        assert!(traffic_light(&a, &b[..10], lv, &TrafficConfig::default()).is_err());
    }

    #[test]
    fn score_streams_match_scoring_module() {
        let lv = ProbLevels::new(0.8, 0.7).unwrap();
        let r = rec(0, 0.3, 1.1, 0.9, 0.2);
        let s = r.scores(lv);
        assert_eq!(s.s_var, score_var(0.3, 0.9, 0.8));
        assert_eq!(s.s_covar, score_covar(0.3, 1.1, 0.9, 0.2, 0.7));
    }

    fn sim(n: usize, seed: u64) -> LossSeries {
        simulate_eccc(&EcccParams::study_defaults(), n, 500, seed).unwrap()
    }

    fn cfg(window: usize, refit: usize) -> RollingConfig {
        RollingConfig {
            window,
            refit_every: refit,
            levels: ProbLevels::symmetric(0.9).unwrap(),
            optimizer: OptimizerConfig {
                restarts: 2,
                ..Default::default()
            },
        }
    }

    #[test]
    fn rolling_boundaries() {
        let s = sim(401, 1);
        let model = ForecastModel::CoCaviar(expand_spec(Variant::SavDiag, ProbLevels::symmetric(0.9).unwrap()).unwrap());
        let one = rolling_forecast(&s, &model, &cfg(400, 10)).unwrap();
        assert_eq!(one.records.len(), 1);
        assert_eq!(one.records[0].t, 400);

        let s = sim(460, 2);
        let a = rolling_forecast(&s, &model, &cfg(400, 1)).unwrap();
        let b = rolling_forecast(&s, &model, &cfg(400, 460)).unwrap();
        assert_eq!(a.records.len(), 60);
        assert_eq!(a.records[0], b.records[0]);
        assert!(rolling_forecast(&s, &model, &cfg(460, 1)).is_err());
    }

    #[test]
    fn no_look_ahead() {
        let s = sim(520, 3);
        let lv = ProbLevels::symmetric(0.9).unwrap();
        let models = [
            ForecastModel::CoCaviar(expand_spec(Variant::SavFull, lv).unwrap()),
            ForecastModel::Garch(Decomposition::Symmetric),
        ];
        for model in models {
            let base = rolling_forecast(&s, &model, &cfg(500, 7)).unwrap();
            let cut = 509;
            let mut p = s.clone();
            for t in cut..p.len() {
                p.y[t] += 10.0;
                p.x[t] -= 3.0;
            }
            let moved = rolling_forecast(&p, &model, &cfg(500, 7)).unwrap();
            for (a, b) in base.records.iter().zip(&moved.records) {
                if a.t <= cut {
                    assert_eq!((a.v, a.c), (b.v, b.c), "{} t={}", model.name(), a.t);
                }
            }
        }
    }

    #[test]
    fn compare_models_ranks_and_zones() {
        let lv = ProbLevels::symmetric(0.9).unwrap();
        let x = normals(200, 5);
        let y = normals(200, 6);
        let good: Vec<ForecastRecord> = (0..200)
            .map(|t| ForecastRecord { model: "good".into(), ..rec(t, 1.28, 1.8, x[t], y[t]) })
            .collect();
        let bad: Vec<ForecastRecord> = good
            .iter()
            .map(|r| ForecastRecord { v: 5.0, model: "bad".into(), ..r.clone() })
            .collect();
        let rows = compare_models(&[good, bad], lv, &TrafficConfig::default()).unwrap();
        assert_eq!(rows[0].rank, 1);
        assert_eq!(rows[1].rank, 2);
        assert!(rows[0].zone.is_none());
        assert_eq!(rows[1].zone.unwrap().zone, Zone::Red);
    }
}
