//! ECCC-GARCH data generator driven by absolute returns, the mapping from
//! its parameters to true CoCAViaR parameters, and a Monte Carlo harness.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::estimation::{fit_two_step, OptimizerConfig};
use crate::par::{self, derive_seed};
use crate::stats;
use crate::types::{expand_spec, Equation, LossSeries, ModelSpec, ParamSet, ProbLevels, Variant};

/// Innovation law with unit-variance margins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Innovation {
    /// Bivariate t with `nu` degrees of freedom, scaled by `sqrt((nu - 2) / nu)`.
    StudentT { nu: f64, rho: f64 },
    Gaussian { rho: f64 },
}

impl Innovation {
    pub fn rho(&self) -> f64 {
        match *self {
            Innovation::StudentT { rho, .. } | Innovation::Gaussian { rho } => rho,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rho = self.rho();
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::InvalidParameter(format!("correlation must lie in (-1, 1), got {rho}")));
        }
        if let Innovation::StudentT { nu, .. } = *self {
            if !(nu > 2.0 && nu.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "degrees of freedom must exceed 2, got {nu}"
                )));
            }
        }
        Ok(())
    }

    /// `E|eps|` of one standardized margin.
    pub fn mean_abs(&self) -> f64 {
        match *self {
            Innovation::Gaussian { .. } => (2.0 / std::f64::consts::PI).sqrt(),
            Innovation::StudentT { nu, .. } => {
                let raw = 2.0 * nu.sqrt() * (ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0)).exp()
                    / (std::f64::consts::PI.sqrt() * (nu - 1.0));
                raw * ((nu - 2.0) / nu).sqrt()
            }
        }
    }

    fn sampler(&self) -> PairSampler {
        let rho = self.rho();
        PairSampler {
            rho,
            rho_c: (1.0 - rho * rho).sqrt(),
            t: match *self {
                Innovation::StudentT { nu, .. } => Some((
                    ChiSquared::new(nu).expect("validated degrees of freedom"),
                    nu,
                    ((nu - 2.0) / nu).sqrt(),
                )),
                Innovation::Gaussian { .. } => None,
            },
        }
    }
}

struct PairSampler {
    rho: f64,
    rho_c: f64,
    t: Option<(ChiSquared<f64>, f64, f64)>,
}

impl PairSampler {
    #[inline]
    fn draw<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        let (a, b) = (z1, self.rho * z1 + self.rho_c * z2);
        match &self.t {
            None => (a, b),
            Some((chi, nu, scale)) => {
                let w: f64 = chi.sample(rng);
                let f = scale / (w / nu).sqrt();
                (a * f, b * f)
            }
        }
    }
}

/// `count` i.i.d. innovation pairs.
pub fn sample_innovations(count: usize, innovation: Innovation, seed: u64) -> Result<Vec<(f64, f64)>> {
    innovation.validate()?;
    let s = innovation.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count).map(|_| s.draw(&mut rng)).collect())
}

/// Parameters of the bivariate volatility recursion
/// `sigma_t = omega + A (|X_{t-1}|, |Y_{t-1}|)' + B sigma_{t-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcccParams {
    pub omega: [f64; 2],
    pub a: [[f64; 2]; 2],
    pub b: [[f64; 2]; 2],
    pub innovation: Innovation,
}

impl EcccParams {
    /// The diagonal design used by the Monte Carlo study.
    pub fn study_defaults() -> Self {
        Self {
            omega: [0.04, 0.02],
            a: [[0.1, 0.0], [0.0, 0.15]],
            b: [[0.8, 0.0], [0.0, 0.75]],
            innovation: Innovation::StudentT { nu: 8.0, rho: 0.5 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.innovation.validate()?;
        if !self.omega.iter().all(|w| *w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidParameter("omega must be strictly positive".into()));
        }
        let entries = self.a.iter().chain(&self.b).flatten();
        if !entries.clone().all(|v| *v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter("A and B must be non-negative".into()));
        }
        if self.b[0][0] >= 1.0 || self.b[1][1] >= 1.0 {
            return Err(Error::InvalidParameter("diagonal of B must be below 1".into()));
        }
        Ok(())
    }

    pub fn is_diagonal(&self) -> bool {
        self.a[0][1] == 0.0 && self.a[1][0] == 0.0 && self.b[0][1] == 0.0 && self.b[1][0] == 0.0
    }

    /// Whether the mean volatility recursion is contractive:
    /// spectral radius of `A E|eps| + B` below one.
    pub fn is_stationary(&self) -> bool {
        let m = self.innovation.mean_abs();
        let k = [
            [self.a[0][0] * m + self.b[0][0], self.a[0][1] * m + self.b[0][1]],
            [self.a[1][0] * m + self.b[1][0], self.a[1][1] * m + self.b[1][1]],
        ];
        let tr = k[0][0] + k[1][1];
        let det = k[0][0] * k[1][1] - k[0][1] * k[1][0];
        let disc = tr * tr / 4.0 - det;
        let radius = if disc >= 0.0 {
            (tr / 2.0).abs() + disc.sqrt()
        } else {
            det.abs().sqrt()
        };
        radius < 1.0
    }
}

pub const DEFAULT_BURN_IN: usize = 1000;

/// Simulates `n` observations after discarding `burn_in` periods.
pub fn simulate_eccc(params: &EcccParams, n: usize, burn_in: usize, seed: u64) -> Result<LossSeries> {
    params.validate()?;
    let sampler = params.innovation.sampler();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sigma = [
        params.omega[0] / (1.0 - params.b[0][0]),
        params.omega[1] / (1.0 - params.b[1][1]),
    ];
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut prev: Option<(f64, f64)> = None;
    for t in 0..burn_in + n {
        if let Some((px, py)) = prev {
            let (ax, ay) = (px.abs(), py.abs());
            sigma = [
                params.omega[0] + params.a[0][0] * ax + params.a[0][1] * ay
                    + params.b[0][0] * sigma[0]
                    + params.b[0][1] * sigma[1],
                params.omega[1] + params.a[1][0] * ax + params.a[1][1] * ay
                    + params.b[1][0] * sigma[0]
                    + params.b[1][1] * sigma[1],
            ];
            if !(sigma[0].is_finite() && sigma[1].is_finite()) {
                return Err(Error::Explosive { index: t });
            }
        }
        let (ex, ey) = sampler.draw(&mut rng);
        let obs = (sigma[0] * ex, sigma[1] * ey);
        if t >= burn_in {
            x.push(obs.0);
            y.push(obs.1);
        }
        prev = Some(obs);
    }
    LossSeries::new(x, y)
}

/// `beta`-quantile of a standardized margin.
pub fn innovation_var(beta: f64, innovation: Innovation) -> Result<f64> {
    innovation.validate()?;
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidLevel { name: "beta", value: beta });
    }
    Ok(match innovation {
        Innovation::Gaussian { .. } => stats::norm_ppf(beta),
        Innovation::StudentT { nu, .. } => {
            let t = StudentsT::new(0.0, 1.0, nu).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            t.inverse_cdf(beta) * ((nu - 2.0) / nu).sqrt()
        }
    })
}

/// Monte Carlo estimate of the innovation CoVaR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarOracle {
    pub value: f64,
    pub std_error: f64,
    pub draws: usize,
    pub exceedances: usize,
    pub seed: u64,
}

/// Minimum expected number of stressed draws.
pub const MIN_STRESS_DRAWS: f64 = 1e5;
const CHUNK: usize = 1 << 18;

type OracleKey = (u64, u64, u64, u64, u64, usize, u64);

fn oracle_cache() -> &'static Mutex<HashMap<OracleKey, CovarOracle>> {
    static CACHE: OnceLock<Mutex<HashMap<OracleKey, CovarOracle>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `alpha`-quantile of `eps_Y` given `eps_X >= v_eps`, from `mc_draws` seeded
/// draws. Results are memoized per (levels, law, draws, seed).
///
/// The standard error uses the asymptotic quantile variance with a
/// difference-quotient density estimate.
pub fn innovation_covar(
    alpha: f64,
    beta: f64,
    innovation: Innovation,
    mc_draws: usize,
    seed: u64,
) -> Result<CovarOracle> {
    let levels = ProbLevels::new(beta, alpha)?;
    let v_eps = innovation_var(beta, innovation)?;
    // Rounded so that e.g. beta = 0.9 with 1e6 draws is accepted.
    if ((1.0 - beta) * mc_draws as f64).round() < MIN_STRESS_DRAWS {
        return Err(Error::InsufficientDraws(format!(
            "(1 - beta) * draws = {:.0} is below {MIN_STRESS_DRAWS:.0}",
            (1.0 - beta) * mc_draws as f64
        )));
    }
    let (nu, family) = match innovation {
        Innovation::StudentT { nu, .. } => (nu, 1),
        Innovation::Gaussian { .. } => (0.0, 0),
    };
    let key = (
        levels.alpha.to_bits(),
        levels.beta.to_bits(),
        nu.to_bits(),
        innovation.rho().to_bits(),
        family,
        mc_draws,
        seed,
    );
    if let Some(hit) = oracle_cache().lock().expect("oracle cache").get(&key) {
        return Ok(*hit);
    }

    let sampler = innovation.sampler();
    let chunks = mc_draws.div_ceil(CHUNK);
    let parts = par::map_indexed(chunks, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let count = CHUNK.min(mc_draws - i * CHUNK);
        let mut out = Vec::with_capacity((count as f64 * (1.0 - beta) * 1.1) as usize);
        for _ in 0..count {
            let (ex, ey) = sampler.draw(&mut rng);
            if ex >= v_eps {
                out.push(ey);
            }
        }
        out
    });
    let mut stressed: Vec<f64> = parts.into_iter().flatten().collect();
    let m = stressed.len();
    if m < 2 {
        return Err(Error::InsufficientDraws("no stressed draws".into()));
    }
    let value = stats::quantile_in_place(&mut stressed, alpha);
    let h = (m as f64).powf(-1.0 / 3.0).min(alpha.min(1.0 - alpha) / 2.0);
    let hi = stats::quantile_in_place(&mut stressed, alpha + h);
    let lo = stats::quantile_in_place(&mut stressed, alpha - h);
    let std_error = (alpha * (1.0 - alpha) / m as f64).sqrt() * (hi - lo) / (2.0 * h);
    let oracle = CovarOracle {
        value,
        std_error,
        draws: mc_draws,
        exceedances: m,
        seed,
    };
    oracle_cache().lock().expect("oracle cache").insert(key, oracle);
    Ok(oracle)
}

/// Maps volatility parameters to true CoCAViaR parameters by multiplying
/// each row of the recursion by `v_eps` or `c_eps`.
///
/// Diagonal `A`, `B` give the `SAV-diag` layout; off-diagonal `A` gives
/// `SAV-fullA`; `B_21 != 0` adds the lagged VaR to the CoVaR equation
/// (`SAV-full`). `B_12 != 0` has no CoCAViaR counterpart and is rejected.
pub fn true_risk_params(
    params: &EcccParams,
    levels: ProbLevels,
    v_eps: f64,
    c_eps: f64,
) -> Result<(ModelSpec, ParamSet)> {
    if v_eps == 0.0 || c_eps == 0.0 || !v_eps.is_finite() || !c_eps.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "innovation risk measures must be finite and non-zero (v_eps = {v_eps}, c_eps = {c_eps})"
        )));
    }
    if params.b[0][1] != 0.0 {
        return Err(Error::InvalidSpec(
            "B_12 != 0 puts the lagged CoVaR into the VaR equation, which no variant supports".into(),
        ));
    }
    let (w, a, b) = (params.omega, params.a, params.b);
    if params.is_diagonal() {
        let spec = expand_spec(Variant::SavDiag, levels)?;
        let tv = vec![v_eps * w[0], v_eps * a[0][0], b[0][0]];
        let tc = vec![c_eps * w[1], c_eps * a[1][1], b[1][1]];
        return Ok((spec.clone(), ParamSet::new(&spec, tv, tc)?));
    }
    let tv = vec![v_eps * w[0], v_eps * a[0][0], v_eps * a[0][1], b[0][0]];
    let mut tc = vec![c_eps * w[1], c_eps * a[1][0], c_eps * a[1][1]];
    let variant = if b[1][0] != 0.0 {
        tc.push(c_eps / v_eps * b[1][0]);
        Variant::SavFull
    } else {
        Variant::SavFullA
    };
    tc.push(b[1][1]);
    let spec = expand_spec(variant, levels)?;
    Ok((spec.clone(), ParamSet::new(&spec, tv, tc)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub replications: usize,
    pub n: usize,
    pub burn_in: usize,
    pub levels: ProbLevels,
    pub params: EcccParams,
    /// Fitted model; `None` uses the layout implied by [`true_risk_params`].
    pub variant: Option<Variant>,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    /// Draws for the innovation CoVaR oracle.
    pub oracle_draws: usize,
    pub oracle_seed: u64,
    /// Spread replications over the rayon pool.
    pub parallel: bool,
}

impl McConfig {
    pub fn new(replications: usize, n: usize, levels: ProbLevels) -> Self {
        Self {
            replications,
            n,
            burn_in: DEFAULT_BURN_IN,
            levels,
            params: EcccParams::study_defaults(),
            variant: None,
            seed: 1,
            optimizer: OptimizerConfig::default(),
            oracle_draws: 10_000_000,
            oracle_seed: 20_240_101,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidParameter("replications must be at least 1".into()));
        }
        self.params.validate()?;
        self.optimizer.validate()
    }
}

/// Estimates and standard errors of one replication, VaR block first.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
}

/// Summary row for one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub levels: ProbLevels,
    pub n: usize,
    pub equation: Equation,
    pub name: String,
    pub true_value: f64,
    pub bias: f64,
    pub median_bias: f64,
    pub sd_emp: f64,
    /// Median of the estimated asymptotic standard errors.
    pub sd_asy: f64,
    /// Share of replications whose 95% interval covers the true value.
    pub coverage: f64,
    pub used: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    pub spec: ModelSpec,
    pub truth: ParamSet,
    pub v_eps: f64,
    pub oracle: CovarOracle,
    pub failures: usize,
    pub replications: Vec<Option<Replication>>,
}

const Z_975: f64 = 1.959_963_984_540_054;

/// Simulates, fits and summarizes `replications` independent samples.
///
/// Replication `i` draws its data and optimizer restarts from seeds derived
/// from `(seed, i)`, so results do not depend on the worker count. Failed
/// fits are counted and excluded.
pub fn run_mc_study(cfg: &McConfig) -> Result<StudyTable> {
    cfg.validate()?;
    let v_eps = innovation_var(cfg.levels.beta, cfg.params.innovation)?;
    let oracle = innovation_covar(
        cfg.levels.alpha,
        cfg.levels.beta,
        cfg.params.innovation,
        cfg.oracle_draws,
        cfg.oracle_seed,
    )?;
    let (true_spec, truth) = true_risk_params(&cfg.params, cfg.levels, v_eps, oracle.value)?;
    let spec = match cfg.variant {
        Some(v) => expand_spec(v, cfg.levels)?,
        None => true_spec,
    };
    if spec.layout() != truth.layout {
        return Err(Error::InvalidSpec(format!(
            "{} does not match the layout of the true parameters",
            spec.variant
        )));
    }

    let run = |i: usize| -> Option<Replication> {
        let data_seed = derive_seed(cfg.seed, 2 * i as u64);
        let opt = OptimizerConfig {
            seed: derive_seed(cfg.seed, 2 * i as u64 + 1),
            parallel: !cfg.parallel && cfg.optimizer.parallel,
            ..cfg.optimizer.clone()
        };
        let result = simulate_eccc(&cfg.params, cfg.n, cfg.burn_in, data_seed)
            .and_then(|s| fit_two_step(&spec, &s, &opt));
        match result {
            Ok(fit) => Some(Replication {
                estimates: fit.params.to_flat(),
                std_errors: fit.se_v.iter().chain(&fit.se_c).copied().collect(),
            }),
            Err(e) => {
                log::warn!("replication {i} failed: {e}");
                None
            }
        }
    };
    let replications = if cfg.parallel {
        par::map_indexed(cfg.replications, run)
    } else {
        par::map_indexed_seq(cfg.replications, run)
    };
    let ok: Vec<&Replication> = replications.iter().flatten().collect();
    let failures = replications.len() - ok.len();
    if failures > 0 {
        log::warn!("{failures} of {} replications failed and were excluded", cfg.replications);
    }
    if ok.is_empty() {
        return Err(Error::Optimizer("every replication failed".into()));
    }

    let truth_flat = truth.to_flat();
    let rows = truth
        .layout
        .names()
        .into_iter()
        .enumerate()
        .map(|(j, (equation, name))| {
            let t = truth_flat[j];
            let est: Vec<f64> = ok.iter().map(|r| r.estimates[j]).collect();
            let se: Vec<f64> = ok.iter().map(|r| r.std_errors[j]).collect();
            let errs: Vec<f64> = est.iter().map(|e| e - t).collect();
            let covered = ok
                .iter()
                .filter(|r| (r.estimates[j] - t).abs() <= Z_975 * r.std_errors[j])
                .count();
            StudyRow {
                levels: cfg.levels,
                n: cfg.n,
                equation,
                name,
                true_value: t,
                bias: stats::mean(&errs),
                median_bias: stats::median(&errs),
                sd_emp: if est.len() > 1 { stats::std_dev(&est) } else { 0.0 },
                sd_asy: stats::median(&se),
                coverage: covered as f64 / ok.len() as f64,
                used: ok.len(),
            }
        })
        .collect();
    Ok(StudyTable {
        rows,
        spec,
        truth,
        v_eps,
        oracle,
        failures,
        replications,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t8() -> Innovation {
        Innovation::StudentT { nu: 8.0, rho: 0.5 }
    }

    #[test]
    fn innovation_moments() {
        let draws = sample_innovations(1_000_000, t8(), 11).unwrap();
        let a: Vec<f64> = draws.iter().map(|d| d.0).collect();
        let b: Vec<f64> = draws.iter().map(|d| d.1).collect();
        assert!((stats::std_dev(&a).powi(2) - 1.0).abs() < 0.02);
        assert!((stats::std_dev(&b).powi(2) - 1.0).abs() < 0.02);
        assert!((stats::correlation(&a, &b) - 0.5).abs() < 0.01);

        let g = sample_innovations(1_000_000, Innovation::Gaussian { rho: 0.0 }, 12).unwrap();
        let cross = g.iter().map(|d| d.0 * d.1).sum::<f64>() / g.len() as f64;
        assert!(cross.abs() < 0.01);
    }

    #[test]
    fn invalid_innovations_rejected() {
        assert!(sample_innovations(1, Innovation::StudentT { nu: 2.0, rho: 0.0 }, 0).is_err());
        assert!(sample_innovations(1, Innovation::Gaussian { rho: 1.0 }, 0).is_err());
    }

    #[test]
    fn mean_abs_matches_sampling() {
        let d = sample_innovations(400_000, t8(), 3).unwrap();
        let m = d.iter().map(|p| p.0.abs()).sum::<f64>() / d.len() as f64;
        assert!((m - t8().mean_abs()).abs() < 5e-3);
        assert!((Innovation::Gaussian { rho: 0.0 }.mean_abs() - 0.797_884_560_802_865_4).abs() < 1e-15);
    }

    #[test]
    fn iid_reduction() {
        let p = EcccParams {
            omega: [0.5, 2.0],
            a: [[0.0; 2]; 2],
            b: [[0.0; 2]; 2],
            innovation: t8(),
        };
        let s = simulate_eccc(&p, 100, 10, 5).unwrap();
        let eps = sample_innovations(110, t8(), 5).unwrap();
        for t in 0..100 {
            assert!((s.x[t] - 0.5 * eps[t + 10].0).abs() < 1e-15);
            assert!((s.y[t] - 2.0 * eps[t + 10].1).abs() < 1e-15);
        }
    }

    #[test]
    fn study_design_is_valid_and_deterministic() {
        let p = EcccParams::study_defaults();
        assert!(p.is_stationary());
        let a = simulate_eccc(&p, 500, 100, 9).unwrap();
        let b = simulate_eccc(&p, 500, 100, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate_eccc(&p, 500, 100, 10).unwrap());
        let mut bad = p;
        bad.b[0][0] = 1.0;
        assert!(bad.validate().is_err());
        let mut explosive = p;
        explosive.a[0][0] = 0.5;
        explosive.b[0][0] = 0.9;
        assert!(!explosive.is_stationary());
    }

    #[test]
    fn positive_volatility_under_study_design() {
        // sigma_t > 0 implies sign(x_t) == sign(eps_x); check via |x| > 0.
        let s = simulate_eccc(&EcccParams::study_defaults(), 2000, 1000, 1).unwrap();
        assert!(s.x.iter().chain(&s.y).all(|v| v.is_finite() && *v != 0.0));
    }

    #[test]
    fn innovation_var_closed_form() {
        // t_8 0.95-quantile 1.8595480375228424.
        let v = innovation_var(0.95, Innovation::StudentT { nu: 8.0, rho: 0.5 }).unwrap();
        assert!((v - 1.859_548_037_522_842_4 * (6.0f64 / 8.0).sqrt()).abs() < 1e-9);
        let g = innovation_var(0.975, Innovation::Gaussian { rho: 0.3 }).unwrap();
        assert!((g - 1.959_963_984_540_054).abs() < 1e-9);
    }

    #[test]
    fn covar_oracle_independent_gaussian() {
        let o = innovation_covar(0.9, 0.8, Innovation::Gaussian { rho: 0.0 }, 2_000_000, 1).unwrap();
        let exact = stats::norm_ppf(0.9);
        assert!((o.value - exact).abs() < 4.0 * o.std_error, "{} vs {exact} (se {})", o.value, o.std_error);
        assert!(o.std_error > 0.0 && o.std_error < 0.01);
    }

    #[test]
    fn covar_oracle_requires_draws() {
        let err = innovation_covar(0.9, 0.9, t8(), 500_000, 1).unwrap_err();
        assert!(matches!(err, Error::InsufficientDraws(_)));
        // Exactly at the threshold despite 1 - 0.9 not being representable.
        assert!(innovation_covar(0.9, 0.9, Innovation::Gaussian { rho: 0.0 }, 1_000_000, 1).is_ok());
    }

    #[test]
    fn true_params_diagonal() {
        let lv = ProbLevels::symmetric(0.9).unwrap();
        let p = EcccParams::study_defaults();
        let (spec, th) = true_risk_params(&p, lv, 1.2, 1.5).unwrap();
        assert_eq!(spec.variant, Variant::SavDiag);
        assert_eq!(th.theta_v, vec![1.2 * 0.04, 1.2 * 0.1, 0.8]);
        assert_eq!(th.theta_c, vec![1.5 * 0.02, 1.5 * 0.15, 0.75]);
        let mut p2 = p;
        p2.omega[0] *= 2.0;
        let (_, th2) = true_risk_params(&p2, lv, 1.2, 1.5).unwrap();
        assert_eq!(th2.theta_v[0], 2.0 * th.theta_v[0]);
        assert!(true_risk_params(&p, lv, 0.0, 1.5).is_err());
    }

    #[test]
    fn true_params_full() {
        let lv = ProbLevels::symmetric(0.9).unwrap();
        let p = EcccParams {
            omega: [0.1, 0.2],
            a: [[0.1, 0.02], [0.03, 0.15]],
            b: [[0.7, 0.0], [0.05, 0.6]],
            innovation: t8(),
        };
        let (v, c) = (2.0, 4.0);
        let (spec, th) = true_risk_params(&p, lv, v, c).unwrap();
        assert_eq!(spec.variant, Variant::SavFull);
        assert_eq!(th.theta_v, vec![0.2, 0.2, 0.04, 0.7]);
        assert_eq!(th.theta_c, vec![0.8, 0.12, 0.6, 0.1, 0.6]);
        let mut no_cross = p;
        no_cross.b[1][0] = 0.0;
        assert_eq!(true_risk_params(&no_cross, lv, v, c).unwrap().0.variant, Variant::SavFullA);
        let mut bad = p;
        bad.b[0][1] = 0.1;
        assert!(true_risk_params(&bad, lv, v, c).is_err());
    }

    #[test]
    fn true_params_reproduce_simulated_risk_paths() {
        // The mapped recursion, fed the simulated volatility start, equals
        // v_eps * sigma_X and c_eps * sigma_Y period by period.
        let lv = ProbLevels::symmetric(0.9).unwrap();
        let p = EcccParams {
            omega: [0.1, 0.2],
            a: [[0.1, 0.02], [0.03, 0.15]],
            b: [[0.7, 0.0], [0.05, 0.6]],
            innovation: t8(),
        };
        let (v, c) = (1.3, 1.7);
        let (spec, th) = true_risk_params(&p, lv, v, c).unwrap();
        let s = simulate_eccc(&p, 50, 0, 4).unwrap();
        let sig0 = [0.1 / 0.3, 0.2 / 0.4];
        // Pre-sample row is zero, so start from the value the recursion
        // would have produced one step before sigma_0.
        let v_start = (sig0[0] * v - th.theta_v[0]) / th.theta_v[3];
        let c_start = (sig0[1] * c - th.theta_c[0] - th.theta_c[3] * v_start) / th.theta_c[4];
        let start = crate::cocaviar::StartValues::explicit(v_start, c_start).unwrap();
        let path = crate::cocaviar::filter_paths(&spec, &th, &s, start).unwrap();
        let mut sx = sig0[0];
        let mut sy = sig0[1];
        for t in 0..50 {
            if t > 0 {
                let (ax, ay) = (s.x[t - 1].abs(), s.y[t - 1].abs());
                let nx = 0.1 + 0.1 * ax + 0.02 * ay + 0.7 * sx;
                let ny = 0.2 + 0.03 * ax + 0.15 * ay + 0.05 * sx + 0.6 * sy;
                sx = nx;
                sy = ny;
            }
            assert!((path.v[t] - v * sx).abs() < 1e-12, "VaR at t={t}");
            assert!((path.c[t] - c * sy).abs() < 1e-12, "CoVaR at t={t}");
        }
    }

    #[test]
    fn mc_smoke() {
        let lv = ProbLevels::symmetric(0.9).unwrap();
        let mut cfg = McConfig::new(1, 600, lv);
        cfg.oracle_draws = 2_000_000;
        cfg.optimizer.restarts = 2;
        let table = run_mc_study(&cfg).unwrap();
        assert_eq!(table.rows.len(), 6);
        assert_eq!(table.rows[0].used + table.failures, 1);
        let again = run_mc_study(&McConfig { parallel: false, ..cfg }).unwrap();
        assert_eq!(table, again);
    }
}
