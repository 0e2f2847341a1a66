//! `dyncovar` command-line tool.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dyncovar::backtest::{compare_models, rolling_forecast, ForecastModel, RollingConfig, TestSides, TrafficConfig};
use dyncovar::estimation::{fit_two_step, OptimizerConfig};
use dyncovar::garch::Decomposition;
use dyncovar::io;
use dyncovar::simulation::{run_mc_study, simulate_eccc, EcccParams, Innovation, McConfig, DEFAULT_BURN_IN};
use dyncovar::{expand_spec, Covariate, ModelSpec, ProbLevels, Variant};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] dyncovar::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "dyncovar", version, about = "Dynamic CoVaR modelling, forecasting and backtesting")]
#[command(args_override_self = true)]
struct Cli {
    /// key = value file with defaults for any long flag
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress to stderr
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a bivariate loss series from the ECCC-GARCH process
    Simulate(SimulateArgs),
    /// Fit a CoCAViaR model and report estimates with standard errors
    Fit(FitArgs),
    /// Rolling-window out-of-sample forecasts for one model
    Forecast(ForecastArgs),
    /// Forecast with several models and compare them against the first
    Backtest(BacktestArgs),
    /// Compare existing forecast files against a baseline
    Compare(CompareArgs),
    /// Monte Carlo study of the two-step estimator
    McStudy(McStudyArgs),
}

#[derive(Debug, Args)]
struct LevelArgs {
    /// VaR level of the reference position
    #[arg(long, default_value_t = 0.95)]
    beta: f64,
    /// CoVaR level of the target
    #[arg(long, default_value_t = 0.95)]
    alpha: f64,
}

impl LevelArgs {
    fn levels(&self) -> Result<ProbLevels> {
        Ok(ProbLevels::new(self.beta, self.alpha)?)
    }
}

#[derive(Debug, Args)]
struct OptArgs {
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
}

impl OptArgs {
    fn config(&self, seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            restarts: self.restarts,
            max_iters: self.max_iters,
            tolerance: self.tolerance,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
struct InputArgs {
    /// CSV with columns date (optional), x, y and optional z1..zk
    #[arg(long)]
    input: PathBuf,
    /// Treat x and y as returns and negate them into losses
    #[arg(long)]
    negate: bool,
}

/// Covariate masks for `custom` models.
#[derive(Debug, Args)]
struct SpecArgs {
    /// Covariates of a custom VaR equation, e.g. "|X|,z1"
    #[arg(long, value_delimiter = ',')]
    var_covariates: Vec<String>,
    /// Covariates of a custom CoVaR equation
    #[arg(long, value_delimiter = ',')]
    covar_covariates: Vec<String>,
}

fn parse_covariates(names: &[String]) -> Result<Vec<Covariate>> {
    names
        .iter()
        .map(|n| n.parse::<Covariate>().map_err(CliError::from))
        .collect()
}

fn build_spec(variant: &str, a: &SpecArgs, levels: ProbLevels) -> Result<ModelSpec> {
    let v: Variant = variant.parse()?;
    if v == Variant::Custom {
        let spec = ModelSpec::custom(
            parse_covariates(&a.var_covariates)?,
            parse_covariates(&a.covar_covariates)?,
            levels,
        );
        spec.validate()?;
        return Ok(spec);
    }
    if !a.var_covariates.is_empty() || !a.covar_covariates.is_empty() {
        return Err(CliError::Usage("covariate lists require --variant custom".into()));
    }
    Ok(expand_spec(v, levels)?)
}

/// A CoCAViaR variant name, or `garch-cholesky` / `garch-symmetric`.
fn parse_model(name: &str, a: &SpecArgs, levels: ProbLevels) -> Result<ForecastModel> {
    match name.to_ascii_lowercase().strip_prefix("garch") {
        Some(rest) => {
            let d = rest.trim_start_matches(['-', '_']);
            let d: Decomposition = if d.is_empty() { Decomposition::Cholesky } else { d.parse()? };
            Ok(ForecastModel::Garch(d))
        }
        None => Ok(ForecastModel::CoCaviar(build_spec(name, a, levels)?)),
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    /// Intercepts of the volatility equations
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.04, 0.02])]
    omega: Vec<f64>,
    /// ARCH matrix in row-major order
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [0.1, 0.0, 0.0, 0.15])]
    a: Vec<f64>,
    /// GARCH matrix in row-major order
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [0.8, 0.0, 0.0, 0.75])]
    b: Vec<f64>,
    /// Innovation correlation
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    /// Degrees of freedom of the t innovations
    #[arg(long, default_value_t = 8.0)]
    nu: f64,
    /// Gaussian instead of t innovations
    #[arg(long)]
    gaussian: bool,
    #[arg(long)]
    out: PathBuf,
}

impl SimulateArgs {
    fn params(&self) -> EcccParams {
        let m = |v: &[f64]| [[v[0], v[1]], [v[2], v[3]]];
        EcccParams {
            omega: [self.omega[0], self.omega[1]],
            a: m(&self.a),
            b: m(&self.b),
            innovation: if self.gaussian {
                Innovation::Gaussian { rho: self.rho }
            } else {
                Innovation::StudentT { nu: self.nu, rho: self.rho }
            },
        }
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// SAV-diag, SAV-fullA, SAV-full, AS-pos, AS-signs, AS-mixed or custom
    #[arg(long, default_value = "SAV-diag")]
    variant: String,
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    levels: LevelArgs,
    #[command(flatten)]
    opt: OptArgs,
    /// Parameter table CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RollingArgs {
    #[arg(long, default_value_t = 1000)]
    window: usize,
    #[arg(long, default_value_t = 100)]
    refit_every: usize,
}

#[derive(Debug, Args)]
struct ForecastArgs {
    #[command(flatten)]
    input: InputArgs,
    /// CoCAViaR variant or garch-cholesky / garch-symmetric
    #[arg(long, default_value = "SAV-diag")]
    model: String,
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    levels: LevelArgs,
    #[command(flatten)]
    rolling: RollingArgs,
    #[command(flatten)]
    opt: OptArgs,
    #[arg(long)]
    out: PathBuf,
    /// Directory for var_plot.csv and covar_plot.csv
    #[arg(long)]
    plot_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[arg(long, default_value_t = 0.10)]
    significance: f64,
    /// One-sided stage tests instead of two-sided
    #[arg(long)]
    one_sided: bool,
    /// Bartlett truncation lag (default floor(N^(1/3)))
    #[arg(long)]
    hac_lags: Option<usize>,
    /// Display scores multiplied by 10 (VaR) and 1000 (CoVaR)
    #[arg(long)]
    scaled: bool,
}

impl TestArgs {
    fn config(&self) -> TrafficConfig {
        TrafficConfig {
            significance: self.significance,
            sides: if self.one_sided { TestSides::OneSided } else { TestSides::TwoSided },
            hac_lags: self.hac_lags,
        }
    }
}

#[derive(Debug, Args)]
struct BacktestArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Models to run; the first is the baseline
    #[arg(long, value_delimiter = ',', default_values_t = ["SAV-diag".to_string(), "garch-cholesky".to_string()])]
    models: Vec<String>,
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    levels: LevelArgs,
    #[command(flatten)]
    rolling: RollingArgs,
    #[command(flatten)]
    opt: OptArgs,
    #[command(flatten)]
    test: TestArgs,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Baseline forecast CSV
    #[arg(long)]
    base: PathBuf,
    /// Alternative forecast CSVs
    #[arg(long, required = true, num_args = 1..)]
    alt: Vec<PathBuf>,
    #[command(flatten)]
    levels: LevelArgs,
    #[command(flatten)]
    test: TestArgs,
    /// Comparison CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct McStudyArgs {
    #[arg(long, default_value_t = 300)]
    replications: usize,
    /// Sample sizes
    #[arg(long, value_delimiter = ',', default_values_t = [1000, 2000, 4000])]
    n: Vec<usize>,
    /// Symmetric probability levels (alpha = beta)
    #[arg(long, value_delimiter = ',', default_values_t = [0.9, 0.95])]
    levels: Vec<f64>,
    /// Estimated variant (default: the one matching the process)
    #[arg(long)]
    variant: Option<String>,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    /// Monte Carlo draws for the true CoVaR intercept
    #[arg(long, default_value_t = 10_000_000)]
    oracle_draws: usize,
    #[command(flatten)]
    opt: OptArgs,
    #[arg(long)]
    out: PathBuf,
}

fn simulate(a: &SimulateArgs, seed: u64) -> Result<()> {
    let series = simulate_eccc(&a.params(), a.n, a.burn_in, seed)?;
    io::save_series(&a.out, &series)?;
    log::info!("wrote {} rows to {}", series.len(), a.out.display());
    Ok(())
}

fn fit(a: &FitArgs, seed: u64) -> Result<()> {
    let series = io::ingest_csv(&a.input.input, a.input.negate)?;
    let levels = a.levels.levels()?;
    let spec = build_spec(&a.variant, &a.spec, levels)?;
    let result = fit_two_step(&spec, &series, &a.opt.config(seed))?;
    print!("{}", io::format_fit(&result));
    if let Some(out) = &a.out {
        io::write_fit_report(out, &result)?;
    }
    Ok(())
}

fn rolling_config(r: &RollingArgs, levels: ProbLevels, opt: &OptArgs, seed: u64) -> RollingConfig {
    RollingConfig {
        window: r.window,
        refit_every: r.refit_every,
        levels,
        optimizer: opt.config(seed),
    }
}

fn forecast(a: &ForecastArgs, seed: u64) -> Result<()> {
    let series = io::ingest_csv(&a.input.input, a.input.negate)?;
    let levels = a.levels.levels()?;
    let model = parse_model(&a.model, &a.spec, levels)?;
    let out = rolling_forecast(&series, &model, &rolling_config(&a.rolling, levels, &a.opt, seed))?;
    io::write_forecasts(&a.out, &out.records)?;
    if let Some(dir) = &a.plot_dir {
        create_dir(dir)?;
        io::write_plot_data(dir, &out.records)?;
    }
    let hits = dyncovar::backtest::hit_stats(&out.records)?;
    println!(
        "{}: {} forecasts, VaR hits {:.2}%, CoVaR hits {}",
        model.name(),
        hits.n,
        100.0 * hits.var_rate,
        hits.covar_rate.map(|r| format!("{:.2}%", 100.0 * r)).unwrap_or_else(|| "NA".into())
    );
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn backtest(a: &BacktestArgs, seed: u64) -> Result<()> {
    let series = io::ingest_csv(&a.input.input, a.input.negate)?;
    let levels = a.levels.levels()?;
    let cfg = rolling_config(&a.rolling, levels, &a.opt, seed);
    create_dir(&a.out_dir)?;
    let mut streams = Vec::with_capacity(a.models.len());
    for name in &a.models {
        let model = parse_model(name, &a.spec, levels)?;
        log::info!("forecasting with {}", model.name());
        let out = rolling_forecast(&series, &model, &cfg)?;
        io::write_forecasts(&a.out_dir.join(format!("forecasts_{}.csv", file_stem(&model.name()))), &out.records)?;
        streams.push(out.records);
    }
    report(&streams, levels, &a.test, Some(&a.out_dir.join("comparison.csv")))
}

fn report(streams: &[Vec<dyncovar::backtest::ForecastRecord>], levels: ProbLevels, t: &TestArgs, out: Option<&Path>) -> Result<()> {
    let rows = compare_models(streams, levels, &t.config())?;
    print!("{}", io::format_comparison(&rows, t.scaled));
    if let Some(out) = out {
        io::write_comparison(out, &rows)?;
    }
    Ok(())
}

fn compare(a: &CompareArgs) -> Result<()> {
    let levels = a.levels.levels()?;
    let mut streams = vec![io::read_forecasts(&a.base)?];
    for p in &a.alt {
        streams.push(io::read_forecasts(p)?);
    }
    report(&streams, levels, &a.test, a.out.as_deref())
}

fn mc_study(a: &McStudyArgs, seed: u64) -> Result<()> {
    let variant = a.variant.as_deref().map(str::parse::<Variant>).transpose()?;
    let mut rows = Vec::new();
    for &level in &a.levels {
        let levels = ProbLevels::symmetric(level)?;
        for &n in &a.n {
            let cfg = McConfig {
                burn_in: a.burn_in,
                variant,
                seed,
                optimizer: a.opt.config(seed),
                oracle_draws: a.oracle_draws,
                ..McConfig::new(a.replications, n, levels)
            };
            log::info!("study level={level} n={n}");
            let table = run_mc_study(&cfg)?;
            if table.failures > 0 {
                log::warn!("level={level} n={n}: {} replications failed", table.failures);
            }
            for r in &table.rows {
                println!(
                    "{:>5} {:>6} {:<6} {:<6} bias {:>9} mbias {:>9} sd_emp {:>9} sd_asy {:>9} CI {:>6}",
                    level,
                    n,
                    r.equation.name(),
                    r.name,
                    io::sig6(r.bias),
                    io::sig6(r.median_bias),
                    io::sig6(r.sd_emp),
                    io::sig6(r.sd_asy),
                    io::sig6(r.coverage)
                );
            }
            rows.extend(table.rows);
        }
    }
    io::write_study_rows(&a.out, &rows)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match &cli.command {
        Command::Simulate(a) => simulate(a, cli.seed),
        Command::Fit(a) => fit(a, cli.seed),
        Command::Forecast(a) => forecast(a, cli.seed),
        Command::Backtest(a) => backtest(a, cli.seed),
        Command::Compare(a) => compare(a),
        Command::McStudy(a) => mc_study(a, cli.seed),
    }
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let default_level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
