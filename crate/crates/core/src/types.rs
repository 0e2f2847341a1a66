//! Domain data model: loss series, probability levels, model specifications,
//! parameter layouts and fit results.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Aligned bivariate log-losses `(x_t, y_t)` with optional exogenous
/// covariates and opaque date labels.
///
/// `x` is the reference position (e.g. a bank), `y` the target (e.g. the
/// market). Positive values are losses.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSeries {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// One covariate vector per period; all rows share the same width.
    pub z: Option<Vec<Vec<f64>>>,
    pub labels: Option<Vec<String>>,
}

impl LossSeries {
    /// Builds and validates a series without covariates or labels.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        validate_series(LossSeries {
            x,
            y,
            z: None,
            labels: None,
        })
    }

    pub fn with_covariates(mut self, z: Vec<Vec<f64>>) -> Result<Self> {
        self.z = Some(z);
        validate_series(self)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        self.labels = Some(labels);
        validate_series(self)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Number of exogenous covariates per period (0 when absent).
    pub fn covariate_dim(&self) -> usize {
        self.z
            .as_ref()
            .and_then(|z| z.first().map(Vec::len))
            .unwrap_or(0)
    }

    /// Copies periods `range` into a new series.
    pub fn slice(&self, range: std::ops::Range<usize>) -> LossSeries {
        LossSeries {
            x: self.x[range.clone()].to_vec(),
            y: self.y[range.clone()].to_vec(),
            z: self.z.as_ref().map(|z| z[range.clone()].to_vec()),
            labels: self.labels.as_ref().map(|l| l[range].to_vec()),
        }
    }

    /// The same series with `x` and `y` exchanged.
    pub fn swapped(&self) -> LossSeries {
        LossSeries {
            x: self.y.clone(),
            y: self.x.clone(),
            z: self.z.clone(),
            labels: self.labels.clone(),
        }
    }
}

/// Checks that all components have equal length `n >= 1` and that every
/// value is finite. Returns the series unchanged on success.
pub fn validate_series(series: LossSeries) -> Result<LossSeries> {
    let n = series.x.len();
    if n == 0 {
        return Err(Error::Empty("loss series"));
    }
    if series.y.len() != n {
        return Err(Error::LengthMismatch {
            what: "y",
            expected: n,
            got: series.y.len(),
        });
    }
    if let Some(z) = &series.z {
        if z.len() != n {
            return Err(Error::LengthMismatch {
                what: "z",
                expected: n,
                got: z.len(),
            });
        }
        let k = z[0].len();
        for (t, row) in z.iter().enumerate() {
            if row.len() != k {
                return Err(Error::LengthMismatch {
                    what: "z row",
                    expected: k,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "z", index: t });
            }
        }
    }
    if let Some(labels) = &series.labels {
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: n,
                got: labels.len(),
            });
        }
    }
    if let Some(t) = series.x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "x", index: t });
    }
    if let Some(t) = series.y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "y", index: t });
    }
    Ok(series)
}

/// Probability levels: `beta` for the VaR of X, `alpha` for the CoVaR of Y
/// given `X >= VaR_beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbLevels {
    pub beta: f64,
    pub alpha: f64,
}

impl ProbLevels {
    pub fn new(beta: f64, alpha: f64) -> Result<Self> {
        for (name, value) in [("beta", beta), ("alpha", alpha)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::InvalidLevel { name, value });
            }
        }
        Ok(Self { beta, alpha })
    }

    /// `alpha = beta = level`.
    pub fn symmetric(level: f64) -> Result<Self> {
        Self::new(level, level)
    }
}

/// Lagged transforms that can enter either equation.
///
/// The derived order is the canonical order of parameters inside a mask:
/// `|X|, X+, X-, |Y|, Y+, Y-, z_0, z_1, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Covariate {
    AbsX,
    PosX,
    NegX,
    AbsY,
    PosY,
    NegY,
    Z(usize),
}

impl Covariate {
    pub fn name(&self) -> String {
        match self {
            Covariate::AbsX => "|X|".into(),
            Covariate::PosX => "X+".into(),
            Covariate::NegX => "X-".into(),
            Covariate::AbsY => "|Y|".into(),
            Covariate::PosY => "Y+".into(),
            Covariate::NegY => "Y-".into(),
            Covariate::Z(i) => format!("z{i}"),
        }
    }

    /// Evaluates the transform on one lagged observation.
    pub fn eval(&self, x: f64, y: f64, z: Option<&[f64]>) -> f64 {
        match self {
            Covariate::AbsX => x.abs(),
            Covariate::PosX => x.max(0.0),
            Covariate::NegX => -x.min(0.0),
            Covariate::AbsY => y.abs(),
            Covariate::PosY => y.max(0.0),
            Covariate::NegY => -y.min(0.0),
            Covariate::Z(i) => z.map(|z| z[*i]).unwrap_or(f64::NAN),
        }
    }
}

impl FromStr for Covariate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let c = match s.trim() {
            "|X|" | "absx" | "abs_x" => Covariate::AbsX,
            "X+" | "posx" | "pos_x" => Covariate::PosX,
            "X-" | "negx" | "neg_x" => Covariate::NegX,
            "|Y|" | "absy" | "abs_y" => Covariate::AbsY,
            "Y+" | "posy" | "pos_y" => Covariate::PosY,
            "Y-" | "negy" | "neg_y" => Covariate::NegY,
            other => {
                let idx = other
                    .strip_prefix('z')
                    .and_then(|i| i.parse::<usize>().ok())
                    .ok_or_else(|| Error::InvalidSpec(format!("unknown covariate `{other}`")))?;
                Covariate::Z(idx)
            }
        };
        Ok(c)
    }
}

/// Named CoCAViaR specifications plus a free-form custom one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    SavDiag,
    SavFullA,
    SavFull,
    AsPos,
    AsSigns,
    AsMixed,
    Custom,
}

impl Variant {
    pub const NAMED: [Variant; 6] = [
        Variant::SavDiag,
        Variant::SavFullA,
        Variant::SavFull,
        Variant::AsPos,
        Variant::AsSigns,
        Variant::AsMixed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::SavDiag => "SAV-diag",
            Variant::SavFullA => "SAV-fullA",
            Variant::SavFull => "SAV-full",
            Variant::AsPos => "AS-pos",
            Variant::AsSigns => "AS-signs",
            Variant::AsMixed => "AS-mixed",
            Variant::Custom => "custom",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "savdiag" => Ok(Variant::SavDiag),
            "savfulla" => Ok(Variant::SavFullA),
            "savfull" => Ok(Variant::SavFull),
            "aspos" => Ok(Variant::AsPos),
            "assigns" => Ok(Variant::AsSigns),
            "asmixed" => Ok(Variant::AsMixed),
            "custom" => Ok(Variant::Custom),
            _ => Err(Error::UnknownVariant(s.to_string())),
        }
    }
}

/// A CoCAViaR model: covariate masks for both equations and the levels.
///
/// Every equation carries an intercept and its own lag in addition to the
/// covariates in its mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub variant: Variant,
    pub var_covariates: Vec<Covariate>,
    pub covar_covariates: Vec<Covariate>,
    /// Adds `v_{t-1}` as a regressor in the CoVaR equation (SAV-full only).
    pub include_lagged_var_in_covar: bool,
    pub levels: ProbLevels,
}

/// Expands a named variant into its covariate masks.
pub fn expand_spec(variant: Variant, levels: ProbLevels) -> Result<ModelSpec> {
    use Covariate::*;
    let (var, covar, lagged) = match variant {
        Variant::SavDiag => (vec![AbsX], vec![AbsY], false),
        Variant::SavFullA => (vec![AbsX, AbsY], vec![AbsX, AbsY], false),
        Variant::SavFull => (vec![AbsX, AbsY], vec![AbsX, AbsY], true),
        Variant::AsPos => (vec![PosX, PosY], vec![PosX, PosY], false),
        Variant::AsSigns => (vec![PosX, NegX], vec![PosX, NegX, PosY, NegY], false),
        Variant::AsMixed => (vec![PosX, NegX, AbsY], vec![AbsX, PosY, NegY], false),
        Variant::Custom => {
            return Err(Error::UnknownVariant(
                "custom (use ModelSpec::custom)".to_string(),
            ))
        }
    };
    Ok(ModelSpec {
        variant,
        var_covariates: var,
        covar_covariates: covar,
        include_lagged_var_in_covar: lagged,
        levels,
    })
}

impl ModelSpec {
    /// A custom specification. Masks are sorted into canonical order and
    /// de-duplicated. The lagged-VaR regressor is not available here.
    pub fn custom(
        mut var_covariates: Vec<Covariate>,
        mut covar_covariates: Vec<Covariate>,
        levels: ProbLevels,
    ) -> Self {
        var_covariates.sort();
        var_covariates.dedup();
        covar_covariates.sort();
        covar_covariates.dedup();
        ModelSpec {
            variant: Variant::Custom,
            var_covariates,
            covar_covariates,
            include_lagged_var_in_covar: false,
            levels,
        }
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        if self.include_lagged_var_in_covar && self.variant != Variant::SavFull {
            return Err(Error::InvalidSpec(format!(
                "lagged VaR in the CoVaR equation is only allowed for SAV-full, not {}",
                self.variant
            )));
        }
        for mask in [&self.var_covariates, &self.covar_covariates] {
            if mask.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidSpec(
                    "covariate masks must be strictly in canonical order".into(),
                ));
            }
        }
        ProbLevels::new(self.levels.beta, self.levels.alpha)?;
        Ok(())
    }

    /// Number of VaR parameters: intercept, loadings, own lag.
    pub fn p(&self) -> usize {
        self.var_covariates.len() + 2
    }

    /// Number of CoVaR parameters: intercept, loadings, [lagged VaR], own lag.
    pub fn q(&self) -> usize {
        self.covar_covariates.len() + 2 + usize::from(self.include_lagged_var_in_covar)
    }

    pub fn with_levels(&self, levels: ProbLevels) -> ModelSpec {
        ModelSpec {
            levels,
            ..self.clone()
        }
    }

    /// Largest z index referenced by either mask, if any.
    pub fn max_z_index(&self) -> Option<usize> {
        self.var_covariates
            .iter()
            .chain(&self.covar_covariates)
            .filter_map(|c| match c {
                Covariate::Z(i) => Some(*i),
                _ => None,
            })
            .max()
    }

    pub fn layout(&self) -> ParamLayout {
        let mut var = vec![ParamRole::Intercept];
        var.extend(self.var_covariates.iter().map(|c| ParamRole::Loading(*c)));
        var.push(ParamRole::OwnLag);
        let mut covar = vec![ParamRole::Intercept];
        covar.extend(self.covar_covariates.iter().map(|c| ParamRole::Loading(*c)));
        if self.include_lagged_var_in_covar {
            covar.push(ParamRole::LaggedVar);
        }
        covar.push(ParamRole::OwnLag);
        ParamLayout { var, covar }
    }
}

/// What a single parameter position multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Intercept,
    Loading(Covariate),
    /// `v_{t-1}` inside the CoVaR equation.
    LaggedVar,
    /// `v_{t-1}` in the VaR equation, `c_{t-1}` in the CoVaR equation.
    OwnLag,
}

impl ParamRole {
    pub fn name(&self, equation: Equation) -> String {
        match (self, equation) {
            (ParamRole::Intercept, _) => "omega".into(),
            (ParamRole::Loading(c), _) => c.name(),
            (ParamRole::LaggedVar, _) => "v_lag".into(),
            (ParamRole::OwnLag, Equation::Var) => "v_lag".into(),
            (ParamRole::OwnLag, Equation::Covar) => "c_lag".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    Var,
    Covar,
}

impl Equation {
    pub fn name(&self) -> &'static str {
        match self {
            Equation::Var => "VaR",
            Equation::Covar => "CoVaR",
        }
    }
}

/// Position-to-role map for both parameter vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub var: Vec<ParamRole>,
    pub covar: Vec<ParamRole>,
}

impl ParamLayout {
    pub fn p(&self) -> usize {
        self.var.len()
    }

    pub fn q(&self) -> usize {
        self.covar.len()
    }

    /// Human-readable names, VaR block first.
    pub fn names(&self) -> Vec<(Equation, String)> {
        self.var
            .iter()
            .map(|r| (Equation::Var, r.name(Equation::Var)))
            .chain(
                self.covar
                    .iter()
                    .map(|r| (Equation::Covar, r.name(Equation::Covar))),
            )
            .collect()
    }
}

/// VaR and CoVaR parameter vectors with their layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub theta_v: Vec<f64>,
    pub theta_c: Vec<f64>,
    pub layout: ParamLayout,
}

impl ParamSet {
    pub fn new(spec: &ModelSpec, theta_v: Vec<f64>, theta_c: Vec<f64>) -> Result<Self> {
        let layout = spec.layout();
        if theta_v.len() != layout.p() {
            return Err(Error::ParamLength {
                expected: layout.p(),
                got: theta_v.len(),
            });
        }
        if theta_c.len() != layout.q() {
            return Err(Error::ParamLength {
                expected: layout.q(),
                got: theta_c.len(),
            });
        }
        Ok(Self {
            theta_v,
            theta_c,
            layout,
        })
    }

    /// Splits a flat `(theta_v, theta_c)` vector according to the spec.
    pub fn from_flat(spec: &ModelSpec, flat: &[f64]) -> Result<Self> {
        let p = spec.p();
        if flat.len() != p + spec.q() {
            return Err(Error::ParamLength {
                expected: p + spec.q(),
                got: flat.len(),
            });
        }
        Self::new(spec, flat[..p].to_vec(), flat[p..].to_vec())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.theta_v.iter().chain(&self.theta_c).copied().collect()
    }

    pub fn var_lag(&self) -> f64 {
        *self.theta_v.last().expect("non-empty theta_v")
    }

    pub fn covar_lag(&self) -> f64 {
        *self.theta_c.last().expect("non-empty theta_c")
    }
}

/// Fitted in-sample VaR and CoVaR paths with their parameter gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskPath {
    pub v: Vec<f64>,
    pub c: Vec<f64>,
    pub grad_v: Vec<Vec<f64>>,
    pub grad_c: Vec<Vec<f64>>,
}

impl RiskPath {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// Optimizer bookkeeping for one estimation stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageDiagnostics {
    pub objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub restarts: usize,
    /// Restarts whose simplex met the tolerance before `max_iters`.
    pub converged_restarts: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub var: StageDiagnostics,
    pub covar: StageDiagnostics,
}

/// Output of the two-step estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub params: ParamSet,
    pub avg_score_var: f64,
    pub avg_score_covar: f64,
    /// Finite-sample covariance of the VaR estimator.
    pub cov_v: DMatrix<f64>,
    /// Finite-sample covariance of the CoVaR estimator, including the
    /// first-stage correction.
    pub cov_c: DMatrix<f64>,
    /// Joint covariance of `(theta_v, theta_c)`.
    pub cov_joint: DMatrix<f64>,
    pub se_v: Vec<f64>,
    pub se_c: Vec<f64>,
    pub bandwidths: (f64, f64),
    pub start: crate::cocaviar::StartValues,
    pub diagnostics: Diagnostics,
}
