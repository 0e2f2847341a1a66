//! Bivariate (VaR, CoVaR) scoring function and the lexicographic order used
//! to compare expected scores.
//!
//! The first component is the tick loss of the VaR. The second component is
//! a tick loss of the CoVaR that only counts periods where the reference loss
//! exceeds the reported VaR.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::types::{LossSeries, ProbLevels, RiskPath};

/// Average (or single-period) scores of a (VaR, CoVaR) report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorePair {
    pub s_var: f64,
    pub s_covar: f64,
}

/// Tick loss `(1{x <= v} - beta) (v - x)`.
#[inline]
pub fn score_var(v: f64, x: f64, beta: f64) -> f64 {
    let ind = if x <= v { 1.0 } else { 0.0 };
    (ind - beta) * (v - x)
}

/// `1{x > v} (1{y <= c} - alpha) (c - y)`; zero whenever `x <= v`.
#[inline]
pub fn score_covar(v: f64, c: f64, x: f64, y: f64, alpha: f64) -> f64 {
    if x > v {
        let ind = if y <= c { 1.0 } else { 0.0 };
        (ind - alpha) * (c - y)
    } else {
        0.0
    }
}

/// Componentwise mean scores over a fitted path.
pub fn average_scores(series: &LossSeries, path: &RiskPath, levels: ProbLevels) -> Result<ScorePair> {
    average_scores_raw(&series.x, &series.y, &path.v, &path.c, levels)
}

/// [`average_scores`] on bare slices.
pub fn average_scores_raw(
    x: &[f64],
    y: &[f64],
    v: &[f64],
    c: &[f64],
    levels: ProbLevels,
) -> Result<ScorePair> {
    let n = x.len();
    if n == 0 {
        return Err(Error::Empty("score input"));
    }
    for (what, len) in [("y", y.len()), ("v", v.len()), ("c", c.len())] {
        if len != n {
            return Err(Error::LengthMismatch {
                what,
                expected: n,
                got: len,
            });
        }
    }
    let mut sv = 0.0;
    let mut sc = 0.0;
    for t in 0..n {
        sv += score_var(v[t], x[t], levels.beta);
        sc += score_covar(v[t], c[t], x[t], y[t], levels.alpha);
    }
    Ok(ScorePair {
        s_var: sv / n as f64,
        s_covar: sc / n as f64,
    })
}

/// Mean tick loss of a VaR path.
pub fn mean_score_var(x: &[f64], v: &[f64], beta: f64) -> f64 {
    x.iter().zip(v).map(|(&x, &v)| score_var(v, x, beta)).sum::<f64>() / x.len() as f64
}

/// Mean CoVaR score of a CoVaR path given a fixed VaR path.
pub fn mean_score_covar(x: &[f64], y: &[f64], v: &[f64], c: &[f64], alpha: f64) -> f64 {
    let mut s = 0.0;
    for t in 0..x.len() {
        s += score_covar(v[t], c[t], x[t], y[t], alpha);
    }
    s / x.len() as f64
}

/// Lexicographic comparison with a tolerance band on the first component.
///
/// `a < b` iff `a.s_var < b.s_var - tol`, or the first components lie within
/// `tol` of each other and `a.s_covar < b.s_covar`.
pub fn lex_compare(a: ScorePair, b: ScorePair, tolerance_var: f64) -> Ordering {
    if a.s_var < b.s_var - tolerance_var {
        Ordering::Less
    } else if a.s_var > b.s_var + tolerance_var {
        Ordering::Greater
    } else if a.s_covar < b.s_covar {
        Ordering::Less
    } else if a.s_covar > b.s_covar {
        Ordering::Greater
    } else {
        Ordering::Equal
    }
}
