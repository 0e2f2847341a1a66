//! Order-statistic helpers shared by every module.
//!
//! One quantile convention is used project-wide: linear interpolation between
//! order statistics, `h = (n - 1) p`, i.e. Hyndman–Fan type 7.

use statrs::distribution::{ContinuousCDF, Normal};

/// Empirical `p`-quantile with linear interpolation of order statistics.
///
/// Returns `NaN` for an empty slice. `p` is clamped to `[0, 1]`.
pub fn quantile(data: &[f64], p: f64) -> f64 {
    if data.is_empty() {
        return f64::NAN;
    }
    let mut v = data.to_vec();
    quantile_in_place(&mut v, p)
}

/// As [`quantile`], but reorders `data` instead of copying it.
pub fn quantile_in_place(data: &mut [f64], p: f64) -> f64 {
    let n = data.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let (_, lo_val, upper) = data.select_nth_unstable_by(lo, f64::total_cmp);
    let lo_val = *lo_val;
    if frac == 0.0 || upper.is_empty() {
        return lo_val;
    }
    let hi_val = upper.iter().copied().fold(f64::INFINITY, f64::min);
    lo_val + frac * (hi_val - lo_val)
}

pub fn median(data: &[f64]) -> f64 {
    quantile(data, 0.5)
}

/// Normal-consistent scale factor applied to the raw median absolute deviation.
pub const MAD_NORMAL_SCALE: f64 = 1.482_602_218_505_602;

/// Median absolute deviation around the median, scaled by
/// [`MAD_NORMAL_SCALE`] so it estimates the standard deviation under normality.
pub fn mad(data: &[f64]) -> f64 {
    let med = median(data);
    let mut dev: Vec<f64> = data.iter().map(|x| (x - med).abs()).collect();
    MAD_NORMAL_SCALE * quantile_in_place(&mut dev, 0.5)
}

pub fn mean(data: &[f64]) -> f64 {
    data.iter().sum::<f64>() / data.len() as f64
}

/// Sample standard deviation with the `n - 1` denominator.
pub fn std_dev(data: &[f64]) -> f64 {
    let n = data.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(data);
    (data.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a);
    let mb = mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

pub fn norm_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub fn norm_ppf(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}
