//! Asymptotic covariance estimation for the two-step estimator.
//!
//! Kernel terms use a rectangular kernel with Hall–Sheather type bandwidths
//! scaled by the MAD of the residuals. The CoVaR covariance includes the
//! correction for the estimated first stage.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::stats;
use crate::types::{LossSeries, ProbLevels, RiskPath};

/// Largest condition number accepted when inverting `Lambda` or `Lambda1`.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct AvarComponents {
    /// `p x p`
    pub v_hat: DMatrix<f64>,
    /// `p x p`
    pub lambda_hat: DMatrix<f64>,
    /// `q x q`
    pub cstar_hat: DMatrix<f64>,
    /// `q x q`
    pub lambda1_hat: DMatrix<f64>,
    /// `q x p`
    pub lambda2_hat: DMatrix<f64>,
    pub bw_x: f64,
    pub bw_y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Covariances {
    pub cov_v: DMatrix<f64>,
    pub cov_c: DMatrix<f64>,
    /// Covariance of `(theta_v, theta_c)`.
    pub cov_joint: DMatrix<f64>,
}

/// Bandwidth rate
/// `m(n, tau) = n^(-1/3) z_0.975^(2/3) (1.5 phi(z_tau)^2 / (2 z_tau^2 + 1))^(1/3)`.
pub fn bandwidth_m(n: f64, tau: f64) -> f64 {
    let z = stats::norm_ppf(tau);
    let z975 = stats::norm_ppf(0.975);
    let phi = stats::norm_pdf(z);
    n.powf(-1.0 / 3.0) * z975.powf(2.0 / 3.0) * (1.5 * phi * phi / (2.0 * z * z + 1.0)).powf(1.0 / 3.0)
}

fn quantile_spread(n: f64, tau: f64, which: &str) -> Result<f64> {
    let m = bandwidth_m(n, tau);
    if !(tau - m > 0.0 && tau + m < 1.0) {
        return Err(Error::BandwidthDomain(format!(
            "{which}: level {tau} +/- m = {m:.6} leaves (0, 1) at effective sample size {n}"
        )));
    }
    Ok(stats::norm_ppf(tau + m) - stats::norm_ppf(tau - m))
}

/// Kernel bandwidths `(bw_x, bw_y)` for the VaR and CoVaR residuals.
///
/// The CoVaR bandwidth uses the effective sample size `(1 - beta) n`.
pub fn bandwidths(series: &LossSeries, path: &RiskPath, levels: ProbLevels) -> Result<(f64, f64)> {
    let n = series.len();
    check_path(series, path)?;
    let rx: Vec<f64> = series.x.iter().zip(&path.v).map(|(x, v)| x - v).collect();
    let ry: Vec<f64> = series.y.iter().zip(&path.c).map(|(y, c)| y - c).collect();
    let (mx, my) = (stats::mad(&rx), stats::mad(&ry));
    if !(mx > 0.0) {
        return Err(Error::DegenerateBandwidth("MAD of VaR residuals is zero".into()));
    }
    if !(my > 0.0) {
        return Err(Error::DegenerateBandwidth("MAD of CoVaR residuals is zero".into()));
    }
    let nf = n as f64;
    let bw_x = mx * quantile_spread(nf, levels.beta, "VaR bandwidth")?;
    let bw_y = my * quantile_spread((1.0 - levels.beta) * nf, levels.alpha, "CoVaR bandwidth")?;
    Ok((bw_x, bw_y))
}

fn check_path(series: &LossSeries, path: &RiskPath) -> Result<()> {
    let n = series.len();
    for (what, len) in [
        ("v", path.v.len()),
        ("c", path.c.len()),
        ("grad_v", path.grad_v.len()),
        ("grad_c", path.grad_c.len()),
    ] {
        if len != n {
            return Err(Error::LengthMismatch { what, expected: n, got: len });
        }
    }
    if n == 0 {
        return Err(Error::Empty("risk path"));
    }
    Ok(())
}

/// `(1/n) sum w_t a_t b_t'` over the periods with non-zero weight.
fn weighted_outer(a: &[Vec<f64>], b: &[Vec<f64>], weights: impl Iterator<Item = f64>) -> DMatrix<f64> {
    let n = a.len();
    let (ra, rb) = (a.first().map_or(0, Vec::len), b.first().map_or(0, Vec::len));
    let mut m = DMatrix::zeros(ra, rb);
    for (t, w) in weights.enumerate() {
        if w == 0.0 {
            continue;
        }
        for i in 0..ra {
            let wa = w * a[t][i];
            for j in 0..rb {
                m[(i, j)] += wa * b[t][j];
            }
        }
    }
    if n > 0 {
        m /= n as f64;
    }
    m
}

/// `beta (1 - beta)` times the mean outer product of the VaR gradients.
pub fn estimate_v(grad_v: &[Vec<f64>], beta: f64) -> DMatrix<f64> {
    let w = beta * (1.0 - beta);
    weighted_outer(grad_v, grad_v, std::iter::repeat_n(w, grad_v.len()))
}

/// Kernel estimate of the VaR Hessian.
pub fn estimate_lambda(series: &LossSeries, path: &RiskPath, bw_x: f64) -> DMatrix<f64> {
    let k = 1.0 / (2.0 * bw_x);
    let w = series
        .x
        .iter()
        .zip(&path.v)
        .map(|(x, v)| if (x - v).abs() < bw_x { k } else { 0.0 });
    weighted_outer(&path.grad_v, &path.grad_v, w)
}

/// `alpha (1 - alpha) (1 - beta)` times the mean outer product of the CoVaR gradients.
pub fn estimate_cstar(grad_c: &[Vec<f64>], alpha: f64, beta: f64) -> DMatrix<f64> {
    let w = alpha * (1.0 - alpha) * (1.0 - beta);
    weighted_outer(grad_c, grad_c, std::iter::repeat_n(w, grad_c.len()))
}

/// Kernel estimate of the CoVaR Hessian; only periods with `x_t > v_t` count.
pub fn estimate_lambda1(series: &LossSeries, path: &RiskPath, bw_y: f64) -> DMatrix<f64> {
    let k = 1.0 / (2.0 * bw_y);
    let w = (0..series.len()).map(|t| {
        let in_band = (series.y[t] - path.c[t]).abs() < bw_y;
        if in_band && series.x[t] > path.v[t] {
            k
        } else {
            0.0
        }
    });
    weighted_outer(&path.grad_c, &path.grad_c, w)
}

/// Kernel estimate of the cross derivative of the CoVaR moment in `theta_v` (`q x p`).
pub fn estimate_lambda2(series: &LossSeries, path: &RiskPath, bw_x: f64, alpha: f64) -> DMatrix<f64> {
    let k = 1.0 / (2.0 * bw_x);
    let w = (0..series.len()).map(|t| {
        if (series.x[t] - path.v[t]).abs() < bw_x {
            let below = if series.y[t] <= path.c[t] { 1.0 } else { 0.0 };
            k * (alpha - below)
        } else {
            0.0
        }
    });
    weighted_outer(&path.grad_c, &path.grad_v, w)
}

/// All kernel and outer-product terms at a fitted path.
pub fn avar_components(series: &LossSeries, path: &RiskPath, levels: ProbLevels) -> Result<AvarComponents> {
    let (bw_x, bw_y) = bandwidths(series, path, levels)?;
    Ok(AvarComponents {
        v_hat: estimate_v(&path.grad_v, levels.beta),
        lambda_hat: estimate_lambda(series, path, bw_x),
        cstar_hat: estimate_cstar(&path.grad_c, levels.alpha, levels.beta),
        lambda1_hat: estimate_lambda1(series, path, bw_y),
        lambda2_hat: estimate_lambda2(series, path, bw_x, levels.alpha),
        bw_x,
        bw_y,
    })
}

/// 2-norm condition number from the singular values.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

fn guarded_inverse(m: &DMatrix<f64>, name: &'static str) -> Result<DMatrix<f64>> {
    let condition = condition_number(m);
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { name, condition });
    }
    m.clone()
        .lu()
        .try_inverse()
        .ok_or(Error::Singular { name, condition })
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Sandwich covariances of both estimators, divided by `n`.
pub fn assemble_covariances(c: &AvarComponents, n: usize) -> Result<Covariances> {
    let p = c.v_hat.nrows();
    let q = c.cstar_hat.nrows();
    let nf = n as f64;
    let lam_inv = guarded_inverse(&c.lambda_hat, "Lambda")?;
    let lam1_inv = guarded_inverse(&c.lambda1_hat, "Lambda1")?;

    let cov_v = symmetrize(&lam_inv * &c.v_hat * &lam_inv / nf);

    // Gamma = [Lambda1^-1 Lambda2 Lambda^-1 | -Lambda1^-1]
    let cross = &lam1_inv * &c.lambda2_hat * &lam_inv;
    let mut gamma = DMatrix::zeros(q, p + q);
    gamma.view_mut((0, 0), (q, p)).copy_from(&cross);
    gamma.view_mut((0, p), (q, q)).copy_from(&(-&lam1_inv));

    let mut cmat = DMatrix::zeros(p + q, p + q);
    cmat.view_mut((0, 0), (p, p)).copy_from(&c.v_hat);
    cmat.view_mut((p, p), (q, q)).copy_from(&c.cstar_hat);

    let cov_c = symmetrize(&gamma * &cmat * gamma.transpose() / nf);

    let mut gbar = DMatrix::zeros(p + q, p + q);
    gbar.view_mut((0, 0), (p, p)).copy_from(&(-&lam_inv));
    gbar.view_mut((p, 0), (q, p + q)).copy_from(&gamma);
    let cov_joint = symmetrize(&gbar * &cmat * gbar.transpose() / nf);

    Ok(Covariances { cov_v, cov_c, cov_joint })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(x: f64, y: f64, v: f64, c: f64, gv: Vec<f64>, gc: Vec<f64>) -> (LossSeries, RiskPath) {
        let s = LossSeries::new(vec![x], vec![y]).unwrap();
        let p = RiskPath {
            v: vec![v],
            c: vec![c],
            grad_v: vec![gv],
            grad_c: vec![gc],
        };
        (s, p)
    }

    fn dm(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    fn min_eig(m: &DMatrix<f64>) -> f64 {
        m.clone().symmetric_eigen().eigenvalues.min()
    }

    #[test]
    fn bandwidth_rate_hand_value() {
        // Independent evaluation: z = 1.6448536269514722, phi(z) = 0.10313564037537139.
        let z: f64 = 1.644_853_626_951_472_2;
        let phi: f64 = 0.103_135_640_375_371_39;
        let z975: f64 = 1.959_963_984_540_054;
        let expected = 1000f64.powf(-1.0 / 3.0)
            * z975.powf(2.0 / 3.0)
            * (1.5 * phi * phi / (2.0 * z * z + 1.0)).powf(1.0 / 3.0);
        assert!((bandwidth_m(1000.0, 0.95) - expected).abs() < 1e-12);
        assert!((bandwidth_m(1000.0, 0.95) - 0.0212).abs() < 5e-5);
    }

    #[test]
    fn bandwidth_guards() {
        let s = LossSeries::new(vec![1.0; 50], vec![2.0; 50]).unwrap();
        let p = RiskPath {
            v: vec![0.0; 50],
            c: vec![0.0; 50],
            grad_v: vec![vec![1.0]; 50],
            grad_c: vec![vec![1.0]; 50],
        };
        let lv = ProbLevels::symmetric(0.9).unwrap();
        assert!(matches!(bandwidths(&s, &p, lv), Err(Error::DegenerateBandwidth(_))));

        let s = LossSeries::new((0..5).map(f64::from).collect(), (0..5).map(f64::from).collect()).unwrap();
        let p = RiskPath {
            v: vec![0.0; 5],
            c: vec![0.0; 5],
            grad_v: vec![vec![1.0]; 5],
            grad_c: vec![vec![1.0]; 5],
        };
        let lv = ProbLevels::symmetric(0.99).unwrap();
        assert!(matches!(bandwidths(&s, &p, lv), Err(Error::BandwidthDomain(_))));
    }

    #[test]
    fn v_and_cstar_hand_values() {
        let g = vec![vec![1.0]; 10];
        assert!((estimate_v(&g, 0.95)[(0, 0)] - 0.0475).abs() < 1e-15);
        assert!((estimate_cstar(&g, 0.95, 0.95)[(0, 0)] - 0.002375).abs() < 1e-15);
        let g = vec![vec![1.0, 2.0]; 4];
        let v = estimate_v(&g, 0.5);
        assert_eq!(v, dm(2, 2, &[0.25, 0.5, 0.5, 1.0]));
        assert_eq!(estimate_cstar(&[vec![0.0, 0.0]], 0.9, 0.9), DMatrix::zeros(2, 2));
    }

    #[test]
    fn lambda_kernel_cases() {
        let (s, p) = single(0.1, 0.0, 0.0, 0.0, vec![1.0, 2.0], vec![1.0]);
        assert_eq!(estimate_lambda(&s, &p, 0.5), dm(2, 2, &[1.0, 2.0, 2.0, 4.0]));
        let (s, p) = single(3.0, 0.0, 0.0, 0.0, vec![1.0, 2.0], vec![1.0]);
        assert_eq!(estimate_lambda(&s, &p, 0.5), DMatrix::zeros(2, 2));
    }

    #[test]
    fn lambda1_kernel_cases() {
        let (s, p) = single(1.0, 0.2, 0.0, 0.0, vec![1.0], vec![1.0, 3.0]);
        assert_eq!(estimate_lambda1(&s, &p, 0.5), dm(2, 2, &[1.0, 3.0, 3.0, 9.0]));
        let (s, p) = single(-1.0, 0.2, 0.0, 0.0, vec![1.0], vec![1.0, 3.0]);
        assert_eq!(estimate_lambda1(&s, &p, 0.5), DMatrix::zeros(2, 2));
        let (s, p) = single(1.0, 9.0, 0.0, 0.0, vec![1.0], vec![1.0, 3.0]);
        assert_eq!(estimate_lambda1(&s, &p, 0.5), DMatrix::zeros(2, 2));
    }

    #[test]
    fn lambda2_kernel_cases() {
        let gv = vec![1.0, 2.0];
        let gc = vec![3.0];
        let (s, p) = single(0.1, 1.0, 0.0, 0.0, gv.clone(), gc.clone());
        let l2 = estimate_lambda2(&s, &p, 0.5, 0.95);
        assert!((l2[(0, 0)] - 0.95 * 3.0).abs() < 1e-14);
        assert!((l2[(0, 1)] - 0.95 * 6.0).abs() < 1e-14);
        let (s, p) = single(0.1, -1.0, 0.0, 0.0, gv.clone(), gc.clone());
        let l2 = estimate_lambda2(&s, &p, 0.5, 0.95);
        assert!((l2[(0, 0)] + 0.05 * 3.0).abs() < 1e-14);
        let (s, p) = single(5.0, -1.0, 0.0, 0.0, gv, gc);
        assert_eq!(estimate_lambda2(&s, &p, 0.5, 0.95), DMatrix::zeros(1, 2));
    }

    fn scalar_components(l: f64, l1: f64, l2: f64, v: f64, cs: f64) -> AvarComponents {
        AvarComponents {
            v_hat: dm(1, 1, &[v]),
            lambda_hat: dm(1, 1, &[l]),
            cstar_hat: dm(1, 1, &[cs]),
            lambda1_hat: dm(1, 1, &[l1]),
            lambda2_hat: dm(1, 1, &[l2]),
            bw_x: 1.0,
            bw_y: 1.0,
        }
    }

    #[test]
    fn identity_case() {
        let cov = assemble_covariances(&scalar_components(1.0, 1.0, 1.0, 2.0, 3.0), 1).unwrap();
        assert!((cov.cov_c[(0, 0)] - 5.0).abs() < 1e-14);
        assert!((cov.cov_v[(0, 0)] - 2.0).abs() < 1e-14);
        // Joint: Gbar = [[-1, 0], [1, -1]], C = diag(2, 3).
        assert!((cov.cov_joint[(0, 1)] + 2.0).abs() < 1e-14);
        assert!((cov.cov_joint[(1, 1)] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn no_cross_term_means_no_penalty() {
        let cov = assemble_covariances(&scalar_components(2.0, 4.0, 0.0, 1.0, 3.0), 10).unwrap();
        assert!((cov.cov_c[(0, 0)] - 3.0 / 16.0 / 10.0).abs() < 1e-15);
    }

    #[test]
    fn singular_lambda_reported() {
        let err = assemble_covariances(&scalar_components(0.0, 1.0, 0.0, 1.0, 1.0), 5).unwrap_err();
        assert!(matches!(err, Error::Singular { name: "Lambda", .. }));
        let mut c = scalar_components(1.0, 1.0, 0.0, 1.0, 1.0);
        c.lambda1_hat = dm(1, 1, &[0.0]);
        assert!(matches!(
            assemble_covariances(&c, 5).unwrap_err(),
            Error::Singular { name: "Lambda1", .. }
        ));
    }

    fn spd(seed: &[f64], dim: usize) -> DMatrix<f64> {
        let a = DMatrix::from_iterator(dim, dim, seed.iter().cloned());
        &a * a.transpose() + DMatrix::identity(dim, dim) * 0.1
    }

    proptest! {
        #[test]
        fn covariances_are_psd_and_inflated(
            a in proptest::collection::vec(-1.0f64..1.0, 9),
            b in proptest::collection::vec(-1.0f64..1.0, 4),
            c in proptest::collection::vec(-1.0f64..1.0, 9),
            d in proptest::collection::vec(-1.0f64..1.0, 4),
            l2 in proptest::collection::vec(-1.0f64..1.0, 6),
            n in 1usize..500,
        ) {
            let comps = AvarComponents {
                v_hat: spd(&a, 3),
                lambda_hat: spd(&c, 3),
                cstar_hat: spd(&b, 2),
                lambda1_hat: spd(&d, 2),
                lambda2_hat: DMatrix::from_row_slice(2, 3, &l2),
                bw_x: 1.0,
                bw_y: 1.0,
            };
            let cov = assemble_covariances(&comps, n).unwrap();
            let scale = cov.cov_c.norm().max(1.0);
            prop_assert!(min_eig(&cov.cov_v) >= -1e-10 * cov.cov_v.norm().max(1.0));
            prop_assert!(min_eig(&cov.cov_c) >= -1e-10 * scale);
            let l1i = comps.lambda1_hat.clone().try_inverse().unwrap();
            let known = &l1i * &comps.cstar_hat * &l1i / n as f64;
            prop_assert!(min_eig(&(&cov.cov_c - known)) >= -1e-10 * scale);
            let upper = cov.cov_joint.view((0, 0), (3, 3)).into_owned();
            prop_assert!((upper - &cov.cov_v).abs().max() <= 1e-10 * cov.cov_v.norm().max(1.0));
            let lower = cov.cov_joint.view((3, 3), (2, 2)).into_owned();
            prop_assert!((lower - &cov.cov_c).abs().max() <= 1e-10 * scale);
        }
    }
}
