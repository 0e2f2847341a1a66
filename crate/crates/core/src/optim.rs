//! Box-constrained Nelder–Mead with multi-start.
//!
//! Both estimation objectives are piecewise linear in the filtered paths, so
//! a derivative-free simplex search is used. Trial points are projected onto
//! the box; coordinates whose lower and upper bounds coincide are frozen.

use std::cmp::Ordering;

use crate::par;

/// Axis-aligned parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len(), "bound vectors differ in length");
        assert!(
            lower.iter().zip(&upper).all(|(l, u)| l <= u),
            "lower bound above upper bound"
        );
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((xi, lo), hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(*lo, *hi);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((xi, lo), hi)| *xi >= *lo && *xi <= *hi)
    }

    /// Indices of coordinates the optimizer may move.
    pub fn free(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&i| self.upper[i] > self.lower[i])
            .collect()
    }

    /// Freezes coordinate `i` at `value`.
    pub fn fix(&mut self, i: usize, value: f64) {
        self.lower[i] = value;
        self.upper[i] = value;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iters: usize,
    /// Stop when `f_worst - f_best <= ftol * (1 + |f_best|)`.
    pub ftol: f64,
    /// Initial simplex edge as a fraction of each coordinate's box width.
    pub step_fraction: f64,
    /// Extra runs restarted from the incumbent with a fresh simplex.
    pub polish_rounds: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            ftol: 1e-10,
            step_fraction: 0.05,
            polish_rounds: 3,
        }
    }
}

/// Result of one local search.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Objective at the starting point (after projection onto the box).
    pub initial_value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl Minimum {
    fn norm(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Orders minima by objective, then by parameter norm. Non-finite values sort last.
pub fn compare_minima(a: &Minimum, b: &Minimum) -> Ordering {
    let key = |m: &Minimum| if m.value.is_finite() { m.value } else { f64::INFINITY };
    key(a)
        .total_cmp(&key(b))
        .then_with(|| a.norm().total_cmp(&b.norm()))
}

/// An objective that receives a reusable scratch buffer.
pub trait Objective: Sync {
    fn eval(&self, x: &[f64], scratch: &mut Vec<f64>) -> f64;
}

impl<F> Objective for F
where
    F: Fn(&[f64], &mut Vec<f64>) -> f64 + Sync,
{
    fn eval(&self, x: &[f64], scratch: &mut Vec<f64>) -> f64 {
        self(x, scratch)
    }
}

struct Problem<'a, O: Objective + ?Sized> {
    objective: &'a O,
    bounds: &'a Bounds,
    free: Vec<usize>,
    base: Vec<f64>,
    scratch: Vec<f64>,
    evaluations: usize,
}

impl<O: Objective + ?Sized> Problem<'_, O> {
    fn embed(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.base.clone();
        for (k, &i) in self.free.iter().enumerate() {
            x[i] = z[k];
        }
        self.bounds.clamp(&mut x);
        x
    }

    fn project(&self, z: &mut [f64]) {
        for (k, &i) in self.free.iter().enumerate() {
            z[k] = z[k].clamp(self.bounds.lower[i], self.bounds.upper[i]);
        }
    }

    fn eval(&mut self, z: &[f64]) -> f64 {
        let x = self.embed(z);
        self.evaluations += 1;
        let v = self.objective.eval(&x, &mut self.scratch);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

fn run_simplex<O: Objective + ?Sized>(
    prob: &mut Problem<'_, O>,
    z0: &[f64],
    f0: f64,
    opts: &NelderMeadOptions,
) -> (Vec<f64>, f64, usize, bool) {
    let d = z0.len();
    let dn = d as f64;
    // Dimension-adaptive coefficients (Gao & Han).
    let alpha = 1.0;
    let gamma = 1.0 + 2.0 / dn;
    let rho = 0.75 - 1.0 / (2.0 * dn);
    let sigma = 1.0 - 1.0 / dn;

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((z0.to_vec(), f0));
    for k in 0..d {
        let i = prob.free[k];
        let width = prob.bounds.upper[i] - prob.bounds.lower[i];
        let step = opts.step_fraction * width;
        let mut z = z0.to_vec();
        z[k] = if z0[k] + step <= prob.bounds.upper[i] {
            z0[k] + step
        } else {
            z0[k] - step
        };
        prob.project(&mut z);
        let f = prob.eval(&z);
        simplex.push((z, f));
    }

    let mut iters = 0;
    let mut converged = false;
    while iters < opts.max_iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[d].1;
        if worst.is_finite() && worst - best <= opts.ftol * (1.0 + best.abs()) {
            converged = true;
            break;
        }
        iters += 1;

        let mut centroid = vec![0.0; d];
        for (z, _) in &simplex[..d] {
            for k in 0..d {
                centroid[k] += z[k] / dn;
            }
        }
        let along = |t: f64, worst: &[f64]| -> Vec<f64> {
            (0..d)
                .map(|k| centroid[k] + t * (worst[k] - centroid[k]))
                .collect()
        };
        let worst_z = simplex[d].0.clone();

        let mut zr = along(-alpha, &worst_z);
        prob.project(&mut zr);
        let fr = prob.eval(&zr);

        if fr < simplex[0].1 {
            let mut ze = along(-alpha * gamma, &worst_z);
            prob.project(&mut ze);
            let fe = prob.eval(&ze);
            simplex[d] = if fe < fr { (ze, fe) } else { (zr, fr) };
            continue;
        }
        if fr < simplex[d - 1].1 {
            simplex[d] = (zr, fr);
            continue;
        }
        let (mut zc, outside) = if fr < simplex[d].1 {
            (along(-alpha * rho, &worst_z), true)
        } else {
            (along(rho, &worst_z), false)
        };
        prob.project(&mut zc);
        let fc = prob.eval(&zc);
        let accept = if outside { fc <= fr } else { fc < simplex[d].1 };
        if accept {
            simplex[d] = (zc, fc);
            continue;
        }
        let z_best = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let mut z: Vec<f64> = (0..d)
                .map(|k| z_best[k] + sigma * (entry.0[k] - z_best[k]))
                .collect();
            prob.project(&mut z);
            let f = prob.eval(&z);
            *entry = (z, f);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (z, f) = simplex.swap_remove(0);
    (z, f, iters, converged)
}

/// Minimizes `objective` from `x0` inside `bounds`.
pub fn nelder_mead<O: Objective + ?Sized>(
    objective: &O,
    x0: &[f64],
    bounds: &Bounds,
    opts: &NelderMeadOptions,
) -> Minimum {
    assert_eq!(x0.len(), bounds.dim(), "start point and bounds differ in dimension");
    let mut base = x0.to_vec();
    bounds.clamp(&mut base);
    let free = bounds.free();
    let mut prob = Problem {
        objective,
        bounds,
        free,
        base,
        scratch: Vec::new(),
        evaluations: 0,
    };
    let mut z: Vec<f64> = prob.free.iter().map(|&i| prob.base[i]).collect();
    let initial_value = prob.eval(&z);
    if prob.free.is_empty() {
        return Minimum {
            x: prob.base.clone(),
            value: initial_value,
            initial_value,
            iterations: 0,
            evaluations: prob.evaluations,
            converged: true,
        };
    }
    let mut f = initial_value;
    let mut iterations = 0;
    let mut converged = false;
    for round in 0..=opts.polish_rounds {
        let (z_new, f_new, it, conv) = run_simplex(&mut prob, &z, f, opts);
        iterations += it;
        let improvement = f - f_new;
        if f_new <= f {
            z = z_new;
            f = f_new;
        }
        converged = conv;
        if round > 0 && improvement <= opts.ftol * (1.0 + f.abs()) {
            break;
        }
    }
    Minimum {
        x: prob.embed(&z),
        value: f,
        initial_value,
        iterations,
        evaluations: prob.evaluations,
        converged,
    }
}

/// Outcome of a multi-start search.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiStart {
    pub best: Minimum,
    pub runs: Vec<Minimum>,
}

/// Runs one local search per start (in parallel when enabled) and keeps the
/// best by [`compare_minima`]. The choice does not depend on completion order.
pub fn multi_start<O: Objective + ?Sized>(
    objective: &O,
    starts: &[Vec<f64>],
    bounds: &Bounds,
    opts: &NelderMeadOptions,
    parallel: bool,
) -> MultiStart {
    assert!(!starts.is_empty(), "at least one start required");
    let run = |i: usize| nelder_mead(objective, &starts[i], bounds, opts);
    let runs = if parallel {
        par::map_indexed(starts.len(), run)
    } else {
        par::map_indexed_seq(starts.len(), run)
    };
    let best = runs
        .iter()
        .min_by(|a, b| compare_minima(a, b))
        .cloned()
        .expect("non-empty runs");
    MultiStart { best, runs }
}
