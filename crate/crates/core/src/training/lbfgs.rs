//! Limited-memory BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsConfig {
    /// Number of stored curvature pairs.
    pub memory: usize,
    /// Stop when the gradient's infinity norm falls below this.
    pub gradient_tol: f64,
    pub max_iterations: usize,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Curvature constant of the strong Wolfe condition.
    pub curvature: f64,
    /// Objective evaluations allowed per line search.
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            gradient_tol: 1e-6,
            max_iterations: 500,
            armijo: 1e-4,
            curvature: 0.9,
            max_line_search: 40,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 || !(self.gradient_tol > 0.0) || self.max_line_search == 0 {
            return Err(Error::Config("optimizer memory, tolerance and line-search budget must be positive".into()));
        }
        if !(self.armijo > 0.0 && self.armijo < self.curvature && self.curvature < 1.0) {
            return Err(Error::Config("line search needs 0 < armijo < curvature < 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Objective value after each accepted iterate, starting with the initial value.
    pub history: Vec<f64>,
}

/// Relative change in `f` treated as rounding noise by the line search.
pub const ROUNDING: f64 = 4.0 * f64::EPSILON;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimize `f`, which returns `(value, gradient)`.
///
/// Accepted iterates never increase `f` by more than `ROUNDING * |f|`.
/// An objective error during the line search is treated as an infinite
/// value and triggers backtracking; an error at the start point is returned.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, config: &LbfgsConfig) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    config.validate()?;
    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("objective is not finite at the initial point ({fx})")));
    }
    let n = x.len();
    let mut history = vec![fx];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.memory);
    let mut iterations = 0;
    let termination = loop {
        if inf_norm(&g) <= config.gradient_tol {
            break Termination::GradientTolerance;
        }
        if iterations >= config.max_iterations {
            break Termination::MaxIterations;
        }

        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &d);
            for (di, yi) in d.iter_mut().zip(y) {
                *di -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            for (di, si) in d.iter_mut().zip(s) {
                *di += (a - b) * si;
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        // first step without curvature information is scaled to unit length
        let step = if pairs.is_empty() { (1.0 / dot(&d, &d).sqrt()).min(1.0) } else { 1.0 };
        let Some(LinePoint { x: xn, f: fn_, g: gn, .. }) = line_search(&mut f, &x, fx, &g, &d, slope, step, config)
        else {
            break Termination::LineSearchFailed;
        };

        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if pairs.len() == config.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        fx = fn_;
        g = gn;
        iterations += 1;
        history.push(fx);
        log::trace!("lbfgs iter {iterations}: f = {fx:.10e}, |g| = {:.3e}", inf_norm(&g));
    };
    Ok(Minimum { gradient_norm: inf_norm(&g), x, value: fx, iterations, termination, history })
}

struct LinePoint {
    step: f64,
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
    /// Directional derivative along the search direction.
    slope: f64,
}

/// Bracketing and zoom search for a step satisfying the strong Wolfe
/// conditions. Errors and non-finite values count as `+inf`. If the budget
/// runs out, the best sufficient-decrease point found is returned, or a
/// point within rounding of `f0` that shrinks the gradient.
#[allow(clippy::too_many_arguments)]
fn line_search<F>(
    f: &mut F,
    x0: &[f64],
    f0: f64,
    g0: &[f64],
    d: &[f64],
    slope0: f64,
    first: f64,
    config: &LbfgsConfig,
) -> Option<LinePoint>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let g0_norm = inf_norm(g0);
    let mut evals = 0;
    let mut fallback: Option<LinePoint> = None;
    let mut eval = |step: f64, fallback: &mut Option<LinePoint>| -> LinePoint {
        let x: Vec<f64> = x0.iter().zip(d).map(|(xi, di)| xi + step * di).collect();
        let (fv, g) = match f(&x) {
            Ok((fv, g)) if fv.is_finite() && g.iter().all(|v| v.is_finite()) => (fv, g),
            _ => (f64::INFINITY, Vec::new()),
        };
        let slope = if fv.is_finite() { dot(&g, d) } else { f64::NAN };
        // near the optimum the decrease drops below rounding; a step within
        // rounding of f0 that shrinks the gradient is kept as a last resort
        if fv <= f0 + ROUNDING * f0.abs()
            && inf_norm(&g) < 0.9 * g0_norm
            && fallback.as_ref().is_none_or(|b| fv < b.f)
        {
            *fallback = Some(LinePoint { step, x: x.clone(), f: fv, g: g.clone(), slope });
        }
        LinePoint { step, x, f: fv, g, slope }
    };
    let armijo = |p: &LinePoint| p.f <= f0 + config.armijo * p.step * slope0;
    let curved = |p: &LinePoint| p.slope.abs() <= -config.curvature * slope0;

    let mut prev: Option<LinePoint> = None;
    let mut step = first;
    let (mut lo, mut hi) = loop {
        if evals >= config.max_line_search {
            return prev.filter(armijo).or(fallback);
        }
        evals += 1;
        let p = eval(step, &mut fallback);
        let worse = prev.as_ref().is_some_and(|q| p.f >= q.f);
        if !armijo(&p) || worse {
            break (prev, p);
        }
        if curved(&p) {
            return Some(p);
        }
        if p.slope >= 0.0 {
            let hi = prev.take();
            match hi {
                Some(h) => break (Some(p), h),
                None => return Some(p),
            }
        }
        step *= 2.0;
        prev = Some(p);
    };

    // zoom: `lo` satisfies sufficient decrease (or is the start point)
    while evals < config.max_line_search {
        let lo_step = lo.as_ref().map_or(0.0, |p| p.step);
        let (lo_f, lo_slope) = lo.as_ref().map_or((f0, slope0), |p| (p.f, p.slope));
        let width = hi.step - lo_step;
        if width.abs() <= f64::EPSILON * lo_step.abs().max(hi.step.abs()) {
            break;
        }
        let mut trial = lo_step + 0.5 * width;
        if hi.f.is_finite() {
            if let Some(t) = cubic_minimizer(lo_step, lo_f, lo_slope, hi.step, hi.f, hi.slope) {
                let (a, b) = if lo_step < hi.step { (lo_step, hi.step) } else { (hi.step, lo_step) };
                if t > a + 0.1 * (b - a) && t < b - 0.1 * (b - a) {
                    trial = t;
                }
            }
        }
        evals += 1;
        let p = eval(trial, &mut fallback);
        if !armijo(&p) || p.f >= lo_f {
            hi = p;
            continue;
        }
        if curved(&p) {
            return Some(p);
        }
        if p.slope * (hi.step - lo_step) >= 0.0 {
            if let Some(l) = lo.take() {
                hi = l;
            }
        }
        lo = Some(p);
    }
    lo.or(fallback)
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`.
fn cubic_minimizer(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    t.is_finite().then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_in_ten_dims() {
        // f = 1/2 x'Ax - b'x with A = diag(1..10) + 0.1 * ones
        let n = 10;
        let a = |i: usize, j: usize| if i == j { (i + 1) as f64 + 0.1 } else { 0.1 };
        let b: Vec<f64> = (0..n).map(|i| (i as f64) - 4.0).collect();
        let f = |x: &[f64]| {
            let ax: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a(i, j) * x[j]).sum()).collect();
            let v = 0.5 * dot(x, &ax) - dot(&b, x);
            let g = (0..n).map(|i| ax[i] - b[i]).collect();
            Ok((v, g))
        };
        let cfg = LbfgsConfig { gradient_tol: 1e-10, ..Default::default() };
        let m = minimize(f, vec![0.0; n], &cfg).unwrap();
        let am = nalgebra::DMatrix::from_fn(n, n, a);
        let want = am.lu().solve(&nalgebra::DVector::from_vec(b.clone())).unwrap();
        for i in 0..n {
            assert!((m.x[i] - want[i]).abs() < 1e-8, "{} vs {}", m.x[i], want[i]);
        }
        assert!(m.iterations <= 50, "{}", m.iterations);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((v, g))
        };
        let cfg = LbfgsConfig { gradient_tol: 1e-10, ..Default::default() };
        let m = minimize(f, vec![-1.2, 1.0], &cfg).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6, "{:?}", m.x);
        for w in m.history.windows(2) {
            assert!(w[1] <= w[0] + ROUNDING * w[0].abs());
        }
    }

    #[test]
    fn converged_start_is_returned_unchanged() {
        let f = |x: &[f64]| Ok((x[0] * x[0], vec![2.0 * x[0]]));
        let m = minimize(f, vec![1e-9], &LbfgsConfig::default()).unwrap();
        assert_eq!(m.x, vec![1e-9]);
        assert_eq!(m.iterations, 0);
        assert_eq!(m.termination, Termination::GradientTolerance);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let f = |_: &[f64]| Ok((f64::INFINITY, vec![0.0]));
        assert!(minimize(f, vec![0.0], &LbfgsConfig::default()).is_err());
    }
}
