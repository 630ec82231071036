//! Dense BFGS with a strong-Wolfe line search.
//!
//! Objectives may return `+inf` to mark a barrier; the line search treats
//! such points as failing sufficient decrease and backtracks.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search: usize,
    /// Stop when the objective decreased by less than `f_rel_tol * max(|f|, 1)`
    /// over the last `stall_window` iterations.
    pub f_rel_tol: f64,
    pub stall_window: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iter: 10_000,
            grad_tol: 1e-8,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
            f_rel_tol: 1e-12,
            stall_window: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsResult {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad: DVector<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

impl BfgsResult {
    pub fn grad_norm(&self) -> f64 {
        self.grad.norm()
    }
}

struct Point {
    alpha: f64,
    f: f64,
    slope: f64,
    x: DVector<f64>,
    g: DVector<f64>,
}

struct Searcher<'a, F> {
    objective: &'a mut F,
    x0: &'a DVector<f64>,
    p: &'a DVector<f64>,
    evaluations: usize,
}

impl<F: FnMut(&DVector<f64>) -> (f64, DVector<f64>)> Searcher<'_, F> {
    fn eval(&mut self, alpha: f64) -> Point {
        let x = self.x0 + self.p * alpha;
        let (f, g) = (self.objective)(&x);
        self.evaluations += 1;
        let slope = if f.is_finite() {
            g.dot(self.p)
        } else {
            f64::NAN
        };
        Point {
            alpha,
            f: if f.is_nan() { f64::INFINITY } else { f },
            slope,
            x,
            g,
        }
    }
}

/// Minimizer of the cubic (or quadratic) interpolant on `[lo, hi]`,
/// safeguarded away from the endpoints; bisection when no model applies.
fn interpolate(lo: &Point, hi: &Point) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let width = b - a;
    let mid = 0.5 * (a + b);
    let guess = if hi.f.is_finite() && hi.slope.is_finite() {
        let d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (a - b);
        let disc = d1 * d1 - lo.slope * hi.slope;
        if disc >= 0.0 {
            let d2 = disc.sqrt() * (b - a).signum();
            b - (b - a) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2)
        } else {
            mid
        }
    } else if hi.f.is_finite() {
        // Quadratic through f(lo), f'(lo), f(hi).
        let denom = 2.0 * (hi.f - lo.f - lo.slope * width);
        if denom > 0.0 {
            a - lo.slope * width * width / denom
        } else {
            mid
        }
    } else {
        mid
    };
    let (left, right) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (right - left);
    if guess.is_finite() {
        guess.clamp(left + margin, right - margin)
    } else {
        mid
    }
}

/// Minimize a smooth function given as `x -> (f(x), grad f(x))`.
pub fn bfgs<F>(x0: DVector<f64>, mut objective: F, opts: &BfgsOptions) -> BfgsResult
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let n = x0.len();
    let (mut f, mut g) = objective(&x0);
    let mut x = x0;
    let mut evaluations = 1;
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh_h = true;
    let mut iterations = 0;
    let mut failures = 0;
    let mut history = std::collections::VecDeque::with_capacity(opts.stall_window + 1);

    while iterations < opts.max_iter {
        if !f.is_finite() || g.norm() < opts.grad_tol {
            break;
        }
        let mut p = -(&h * &g);
        let mut slope0 = g.dot(&p);
        if slope0.is_nan() || slope0 >= 0.0 {
            h = DMatrix::identity(n, n);
            fresh_h = true;
            p = -g.clone();
            slope0 = g.dot(&p);
        }
        let alpha0 = if fresh_h {
            (1.0 / p.norm()).min(1.0)
        } else {
            1.0
        };

        let mut s = Searcher {
            objective: &mut objective,
            x0: &x,
            p: &p,
            evaluations: 0,
        };
        let start = Point {
            alpha: 0.0,
            f,
            slope: slope0,
            x: x.clone(),
            g: g.clone(),
        };
        let accepted = strong_wolfe(&mut s, start, alpha0, opts);
        evaluations += s.evaluations;
        iterations += 1;

        let Some(next) = accepted else {
            failures += 1;
            if fresh_h || failures > 1 {
                break;
            }
            h = DMatrix::identity(n, n);
            fresh_h = true;
            continue;
        };
        failures = 0;
        let step = &next.x - &x;
        let y = &next.g - &g;
        let sy = step.dot(&y);
        if sy > 1e-12 * step.norm() * y.norm() {
            if fresh_h {
                h *= sy / y.dot(&y);
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (H y s^T + s y^T H) + (rho^2 y^T H y + rho) s s^T
            h -= (&hy * step.transpose() + &step * hy.transpose()) * rho;
            h += (&step * step.transpose()) * (rho * rho * yhy + rho);
            fresh_h = false;
        }
        let stalled = next.f >= f;
        x = next.x;
        f = next.f;
        g = next.g;
        history.push_back(f);
        if history.len() > opts.stall_window {
            let old = history.pop_front().unwrap_or(f);
            if old - f <= opts.f_rel_tol * f.abs().max(1.0) {
                break;
            }
        }
        if stalled {
            break;
        }
    }
    BfgsResult {
        converged: g.norm() < opts.grad_tol,
        x,
        f,
        grad: g,
        iterations,
        evaluations,
    }
}

/// Returns the accepted point, or `None` if no sufficient decrease was found.
fn strong_wolfe<F>(
    s: &mut Searcher<'_, F>,
    start: Point,
    alpha0: f64,
    opts: &BfgsOptions,
) -> Option<Point>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let (f0, slope0) = (start.f, start.slope);
    let armijo = |p: &Point| p.f.is_finite() && p.f <= f0 + opts.c1 * p.alpha * slope0;
    let curvature = |p: &Point| p.slope.abs() <= -opts.c2 * slope0;

    let mut prev = start;
    let mut alpha = alpha0;
    for i in 0..opts.max_line_search {
        let cur = s.eval(alpha);
        if !armijo(&cur) || (i > 0 && cur.f >= prev.f) {
            return zoom(s, prev, cur, f0, slope0, opts);
        }
        if curvature(&cur) {
            return Some(cur);
        }
        if cur.slope >= 0.0 {
            return zoom(s, cur, prev, f0, slope0, opts);
        }
        alpha *= 2.0;
        prev = cur;
    }
    (prev.alpha > 0.0).then_some(prev)
}

fn zoom<F>(
    s: &mut Searcher<'_, F>,
    mut lo: Point,
    mut hi: Point,
    f0: f64,
    slope0: f64,
    opts: &BfgsOptions,
) -> Option<Point>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    for _ in 0..opts.max_line_search {
        let alpha = interpolate(&lo, &hi);
        if (hi.alpha - lo.alpha).abs() < 1e-16 * lo.alpha.abs().max(1e-300) || alpha == lo.alpha {
            break;
        }
        let cur = s.eval(alpha);
        if !cur.f.is_finite() || cur.f > f0 + opts.c1 * alpha * slope0 || cur.f >= lo.f {
            hi = cur;
        } else {
            if cur.slope.abs() <= -opts.c2 * slope0 {
                return Some(cur);
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // Accept a point with sufficient decrease even if curvature was not met.
    (lo.alpha > 0.0 && lo.f < f0).then_some(lo)
}
