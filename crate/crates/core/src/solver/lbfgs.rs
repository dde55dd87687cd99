//! Projected limited-memory quasi-Newton inner loop.

use std::collections::VecDeque;

use crate::problem::Bound;

use super::{SolveReport, SolverSettings, SolverStatus};

/// Line-search steps below this size abort the search.
const MIN_STEP: f64 = 1e-16;
/// Curvature pairs with `s.y` below this relative threshold are discarded.
const CURVATURE_FLOOR: f64 = 1e-12;

pub(super) struct InnerOutcome {
    pub minimizer: Vec<f64>,
    pub value: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    pub function_evaluations: usize,
}

fn project_into(x: &mut [f64], bounds: Option<&[Bound]>) {
    if let Some(bs) = bounds {
        for (v, b) in x.iter_mut().zip(bs) {
            *v = b.clamp(*v);
        }
    }
}

/// Infinity norm of the projected gradient step `x - P(x - g)`; zero exactly
/// at a first-order stationary point of the bound-constrained problem.
fn projected_gradient_norm(x: &[f64], g: &[f64], bounds: Option<&[Bound]>) -> f64 {
    let mut norm = 0.0f64;
    match bounds {
        None => {
            for &gi in g {
                norm = norm.max(gi.abs());
            }
        }
        Some(bs) => {
            for ((&xi, &gi), b) in x.iter().zip(g).zip(bs) {
                norm = norm.max((xi - b.clamp(xi - gi)).abs());
            }
        }
    }
    norm
}

struct History {
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>, // (s, y, 1 / s.y)
    capacity: usize,
}

impl History {
    fn new(capacity: usize) -> Self {
        Self {
            pairs: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
        }
    }

    fn clear(&mut self) {
        self.pairs.clear();
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let s_norm: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_norm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy.is_finite() && sy > CURVATURE_FLOOR * s_norm * y_norm {
            if self.pairs.len() == self.capacity {
                self.pairs.pop_front();
            }
            self.pairs.push_back((s, y, 1.0 / sy));
        }
    }

    /// Two-loop recursion: returns `-H g`.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        if self.pairs.is_empty() {
            for v in q.iter_mut() {
                *v = -*v;
            }
            return q;
        }
        let mut alphas = vec![0.0; self.pairs.len()];
        for (idx, (s, y, rho)) in self.pairs.iter().enumerate().rev() {
            let alpha = rho * s.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
            alphas[idx] = alpha;
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= alpha * yi;
            }
        }
        let (s_last, y_last, _) = self.pairs.back().expect("non-empty history");
        let sy: f64 = s_last.iter().zip(y_last).map(|(a, b)| a * b).sum();
        let yy: f64 = y_last.iter().map(|v| v * v).sum();
        let gamma = if yy > 0.0 { sy / yy } else { 1.0 };
        for v in q.iter_mut() {
            *v *= gamma;
        }
        for (idx, (s, y, rho)) in self.pairs.iter().enumerate() {
            let beta = rho * y.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>();
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (alphas[idx] - beta) * si;
            }
        }
        for v in q.iter_mut() {
            *v = -*v;
        }
        q
    }
}

/// Backtracking Armijo search along the projected path `P(x + step * d)`.
///
/// Non-finite trial values are rejected like insufficient decrease. Returns
/// the accepted point and its value, or `None` if no step qualified before
/// `MIN_STEP` or the evaluation budget ran out.
#[allow(clippy::too_many_arguments)]
fn line_search(
    f: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    fx: f64,
    g: &[f64],
    d: &[f64],
    bounds: Option<&[Bound]>,
    settings: &SolverSettings,
    evals: &mut usize,
    max_evaluations: usize,
) -> Option<(Vec<f64>, f64)> {
    let probe = |step: f64, trial: &mut Vec<f64>, evals: &mut usize| -> Option<f64> {
        for ((t, &xi), &di) in trial.iter_mut().zip(x).zip(d) {
            *t = xi + step * di;
        }
        project_into(trial, bounds);
        let predicted: f64 = g
            .iter()
            .zip(trial.iter().zip(x))
            .map(|(&gi, (&ti, &xi))| gi * (ti - xi))
            .sum();
        if predicted >= 0.0 || *evals >= max_evaluations {
            return None;
        }
        *evals += 1;
        let ft = f(trial);
        (ft.is_finite() && ft <= fx + settings.armijo_c1 * predicted).then_some(ft)
    };

    let d_norm = d.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let step_cap = if settings.max_step.is_finite() && d_norm > 0.0 {
        settings.max_step / d_norm
    } else {
        f64::INFINITY
    };

    let mut step = 1.0f64.min(step_cap);
    let mut trial = vec![0.0; x.len()];
    while step >= MIN_STEP {
        if let Some(ft) = probe(step, &mut trial, evals) {
            // greedy expansion: keep doubling while the value still drops,
            // the sufficient-decrease test keeps holding and the
            // displacement cap is respected
            let mut best = (trial.clone(), ft);
            for _ in 0..8 {
                if 2.0 * step > step_cap {
                    break;
                }
                step *= 2.0;
                match probe(step, &mut trial, evals) {
                    Some(ft_next) if ft_next < best.1 => {
                        best = (trial.clone(), ft_next);
                    }
                    _ => break,
                }
            }
            return Some(best);
        }
        if *evals >= max_evaluations {
            return None;
        }
        step *= settings.backtrack_factor;
    }
    None
}

/// Core projected L-BFGS loop shared by the unconstrained entry point and the
/// augmented-Lagrangian outer iteration.
pub(super) fn inner_minimize(
    f: &dyn Fn(&[f64]) -> f64,
    grad: &dyn Fn(&[f64], &mut [f64]),
    x0: &[f64],
    bounds: Option<&[Bound]>,
    max_iterations: usize,
    max_evaluations: usize,
    settings: &SolverSettings,
) -> InnerOutcome {
    let n = x0.len();
    let mut x = x0.to_vec();
    project_into(&mut x, bounds);

    let mut evals = 1usize;
    let mut fx = f(&x);
    if !fx.is_finite() {
        return InnerOutcome {
            minimizer: x,
            value: fx,
            status: SolverStatus::LineSearchFailure,
            iterations: 0,
            function_evaluations: evals,
        };
    }

    let mut g = vec![0.0; n];
    grad(&x, &mut g);

    let mut history = History::new(settings.memory);
    let mut iterations = 0usize;

    let finish = |x: Vec<f64>, fx: f64, status: SolverStatus, iterations: usize, evals: usize| {
        InnerOutcome {
            minimizer: x,
            value: fx,
            status,
            iterations,
            function_evaluations: evals,
        }
    };

    loop {
        if !g.iter().all(|v| v.is_finite()) {
            return finish(x, fx, SolverStatus::LineSearchFailure, iterations, evals);
        }
        if projected_gradient_norm(&x, &g, bounds) <= settings.gradient_tolerance {
            return finish(x, fx, SolverStatus::Converged, iterations, evals);
        }
        if iterations >= max_iterations || evals >= max_evaluations {
            return finish(x, fx, SolverStatus::IterationLimit, iterations, evals);
        }

        let mut d = history.direction(&g);
        let descent: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if !(descent < 0.0) {
            history.clear();
            for (di, &gi) in d.iter_mut().zip(&g) {
                *di = -gi;
            }
        }

        let mut found = line_search(
            f,
            &x,
            fx,
            &g,
            &d,
            bounds,
            settings,
            &mut evals,
            max_evaluations,
        );
        if found.is_none() && !history.pairs.is_empty() {
            // quasi-Newton step rejected everywhere; retry once from scratch
            // along steepest descent
            history.clear();
            for (di, &gi) in d.iter_mut().zip(&g) {
                *di = -gi;
            }
            found = line_search(
                f,
                &x,
                fx,
                &g,
                &d,
                bounds,
                settings,
                &mut evals,
                max_evaluations,
            );
        }

        let Some((trial, ft)) = found else {
            let status = if evals >= max_evaluations {
                SolverStatus::IterationLimit
            } else {
                SolverStatus::LineSearchFailure
            };
            return finish(x, fx, status, iterations, evals);
        };

        let mut g_new = vec![0.0; n];
        grad(&trial, &mut g_new);
        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        history.push(s, y);

        x.copy_from_slice(&trial);
        fx = ft;
        g = g_new;
        iterations += 1;
    }
}

/// Minimizes a smooth function with optional box bounds by projected L-BFGS
/// with a backtracking Armijo line search.
///
/// Stops when the infinity norm of the projected gradient falls below
/// `settings.gradient_tolerance`, or returns the best iterate with a
/// non-converged status.
pub fn minimize_unconstrained(
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64], &mut [f64]),
    x0: &[f64],
    bounds: Option<&[Bound]>,
    settings: &SolverSettings,
) -> SolveReport {
    settings.validate();
    let outcome = inner_minimize(
        &f,
        &grad,
        x0,
        bounds,
        settings.max_inner_iterations,
        settings.max_function_evaluations,
        settings,
    );
    SolveReport {
        minimizer: outcome.minimizer,
        objective: outcome.value,
        violation: 0.0,
        status: outcome.status,
        iterations: outcome.iterations,
        function_evaluations: outcome.function_evaluations,
    }
}
