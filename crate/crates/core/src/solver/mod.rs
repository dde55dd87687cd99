//! Smooth constrained solver: augmented Lagrangian outer loop, limited-memory
//! quasi-Newton inner loop with projected backtracking line search.
//!
//! The inner loop is an L-BFGS iteration projected onto the box bounds; the
//! outer loop carries first-order multiplier estimates for inequality and
//! equality constraints and grows the penalty when feasibility stalls. A
//! non-finite objective value at a trial point is treated as a line-search
//! rejection rather than an error, since control roll-outs can overflow for
//! wild iterates.

mod lbfgs;

pub use lbfgs::minimize_unconstrained;

use serde::{Deserialize, Serialize};

use crate::problem::{Bound, ConstraintKind, NlpProblem};

use lbfgs::{inner_minimize, InnerOutcome};

/// Multipliers and penalties are clipped to this magnitude.
pub const MULTIPLIER_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    /// First-order stationarity and feasibility reached within tolerances.
    Converged,
    /// Iteration or evaluation budget exhausted; best iterate returned.
    IterationLimit,
    /// Backtracking failed to find an acceptable step; best iterate returned.
    LineSearchFailure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub max_outer_iterations: usize,
    pub max_inner_iterations: usize,
    /// Cap on objective-value evaluations across the whole solve.
    pub max_function_evaluations: usize,
    /// Infinity-norm tolerance on the projected gradient.
    pub gradient_tolerance: f64,
    /// Tolerance on the violation measure (squared residuals).
    pub constraint_tolerance: f64,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    /// Armijo sufficient-decrease coefficient.
    pub armijo_c1: f64,
    /// Step reduction factor of the backtracking line search.
    pub backtrack_factor: f64,
    /// Number of curvature pairs kept by the quasi-Newton update.
    pub memory: usize,
    /// Cap on the infinity-norm displacement of a single line search;
    /// unbounded by default.
    pub max_step: f64,
    /// Relative iterate-movement threshold below which a feasible outer
    /// iteration counts as converged even if the inner gradient test was not
    /// met. Guards against outer loops that polish a finished iterate.
    pub outer_stall_tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_outer_iterations: 30,
            max_inner_iterations: 500,
            max_function_evaluations: usize::MAX,
            gradient_tolerance: 1e-8,
            constraint_tolerance: 1e-8,
            initial_penalty: 10.0,
            penalty_growth: 10.0,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            memory: 10,
            max_step: f64::INFINITY,
            outer_stall_tolerance: 1e-9,
        }
    }
}

impl SolverSettings {
    pub(crate) fn validate(&self) {
        assert!(self.gradient_tolerance > 0.0, "gradient tolerance must be positive");
        assert!(self.constraint_tolerance > 0.0, "constraint tolerance must be positive");
        assert!(self.penalty_growth > 1.0, "penalty growth must exceed 1");
        assert!(self.initial_penalty > 0.0, "penalty must be positive");
        assert!(
            self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0,
            "backtracking factor must lie in (0, 1)"
        );
    }
}

/// Outcome of a solve: best iterate found plus bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub minimizer: Vec<f64>,
    pub objective: f64,
    /// Violation measure (sum of squared residuals) at the minimizer.
    pub violation: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    pub function_evaluations: usize,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolverStatus::Converged
    }
}

struct Multipliers {
    /// One vector per constraint block.
    per_block: Vec<Vec<f64>>,
}

impl Multipliers {
    fn zeros(problem: &NlpProblem) -> Self {
        Self {
            per_block: problem.blocks().iter().map(|b| vec![0.0; b.dim]).collect(),
        }
    }
}

/// Minimizes `problem` subject to its constraints and bounds, starting from
/// `x0`.
///
/// Stops when the projected gradient of the augmented Lagrangian and the
/// violation measure are both within tolerance. On budget exhaustion or a
/// failed line search, the best iterate seen so far is returned (feasible
/// iterates preferred, then lowest objective; infeasible ones ranked by
/// violation). An unconstrained problem takes the plain quasi-Newton path.
pub fn minimize_constrained(
    problem: &NlpProblem,
    x0: &[f64],
    settings: &SolverSettings,
) -> SolveReport {
    settings.validate();
    assert_eq!(x0.len(), problem.dimension(), "starting point dimension");

    if problem.blocks().is_empty() {
        let obj = problem.objective_fn();
        let mut report = minimize_unconstrained(
            move |x| obj(x),
            |x, g| problem.objective_gradient_into(x, g),
            x0,
            problem.bounds(),
            settings,
        );
        report.violation = 0.0;
        return report;
    }

    let n = problem.dimension();
    let mut x = project(x0, problem.bounds());
    let mut multipliers = Multipliers::zeros(problem);
    let mut penalty = settings.initial_penalty;

    let mut evals_used = 0usize;
    let mut iterations = 0usize;

    let mut best = Incumbent::new(settings.constraint_tolerance);
    best.offer(&x, problem.objective(&x), problem.violation_value(&x));
    evals_used += 1;

    let mut prev_violation = f64::INFINITY;
    let mut prev_iterate: Option<Vec<f64>> = None;
    let mut last_status = SolverStatus::IterationLimit;

    for _outer in 0..settings.max_outer_iterations {
        if evals_used >= settings.max_function_evaluations {
            break;
        }
        let eval_budget = settings.max_function_evaluations - evals_used;

        let merit_value = |x: &[f64]| augmented_value(problem, x, &multipliers, penalty);
        let merit_grad = |x: &[f64], g: &mut [f64]| {
            augmented_gradient(problem, x, &multipliers, penalty, g)
        };

        #[cfg(debug_assertions)]
        let merit_at_start = merit_value(&x);

        let inner: InnerOutcome = inner_minimize(
            &merit_value,
            &merit_grad,
            &x,
            problem.bounds(),
            settings.max_inner_iterations,
            eval_budget,
            settings,
        );
        evals_used += inner.function_evaluations;
        iterations += inner.iterations;
        x.copy_from_slice(&inner.minimizer);
        last_status = inner.status;

        #[cfg(debug_assertions)]
        if merit_at_start.is_finite() {
            debug_assert!(
                inner.value <= merit_at_start + 1e-9 * (1.0 + merit_at_start.abs()),
                "inner loop increased the merit value"
            );
        }

        let values = problem.constraint_values(&x);
        let violation = violation_from_values(problem, &values);
        let objective = problem.objective(&x);
        evals_used += 1;
        best.offer(&x, objective, violation);

        if violation <= settings.constraint_tolerance && inner.status == SolverStatus::Converged {
            return SolveReport {
                minimizer: x,
                objective,
                violation,
                status: SolverStatus::Converged,
                iterations,
                function_evaluations: evals_used,
            };
        }

        // feasible and no longer moving: further outer iterations only
        // polish multipliers
        if violation <= settings.constraint_tolerance {
            if let Some(prev) = &prev_iterate {
                let scale = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let moved = x
                    .iter()
                    .zip(prev)
                    .fold(0.0f64, |a, (v, p)| a.max((v - p).abs()));
                if moved <= settings.outer_stall_tolerance * scale {
                    return SolveReport {
                        minimizer: x,
                        objective,
                        violation,
                        status: SolverStatus::Converged,
                        iterations,
                        function_evaluations: evals_used,
                    };
                }
            }
            prev_iterate = Some(x.clone());
        } else {
            prev_iterate = None;
        }

        // first-order multiplier updates
        for (block, (lambda, vals)) in problem
            .blocks()
            .iter()
            .zip(multipliers.per_block.iter_mut().zip(values.iter()))
        {
            for (l, &v) in lambda.iter_mut().zip(vals) {
                *l = match block.kind {
                    ConstraintKind::Inequality => (*l + penalty * v).clamp(0.0, MULTIPLIER_CAP),
                    ConstraintKind::Equality => {
                        (*l + penalty * v).clamp(-MULTIPLIER_CAP, MULTIPLIER_CAP)
                    }
                };
            }
        }

        // grow the penalty when feasibility stalls
        if violation > settings.constraint_tolerance && violation > 0.25 * prev_violation {
            penalty = (penalty * settings.penalty_growth).min(MULTIPLIER_CAP);
        }
        prev_violation = violation;
    }

    let (minimizer, objective, violation) = best.take(n);
    SolveReport {
        minimizer,
        objective,
        violation,
        status: if last_status == SolverStatus::LineSearchFailure {
            SolverStatus::LineSearchFailure
        } else {
            SolverStatus::IterationLimit
        },
        iterations,
        function_evaluations: evals_used,
    }
}

fn project(x: &[f64], bounds: Option<&[Bound]>) -> Vec<f64> {
    match bounds {
        None => x.to_vec(),
        Some(bs) => x.iter().zip(bs).map(|(&v, b)| b.clamp(v)).collect(),
    }
}

fn violation_from_values(problem: &NlpProblem, values: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (block, vals) in problem.blocks().iter().zip(values) {
        for &v in vals {
            if !v.is_finite() {
                return f64::INFINITY;
            }
            match block.kind {
                ConstraintKind::Inequality => {
                    let pos = v.max(0.0);
                    total += pos * pos;
                }
                ConstraintKind::Equality => total += v * v,
            }
        }
    }
    total
}

fn augmented_value(
    problem: &NlpProblem,
    x: &[f64],
    multipliers: &Multipliers,
    penalty: f64,
) -> f64 {
    let mut total = problem.objective(x);
    if !total.is_finite() {
        return f64::INFINITY;
    }
    let mut vals = Vec::new();
    for (block, lambda) in problem.blocks().iter().zip(&multipliers.per_block) {
        vals.resize(block.dim, 0.0);
        block.eval_into(x, &mut vals);
        for (&v, &l) in vals.iter().zip(lambda) {
            if !v.is_finite() {
                return f64::INFINITY;
            }
            match block.kind {
                ConstraintKind::Inequality => {
                    let shifted = (l / penalty + v).max(0.0);
                    total += 0.5 * penalty * (shifted * shifted - (l / penalty) * (l / penalty));
                }
                ConstraintKind::Equality => total += l * v + 0.5 * penalty * v * v,
            }
        }
    }
    total
}

fn augmented_gradient(
    problem: &NlpProblem,
    x: &[f64],
    multipliers: &Multipliers,
    penalty: f64,
    grad: &mut [f64],
) {
    problem.objective_gradient_into(x, grad);
    let mut vals = Vec::new();
    let mut weights = Vec::new();
    for (block, lambda) in problem.blocks().iter().zip(&multipliers.per_block) {
        vals.resize(block.dim, 0.0);
        weights.resize(block.dim, 0.0);
        block.eval_into(x, &mut vals);
        let mut any = false;
        for ((w, &v), &l) in weights.iter_mut().zip(vals.iter()).zip(lambda) {
            *w = match block.kind {
                ConstraintKind::Inequality => (l + penalty * v).max(0.0),
                ConstraintKind::Equality => l + penalty * v,
            };
            any |= *w != 0.0;
        }
        if any {
            block.weighted_gradient_accumulate(x, &weights, grad);
        }
    }
}

/// Best iterate seen: feasible iterates ranked by objective beat infeasible
/// ones ranked by violation.
struct Incumbent {
    tolerance: f64,
    point: Option<Vec<f64>>,
    objective: f64,
    violation: f64,
}

impl Incumbent {
    fn new(tolerance: f64) -> Self {
        Self {
            tolerance,
            point: None,
            objective: f64::INFINITY,
            violation: f64::INFINITY,
        }
    }

    fn offer(&mut self, x: &[f64], objective: f64, violation: f64) {
        if !objective.is_finite() || !violation.is_finite() {
            return;
        }
        let better = match &self.point {
            None => true,
            Some(_) => {
                let new_feasible = violation <= self.tolerance;
                let old_feasible = self.violation <= self.tolerance;
                match (new_feasible, old_feasible) {
                    (true, true) => objective < self.objective,
                    (true, false) => true,
                    (false, true) => false,
                    (false, false) => violation < self.violation,
                }
            }
        };
        if better {
            self.point = Some(x.to_vec());
            self.objective = objective;
            self.violation = violation;
        }
    }

    fn take(self, n: usize) -> (Vec<f64>, f64, f64) {
        match self.point {
            Some(p) => (p, self.objective, self.violation),
            None => (vec![0.0; n], f64::INFINITY, f64::INFINITY),
        }
    }
}

#[cfg(test)]
mod tests;
