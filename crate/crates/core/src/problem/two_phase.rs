//! Two-phase evaluation of the subproblem at fixed singular variables.
//!
//! For a point `y` of the singular variables, the subproblem over the smooth
//! variables may be infeasible, and returning an infinite objective would
//! give the derivative-free layer nothing to work with. Instead:
//!
//! 1. minimize the violation `h` of the restricted constraints, yielding a
//!    point `z_tilde` and the achieved infeasibility `mu_tilde`;
//! 2. minimize the restricted objective subject to `h <= mu_tilde`, starting
//!    from `z_tilde`.
//!
//! The pair (infeasibility, objective) is finite for every `y`, which is
//! exactly what a progressive-barrier direct search consumes.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::problem::{restrict, ConstraintBlock, ConstraintKind, NlpProblem, Partition};
use crate::solver::{minimize_constrained, minimize_unconstrained, SolverSettings, SolverStatus};

/// Cache keys quantize the singular point to this absolute resolution, so a
/// poll point revisited by the direct search is not solved twice.
pub const CACHE_QUANTUM: f64 = 1e-9;

/// Outcome of a two-phase subproblem evaluation.
#[derive(Debug, Clone)]
pub struct BlackboxResult {
    /// Violation measure at the final iterate (`mu_tilde` up to the phase-2
    /// tolerance); always nonnegative and finite.
    pub infeasibility: f64,
    /// Restricted objective value at the final iterate; always finite.
    pub objective: f64,
    /// Phase-2 minimizer of the smooth variables.
    pub smooth_minimizer: Vec<f64>,
    /// Phase-1 minimizer (the least-infeasible point found).
    pub phase1_minimizer: Vec<f64>,
    /// Worst status across the two phases.
    pub solver_status: SolverStatus,
}

/// Settings shared by the two solve phases.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TwoPhaseSettings {
    pub solver: SolverSettings,
}

fn worse(a: SolverStatus, b: SolverStatus) -> SolverStatus {
    fn rank(s: SolverStatus) -> u8 {
        match s {
            SolverStatus::Converged => 0,
            SolverStatus::IterationLimit => 1,
            SolverStatus::LineSearchFailure => 2,
        }
    }
    if rank(a) >= rank(b) {
        a
    } else {
        b
    }
}

/// Wraps a problem so its only constraint is `violation(x) <= budget`,
/// keeping objective, gradient and bounds.
pub(crate) fn with_violation_budget(problem: &NlpProblem, budget: f64) -> NlpProblem {
    let h_problem = problem.clone();
    let block = ConstraintBlock::new(
        ConstraintKind::Inequality,
        1,
        "violation-budget",
        Arc::new(move |x: &[f64], out: &mut [f64]| {
            out[0] = h_problem.violation_value(x) - budget;
        }),
    )
    .with_weighted_gradient({
        let h_problem = problem.clone();
        Arc::new(move |x: &[f64], w: &[f64], grad: &mut [f64]| {
            let mut h_grad = vec![0.0; x.len()];
            h_problem.violation_gradient_into(x, &mut h_grad);
            for (g, hg) in grad.iter_mut().zip(&h_grad) {
                *g += w[0] * hg;
            }
        })
    });

    let mut wrapped =
        NlpProblem::new(problem.dimension(), problem.objective_fn()).with_block(block);
    if problem.has_analytic_gradient() {
        let inner = problem.clone();
        wrapped = wrapped.with_gradient(Arc::new(move |x: &[f64], g: &mut [f64]| {
            inner.objective_gradient_into(x, g)
        }));
    }
    if let Some(bounds) = problem.bounds() {
        wrapped = wrapped.with_bounds(bounds.to_vec());
    }
    wrapped
}

/// Phase 1: minimize the restricted constraint violation from `z0`.
///
/// Returns the minimizer, the achieved violation and the solver status. A
/// non-convergent solve still returns its best iterate; the violation value
/// is what matters downstream, not a certificate.
pub fn solve_feasibility(
    problem: &NlpProblem,
    partition: &Partition,
    y: &[f64],
    z0: &[f64],
    settings: &TwoPhaseSettings,
) -> Result<(Vec<f64>, f64, SolverStatus)> {
    let restricted = restrict(problem, partition, y)?;
    if z0.len() != restricted.dimension() {
        return Err(Error::DimensionMismatch {
            context: "phase-1 start",
            expected: restricted.dimension(),
            actual: z0.len(),
        });
    }
    if restricted.blocks().is_empty() {
        // nothing to minimize: z0 is already violation-free
        return Ok((z0.to_vec(), 0.0, SolverStatus::Converged));
    }
    let report = minimize_unconstrained(
        |z| restricted.violation_value(z),
        |z, g| restricted.violation_gradient_into(z, g),
        z0,
        restricted.bounds(),
        &settings.solver,
    );
    let mu = restricted.violation_value(&report.minimizer);
    if !mu.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    Ok((report.minimizer, mu.max(0.0), report.status))
}

/// Phase 2: minimize the restricted objective subject to the violation
/// staying within `mu_tilde`, starting from the phase-1 point.
///
/// The infeasibility budget is enforced as a single inequality constraint
/// `h(z) - mu_tilde <= 0` handled by the augmented-Lagrangian solver with a
/// squared tolerance, so the reported infeasibility never exceeds `mu_tilde`
/// by more than the configured constraint tolerance. If the solve drifts
/// beyond that bound anyway, the phase-1 point is returned instead.
pub fn solve_objective(
    problem: &NlpProblem,
    partition: &Partition,
    y: &[f64],
    z_tilde: &[f64],
    mu_tilde: f64,
    settings: &TwoPhaseSettings,
) -> Result<BlackboxResult> {
    let restricted = restrict(problem, partition, y)?;
    let excess_tolerance = settings.solver.constraint_tolerance;

    let report = if restricted.blocks().is_empty() {
        minimize_constrained(&restricted, z_tilde, &settings.solver)
    } else {
        let wrapped = with_violation_budget(&restricted, mu_tilde);
        // the wrapped violation is max(h - mu, 0)^2; squaring the tolerance
        // keeps the raw excess h - mu within the configured tolerance
        let phase2_settings = SolverSettings {
            constraint_tolerance: (excess_tolerance * excess_tolerance).max(f64::MIN_POSITIVE),
            ..settings.solver.clone()
        };
        minimize_constrained(&wrapped, z_tilde, &phase2_settings)
    };

    let h_final = restricted.violation_value(&report.minimizer);
    let f_final = restricted.objective(&report.minimizer);
    let status = report.status;

    if h_final.is_finite() && f_final.is_finite() && h_final <= mu_tilde + excess_tolerance {
        Ok(BlackboxResult {
            infeasibility: h_final.max(0.0),
            objective: f_final,
            smooth_minimizer: report.minimizer,
            phase1_minimizer: z_tilde.to_vec(),
            solver_status: status,
        })
    } else {
        let f_fallback = restricted.objective(z_tilde);
        if !f_fallback.is_finite() {
            return Err(Error::NonFiniteObjective);
        }
        Ok(BlackboxResult {
            infeasibility: mu_tilde,
            objective: f_fallback,
            smooth_minimizer: z_tilde.to_vec(),
            phase1_minimizer: z_tilde.to_vec(),
            solver_status: worse(status, SolverStatus::IterationLimit),
        })
    }
}

/// Runs both phases from an optional warm start (zeros otherwise).
pub fn evaluate_two_phase(
    problem: &NlpProblem,
    partition: &Partition,
    y: &[f64],
    warm_start: Option<&[f64]>,
    settings: &TwoPhaseSettings,
) -> Result<BlackboxResult> {
    let q = partition.q();
    let z0: Vec<f64> = match warm_start {
        Some(z) => z.to_vec(),
        None => vec![0.0; q],
    };
    let (z_tilde, mu_tilde, status1) = solve_feasibility(problem, partition, y, &z0, settings)?;
    let mut result = solve_objective(problem, partition, y, &z_tilde, mu_tilde, settings)?;
    result.solver_status = worse(result.solver_status, status1);
    Ok(result)
}

/// Two-phase evaluator with a concurrent cache keyed by the quantized
/// singular point.
pub struct TwoPhaseEvaluator {
    problem: NlpProblem,
    partition: Partition,
    settings: TwoPhaseSettings,
    cache: Mutex<HashMap<Vec<i64>, Arc<BlackboxResult>>>,
}

impl TwoPhaseEvaluator {
    pub fn new(problem: NlpProblem, partition: Partition, settings: TwoPhaseSettings) -> Self {
        Self {
            problem,
            partition,
            settings,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    fn key(y: &[f64]) -> Vec<i64> {
        y.iter().map(|v| (v / CACHE_QUANTUM).round() as i64).collect()
    }

    /// Evaluates the blackbox at `y`, reusing any cached result for the same
    /// quantized point.
    pub fn evaluate(&self, y: &[f64], warm_start: Option<&[f64]>) -> Result<Arc<BlackboxResult>> {
        let key = Self::key(y);
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(Arc::clone(hit));
        }
        let result = Arc::new(evaluate_two_phase(
            &self.problem,
            &self.partition,
            y,
            warm_start,
            &self.settings,
        )?);
        self.cache
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| Arc::clone(&result));
        Ok(result)
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Objective |y| + z^2 with constraints (1 - y - z, 1 - y + z) <= 0: the
    /// subproblem is infeasible for y < 1 with least violation 2(1 - y)^2.
    fn pinched_problem() -> (NlpProblem, Partition) {
        let p = NlpProblem::new(2, Arc::new(|x: &[f64]| x[0].abs() + x[1] * x[1]))
            .with_gradient(Arc::new(|x: &[f64], g: &mut [f64]| {
                g[0] = x[0].signum();
                g[1] = 2.0 * x[1];
            }))
            .with_inequality(|x| 1.0 - x[0] - x[1])
            .with_inequality(|x| 1.0 - x[0] + x[1]);
        let part = Partition::new(2, vec![0]).unwrap();
        (p, part)
    }

    fn settings() -> TwoPhaseSettings {
        TwoPhaseSettings::default()
    }

    #[test]
    fn phase1_least_violation_of_pinched_problem() {
        let (p, part) = pinched_problem();
        let (z, mu, _) = solve_feasibility(&p, &part, &[0.0], &[0.0], &settings()).unwrap();
        assert_relative_eq!(mu, 2.0, epsilon = 1e-6);
        assert!(z[0].abs() < 1e-4);
    }

    #[test]
    fn phase1_without_constraints_returns_start() {
        let p = NlpProblem::new(2, Arc::new(|x: &[f64]| x[0] + x[1]));
        let part = Partition::new(2, vec![0]).unwrap();
        let (z, mu, status) = solve_feasibility(&p, &part, &[3.0], &[0.7], &settings()).unwrap();
        assert_eq!(mu, 0.0);
        assert_eq!(z, vec![0.7]);
        assert_eq!(status, SolverStatus::Converged);
    }

    #[test]
    fn phase1_reaches_feasible_interval() {
        // constraint z^2 - 1 <= 0 (independent of y): feasible set |z| <= 1
        let p = NlpProblem::new(2, Arc::new(|_: &[f64]| 0.0))
            .with_inequality(|x| x[1] * x[1] - 1.0);
        let part = Partition::new(2, vec![0]).unwrap();
        let (z, mu, _) = solve_feasibility(&p, &part, &[0.0], &[3.0], &settings()).unwrap();
        assert!(mu <= 1e-10, "mu = {mu}");
        assert!(z[0].abs() <= 1.0 + 1e-6);
    }

    #[test]
    fn phase2_of_pinched_problem_at_infeasible_y() {
        let (p, part) = pinched_problem();
        let result = evaluate_two_phase(&p, &part, &[0.0], None, &settings()).unwrap();
        assert_relative_eq!(result.infeasibility, 2.0, epsilon = 1e-4);
        assert!(result.objective.abs() < 1e-4);
    }

    #[test]
    fn phase2_of_pinched_problem_at_feasible_y() {
        let (p, part) = pinched_problem();
        let result = evaluate_two_phase(&p, &part, &[1.0], None, &settings()).unwrap();
        assert!(result.infeasibility <= 1e-8);
        assert_relative_eq!(result.objective, 1.0, epsilon = 1e-6);
        assert!(result.smooth_minimizer[0].abs() < 1e-3);
    }

    #[test]
    fn phase2_unconstrained_convex() {
        // objective z^2 at any y with no constraints
        let p = NlpProblem::new(2, Arc::new(|x: &[f64]| x[1] * x[1]));
        let part = Partition::new(2, vec![0]).unwrap();
        let result = evaluate_two_phase(&p, &part, &[4.2], Some(&[1.0]), &settings()).unwrap();
        assert!(result.objective < 1e-10);
        assert!(result.smooth_minimizer[0].abs() < 1e-5);
    }

    #[test]
    fn blackbox_tracks_analytic_values_of_pinched_problem() {
        let (p, part) = pinched_problem();
        for y in [0.0, 0.25, 0.5, 0.75] {
            let result = evaluate_two_phase(&p, &part, &[y], None, &settings()).unwrap();
            let expected_mu = 2.0 * (1.0 - y) * (1.0 - y);
            assert_relative_eq!(result.infeasibility, expected_mu, epsilon = 1e-4);
            assert_relative_eq!(result.objective, y, epsilon = 1e-4);
        }
    }

    #[test]
    fn blackbox_of_unconstrained_norm() {
        // objective |(y, z)|^2 with no constraints: minimum over z is |y|^2
        let p = NlpProblem::new(3, Arc::new(|x: &[f64]| x.iter().map(|v| v * v).sum()));
        let part = Partition::new(3, vec![0]).unwrap();
        let result = evaluate_two_phase(&p, &part, &[2.0], None, &settings()).unwrap();
        assert!(result.infeasibility == 0.0);
        assert_relative_eq!(result.objective, 4.0, epsilon = 1e-8);
        for z in &result.smooth_minimizer {
            assert!(z.abs() < 1e-5);
        }
    }

    #[test]
    fn phase2_never_exceeds_budget_by_more_than_tolerance() {
        let (p, part) = pinched_problem();
        let s = settings();
        for y in [-0.5, 0.0, 0.3, 0.9, 1.2] {
            let (z_tilde, mu, _) = solve_feasibility(&p, &part, &[y], &[0.0], &s).unwrap();
            let result = solve_objective(&p, &part, &[y], &z_tilde, mu, &s).unwrap();
            assert!(
                result.infeasibility <= mu + s.solver.constraint_tolerance,
                "y={y}: {} vs budget {mu}",
                result.infeasibility
            );
        }
    }

    #[test]
    fn evaluator_caches_quantized_points() {
        let (p, part) = pinched_problem();
        let evaluator = TwoPhaseEvaluator::new(p, part, settings());
        let a = evaluator.evaluate(&[0.5], None).unwrap();
        let b = evaluator.evaluate(&[0.5 + 1e-12], None).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(evaluator.cache_len(), 1);
    }

    #[test]
    fn repeated_evaluation_is_bit_identical() {
        let (p, part) = pinched_problem();
        let s = settings();
        let a = evaluate_two_phase(&p, &part, &[0.3], None, &s).unwrap();
        let b = evaluate_two_phase(&p, &part, &[0.3], None, &s).unwrap();
        assert_eq!(a.infeasibility.to_bits(), b.infeasibility.to_bits());
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.smooth_minimizer, b.smooth_minimizer);
    }
}
