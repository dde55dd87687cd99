use std::sync::Arc;

use approx::assert_relative_eq;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::problem::{Bound, NlpProblem};

use super::*;

fn default_settings() -> SolverSettings {
    SolverSettings::default()
}

#[test]
fn quadratic_bowl() {
    let report = minimize_unconstrained(
        |x| (x[0] - 1.0).powi(2) + (x[1] - 2.0).powi(2),
        |x, g| {
            g[0] = 2.0 * (x[0] - 1.0);
            g[1] = 2.0 * (x[1] - 2.0);
        },
        &[0.0, 0.0],
        None,
        &default_settings(),
    );
    assert!(report.converged());
    assert_relative_eq!(report.minimizer[0], 1.0, epsilon = 1e-7);
    assert_relative_eq!(report.minimizer[1], 2.0, epsilon = 1e-7);
    assert!(report.objective < 1e-12);
}

#[test]
fn rosenbrock_reaches_global_minimum() {
    let report = minimize_unconstrained(
        |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
        |x, g| {
            g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
            g[1] = 200.0 * (x[1] - x[0] * x[0]);
        },
        &[-1.2, 1.0],
        None,
        &default_settings(),
    );
    assert!(report.converged(), "status {:?}", report.status);
    assert!((report.minimizer[0] - 1.0).abs() < 1e-5);
    assert!((report.minimizer[1] - 1.0).abs() < 1e-5);
    assert!(report.objective <= 1e-10);
}

#[test]
fn bound_active_minimum_via_projection() {
    let report = minimize_unconstrained(
        |x| x[0] * x[0],
        |x, g| g[0] = 2.0 * x[0],
        &[1.5],
        Some(&[Bound::new(1.0, 2.0)]),
        &default_settings(),
    );
    assert!(report.converged());
    assert_relative_eq!(report.minimizer[0], 1.0);
}

#[test]
fn non_finite_trials_are_rejected_not_fatal() {
    // the objective is a descending ramp that turns into NaN past the start,
    // so every trial is rejected and the solver reports a line-search failure
    // with the starting point as best iterate
    let report = minimize_unconstrained(
        |x| if x[0] <= 0.5 { -x[0] } else { f64::NAN },
        |_, g| g[0] = -1.0,
        &[0.5],
        None,
        &default_settings(),
    );
    assert_eq!(report.status, SolverStatus::LineSearchFailure);
    assert_eq!(report.minimizer[0], 0.5);
    assert!(report.objective.is_finite());
}

#[test]
fn zero_evaluation_budget_returns_initialization() {
    let settings = SolverSettings {
        max_function_evaluations: 0,
        ..default_settings()
    };
    let report = minimize_unconstrained(
        |x| x[0] * x[0],
        |x, g| g[0] = 2.0 * x[0],
        &[3.0],
        None,
        &settings,
    );
    assert_eq!(report.status, SolverStatus::IterationLimit);
    assert_eq!(report.minimizer[0], 3.0);
}

#[test]
fn linear_objective_on_disk() {
    // minimize x + y subject to x^2 + y^2 <= 2; the hand KKT solution is
    // (-1, -1) where the gradient (1, 1) aligns with the constraint normal
    let p = NlpProblem::new(2, Arc::new(|x: &[f64]| x[0] + x[1]))
        .with_gradient(Arc::new(|_, g| {
            g[0] = 1.0;
            g[1] = 1.0;
        }))
        .with_inequality(|x| x[0] * x[0] + x[1] * x[1] - 2.0);
    let report = minimize_constrained(&p, &[0.0, 0.0], &default_settings());
    assert!(report.converged(), "status {:?}", report.status);
    assert_relative_eq!(report.minimizer[0], -1.0, epsilon = 1e-5);
    assert_relative_eq!(report.minimizer[1], -1.0, epsilon = 1e-5);
    assert_relative_eq!(report.objective, -2.0, epsilon = 1e-5);
}

#[test]
fn pinched_inequalities_force_origin() {
    // minimize z^2 subject to -z <= 0 and z <= 0: only z = 0 is feasible
    let p = NlpProblem::new(1, Arc::new(|x: &[f64]| x[0] * x[0]))
        .with_inequality(|x| -x[0])
        .with_inequality(|x| x[0]);
    let report = minimize_constrained(&p, &[0.5], &default_settings());
    assert!(report.violation <= 1e-8);
    assert!(report.minimizer[0].abs() < 1e-4);
}

#[test]
fn unconstrained_problem_routes_to_plain_path() {
    let p = NlpProblem::new(2, Arc::new(|x: &[f64]| (x[0] + 1.0).powi(2) + x[1] * x[1]));
    let via_constrained = minimize_constrained(&p, &[2.0, 2.0], &default_settings());
    let via_unconstrained = minimize_unconstrained(
        |x| p.objective(x),
        |x, g| p.objective_gradient_into(x, g),
        &[2.0, 2.0],
        None,
        &default_settings(),
    );
    assert_eq!(via_constrained.minimizer, via_unconstrained.minimizer);
    assert_eq!(via_constrained.objective, via_unconstrained.objective);
    assert_eq!(via_constrained.iterations, via_unconstrained.iterations);
}

#[test]
fn feasible_stationary_start_returns_immediately() {
    let p = NlpProblem::new(2, Arc::new(|x: &[f64]| x[0] * x[0] + x[1] * x[1]))
        .with_gradient(Arc::new(|x, g| {
            g[0] = 2.0 * x[0];
            g[1] = 2.0 * x[1];
        }))
        .with_inequality(|x| x[0] + x[1] - 5.0);
    let report = minimize_constrained(&p, &[0.0, 0.0], &default_settings());
    assert!(report.converged());
    assert!(report.minimizer[0].abs() < 1e-10);
    assert!(report.minimizer[1].abs() < 1e-10);
    assert!(report.iterations <= 1);
}

#[test]
fn identical_inputs_give_bit_identical_reports() {
    let p = NlpProblem::new(2, Arc::new(|x: &[f64]| (x[0] - 0.3).powi(2) + x[0] * x[1] + x[1] * x[1]))
        .with_inequality(|x| 0.2 - x[0]);
    let a = minimize_constrained(&p, &[1.0, -1.0], &default_settings());
    let b = minimize_constrained(&p, &[1.0, -1.0], &default_settings());
    assert_eq!(a.minimizer, b.minimizer);
    assert!(a.objective == b.objective);
    assert_eq!(a.function_evaluations, b.function_evaluations);
}

#[test]
fn random_convex_quadratics_reach_known_minima() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240817);
    for trial in 0..50 {
        let n = rng.random_range(2..=20);
        // Q = A^T A + I is symmetric positive definite
        let a: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut q = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = if i == j { 1.0 } else { 0.0 };
                for row in &a {
                    acc += row[i] * row[j];
                }
                q[i][j] = acc;
            }
        }
        let x_star: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        // choose b so the optimum sits exactly at x_star
        let b: Vec<f64> = (0..n)
            .map(|i| -(0..n).map(|j| q[i][j] * x_star[j]).sum::<f64>())
            .collect();
        let q_arc = Arc::new(q);
        let b_arc = Arc::new(b);
        let value = {
            let q = Arc::clone(&q_arc);
            let b = Arc::clone(&b_arc);
            move |x: &[f64]| {
                let mut total = 0.0;
                for i in 0..x.len() {
                    total += b[i] * x[i];
                    for j in 0..x.len() {
                        total += 0.5 * q[i][j] * x[i] * x[j];
                    }
                }
                total
            }
        };
        let grad = {
            let q = Arc::clone(&q_arc);
            let b = Arc::clone(&b_arc);
            move |x: &[f64], g: &mut [f64]| {
                for i in 0..x.len() {
                    g[i] = b[i] + (0..x.len()).map(|j| q[i][j] * x[j]).sum::<f64>();
                }
            }
        };
        let f_star = value(&x_star);
        let report =
            minimize_unconstrained(&value, &grad, &vec![0.0; n], None, &default_settings());
        assert!(
            report.objective - f_star <= 1e-6,
            "trial {trial}: n={n}, gap {}",
            report.objective - f_star
        );
    }
}
