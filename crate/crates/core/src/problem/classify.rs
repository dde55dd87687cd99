//! Best-effort classification of a problem's relaxed feasibility.
//!
//! For a tolerance `eps`, the relaxed feasible set collects the points whose
//! violation measure is at most `eps`. A problem is classified as infeasible
//! when that set appears empty, as having an unattained or unbounded
//! objective when probe solves keep improving, or as well-defined when the
//! probes stabilize on a minimizer.
//!
//! Exact determination is undecidable in general, so this is a diagnostic:
//! sampling plus local solves, sound in the sense that the reported class is
//! backed by concrete evidence, but incomplete. Attainment is probed by
//! solving from several feasible starts: a genuinely attained minimum pulls
//! every start to the same point, while an infimum that is only approached
//! (say along an exponential tail) scatters the solves across wherever each
//! one happened to flatten out. Problems with several distinct global
//! minimizers are conservatively reported one class low.

use crate::problem::NlpProblem;
use crate::solver::{minimize_constrained, minimize_unconstrained, SolverSettings, SolverStatus};

use super::two_phase::with_violation_budget;

/// Feasibility ladder, weakest to strongest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityTag {
    /// No sampled or solved point reached the violation tolerance.
    EpsInfeasible,
    /// Feasible, with evidence that the objective is unbounded below.
    EpsFeasibleUndefined,
    /// Feasible with a bounded objective whose infimum shows no sign of
    /// being attained.
    EpsFD,
    /// Feasible with a stable attained minimizer.
    EpsFWD,
}

/// Classification result: the strongest tag evidenced at tolerance `epsilon`.
/// A `EpsFWD` verdict subsumes the `EpsFD` conditions by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityClass {
    pub tag: FeasibilityTag,
    pub epsilon: f64,
}

/// Stateful point generator feeding the sampling stage.
pub struct Sampler {
    generator: Box<dyn FnMut() -> Vec<f64> + Send>,
}

impl Sampler {
    pub fn new(generator: impl FnMut() -> Vec<f64> + Send + 'static) -> Self {
        Self {
            generator: Box::new(generator),
        }
    }

    /// Uniform samples over a centered box `[-half_width, half_width]^n`.
    pub fn uniform_box(n: usize, half_width: f64, seed: u64) -> Self {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Self::new(move || {
            (0..n)
                .map(|_| rng.random_range(-half_width..half_width))
                .collect()
        })
    }

    fn next(&mut self) -> Vec<f64> {
        (self.generator)()
    }
}

/// Classifies the problem's relaxed feasibility at tolerance `epsilon` using
/// `budget` samples plus local refinement solves.
pub fn classify(
    problem: &NlpProblem,
    epsilon: f64,
    sampler: &mut Sampler,
    budget: usize,
) -> FeasibilityClass {
    assert!(budget >= 1, "classification needs at least one sample");
    assert!(epsilon >= 0.0, "tolerance must be nonnegative");

    let mut best_point: Option<(Vec<f64>, f64)> = None;
    let mut feasible_samples: Vec<Vec<f64>> = Vec::new();
    for _ in 0..budget {
        let x = sampler.next();
        if x.len() != problem.dimension() {
            continue;
        }
        let h = problem.violation_value(&x);
        if !h.is_finite() {
            continue;
        }
        if h <= epsilon && feasible_samples.len() < 3 {
            let distinct = feasible_samples.iter().all(|p| {
                p.iter()
                    .zip(&x)
                    .any(|(a, b)| (a - b).abs() > 1e-6 * (1.0 + a.abs()))
            });
            if distinct {
                feasible_samples.push(x.clone());
            }
        }
        match &best_point {
            Some((_, best_h)) if *best_h <= h => {}
            _ => best_point = Some((x, h)),
        }
    }

    let Some((mut x_feas, mut h_feas)) = best_point else {
        return FeasibilityClass {
            tag: FeasibilityTag::EpsInfeasible,
            epsilon,
        };
    };

    // refine with a violation minimization when sampling alone fails
    if h_feas > epsilon && !problem.blocks().is_empty() {
        let refine_settings = SolverSettings {
            max_inner_iterations: 400,
            ..SolverSettings::default()
        };
        let report = minimize_unconstrained(
            |x| problem.violation_value(x),
            |x, g| problem.violation_gradient_into(x, g),
            &x_feas,
            problem.bounds(),
            &refine_settings,
        );
        let refined = problem.violation_value(&report.minimizer);
        if refined < h_feas {
            x_feas = report.minimizer;
            h_feas = refined;
        }
    }
    if h_feas > epsilon {
        return FeasibilityClass {
            tag: FeasibilityTag::EpsInfeasible,
            epsilon,
        };
    }

    // probe attainment by multistart: an attained minimum pulls every start
    // to the same point
    let probe_problem = if problem.blocks().is_empty() || epsilon.is_infinite() {
        NlpProblem::new(problem.dimension(), problem.objective_fn())
    } else {
        with_violation_budget(problem, epsilon)
    };
    let f_start = problem.objective(&x_feas);

    let mut starts: Vec<Vec<f64>> = vec![x_feas.clone()];
    for sample in feasible_samples {
        if starts.len() >= 3 {
            break;
        }
        if sample != x_feas {
            starts.push(sample);
        }
    }
    let spread = 0.5 * (1.0 + x_feas.iter().fold(0.0f64, |acc, v| acc.max(v.abs())));
    let mut k = 0usize;
    while starts.len() < 3 {
        k += 1;
        let mut shifted = x_feas.clone();
        for (j, v) in shifted.iter_mut().enumerate() {
            let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
            *v += sign * spread * k as f64 * 0.7;
        }
        starts.push(shifted);
    }

    let settings = SolverSettings {
        max_inner_iterations: 400,
        max_outer_iterations: 8,
        ..SolverSettings::default()
    };
    let probes: Vec<_> = starts
        .iter()
        .map(|s| minimize_constrained(&probe_problem, s, &settings))
        .collect();

    let all_converged = probes.iter().all(|p| p.status == SolverStatus::Converged);
    let scale = 1.0
        + probes
            .iter()
            .flat_map(|p| p.minimizer.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut max_distance = 0.0f64;
    for i in 0..probes.len() {
        for j in i + 1..probes.len() {
            let d = probes[i]
                .minimizer
                .iter()
                .zip(&probes[j].minimizer)
                .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
            max_distance = max_distance.max(d);
        }
    }

    if all_converged && max_distance <= 1e-4 * scale {
        return FeasibilityClass {
            tag: FeasibilityTag::EpsFWD,
            epsilon,
        };
    }

    // unbounded evidence: the objective fell past any fixed-scale drop
    let f_final = probes
        .iter()
        .map(|p| p.objective)
        .fold(f64::INFINITY, f64::min);
    if f_start.is_finite() && f_final <= f_start - (1.0f64).max(f_start.abs()) {
        return FeasibilityClass {
            tag: FeasibilityTag::EpsFeasibleUndefined,
            epsilon,
        };
    }

    FeasibilityClass {
        tag: FeasibilityTag::EpsFD,
        epsilon,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn exponential_constraint_is_infeasible_at_zero_tolerance() {
        // c(x) = e^x never reaches 0, so the violation e^(2x) is positive
        // everywhere even though it gets arbitrarily small
        let p = NlpProblem::new(1, Arc::new(|_: &[f64]| 0.0)).with_inequality(|x| x[0].exp());
        let mut sampler = Sampler::uniform_box(1, 3.0, 1);
        let class = classify(&p, 0.0, &mut sampler, 64);
        assert_eq!(class.tag, FeasibilityTag::EpsInfeasible);
    }

    #[test]
    fn exponential_constraint_is_feasible_at_positive_tolerance() {
        let p = NlpProblem::new(1, Arc::new(|_: &[f64]| 0.0)).with_inequality(|x| x[0].exp());
        let mut sampler = Sampler::uniform_box(1, 3.0, 1);
        let class = classify(&p, 1e-2, &mut sampler, 64);
        assert_ne!(class.tag, FeasibilityTag::EpsInfeasible);
    }

    #[test]
    fn unconstrained_quadratic_is_well_defined() {
        let p = NlpProblem::new(1, Arc::new(|x: &[f64]| x[0] * x[0]));
        let mut sampler = Sampler::uniform_box(1, 3.0, 2);
        let class = classify(&p, 0.0, &mut sampler, 32);
        assert_eq!(class.tag, FeasibilityTag::EpsFWD);
    }

    #[test]
    fn escaping_minimizer_is_defined_but_not_attained() {
        // objective exp(|y| + z) has infimum 0, approached only as z falls
        // to -infinity
        let p = NlpProblem::new(2, Arc::new(|x: &[f64]| (x[0].abs() + x[1]).exp()));
        let mut sampler = Sampler::uniform_box(2, 2.0, 3);
        let class = classify(&p, 0.0, &mut sampler, 32);
        assert_eq!(class.tag, FeasibilityTag::EpsFD);
    }

    #[test]
    fn linear_objective_is_undefined() {
        let p = NlpProblem::new(2, Arc::new(|x: &[f64]| x[0] + x[1]));
        let mut sampler = Sampler::uniform_box(2, 2.0, 4);
        let class = classify(&p, 0.0, &mut sampler, 32);
        assert_eq!(class.tag, FeasibilityTag::EpsFeasibleUndefined);
    }
}
