//! Small analytic problems whose singular/smooth split misbehaves in
//! instructive ways. Each case packages the problem, its one-variable
//! singular partition, and the behavior the self-test suite asserts.

use std::sync::Arc;

use crate::problem::{NlpProblem, Partition};

/// Catalog of pathological two-variable problems, each with the first
/// variable singular.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Counterexample {
    /// `exp(|y| + z)`: every fixed `y` leaves an infimum of zero that is
    /// approached as `z` falls away but never attained, and the full problem
    /// inherits that.
    UnattainedEverywhere,
    /// `|y| e^z + |y - 1| z^2`: the reduced problem over `y` has two optima,
    /// but only `y = 0` yields a subproblem whose minimum is attained; at
    /// `y = 1` the subproblem decays forever.
    TwinOptima,
    /// `|y| e^z`: the subproblem minimum is attained only at `y = 0`; any
    /// other `y` gives an unattained infimum.
    UnattainedOffOrigin,
    /// `|y| + z^2` under `1 - y - z <= 0` and `1 - y + z <= 0`: the
    /// subproblem is infeasible for every `y < 1`, with least violation
    /// `2 (1 - y)^2` reached at `z = 0`.
    InfeasibleHalfLine,
}

/// A counterexample problem ready to feed the two-phase machinery.
pub struct CounterexampleCase {
    pub which: Counterexample,
    pub problem: NlpProblem,
    pub partition: Partition,
}

impl Counterexample {
    pub fn all() -> [Counterexample; 4] {
        [
            Counterexample::UnattainedEverywhere,
            Counterexample::TwinOptima,
            Counterexample::UnattainedOffOrigin,
            Counterexample::InfeasibleHalfLine,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Counterexample::UnattainedEverywhere => "unattained-everywhere",
            Counterexample::TwinOptima => "twin-optima",
            Counterexample::UnattainedOffOrigin => "unattained-off-origin",
            Counterexample::InfeasibleHalfLine => "infeasible-half-line",
        }
    }

    pub fn case(&self) -> CounterexampleCase {
        let problem = match self {
            Counterexample::UnattainedEverywhere => {
                NlpProblem::new(2, Arc::new(|x: &[f64]| (x[0].abs() + x[1]).exp()))
                    .with_gradient(Arc::new(|x: &[f64], g: &mut [f64]| {
                        let e = (x[0].abs() + x[1]).exp();
                        g[0] = x[0].signum() * e;
                        g[1] = e;
                    }))
            }
            Counterexample::TwinOptima => NlpProblem::new(
                2,
                Arc::new(|x: &[f64]| {
                    x[0].abs() * x[1].exp() + (x[0] - 1.0).abs() * x[1] * x[1]
                }),
            )
            .with_gradient(Arc::new(|x: &[f64], g: &mut [f64]| {
                g[0] = x[0].signum() * x[1].exp() + (x[0] - 1.0).signum() * x[1] * x[1];
                g[1] = x[0].abs() * x[1].exp() + 2.0 * (x[0] - 1.0).abs() * x[1];
            })),
            Counterexample::UnattainedOffOrigin => {
                NlpProblem::new(2, Arc::new(|x: &[f64]| x[0].abs() * x[1].exp()))
                    .with_gradient(Arc::new(|x: &[f64], g: &mut [f64]| {
                        g[0] = x[0].signum() * x[1].exp();
                        g[1] = x[0].abs() * x[1].exp();
                    }))
            }
            Counterexample::InfeasibleHalfLine => {
                NlpProblem::new(2, Arc::new(|x: &[f64]| x[0].abs() + x[1] * x[1]))
                    .with_gradient(Arc::new(|x: &[f64], g: &mut [f64]| {
                        g[0] = x[0].signum();
                        g[1] = 2.0 * x[1];
                    }))
                    .with_inequality(|x| 1.0 - x[0] - x[1])
                    .with_inequality(|x| 1.0 - x[0] + x[1])
            }
        };
        CounterexampleCase {
            which: *self,
            problem,
            partition: Partition::new(2, vec![0]).expect("two variables, first singular"),
        }
    }

    /// Least violation of the subproblem at fixed `y`, where known in closed
    /// form.
    pub fn expected_infeasibility(&self, y: f64) -> Option<f64> {
        match self {
            Counterexample::InfeasibleHalfLine => {
                let gap = (1.0 - y).max(0.0);
                Some(2.0 * gap * gap)
            }
            // the other cases are unconstrained
            _ => Some(0.0),
        }
    }

    /// Two-phase objective value at fixed `y`, where known in closed form.
    pub fn expected_objective(&self, y: f64) -> Option<f64> {
        match self {
            Counterexample::InfeasibleHalfLine => Some(y.abs()),
            _ => None,
        }
    }
}
