//! Continuous control problems, their Runge-Kutta transcription, and the
//! knot-based decomposition driven by the direct search.
//!
//! A problem over horizon `T` with `N` steps is transcribed into a flat
//! constrained problem over all states and controls ([`transcribe_full`]),
//! or cut at a set of knot indices into independent segment subproblems,
//! each recovering a control that joins two fixed states with minimal
//! running cost ([`segment_subproblem`]). Stitching ([`stitch`]) solves every
//! segment with the two-phase process and assembles the full trajectory,
//! returning the summed running cost and the summed segment infeasibility;
//! knot states that no control can reach simply show up as infeasibility,
//! which is exactly the metric the progressive barrier consumes.

mod rk4;
mod transcribe;

pub use transcribe::{segment_subproblem, transcribe_full, DiscretizedOcp, SegmentLayout};

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::{map_indices, ExecMode};
use crate::problem::{
    solve_feasibility, BlackboxResult, Bound, ConstraintKind, Partition, TwoPhaseSettings,
};
use crate::solver::SolverStatus;

pub type DynamicsFn = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// Writes the dynamics jacobians `fx` (n by n) and `fu` (n by m), row-major.
pub type DynamicsJacobianFn =
    Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64], &mut [f64]) + Send + Sync>;
pub type StageCostFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;
/// Writes the running-cost partials with respect to state and control.
pub type StageCostGradientFn =
    Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64], &mut [f64]) + Send + Sync>;
/// Terminal-cost over the states at the cost indices, in index order.
pub type MayerFn = Arc<dyn Fn(&[Vec<f64>]) -> f64 + Send + Sync>;
pub type StateCostFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Inequality constraint `c(t, x, u) <= 0` applied at every step.
#[derive(Clone)]
pub struct PathConstraint {
    pub label: String,
    pub value: Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>,
    /// Writes the partials with respect to state and control.
    pub gradient: Option<Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64], &mut [f64]) + Send + Sync>>,
}

/// Constraint on the final state.
#[derive(Clone)]
pub struct TerminalConstraint {
    pub label: String,
    pub kind: ConstraintKind,
    pub value: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub gradient: Option<Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>>,
}

/// A continuous optimal control problem and its discretization parameters.
///
/// The terminal cost reads the states at `mayer_indices` (a subset of
/// `1..=steps`); the running cost is integrated with the left rectangle
/// rule; control bounds are box bounds, while state path constraints count
/// toward the violation measure.
#[derive(Clone)]
pub struct OcpSpec {
    pub state_dim: usize,
    pub control_dim: usize,
    pub horizon: f64,
    pub steps: usize,
    pub initial_state: Vec<f64>,
    pub dynamics: DynamicsFn,
    pub dynamics_jacobian: Option<DynamicsJacobianFn>,
    pub lagrange: StageCostFn,
    pub lagrange_gradient: Option<StageCostGradientFn>,
    pub mayer: MayerFn,
    pub mayer_indices: Vec<usize>,
    pub path_constraints: Vec<PathConstraint>,
    pub control_bounds: Vec<Bound>,
    pub terminal_constraints: Vec<TerminalConstraint>,
    /// Starting control guess for segment solves. The shared initialization
    /// always rolls out with zero controls; this only seeds the smooth
    /// solver, which matters when the control jacobian is singular at zero
    /// (a polar speed/heading pair, say).
    pub control_initial_guess: Vec<f64>,
}

impl OcpSpec {
    pub fn time_step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time_at(&self, k: usize) -> f64 {
        k as f64 * self.time_step()
    }

    pub(crate) fn validate(&self) {
        assert!(self.steps >= 1, "at least one step");
        assert!(self.state_dim >= 1 && self.control_dim >= 1);
        assert_eq!(self.initial_state.len(), self.state_dim);
        assert_eq!(self.control_bounds.len(), self.control_dim);
        assert_eq!(self.control_initial_guess.len(), self.control_dim);
        assert!(self.initial_state.iter().all(|v| v.is_finite()));
        for pair in self.mayer_indices.windows(2) {
            assert!(pair[0] < pair[1], "cost indices must be increasing");
        }
        if let Some(&last) = self.mayer_indices.last() {
            assert!(last <= self.steps);
        }
        if let Some(&first) = self.mayer_indices.first() {
            assert!(first >= 1);
        }
    }

    /// Terminal-constraint contribution to the violation measure at a final
    /// state: squared positive parts plus squared equality residuals.
    pub fn terminal_violation(&self, x_final: &[f64]) -> f64 {
        let mut total = 0.0;
        for constraint in &self.terminal_constraints {
            let v = (constraint.value)(x_final);
            if !v.is_finite() {
                return f64::INFINITY;
            }
            match constraint.kind {
                ConstraintKind::Inequality => {
                    let pos = v.max(0.0);
                    total += pos * pos;
                }
                ConstraintKind::Equality => total += v * v,
            }
        }
        total
    }

    /// Terminal cost evaluated on a full trajectory's states.
    pub fn mayer_of_trajectory(&self, states: &[Vec<f64>]) -> f64 {
        let gathered: Vec<Vec<f64>> = self
            .mayer_indices
            .iter()
            .map(|&k| states[k].clone())
            .collect();
        (self.mayer)(&gathered)
    }

    /// Running cost of a trajectory under the left rectangle rule.
    pub fn lagrange_of_trajectory(&self, trajectory: &Trajectory) -> f64 {
        let dt = self.time_step();
        let mut total = 0.0;
        for k in 0..self.steps {
            total += dt
                * (self.lagrange)(
                    self.time_at(k),
                    &trajectory.states[k],
                    &trajectory.controls[k],
                );
        }
        total
    }
}

/// States `x_0..=x_N` and controls `u_0..u_{N-1}` of one roll-out or solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    /// Set when a roll-out diverged and the remaining states repeat the last
    /// finite one.
    pub truncated: bool,
}

impl Trajectory {
    /// CSV with one row per step: time, state components, control components
    /// (empty control cells on the final row).
    pub fn csv(&self, dt: f64) -> String {
        let n = self.states.first().map_or(0, Vec::len);
        let m = self.controls.first().map_or(0, Vec::len);
        let mut out = String::from("t");
        for i in 0..n {
            out.push_str(&format!(",x{i}"));
        }
        for j in 0..m {
            out.push_str(&format!(",u{j}"));
        }
        out.push('\n');
        for (k, state) in self.states.iter().enumerate() {
            out.push_str(&format!("{}", k as f64 * dt));
            for v in state {
                out.push_str(&format!(",{v}"));
            }
            if k < self.controls.len() {
                for v in &self.controls[k] {
                    out.push_str(&format!(",{v}"));
                }
            } else {
                for _ in 0..m {
                    out.push(',');
                }
            }
            out.push('\n');
        }
        out
    }
}

/// A state is considered diverged once any component passes this magnitude.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// One RK4 step of the problem's dynamics at step index `k`, the control
/// held constant over the step.
pub fn rk4_step(spec: &OcpSpec, k: usize, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    debug_assert!(k < spec.steps);
    let mut out = vec![0.0; spec.state_dim];
    rk4::step_into(spec, spec.time_at(k), spec.time_step(), x, u, &mut out);
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFiniteDynamics { step: k })
    }
}

/// Rolls out the dynamics with every control at zero: the shared
/// initialization of all solution methods.
///
/// If the roll-out diverges the remaining states hold the last finite value
/// and the trajectory is flagged truncated, so it stays usable for
/// diagnostics.
pub fn uncontrolled_trajectory(spec: &OcpSpec) -> Trajectory {
    spec.validate();
    let zero_control = vec![0.0; spec.control_dim];
    let mut states = Vec::with_capacity(spec.steps + 1);
    states.push(spec.initial_state.clone());
    let mut truncated = false;
    for k in 0..spec.steps {
        if truncated {
            let last = states[k].clone();
            states.push(last);
            continue;
        }
        match rk4_step(spec, k, &states[k], &zero_control) {
            Ok(next) if next.iter().all(|v| v.abs() <= DIVERGENCE_LIMIT) => states.push(next),
            _ => {
                truncated = true;
                let last = states[k].clone();
                states.push(last);
            }
        }
    }
    Trajectory {
        states,
        controls: vec![zero_control; spec.steps],
        truncated,
    }
}

/// The knot indices exposed to the derivative-free layer.
///
/// The final step must be a knot (the terminal constraint cannot live inside
/// a segment) and every terminal-cost index must be a knot (the terminal
/// cost cannot live inside a segment). Both are checked at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnotSet {
    indices: Vec<usize>,
}

impl KnotSet {
    pub fn new(indices: Vec<usize>, spec: &OcpSpec) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidKnotSet("no knot indices given".into()));
        }
        for pair in indices.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidKnotSet(format!(
                    "indices must be strictly increasing, got {indices:?}"
                )));
            }
        }
        if indices[0] < 1 || *indices.last().unwrap() != spec.steps {
            return Err(Error::InvalidKnotSet(format!(
                "indices must lie in [1, {}] and end at {}",
                spec.steps, spec.steps
            )));
        }
        for needed in &spec.mayer_indices {
            if !indices.contains(needed) {
                return Err(Error::InvalidKnotSet(format!(
                    "terminal-cost index {needed} is not a knot"
                )));
            }
        }
        Ok(Self { indices })
    }

    /// The single-segment knot set: only the final state is exposed.
    pub fn full_horizon(spec: &OcpSpec) -> Result<Self> {
        Self::new(vec![spec.steps], spec)
    }

    /// Midpoint and final state as knots.
    pub fn halves(spec: &OcpSpec) -> Result<Self> {
        if spec.steps % 2 != 0 {
            return Err(Error::InvalidKnotSet(format!(
                "midpoint knot needs an even step count, got {}",
                spec.steps
            )));
        }
        Self::new(vec![spec.steps / 2, spec.steps], spec)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn segment_count(&self) -> usize {
        self.indices.len()
    }

    /// Segment boundaries as (start, end) index pairs, starting at 0.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.indices.len());
        let mut start = 0;
        for &end in &self.indices {
            out.push((start, end));
            start = end;
        }
        out
    }
}

/// Extra cost term on one interior state, used to fold a mid-horizon target
/// into a segment objective.
#[derive(Clone)]
pub struct ExtraStateCost {
    /// Global step index the cost reads.
    pub index: usize,
    pub cost: StateCostFn,
}

#[derive(Clone, Default)]
pub struct StitchOptions {
    pub two_phase: TwoPhaseSettings,
    pub exec: ExecMode,
    pub extras: Vec<ExtraStateCost>,
}

/// Result of solving all segments against a set of proposed knot states.
#[derive(Debug, Clone)]
pub struct StitchResult {
    pub segments: Vec<BlackboxResult>,
    pub total_lagrange: f64,
    /// Terminal cost evaluated on the knot states.
    pub mayer: f64,
    /// Terminal cost plus total running cost.
    pub objective: f64,
    /// Summed segment infeasibility plus the terminal-constraint violation
    /// at the final knot.
    pub total_infeasibility: f64,
    pub terminal_violation: f64,
    pub trajectory: Trajectory,
    /// Worst solver status across segments.
    pub status: SolverStatus,
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

/// Default segment start: roll the dynamics out from the segment's left
/// state with zero controls; interior states come from the roll-out and the
/// controls are zero. Falls back to all-zeros if the roll-out diverges.
pub fn uncontrolled_segment_start(
    spec: &OcpSpec,
    start: usize,
    x_start: &[f64],
    end: usize,
) -> Vec<f64> {
    let layout = SegmentLayout::new(spec, start, end);
    let mut z = vec![0.0; layout.dimension()];
    for k in start..end {
        let o = layout.control_offset(k);
        z[o..o + spec.control_dim].copy_from_slice(&spec.control_initial_guess);
    }
    let mut x = x_start.to_vec();
    let zero_control = vec![0.0; spec.control_dim];
    for k in start..end - 1 {
        match rk4_step(spec, k, &x, &zero_control) {
            Ok(next) if next.iter().all(|v| v.abs() <= DIVERGENCE_LIMIT) => x = next,
            _ => {
                z.fill(0.0);
                return z;
            }
        }
        let offset = layout.state_offset(k + 1);
        z[offset..offset + spec.state_dim].copy_from_slice(&x);
    }
    z
}

/// Solves every segment subproblem against the proposed knot states and
/// assembles the outcome.
///
/// Segments are independent and may be solved concurrently; results are
/// reduced in segment order so the outcome does not depend on scheduling.
/// Warm starts are per-segment flat vectors; segments without one start from
/// the zero-control roll-out. Segment solver failures degrade to their best
/// iterate rather than aborting, so every proposed knot vector gets a finite
/// (objective, infeasibility) pair unless the dynamics themselves blow up.
pub fn stitch(
    spec: &OcpSpec,
    knots: &KnotSet,
    knot_states: &[Vec<f64>],
    warm_starts: Option<&[Vec<f64>]>,
    options: &StitchOptions,
) -> Result<StitchResult> {
    if knot_states.len() != knots.segment_count() {
        return Err(Error::DimensionMismatch {
            context: "stitch knot states",
            expected: knots.segment_count(),
            actual: knot_states.len(),
        });
    }
    for state in knot_states {
        if state.len() != spec.state_dim {
            return Err(Error::DimensionMismatch {
                context: "stitch knot state",
                expected: spec.state_dim,
                actual: state.len(),
            });
        }
    }
    if let Some(ws) = warm_starts {
        if ws.len() != knots.segment_count() {
            return Err(Error::DimensionMismatch {
                context: "stitch warm starts",
                expected: knots.segment_count(),
                actual: ws.len(),
            });
        }
    }

    let boundaries = knots.segments();
    let segment_results: Vec<Result<BlackboxResult>> =
        map_indices(options.exec, boundaries.len(), |i| {
            let (start, end) = boundaries[i];
            let x_start: &[f64] = if i == 0 {
                &spec.initial_state
            } else {
                &knot_states[i - 1]
            };
            let x_end = &knot_states[i];
            solve_segment(
                spec,
                start,
                x_start,
                end,
                x_end,
                warm_starts.map(|w| w[i].as_slice()),
                options,
            )
        });

    let mut segments = Vec::with_capacity(segment_results.len());
    for r in segment_results {
        segments.push(r?);
    }

    let mut total_lagrange = 0.0;
    let mut total_infeasibility = 0.0;
    let mut status = SolverStatus::Converged;
    for s in &segments {
        total_lagrange += s.objective;
        total_infeasibility += s.infeasibility;
        status = worse(status, s.solver_status);
    }
    let x_final = knot_states.last().expect("validated non-empty");
    let terminal_violation = spec.terminal_violation(x_final);
    total_infeasibility += terminal_violation;

    // gather the states the terminal cost reads; every cost index is a knot
    let mayer_inputs: Vec<Vec<f64>> = spec
        .mayer_indices
        .iter()
        .map(|k| {
            let pos = knots
                .indices()
                .iter()
                .position(|l| l == k)
                .expect("validated at construction");
            knot_states[pos].clone()
        })
        .collect();
    let mayer = (spec.mayer)(&mayer_inputs);

    let trajectory = assemble_trajectory(spec, knots, knot_states, &segments);

    Ok(StitchResult {
        objective: mayer + total_lagrange,
        mayer,
        total_lagrange,
        total_infeasibility,
        terminal_violation,
        trajectory,
        status,
        segments,
    })
}

fn solve_segment(
    spec: &OcpSpec,
    start: usize,
    x_start: &[f64],
    end: usize,
    x_end: &[f64],
    warm_start: Option<&[f64]>,
    options: &StitchOptions,
) -> Result<BlackboxResult> {
    let extras: Vec<ExtraStateCost> = options
        .extras
        .iter()
        .filter(|e| e.index > start && e.index < end)
        .cloned()
        .collect();
    let problem = segment_subproblem(spec, start, x_start, end, x_end, &extras)?;
    let layout = SegmentLayout::new(spec, start, end);

    let fallback;
    let mut z0: &[f64] = match warm_start {
        Some(z) if z.len() == layout.dimension() => z,
        _ => {
            fallback = uncontrolled_segment_start(spec, start, x_start, end);
            &fallback
        }
    };
    let zeros;
    if !problem.violation_value(z0).is_finite() {
        // wild knot states can overflow the roll-out; zeros keep the defects
        // finite so the solve can begin
        zeros = vec![0.0; layout.dimension()];
        z0 = &zeros;
    }

    let partition = Partition::empty(problem.dimension());
    let (z_tilde, mu_tilde, status1) =
        solve_feasibility(&problem, &partition, &[], z0, &options.two_phase)?;
    let mut result = crate::problem::solve_objective(
        &problem,
        &partition,
        &[],
        &z_tilde,
        mu_tilde,
        &options.two_phase,
    )?;
    result.solver_status = worse(result.solver_status, status1);
    Ok(result)
}

fn assemble_trajectory(
    spec: &OcpSpec,
    knots: &KnotSet,
    knot_states: &[Vec<f64>],
    segments: &[BlackboxResult],
) -> Trajectory {
    let n = spec.state_dim;
    let m = spec.control_dim;
    let mut states = Vec::with_capacity(spec.steps + 1);
    let mut controls = Vec::with_capacity(spec.steps);
    states.push(spec.initial_state.clone());
    for (i, (start, end)) in knots.segments().into_iter().enumerate() {
        let layout = SegmentLayout::new(spec, start, end);
        let z = &segments[i].smooth_minimizer;
        for k in start + 1..end {
            let offset = layout.state_offset(k);
            states.push(z[offset..offset + n].to_vec());
        }
        states.push(knot_states[i].clone());
        for k in start..end {
            let offset = layout.control_offset(k);
            controls.push(z[offset..offset + m].to_vec());
        }
    }
    Trajectory {
        states,
        controls,
        truncated: false,
    }
}

/// Least achievable violation when steering from `x_start` at `start` to
/// `x_end` at `end`: builds the segment subproblem and runs the violation
/// minimization from the zero-control roll-out.
pub fn segment_feasibility(
    spec: &OcpSpec,
    start: usize,
    x_start: &[f64],
    end: usize,
    x_end: &[f64],
    settings: &TwoPhaseSettings,
) -> Result<f64> {
    let problem = segment_subproblem(spec, start, x_start, end, x_end, &[])?;
    let z0 = uncontrolled_segment_start(spec, start, x_start, end);
    let partition = Partition::empty(problem.dimension());
    let (_, mu, _) = solve_feasibility(&problem, &partition, &[], &z0, settings)?;
    Ok(mu)
}
