//! Mesh-adaptive direct search with a progressive barrier.
//!
//! The solver drives a blackbox returning an (objective, infeasibility) pair.
//! Feasible points (infeasibility within tolerance) compete on the objective
//! alone; infeasible points are kept on a front of mutually undominated
//! (objective, infeasibility) pairs, truncated at a threshold `h_max` that
//! only ever decreases. Each iteration polls around the feasible incumbent
//! and around the lowest-objective front member, on a mesh that refines when
//! polling fails.
//!
//! Poll directions come from a seeded random orthonormal basis and its
//! negation, so a fixed seed reproduces the full evaluation history bit for
//! bit, with or without parallel batch evaluation.

mod barrier;

pub use barrier::{Barrier, FrontPoint, IterationClass};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::{map_collect, ExecMode};
use crate::problem::Bound;

/// Blackbox driven by the direct search: maps a point to `(f, h)` with
/// `h >= 0` measuring infeasibility.
pub trait MadsBlackbox: Sync {
    fn eval(&self, x: &[f64]) -> (f64, f64);

    /// Called at the end of any iteration that changed the solver's incumbent
    /// (the feasible incumbent when one exists, otherwise the front member
    /// with the lowest objective). Lets stateful blackboxes refresh warm
    /// starts without racing concurrent evaluations.
    fn on_incumbent(&self, _x: &[f64]) {}
}

impl<F> MadsBlackbox for F
where
    F: Fn(&[f64]) -> (f64, f64) + Sync,
{
    fn eval(&self, x: &[f64]) -> (f64, f64) {
        self(x)
    }
}

/// Poll direction scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[non_exhaustive]
pub enum PollScheme {
    /// `2n` directions: a random orthonormal basis and its negation.
    #[default]
    OrthoBasis2N,
}

#[derive(Debug, Clone)]
pub struct MadsSettings {
    /// Initial frame size, in units of the per-variable scale.
    pub initial_frame_size: f64,
    /// The solve stops once the mesh size falls below this.
    pub min_mesh_size: f64,
    /// Evaluation budget.
    pub max_evaluations: usize,
    /// Initial barrier threshold.
    pub h_max_initial: f64,
    pub poll_scheme: PollScheme,
    /// Evaluate poll points one by one and cut the batch short on the first
    /// dominating point. When false the whole batch is evaluated (in
    /// parallel when enabled) and processed in direction order.
    pub opportunistic: bool,
    pub seed: u64,
    /// Points with `h` at or below this count as feasible.
    pub feasibility_tolerance: f64,
    /// Per-variable scale of the poll steps.
    pub scale: Option<Vec<f64>>,
    /// Optional box; poll points are snapped onto violated bounds.
    pub bounds: Option<Vec<Bound>>,
    /// Dispatch mode for non-opportunistic batch evaluation.
    pub exec: ExecMode,
}

impl Default for MadsSettings {
    fn default() -> Self {
        Self {
            initial_frame_size: 1.0,
            min_mesh_size: 1e-9,
            max_evaluations: 1000,
            h_max_initial: f64::INFINITY,
            poll_scheme: PollScheme::OrthoBasis2N,
            opportunistic: true,
            seed: 0,
            feasibility_tolerance: 1e-9,
            scale: None,
            bounds: None,
            exec: ExecMode::default(),
        }
    }
}

/// One blackbox evaluation, in order.
#[derive(Debug, Clone)]
pub struct EvalRecord {
    pub index: usize,
    pub point: Vec<f64>,
    pub f: f64,
    pub h: f64,
    /// Whether this point was adopted as feasible incumbent when processed.
    pub feasible_incumbent: bool,
    /// Whether this point became the lowest-objective front member.
    pub infeasible_incumbent: bool,
}

/// Per-iteration summary.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub index: usize,
    pub class: IterationClass,
    pub frame_size: f64,
    pub mesh_size: f64,
    pub h_max: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MadsTermination {
    /// Mesh size fell below the configured minimum.
    MeshLimit,
    /// Evaluation budget exhausted.
    EvaluationBudget,
}

/// Mesh and barrier state of a running solve.
pub struct MadsState {
    /// Frame size exponent: frame = initial * 2^exponent. Kept as an integer
    /// so halving and doubling are exact.
    frame_exponent: i32,
    initial_frame: f64,
    pub barrier: Barrier,
    pub evaluation_count: usize,
    rng: ChaCha8Rng,
}

impl MadsState {
    pub fn new(settings: &MadsSettings) -> Self {
        Self {
            frame_exponent: 0,
            initial_frame: settings.initial_frame_size,
            barrier: Barrier::new(settings.h_max_initial, settings.feasibility_tolerance),
            evaluation_count: 0,
            rng: ChaCha8Rng::seed_from_u64(settings.seed),
        }
    }

    pub fn frame_size(&self) -> f64 {
        self.initial_frame * 2f64.powi(self.frame_exponent)
    }

    /// Mesh size: `min(frame, frame^2)`, so the mesh refines quadratically
    /// below unit frame size.
    pub fn mesh_size(&self) -> f64 {
        let frame = self.frame_size();
        frame.min(frame * frame)
    }

    fn expand_frame(&mut self) {
        self.frame_exponent += 1;
    }

    fn shrink_frame(&mut self) {
        self.frame_exponent -= 1;
    }
}

/// Result of a direct-search run.
#[derive(Debug, Clone)]
pub struct MadsOutcome {
    /// Best point with `h` within the feasibility tolerance, if any was
    /// evaluated.
    pub best_feasible: Option<(Vec<f64>, f64)>,
    /// Lowest-objective undominated infeasible point, if any.
    pub best_infeasible: Option<(Vec<f64>, f64, f64)>,
    pub history: Vec<EvalRecord>,
    pub iterations: Vec<IterationRecord>,
    pub termination: MadsTermination,
    pub evaluations: usize,
}

impl MadsOutcome {
    /// Evaluation log as CSV: index, coordinates, objective, infeasibility,
    /// incumbent flags.
    pub fn history_csv(&self) -> String {
        let dim = self.history.first().map_or(0, |r| r.point.len());
        let mut out = String::from("eval_index");
        for i in 0..dim {
            out.push_str(&format!(",x{i}"));
        }
        out.push_str(",f,h,feasible_incumbent,infeasible_incumbent\n");
        for rec in &self.history {
            out.push_str(&rec.index.to_string());
            for v in &rec.point {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(
                ",{},{},{},{}\n",
                rec.f, rec.h, rec.feasible_incumbent as u8, rec.infeasible_incumbent as u8
            ));
        }
        out
    }
}

/// Generates the poll points around `center`: `center ± frame * scale * d`
/// for each column `d` of a fresh random orthonormal basis, with offsets
/// snapped onto the current mesh.
///
/// Offsets of opposite directions are exact negations, so each pair of
/// returned points is symmetric about the center. Points are then snapped
/// onto violated bounds when bounds are configured.
pub fn poll_step(state: &mut MadsState, center: &[f64], settings: &MadsSettings) -> Vec<Vec<f64>> {
    let n = center.len();
    let frame = state.frame_size();
    let mesh = state.mesh_size();
    debug_assert!(mesh > 0.0);
    let basis = random_orthonormal_basis(&mut state.rng, n);

    let scale_of = |j: usize| settings.scale.as_ref().map_or(1.0, |s| s[j]);

    let mut points = Vec::with_capacity(2 * n);
    for dir in &basis {
        let mut offset = vec![0.0; n];
        let mut nonzero = false;
        for j in 0..n {
            let quantum = mesh * scale_of(j);
            let raw = frame * scale_of(j) * dir[j];
            let snapped = (raw / quantum).round() * quantum;
            offset[j] = snapped;
            nonzero |= snapped != 0.0;
        }
        if !nonzero {
            continue;
        }
        for sign in [1.0, -1.0] {
            let mut point: Vec<f64> = center
                .iter()
                .zip(&offset)
                .map(|(&c, &o)| c + sign * o)
                .collect();
            if let Some(bounds) = &settings.bounds {
                for (v, b) in point.iter_mut().zip(bounds) {
                    *v = b.clamp(*v);
                }
            }
            points.push(point);
        }
    }
    points
}

/// Random orthonormal basis via Gaussian draws and modified Gram-Schmidt.
fn random_orthonormal_basis(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= dot * bi;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            continue; // essentially-dependent draw; try again
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
        basis.push(v);
    }
    basis
}

/// Box-Muller standard normal.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0f64 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Runs the direct search from `x0` until the mesh or the evaluation budget
/// is exhausted.
pub fn solve(blackbox: &dyn MadsBlackbox, x0: &[f64], settings: &MadsSettings) -> MadsOutcome {
    assert!(settings.min_mesh_size > 0.0, "mesh limit must be positive");
    assert!(settings.max_evaluations >= 1, "evaluation budget must be positive");
    assert!(settings.initial_frame_size > 0.0);
    if let Some(scale) = &settings.scale {
        assert_eq!(scale.len(), x0.len(), "one scale entry per variable");
        assert!(scale.iter().all(|&s| s > 0.0), "scales must be positive");
    }

    let mut state = MadsState::new(settings);
    let mut history: Vec<EvalRecord> = Vec::new();
    let mut iteration_log: Vec<IterationRecord> = Vec::new();

    let evaluate = |points: Vec<Vec<f64>>,
                        state: &mut MadsState,
                        history: &mut Vec<EvalRecord>|
     -> (IterationClass, usize) {
        let budget_left = settings.max_evaluations - state.evaluation_count;
        let mut batch = points;
        batch.truncate(budget_left);
        if batch.is_empty() {
            return (IterationClass::Unsuccessful, 0);
        }
        let count = batch.len();
        let start_index = state.evaluation_count;
        let class = if settings.opportunistic {
            let mut class = IterationClass::Unsuccessful;
            let mut used = 0;
            for (offset, point) in batch.into_iter().enumerate() {
                let (f, h) = blackbox.eval(&point);
                used += 1;
                let mut record = EvalRecord {
                    index: start_index + offset,
                    point,
                    f,
                    h,
                    feasible_incumbent: false,
                    infeasible_incumbent: false,
                };
                let single = state.barrier.insert_batch(std::slice::from_mut(&mut record));
                history.push(record);
                class = class.max(single);
                if class == IterationClass::Dominating {
                    break;
                }
            }
            state.evaluation_count += used;
            class
        } else {
            let results = map_collect(settings.exec, &batch, |p| blackbox.eval(p));
            let mut records: Vec<EvalRecord> = batch
                .into_iter()
                .zip(results)
                .enumerate()
                .map(|(offset, (point, (f, h)))| EvalRecord {
                    index: start_index + offset,
                    point,
                    f,
                    h,
                    feasible_incumbent: false,
                    infeasible_incumbent: false,
                })
                .collect();
            state.evaluation_count += count;
            let class = state.barrier.insert_batch(&mut records);
            history.extend(records);
            class
        };
        (class, count)
    };

    // seed the barrier with the starting point
    let (initial_class, _) = evaluate(vec![x0.to_vec()], &mut state, &mut history);
    let mut last_incumbent: Option<Vec<f64>> = state.barrier.incumbent_point().map(Vec::from);
    if let Some(p) = &last_incumbent {
        blackbox.on_incumbent(p);
    }
    let _ = initial_class;

    let mut iteration = 0usize;
    let termination = loop {
        if state.mesh_size() < settings.min_mesh_size {
            break MadsTermination::MeshLimit;
        }
        if state.evaluation_count >= settings.max_evaluations {
            break MadsTermination::EvaluationBudget;
        }

        // poll the feasible incumbent and the lowest-objective front member
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(2);
        if let Some((p, _)) = state.barrier.feasible_incumbent() {
            centers.push(p.to_vec());
        }
        if let Some(front) = state.barrier.infeasible_incumbent() {
            centers.push(front.point.clone());
        }
        if centers.is_empty() {
            centers.push(x0.to_vec());
        }

        let prev_incumbent_h = state.barrier.infeasible_incumbent().map(|p| p.h);

        let mut class = IterationClass::Unsuccessful;
        let mut evals_this_iteration = 0;
        for center in centers {
            let points = poll_step(&mut state, &center, settings);
            let (c, used) = evaluate(points, &mut state, &mut history);
            class = class.max(c);
            evals_this_iteration += used;
            if settings.opportunistic && class == IterationClass::Dominating {
                break;
            }
            if state.evaluation_count >= settings.max_evaluations {
                break;
            }
        }

        match class {
            IterationClass::Dominating => state.expand_frame(),
            IterationClass::Improving => {}
            IterationClass::Unsuccessful => state.shrink_frame(),
        }
        state.barrier.tighten_threshold(prev_incumbent_h, class);

        iteration += 1;
        iteration_log.push(IterationRecord {
            index: iteration,
            class,
            frame_size: state.frame_size(),
            mesh_size: state.mesh_size(),
            h_max: state.barrier.h_max,
            evaluations: evals_this_iteration,
        });

        let incumbent_now = state.barrier.incumbent_point().map(Vec::from);
        if incumbent_now != last_incumbent {
            if let Some(p) = &incumbent_now {
                blackbox.on_incumbent(p);
            }
            last_incumbent = incumbent_now;
        }
    };

    MadsOutcome {
        best_feasible: state
            .barrier
            .feasible_incumbent()
            .map(|(p, f)| (p.to_vec(), f)),
        best_infeasible: state
            .barrier
            .infeasible_incumbent()
            .map(|fp| (fp.point.clone(), fp.f, fp.h)),
        history,
        iterations: iteration_log,
        termination,
        evaluations: state.evaluation_count,
    }
}

#[cfg(test)]
mod tests;
