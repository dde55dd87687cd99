//! The three competing solution methods and the comparison harness.
//!
//! All methods start from the same uncontrolled roll-out:
//!
//! * the smooth method transcribes the whole (smoothed) problem and hands it
//!   to the constrained solver — it tends to stall on the terminal-cost
//!   plateaus, where gradients carry no information;
//! * the derivative-free method eliminates the states by rolling out the
//!   dynamics and runs the direct search over all controls — usually far too
//!   many variables for a direct search;
//! * the hybrid method runs the direct search over a handful of knot states
//!   only, evaluating each proposal by solving smooth knot-to-knot segment
//!   subproblems, so each layer gets the kind of problem it is good at.
//!
//! Every run yields a [`RunRecord`] with both the smoothed objective it
//! optimized and the honest re-evaluation of the raw floor terminal cost.

mod hybrid;
pub mod plot;
mod record;

pub use hybrid::HybridBlackbox;
pub use record::{stable_hash, trajectory_hash, RunRecord};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use plateau_core::benchmarks::{Benchmark, BenchmarkId};
use plateau_core::exec::ExecMode;
use plateau_core::mads::{self, MadsOutcome, MadsSettings, MadsTermination};
use plateau_core::ocp::{
    rk4_step, transcribe_full, uncontrolled_trajectory, Trajectory, DIVERGENCE_LIMIT,
};
use plateau_core::problem::{Bound, TwoPhaseSettings};
use plateau_core::solver::{minimize_constrained, SolverSettings, SolverStatus};

/// Which states the hybrid method exposes to the direct search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaChoice {
    /// Only the final state.
    FullHorizon,
    /// Midpoint and final state.
    Halves,
    /// Explicit strictly-increasing step indices ending at the final step.
    Explicit(Vec<usize>),
}

impl LambdaChoice {
    pub fn label(&self) -> String {
        match self {
            LambdaChoice::FullHorizon => "N".into(),
            LambdaChoice::Halves => "N/2,N".into(),
            LambdaChoice::Explicit(v) => v
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(","),
        }
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let trimmed = text.trim();
        if trimmed.eq_ignore_ascii_case("n") {
            return Ok(LambdaChoice::FullHorizon);
        }
        if trimmed.eq_ignore_ascii_case("n/2,n") || trimmed.eq_ignore_ascii_case("halves") {
            return Ok(LambdaChoice::Halves);
        }
        let indices: Result<Vec<usize>, _> = trimmed
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect();
        match indices {
            Ok(v) if !v.is_empty() => Ok(LambdaChoice::Explicit(v)),
            _ => Err(format!(
                "cannot parse knot list '{text}' (expected N, N/2,N or comma-separated indices)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    So,
    Dfbbo,
    Hybrid,
}

impl std::str::FromStr for MethodChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "so" => Ok(MethodChoice::So),
            "dfbbo" => Ok(MethodChoice::Dfbbo),
            "hybrid" => Ok(MethodChoice::Hybrid),
            other => Err(format!("unknown method '{other}' (expected so, dfbbo or hybrid)")),
        }
    }
}

/// Settings shared by one run (and by all runs of a comparison).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Blackbox-evaluation budget of the direct search; both derivative-free
    /// methods get the same budget.
    pub budget: usize,
    /// Objective-evaluation cap of the smooth method, which burns cheap
    /// evaluations by the thousand and is not comparable to blackbox calls.
    pub smooth_budget: usize,
    pub seed: u64,
    pub solver: SolverSettings,
    pub initial_frame_size: f64,
    pub min_mesh_size: f64,
    pub opportunistic: bool,
    pub feasibility_tolerance: f64,
    pub exec: ExecMode,
    /// Inner-iteration cap of each segment solve inside the hybrid method.
    pub segment_inner_iterations: usize,
    /// Outer-iteration cap of each segment solve inside the hybrid method.
    pub segment_outer_iterations: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            budget: 300,
            smooth_budget: 50_000,
            seed: 0,
            solver: SolverSettings::default(),
            initial_frame_size: 1.0,
            min_mesh_size: 1e-9,
            opportunistic: true,
            // summed per-segment solver tolerances make 1e-9 a knife edge;
            // recorded in run metadata
            feasibility_tolerance: 1e-8,
            exec: ExecMode::default(),
            segment_inner_iterations: 150,
            segment_outer_iterations: 8,
        }
    }
}

impl RunConfig {
    /// Segment solves inside the hybrid method run with a tighter constraint
    /// tolerance (so summed segment infeasibilities stay within the direct
    /// search's feasibility tolerance) but bounded per-solve effort: each
    /// blackbox evaluation runs hundreds of them and the stall exit makes
    /// extra polish pointless.
    pub fn hybrid_two_phase(&self) -> TwoPhaseSettings {
        TwoPhaseSettings {
            solver: SolverSettings {
                constraint_tolerance: self.solver.constraint_tolerance.min(1e-10),
                max_inner_iterations: self.segment_inner_iterations,
                max_outer_iterations: self.segment_outer_iterations,
                gradient_tolerance: self.solver.gradient_tolerance.max(1e-6),
                ..self.solver.clone()
            },
        }
    }

    fn mads_settings(&self, bounds: Option<Vec<Bound>>, scale: Option<Vec<f64>>) -> MadsSettings {
        MadsSettings {
            initial_frame_size: self.initial_frame_size,
            min_mesh_size: self.min_mesh_size,
            max_evaluations: self.budget.max(1),
            opportunistic: self.opportunistic,
            seed: self.seed,
            feasibility_tolerance: self.feasibility_tolerance,
            bounds,
            scale,
            exec: self.exec,
            ..MadsSettings::default()
        }
    }
}

/// Box the hybrid knots are allowed to roam, per benchmark.
///
/// Reconstructed, not reference data: chosen to cover every state the
/// dynamics can reach at the problem's scale, and reported in run metadata.
/// Snapping onto these bounds is what lets a knot land exactly on an active
/// terminal equality (the far shore).
pub fn knot_bounds(bench: &Benchmark) -> Vec<Bound> {
    match bench.id {
        BenchmarkId::HarmonicOscillator => vec![Bound::new(-35.0, 35.0), Bound::new(-35.0, 35.0)],
        BenchmarkId::ZermeloOne | BenchmarkId::ZermeloTwo => {
            let y_max = match &bench.params {
                plateau_core::benchmarks::BenchmarkParams::ZermeloOne(p) => p.stream.y_max,
                plateau_core::benchmarks::BenchmarkParams::ZermeloTwo(p) => p.stream.y_max,
                _ => 6.0,
            };
            vec![Bound::new(-400.0, 45.0), Bound::new(0.0, y_max)]
        }
        BenchmarkId::LotkaVolterra => vec![Bound::new(0.0, 6.0), Bound::new(0.0, 6.0)],
    }
}

/// Poll scale of the hybrid knot variables: roughly one terminal-cost
/// plateau per unit frame, so the direct search moves in reward-sized steps.
pub fn knot_scale(bench: &Benchmark) -> Vec<f64> {
    match bench.id {
        BenchmarkId::HarmonicOscillator => vec![4.0, 1.0],
        BenchmarkId::ZermeloOne | BenchmarkId::ZermeloTwo => vec![10.0, 1.0],
        BenchmarkId::LotkaVolterra => vec![0.5, 0.5],
    }
}

/// Desk-scale step count: reduced several-fold from the reference problem
/// sizes so a full comparison stays CI-friendly.
pub fn desk_scale_steps(id: BenchmarkId) -> usize {
    match id {
        BenchmarkId::HarmonicOscillator => 120,
        BenchmarkId::ZermeloOne | BenchmarkId::ZermeloTwo => 80,
        BenchmarkId::LotkaVolterra => 120,
    }
}

fn status_label(status: SolverStatus) -> &'static str {
    match status {
        SolverStatus::Converged => "converged",
        SolverStatus::IterationLimit => "iteration-limit",
        SolverStatus::LineSearchFailure => "line-search-failure",
    }
}

fn mads_status_label(outcome: &MadsOutcome) -> &'static str {
    match outcome.termination {
        MadsTermination::MeshLimit => "mesh-converged",
        MadsTermination::EvaluationBudget => "budget-exhausted",
    }
}

/// Scores a returned trajectory: smoothed and true objectives, plus the
/// violation measure supplied by the method.
struct Scores {
    smoothed_objective: f64,
    true_objective: f64,
    true_mayer: f64,
    lagrange: f64,
}

fn score(bench: &Benchmark, trajectory: &Trajectory) -> Scores {
    let lagrange = bench.spec.lagrange_of_trajectory(trajectory);
    let smoothed_mayer = bench.spec.mayer_of_trajectory(&trajectory.states);
    let true_mayer = bench.true_mayer_of_trajectory(&trajectory.states);
    Scores {
        smoothed_objective: smoothed_mayer + lagrange,
        true_objective: true_mayer + lagrange,
        true_mayer,
        lagrange,
    }
}

fn base_metadata(bench: &Benchmark, config: &RunConfig) -> serde_json::Value {
    serde_json::json!({
        "params": bench.params,
        "smoothing": bench.smoothing,
        "stream_field_is_reconstruction": matches!(
            bench.id,
            BenchmarkId::ZermeloOne | BenchmarkId::ZermeloTwo
        ),
        "budget": config.budget,
        "seed": config.seed,
        "solver": config.solver,
    })
}

/// Smooth method: transcribe the whole smoothed problem and run the
/// constrained solver from the uncontrolled initialization.
pub fn run_so(bench: &Benchmark, config: &RunConfig) -> RunOutput {
    let start = Instant::now();
    let init = uncontrolled_trajectory(&bench.spec);
    let disc = transcribe_full(&bench.spec);
    let x0 = disc.pack(&init);

    let settings = SolverSettings {
        max_function_evaluations: config.smooth_budget,
        ..config.solver.clone()
    };
    let report = minimize_constrained(&disc.nlp, &x0, &settings);
    let trajectory = disc.unpack(&report.minimizer);
    let scores = score(bench, &trajectory);

    let mut metadata = base_metadata(bench, config);
    metadata["flat_dimension"] = serde_json::json!(disc.flat_dimension());
    metadata["iterations"] = serde_json::json!(report.iterations);

    let record = RunRecord {
        benchmark: bench.id.name().into(),
        method: "so".into(),
        lambda: None,
        n_steps: bench.spec.steps,
        seed: config.seed,
        budget: config.smooth_budget,
        config_hash: stable_hash(&(config, &bench.params)),
        initialization_hash: trajectory_hash(&init),
        smoothed_objective: scores.smoothed_objective,
        true_objective: scores.true_objective,
        true_mayer: scores.true_mayer,
        lagrange: scores.lagrange,
        infeasibility: report.violation,
        evaluations: report.function_evaluations,
        solver_status: status_label(report.status).into(),
        degraded: report.status != SolverStatus::Converged,
        wall_time_secs: start.elapsed().as_secs_f64(),
        trajectory_file: None,
        history_file: None,
        metadata,
    };
    RunOutput {
        record,
        trajectory,
        time_step: bench.spec.time_step(),
        history_csv: None,
    }
}

/// Rolls out the dynamics under a flat control vector. Returns the
/// trajectory unless it diverges.
fn rollout(bench: &Benchmark, controls_flat: &[f64]) -> Option<Trajectory> {
    let spec = &bench.spec;
    let m = spec.control_dim;
    let mut states = Vec::with_capacity(spec.steps + 1);
    let mut controls = Vec::with_capacity(spec.steps);
    states.push(spec.initial_state.clone());
    for k in 0..spec.steps {
        let u = controls_flat[k * m..(k + 1) * m].to_vec();
        match rk4_step(spec, k, &states[k], &u) {
            Ok(next) if next.iter().all(|v| v.abs() <= DIVERGENCE_LIMIT) => {
                states.push(next);
                controls.push(u);
            }
            _ => return None,
        }
    }
    Some(Trajectory {
        states,
        controls,
        truncated: false,
    })
}

/// Violation measure of a rolled-out trajectory: path constraints along the
/// way plus terminal constraints (defects vanish by construction).
fn rollout_violation(bench: &Benchmark, trajectory: &Trajectory) -> f64 {
    let spec = &bench.spec;
    let mut total = 0.0;
    for k in 0..spec.steps {
        let t = spec.time_at(k);
        for c in &spec.path_constraints {
            let v = (c.value)(t, &trajectory.states[k], &trajectory.controls[k]);
            let pos = v.max(0.0);
            total += pos * pos;
        }
    }
    total + spec.terminal_violation(&trajectory.states[spec.steps])
}

/// Derivative-free method with the state variables eliminated: the direct
/// search drives all `m N` controls and each evaluation is a roll-out.
pub fn run_dfbbo(bench: &Benchmark, config: &RunConfig) -> RunOutput {
    let start = Instant::now();
    let spec = &bench.spec;
    let init = uncontrolled_trajectory(spec);
    let m = spec.control_dim;

    let blackbox = |controls_flat: &[f64]| -> (f64, f64) {
        match rollout(bench, controls_flat) {
            Some(traj) => {
                let s = score(bench, &traj);
                (s.smoothed_objective, rollout_violation(bench, &traj))
            }
            None => (f64::INFINITY, f64::INFINITY),
        }
    };

    let mut bounds = Vec::with_capacity(spec.steps * m);
    for _ in 0..spec.steps {
        bounds.extend_from_slice(&spec.control_bounds);
    }
    let settings = config.mads_settings(Some(bounds), None);
    let x0 = vec![0.0; spec.steps * m];
    let outcome = mads::solve(&blackbox, &x0, &settings);

    let best_controls = outcome
        .best_feasible
        .as_ref()
        .map(|(p, _)| p.clone())
        .or_else(|| outcome.best_infeasible.as_ref().map(|(p, _, _)| p.clone()))
        .unwrap_or(x0);
    let trajectory = rollout(bench, &best_controls).unwrap_or_else(|| init.clone());
    let scores = score(bench, &trajectory);
    let infeasibility = rollout_violation(bench, &trajectory);

    let mut metadata = base_metadata(bench, config);
    metadata["variables"] = serde_json::json!(spec.steps * m);
    metadata["termination"] = serde_json::json!(mads_status_label(&outcome));

    let record = RunRecord {
        benchmark: bench.id.name().into(),
        method: "dfbbo".into(),
        lambda: None,
        n_steps: spec.steps,
        seed: config.seed,
        budget: config.budget,
        config_hash: stable_hash(&(config, &bench.params)),
        initialization_hash: trajectory_hash(&init),
        smoothed_objective: scores.smoothed_objective,
        true_objective: scores.true_objective,
        true_mayer: scores.true_mayer,
        lagrange: scores.lagrange,
        infeasibility,
        evaluations: outcome.evaluations,
        solver_status: mads_status_label(&outcome).into(),
        degraded: outcome.best_feasible.is_none(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        trajectory_file: None,
        history_file: None,
        metadata,
    };
    RunOutput {
        record,
        trajectory,
        time_step: bench.spec.time_step(),
        history_csv: Some(outcome.history_csv()),
    }
}

/// Hybrid method: the direct search proposes knot states, each evaluated by
/// solving the smooth segment subproblems between consecutive knots.
pub fn run_hybrid(bench: &Benchmark, lambda: &LambdaChoice, config: &RunConfig) -> RunOutput {
    let start = Instant::now();
    let init = uncontrolled_trajectory(&bench.spec);

    let blackbox = HybridBlackbox::new(bench, lambda, config).expect("valid knot choice");
    let knots = blackbox.knots().clone();
    let n = blackbox.spec().state_dim;

    let x0: Vec<f64> = knots
        .indices()
        .iter()
        .flat_map(|&k| init.states[k].clone())
        .collect();

    let per_knot_bounds = knot_bounds(bench);
    let per_knot_scale = knot_scale(bench);
    let mut bounds = Vec::with_capacity(knots.segment_count() * n);
    let mut scale = Vec::with_capacity(knots.segment_count() * n);
    for _ in 0..knots.segment_count() {
        bounds.extend_from_slice(&per_knot_bounds);
        scale.extend_from_slice(&per_knot_scale);
    }
    let settings = config.mads_settings(Some(bounds.clone()), Some(scale.clone()));
    let outcome = mads::solve(&blackbox, &x0, &settings);

    let best_point = outcome
        .best_feasible
        .as_ref()
        .map(|(p, _)| p.clone())
        .or_else(|| outcome.best_infeasible.as_ref().map(|(p, _, _)| p.clone()))
        .unwrap_or(x0);
    let stitched = blackbox
        .stitch_at(&best_point)
        .expect("best point was evaluated");
    let trajectory = stitched.trajectory.clone();
    let scores = score(bench, &trajectory);

    let mut metadata = base_metadata(bench, config);
    metadata["lambda"] = serde_json::json!(knots.indices());
    metadata["knot_bounds"] = serde_json::json!(per_knot_bounds);
    metadata["knot_scale"] = serde_json::json!(per_knot_scale);
    metadata["warm_start"] = serde_json::json!("incumbent segment solutions, refreshed per iteration");
    metadata["termination"] = serde_json::json!(mads_status_label(&outcome));
    metadata["cache_entries"] = serde_json::json!(blackbox.cache_len());
    if blackbox.folded_midtime_cost() {
        metadata["midtime_term"] =
            serde_json::json!("folded into the single segment objective (smoothed)");
    }

    let record = RunRecord {
        benchmark: bench.id.name().into(),
        method: "hybrid".into(),
        lambda: Some(knots.indices().to_vec()),
        n_steps: bench.spec.steps,
        seed: config.seed,
        budget: config.budget,
        config_hash: stable_hash(&(config, &bench.params, knots.indices())),
        initialization_hash: trajectory_hash(&init),
        smoothed_objective: scores.smoothed_objective,
        true_objective: scores.true_objective,
        true_mayer: scores.true_mayer,
        lagrange: scores.lagrange,
        infeasibility: stitched.total_infeasibility,
        evaluations: outcome.evaluations,
        solver_status: mads_status_label(&outcome).into(),
        degraded: outcome.best_feasible.is_none(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        trajectory_file: None,
        history_file: None,
        metadata,
    };
    RunOutput {
        record,
        trajectory,
        time_step: bench.spec.time_step(),
        history_csv: Some(outcome.history_csv()),
    }
}

/// A finished run: the record plus the artifacts behind it.
pub struct RunOutput {
    pub record: RunRecord,
    pub trajectory: Trajectory,
    pub time_step: f64,
    pub history_csv: Option<String>,
}

impl RunOutput {
    /// Writes trajectory, history and record files under `dir`, recording
    /// the paths in the record. File names are derived from the benchmark,
    /// method and seed.
    pub fn persist(&mut self, dir: &std::path::Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let lambda_tag = self
            .record
            .lambda
            .as_ref()
            .map(|l| {
                format!(
                    "_l{}",
                    l.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
                )
            })
            .unwrap_or_default();
        let stem = format!(
            "{}_{}{}_s{}",
            self.record.benchmark, self.record.method, lambda_tag, self.record.seed
        );

        let traj_path = dir.join(format!("{stem}_trajectory.csv"));
        std::fs::write(&traj_path, self.trajectory.csv(self.time_step))?;
        self.record.trajectory_file = Some(traj_path.to_string_lossy().into_owned());

        if let Some(history) = &self.history_csv {
            let hist_path = dir.join(format!("{stem}_history.csv"));
            std::fs::write(&hist_path, history)?;
            self.record.history_file = Some(hist_path.to_string_lossy().into_owned());
        }

        let record_path = dir.join(format!("{stem}_record.json"));
        std::fs::write(
            &record_path,
            serde_json::to_string_pretty(&self.record).expect("record serializes"),
        )?;
        Ok(())
    }
}

/// One line of a comparison.
pub struct ComparisonEntry {
    pub label: String,
    pub output: RunOutput,
}

pub struct ComparisonReport {
    pub benchmark: BenchmarkId,
    pub entries: Vec<ComparisonEntry>,
}

impl ComparisonReport {
    /// Table sorted by the honest objective, one row per method.
    pub fn table_csv(&self) -> String {
        let mut rows: Vec<&ComparisonEntry> = self.entries.iter().collect();
        rows.sort_by(|a, b| {
            a.output
                .record
                .true_objective
                .partial_cmp(&b.output.record.true_objective)
                .expect("finite objectives")
        });
        let mut out = String::from(
            "method,smoothed_objective,true_objective,infeasibility,evaluations,wall_time_secs\n",
        );
        for entry in rows {
            let r = &entry.output.record;
            out.push_str(&format!(
                "{},{},{},{},{},{:.3}\n",
                entry.label,
                r.smoothed_objective,
                r.true_objective,
                r.infeasibility,
                r.evaluations,
                r.wall_time_secs
            ));
        }
        out
    }

    /// Trajectory-overlay SVG for the whole lineup.
    pub fn svg(&self, bench: &Benchmark) -> String {
        let runs: Vec<(String, Trajectory)> = self
            .entries
            .iter()
            .map(|e| (e.label.clone(), e.output.trajectory.clone()))
            .collect();
        plot::comparison_svg(bench, &runs)
    }
}

/// Which runs a comparison executes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MethodSpec {
    So,
    Dfbbo,
    Hybrid(LambdaChoice),
}

impl MethodSpec {
    pub fn label(&self) -> String {
        match self {
            MethodSpec::So => "so".into(),
            MethodSpec::Dfbbo => "dfbbo".into(),
            MethodSpec::Hybrid(l) => format!("hybrid[{}]", l.label()),
        }
    }

    pub fn default_lineup() -> Vec<MethodSpec> {
        vec![
            MethodSpec::So,
            MethodSpec::Dfbbo,
            MethodSpec::Hybrid(LambdaChoice::FullHorizon),
            MethodSpec::Hybrid(LambdaChoice::Halves),
        ]
    }

    pub fn run(&self, bench: &Benchmark, config: &RunConfig) -> RunOutput {
        match self {
            MethodSpec::So => run_so(bench, config),
            MethodSpec::Dfbbo => run_dfbbo(bench, config),
            MethodSpec::Hybrid(lambda) => run_hybrid(bench, lambda, config),
        }
    }
}

/// Runs every requested method from the identical uncontrolled
/// initialization (asserted via the initialization hash in each record).
pub fn compare(bench: &Benchmark, methods: &[MethodSpec], config: &RunConfig) -> ComparisonReport {
    let mut entries = Vec::with_capacity(methods.len());
    for method in methods {
        let output = method.run(bench, config);
        entries.push(ComparisonEntry {
            label: method.label(),
            output,
        });
    }
    let first_init = entries[0].output.record.initialization_hash.clone();
    for e in &entries {
        assert_eq!(
            e.output.record.initialization_hash, first_init,
            "all methods must share the uncontrolled initialization"
        );
    }
    ComparisonReport {
        benchmark: bench.id,
        entries,
    }
}
