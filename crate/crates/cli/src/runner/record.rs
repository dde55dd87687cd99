//! Run records: what a method run produced, serialized as JSON.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use plateau_core::ocp::Trajectory;

/// Everything one method run produced. The true objective re-evaluates the
/// raw floor terminal cost on the returned trajectory — the honest score, as
/// opposed to the smoothed objective the method optimized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub benchmark: String,
    pub method: String,
    pub lambda: Option<Vec<usize>>,
    pub n_steps: usize,
    pub seed: u64,
    pub budget: usize,
    pub config_hash: String,
    /// Hash of the shared uncontrolled initialization; equal across methods
    /// of one comparison.
    pub initialization_hash: String,
    pub smoothed_objective: f64,
    pub true_objective: f64,
    pub true_mayer: f64,
    pub lagrange: f64,
    pub infeasibility: f64,
    pub evaluations: usize,
    pub solver_status: String,
    /// Set when the run ended without a converged/feasible solution; drives
    /// the process exit code.
    pub degraded: bool,
    pub wall_time_secs: f64,
    pub trajectory_file: Option<String>,
    pub history_file: Option<String>,
    pub metadata: serde_json::Value,
}

impl RunRecord {
    /// Stable JSON form for determinism comparisons: wall time and output
    /// paths are masked, everything else is bit-relevant.
    pub fn canonical_json(&self) -> String {
        let mut clone = self.clone();
        clone.wall_time_secs = 0.0;
        clone.trajectory_file = None;
        clone.history_file = None;
        serde_json::to_string_pretty(&clone).expect("record serializes")
    }
}

/// Deterministic hex hash of any serializable configuration.
pub fn stable_hash(value: &impl Serialize) -> String {
    let json = serde_json::to_string(value).expect("config serializes");
    let mut hasher = DefaultHasher::new();
    json.hash(&mut hasher);
    format!("{:016x}", hasher.finish())
}

/// Hash of a trajectory's exact bit patterns.
pub fn trajectory_hash(trajectory: &Trajectory) -> String {
    let mut hasher = DefaultHasher::new();
    for state in &trajectory.states {
        for v in state {
            v.to_bits().hash(&mut hasher);
        }
    }
    for control in &trajectory.controls {
        for v in control {
            v.to_bits().hash(&mut hasher);
        }
    }
    format!("{:016x}", hasher.finish())
}
