//! The hybrid method's blackbox: proposed knot states in, the stitched
//! (objective, infeasibility) pair out, with a cache keyed by the quantized
//! knot vector and warm starts refreshed from the incumbent.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use plateau_core::benchmarks::{Benchmark, BenchmarkId, BenchmarkParams, WeightedNorm};
use plateau_core::error::Result;
use plateau_core::mads::MadsBlackbox;
use plateau_core::ocp::{stitch, ExtraStateCost, KnotSet, OcpSpec, StitchOptions, StitchResult};
use plateau_core::smoothing::FloorApprox;

use super::{LambdaChoice, RunConfig};

/// Knot vectors are quantized to this resolution for cache lookups, matching
/// the two-phase evaluator's convention.
const CACHE_QUANTUM: f64 = plateau_core::problem::CACHE_QUANTUM;

pub struct HybridBlackbox {
    spec: OcpSpec,
    knots: KnotSet,
    options: StitchOptions,
    folded_midtime: bool,
    cache: Mutex<HashMap<Vec<i64>, Arc<StitchResult>>>,
    /// Per-segment warm starts, refreshed when the incumbent changes (at
    /// iteration boundaries, so concurrent poll evaluations in one batch all
    /// see the same snapshot).
    warm: Mutex<Option<Vec<Vec<f64>>>>,
}

impl HybridBlackbox {
    /// Builds the blackbox for a knot choice.
    ///
    /// The two-target river problem with only the final state as a knot
    /// cannot carry its midtime cost index as a knot; to still field this
    /// (deliberately handicapped) variant, the midtime term is folded
    /// (smoothed) into the single segment's objective and the effective
    /// terminal cost reads the final state alone.
    pub fn new(bench: &Benchmark, lambda: &LambdaChoice, config: &RunConfig) -> Result<Self> {
        let mut spec = bench.spec.clone();
        let mut extras: Vec<ExtraStateCost> = Vec::new();
        let mut folded_midtime = false;

        if bench.id == BenchmarkId::ZermeloTwo && matches!(lambda, LambdaChoice::FullHorizon) {
            if let BenchmarkParams::ZermeloTwo(p) = &bench.params {
                let steps = spec.steps;
                let norm_a = WeightedNorm::new(p.final_weights);
                let norm_b = WeightedNorm::new(p.midtime_weights);
                let floor_a = FloorApprox::new(plateau_core::benchmarks::SMOOTHING_TAU, 0, 25);
                let floor_b = FloorApprox::new(plateau_core::benchmarks::SMOOTHING_TAU, 0, 25);
                let (fa, fb) = (p.final_target, p.midtime_target);
                spec.mayer = Arc::new(move |xs: &[Vec<f64>]| {
                    floor_a.value(norm_a.eval(xs[0][0] - fa[0], xs[0][1] - fa[1]))
                });
                spec.mayer_indices = vec![steps];
                extras.push(ExtraStateCost {
                    index: steps / 2,
                    cost: Arc::new(move |x: &[f64]| {
                        floor_b.value(norm_b.eval(x[0] - fb[0], x[1] - fb[1]))
                    }),
                });
                folded_midtime = true;
            }
        }

        let knots = match lambda {
            LambdaChoice::FullHorizon => KnotSet::full_horizon(&spec)?,
            LambdaChoice::Halves => KnotSet::halves(&spec)?,
            LambdaChoice::Explicit(indices) => KnotSet::new(indices.clone(), &spec)?,
        };

        let options = StitchOptions {
            two_phase: config.hybrid_two_phase(),
            exec: config.exec,
            extras,
        };

        Ok(Self {
            spec,
            knots,
            options,
            folded_midtime,
            cache: Mutex::new(HashMap::new()),
            warm: Mutex::new(None),
        })
    }

    pub fn spec(&self) -> &OcpSpec {
        &self.spec
    }

    pub fn knots(&self) -> &KnotSet {
        &self.knots
    }

    pub fn folded_midtime_cost(&self) -> bool {
        self.folded_midtime
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    fn key(point: &[f64]) -> Vec<i64> {
        point
            .iter()
            .map(|v| (v / CACHE_QUANTUM).round() as i64)
            .collect()
    }

    fn knot_states(&self, point: &[f64]) -> Vec<Vec<f64>> {
        let n = self.spec.state_dim;
        point.chunks(n).map(<[f64]>::to_vec).collect()
    }

    /// Stitched evaluation at a flat knot vector, cached.
    pub fn stitch_at(&self, point: &[f64]) -> Result<Arc<StitchResult>> {
        let key = Self::key(point);
        if let Some(hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(Arc::clone(hit));
        }
        let warm_snapshot = self.warm.lock().unwrap().clone();
        let result = Arc::new(stitch(
            &self.spec,
            &self.knots,
            &self.knot_states(point),
            warm_snapshot.as_deref(),
            &self.options,
        )?);
        self.cache
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| Arc::clone(&result));
        Ok(result)
    }
}

impl MadsBlackbox for HybridBlackbox {
    fn eval(&self, point: &[f64]) -> (f64, f64) {
        match self.stitch_at(point) {
            Ok(result) => (result.objective, result.total_infeasibility),
            Err(err) => {
                log::debug!("stitched evaluation failed: {err}");
                (f64::INFINITY, f64::INFINITY)
            }
        }
    }

    fn on_incumbent(&self, point: &[f64]) {
        if let Some(result) = self.cache.lock().unwrap().get(&Self::key(point)) {
            let segments: Vec<Vec<f64>> = result
                .segments
                .iter()
                .map(|s| s.smooth_minimizer.clone())
                .collect();
            *self.warm.lock().unwrap() = Some(segments);
        }
    }
}
