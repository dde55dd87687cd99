//! Flat constrained problems from control problems: the full transcription
//! over all states and controls, and knot-to-knot segment subproblems with
//! fixed endpoint states.
//!
//! Both share the variable convention "interior states first, then
//! controls", one defect equality block per step, one path-constraint block
//! per step, and box bounds on the controls only. Defect blocks carry exact
//! weighted gradients through the Runge-Kutta stages, which keeps the
//! augmented-Lagrangian iterations cheap on long horizons.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::problem::{Bound, ConstraintBlock, ConstraintKind, NlpProblem};

use super::rk4;
use super::{ExtraStateCost, OcpSpec, Trajectory};

/// Central-difference step for cost terms without analytic gradients.
const COST_FD_STEP: f64 = 1e-6;

/// Variable layout of a segment from step `start` to step `end`: interior
/// states `x_{start+1}..x_{end-1}` first, then controls `u_start..u_{end-1}`.
#[derive(Debug, Clone, Copy)]
pub struct SegmentLayout {
    n: usize,
    m: usize,
    start: usize,
    end: usize,
}

impl SegmentLayout {
    pub fn new(spec: &OcpSpec, start: usize, end: usize) -> Self {
        Self {
            n: spec.state_dim,
            m: spec.control_dim,
            start,
            end,
        }
    }

    pub fn step_count(&self) -> usize {
        self.end - self.start
    }

    pub fn dimension(&self) -> usize {
        (self.step_count() - 1) * self.n + self.step_count() * self.m
    }

    /// Flat offset of interior state `x_k`, `start < k < end`.
    pub fn state_offset(&self, k: usize) -> usize {
        debug_assert!(k > self.start && k < self.end);
        (k - self.start - 1) * self.n
    }

    /// Flat offset of control `u_k`, `start <= k < end`.
    pub fn control_offset(&self, k: usize) -> usize {
        debug_assert!(k >= self.start && k < self.end);
        (self.step_count() - 1) * self.n + (k - self.start) * self.m
    }
}

/// Borrow of the state at step `k` from segment variables or endpoint data.
fn segment_state<'a>(
    layout: &SegmentLayout,
    z: &'a [f64],
    x_start: &'a [f64],
    x_end: &'a [f64],
    k: usize,
) -> &'a [f64] {
    if k == layout.start {
        x_start
    } else if k == layout.end {
        x_end
    } else {
        let o = layout.state_offset(k);
        &z[o..o + layout.n]
    }
}

fn stage_cost_gradients(
    spec: &OcpSpec,
    t: f64,
    x: &[f64],
    u: &[f64],
    gx: &mut [f64],
    gu: &mut [f64],
) {
    if let Some(grad) = &spec.lagrange_gradient {
        grad(t, x, u, gx, gu);
        return;
    }
    let mut xs = x.to_vec();
    for i in 0..x.len() {
        let h = COST_FD_STEP * xs[i].abs().max(1.0);
        let orig = xs[i];
        xs[i] = orig + h;
        let fp = (spec.lagrange)(t, &xs, u);
        xs[i] = orig - h;
        let fm = (spec.lagrange)(t, &xs, u);
        xs[i] = orig;
        gx[i] = (fp - fm) / (2.0 * h);
    }
    let mut us = u.to_vec();
    for j in 0..u.len() {
        let h = COST_FD_STEP * us[j].abs().max(1.0);
        let orig = us[j];
        us[j] = orig + h;
        let fp = (spec.lagrange)(t, x, &us);
        us[j] = orig - h;
        let fm = (spec.lagrange)(t, x, &us);
        us[j] = orig;
        gu[j] = (fp - fm) / (2.0 * h);
    }
}

/// Gradient of a scalar state cost by central differences.
fn state_cost_gradient_fd(cost: &super::StateCostFn, x: &[f64], g: &mut [f64]) {
    let mut xs = x.to_vec();
    for i in 0..x.len() {
        let h = COST_FD_STEP * xs[i].abs().max(1.0);
        let orig = xs[i];
        xs[i] = orig + h;
        let fp = cost(&xs);
        xs[i] = orig - h;
        let fm = cost(&xs);
        xs[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
}

/// The subproblem steering from a fixed state at `start` to a fixed state at
/// `end` with minimal running cost.
///
/// Variables are the interior states and all controls over the segment; the
/// defect at `end - 1` pins the trajectory to `x_end`, so unreachable
/// endpoint states surface as violation rather than as an error. No terminal
/// cost or terminal constraint appears here. `extras` attaches additional
/// costs on interior states (each index must be strictly inside the
/// segment).
pub fn segment_subproblem(
    spec: &OcpSpec,
    start: usize,
    x_start: &[f64],
    end: usize,
    x_end: &[f64],
    extras: &[ExtraStateCost],
) -> Result<NlpProblem> {
    if end <= start {
        return Err(Error::InvalidSegment { start, end });
    }
    if end > spec.steps {
        return Err(Error::InvalidSegment {
            start,
            end: spec.steps,
        });
    }
    if x_start.len() != spec.state_dim || x_end.len() != spec.state_dim {
        return Err(Error::DimensionMismatch {
            context: "segment endpoint state",
            expected: spec.state_dim,
            actual: x_start.len().max(x_end.len()),
        });
    }
    for e in extras {
        if e.index <= start || e.index >= end {
            return Err(Error::InvalidKnotSet(format!(
                "extra cost index {} outside segment ({start}, {end})",
                e.index
            )));
        }
    }

    let spec = Arc::new(spec.clone());
    let layout = SegmentLayout::new(&spec, start, end);
    let x_start: Arc<Vec<f64>> = Arc::new(x_start.to_vec());
    let x_end: Arc<Vec<f64>> = Arc::new(x_end.to_vec());
    let extras: Arc<Vec<ExtraStateCost>> = Arc::new(extras.to_vec());
    let dt = spec.time_step();

    let objective = {
        let spec = Arc::clone(&spec);
        let x_start = Arc::clone(&x_start);
        let x_end = Arc::clone(&x_end);
        let extras = Arc::clone(&extras);
        Arc::new(move |z: &[f64]| -> f64 {
            let mut total = 0.0;
            for k in start..end {
                let x = segment_state(&layout, z, &x_start, &x_end, k);
                let o = layout.control_offset(k);
                let u = &z[o..o + layout.m];
                total += dt * (spec.lagrange)(spec.time_at(k), x, u);
            }
            for e in extras.iter() {
                let o = layout.state_offset(e.index);
                total += (e.cost)(&z[o..o + layout.n]);
            }
            total
        })
    };

    let gradient = {
        let spec = Arc::clone(&spec);
        let x_start = Arc::clone(&x_start);
        let x_end = Arc::clone(&x_end);
        let extras = Arc::clone(&extras);
        Arc::new(move |z: &[f64], g: &mut [f64]| {
            g.fill(0.0);
            let mut gx = vec![0.0; layout.n];
            let mut gu = vec![0.0; layout.m];
            for k in start..end {
                let x = segment_state(&layout, z, &x_start, &x_end, k);
                let o = layout.control_offset(k);
                let u = &z[o..o + layout.m];
                stage_cost_gradients(&spec, spec.time_at(k), x, u, &mut gx, &mut gu);
                if k > start {
                    let so = layout.state_offset(k);
                    for i in 0..layout.n {
                        g[so + i] += dt * gx[i];
                    }
                }
                for j in 0..layout.m {
                    g[o + j] += dt * gu[j];
                }
            }
            let mut ge = vec![0.0; layout.n];
            for e in extras.iter() {
                let o = layout.state_offset(e.index);
                state_cost_gradient_fd(&e.cost, &z[o..o + layout.n], &mut ge);
                for i in 0..layout.n {
                    g[o + i] += ge[i];
                }
            }
        })
    };

    let mut problem =
        NlpProblem::new(layout.dimension(), objective).with_gradient(gradient);

    // one defect equality block per step
    for k in start..end {
        let values = {
            let spec = Arc::clone(&spec);
            let x_start = Arc::clone(&x_start);
            let x_end = Arc::clone(&x_end);
            Arc::new(move |z: &[f64], out: &mut [f64]| {
                let x = segment_state(&layout, z, &x_start, &x_end, k);
                let o = layout.control_offset(k);
                let u = &z[o..o + layout.m];
                rk4::step_into(&spec, spec.time_at(k), dt, x, u, out);
                let x_next = segment_state(&layout, z, &x_start, &x_end, k + 1);
                for i in 0..layout.n {
                    out[i] = x_next[i] - out[i];
                }
            })
        };
        let weighted_gradient = {
            let spec = Arc::clone(&spec);
            let x_start = Arc::clone(&x_start);
            let x_end = Arc::clone(&x_end);
            Arc::new(move |z: &[f64], w: &[f64], g: &mut [f64]| {
                let x = segment_state(&layout, z, &x_start, &x_end, k);
                let o = layout.control_offset(k);
                let u = &z[o..o + layout.m];
                let step = rk4::step_with_jacobian(&spec, spec.time_at(k), dt, x, u);
                if k + 1 < end {
                    let so = layout.state_offset(k + 1);
                    for i in 0..layout.n {
                        g[so + i] += w[i];
                    }
                }
                if k > start {
                    let so = layout.state_offset(k);
                    for j in 0..layout.n {
                        let mut acc = 0.0;
                        for i in 0..layout.n {
                            acc += w[i] * step.dphi_dx[i * layout.n + j];
                        }
                        g[so + j] -= acc;
                    }
                }
                for j in 0..layout.m {
                    let mut acc = 0.0;
                    for i in 0..layout.n {
                        acc += w[i] * step.dphi_du[i * layout.m + j];
                    }
                    g[o + j] -= acc;
                }
            })
        };
        problem = problem.with_block(
            ConstraintBlock::new(
                ConstraintKind::Equality,
                layout.n,
                format!("defect[{k}]"),
                values,
            )
            .with_weighted_gradient(weighted_gradient),
        );
    }

    problem = attach_path_blocks(problem, &spec, layout, &x_start, &x_end);

    let mut bounds = vec![Bound::FREE; layout.dimension()];
    for k in start..end {
        let o = layout.control_offset(k);
        bounds[o..o + layout.m].copy_from_slice(&spec.control_bounds);
    }
    Ok(problem.with_bounds(bounds))
}

/// Per-step path-constraint blocks over the segment variables.
fn attach_path_blocks(
    mut problem: NlpProblem,
    spec: &Arc<OcpSpec>,
    layout: SegmentLayout,
    x_start: &Arc<Vec<f64>>,
    x_end: &Arc<Vec<f64>>,
) -> NlpProblem {
    if spec.path_constraints.is_empty() {
        return problem;
    }
    let d = spec.path_constraints.len();
    let all_gradients = spec.path_constraints.iter().all(|c| c.gradient.is_some());
    for k in layout.start..layout.end {
        let values = {
            let spec = Arc::clone(spec);
            let x_start = Arc::clone(x_start);
            let x_end = Arc::clone(x_end);
            Arc::new(move |z: &[f64], out: &mut [f64]| {
                let x = segment_state(&layout, z, &x_start, &x_end, k);
                let o = layout.control_offset(k);
                let u = &z[o..o + layout.m];
                for (q, c) in spec.path_constraints.iter().enumerate() {
                    out[q] = (c.value)(spec.time_at(k), x, u);
                }
            })
        };
        let mut block = ConstraintBlock::new(
            ConstraintKind::Inequality,
            d,
            format!("path[{k}]"),
            values,
        );
        if all_gradients {
            let spec = Arc::clone(spec);
            let x_start = Arc::clone(x_start);
            let x_end = Arc::clone(x_end);
            block = block.with_weighted_gradient(Arc::new(
                move |z: &[f64], w: &[f64], g: &mut [f64]| {
                    let x = segment_state(&layout, z, &x_start, &x_end, k);
                    let o = layout.control_offset(k);
                    let u = &z[o..o + layout.m];
                    let mut gx = vec![0.0; layout.n];
                    let mut gu = vec![0.0; layout.m];
                    for (q, c) in spec.path_constraints.iter().enumerate() {
                        if w[q] == 0.0 {
                            continue;
                        }
                        let grad = c.gradient.as_ref().expect("checked above");
                        grad(spec.time_at(k), x, u, &mut gx, &mut gu);
                        if k > layout.start {
                            let so = layout.state_offset(k);
                            for i in 0..layout.n {
                                g[so + i] += w[q] * gx[i];
                            }
                        }
                        for j in 0..layout.m {
                            g[o + j] += w[q] * gu[j];
                        }
                    }
                },
            ));
        }
        problem = problem.with_block(block);
    }
    problem
}

/// The fully transcribed problem plus its variable layout.
#[derive(Clone)]
pub struct DiscretizedOcp {
    pub nlp: NlpProblem,
    spec: Arc<OcpSpec>,
}

impl DiscretizedOcp {
    pub fn spec(&self) -> &OcpSpec {
        &self.spec
    }

    pub fn flat_dimension(&self) -> usize {
        self.spec.steps * (self.spec.state_dim + self.spec.control_dim)
    }

    /// Flat index of state component `i` at step `k`, `1 <= k <= N`.
    pub fn state_index(&self, k: usize, i: usize) -> usize {
        debug_assert!(k >= 1 && k <= self.spec.steps && i < self.spec.state_dim);
        (k - 1) * self.spec.state_dim + i
    }

    /// Flat index of control component `j` at step `k`, `0 <= k < N`.
    pub fn control_index(&self, k: usize, j: usize) -> usize {
        debug_assert!(k < self.spec.steps && j < self.spec.control_dim);
        self.spec.steps * self.spec.state_dim + k * self.spec.control_dim + j
    }

    /// Flattens a trajectory into the variable vector (dropping the fixed
    /// initial state).
    pub fn pack(&self, trajectory: &Trajectory) -> Vec<f64> {
        let mut flat = vec![0.0; self.flat_dimension()];
        for k in 1..=self.spec.steps {
            for i in 0..self.spec.state_dim {
                flat[self.state_index(k, i)] = trajectory.states[k][i];
            }
        }
        for k in 0..self.spec.steps {
            for j in 0..self.spec.control_dim {
                flat[self.control_index(k, j)] = trajectory.controls[k][j];
            }
        }
        flat
    }

    /// Rebuilds the trajectory (with the fixed initial state prepended) from
    /// a flat variable vector.
    pub fn unpack(&self, flat: &[f64]) -> Trajectory {
        let mut states = Vec::with_capacity(self.spec.steps + 1);
        states.push(self.spec.initial_state.clone());
        for k in 1..=self.spec.steps {
            states.push(
                (0..self.spec.state_dim)
                    .map(|i| flat[self.state_index(k, i)])
                    .collect(),
            );
        }
        let controls = (0..self.spec.steps)
            .map(|k| {
                (0..self.spec.control_dim)
                    .map(|j| flat[self.control_index(k, j)])
                    .collect()
            })
            .collect();
        Trajectory {
            states,
            controls,
            truncated: false,
        }
    }
}

/// Transcribes the whole problem: variables are all states and controls,
/// defects and path constraints appear per step, the terminal cost reads the
/// states at the cost indices, and terminal constraints bind the final
/// state.
pub fn transcribe_full(spec: &OcpSpec) -> DiscretizedOcp {
    spec.validate();
    let spec = Arc::new(spec.clone());
    let n = spec.state_dim;
    let m = spec.control_dim;
    let steps = spec.steps;
    let dt = spec.time_step();
    let state_base = 0usize;
    let control_base = steps * n;
    let state_of = move |k: usize| state_base + (k - 1) * n;
    let control_of = move |k: usize| control_base + k * m;

    let gather_mayer_inputs = {
        let spec = Arc::clone(&spec);
        move |flat: &[f64]| -> Vec<Vec<f64>> {
            spec.mayer_indices
                .iter()
                .map(|&k| flat[state_of(k)..state_of(k) + n].to_vec())
                .collect()
        }
    };

    let objective = {
        let spec = Arc::clone(&spec);
        let gather = gather_mayer_inputs.clone();
        Arc::new(move |flat: &[f64]| -> f64 {
            let mut total = (spec.mayer)(&gather(flat));
            for k in 0..steps {
                let x = if k == 0 {
                    &spec.initial_state[..]
                } else {
                    &flat[state_of(k)..state_of(k) + n]
                };
                let u = &flat[control_of(k)..control_of(k) + m];
                total += dt * (spec.lagrange)(spec.time_at(k), x, u);
            }
            total
        })
    };

    let gradient = {
        let spec = Arc::clone(&spec);
        let gather = gather_mayer_inputs.clone();
        Arc::new(move |flat: &[f64], g: &mut [f64]| {
            g.fill(0.0);
            let mut gx = vec![0.0; n];
            let mut gu = vec![0.0; m];
            for k in 0..steps {
                let x = if k == 0 {
                    &spec.initial_state[..]
                } else {
                    &flat[state_of(k)..state_of(k) + n]
                };
                let u = &flat[control_of(k)..control_of(k) + m];
                stage_cost_gradients(&spec, spec.time_at(k), x, u, &mut gx, &mut gu);
                if k > 0 {
                    for i in 0..n {
                        g[state_of(k) + i] += dt * gx[i];
                    }
                }
                for j in 0..m {
                    g[control_of(k) + j] += dt * gu[j];
                }
            }
            // terminal-cost gradient by central differences on the states it
            // reads
            let mut inputs = gather(flat);
            for (a, &k) in spec.mayer_indices.iter().enumerate() {
                for i in 0..n {
                    let h = COST_FD_STEP * inputs[a][i].abs().max(1.0);
                    let orig = inputs[a][i];
                    inputs[a][i] = orig + h;
                    let fp = (spec.mayer)(&inputs);
                    inputs[a][i] = orig - h;
                    let fm = (spec.mayer)(&inputs);
                    inputs[a][i] = orig;
                    g[state_of(k) + i] += (fp - fm) / (2.0 * h);
                }
            }
        })
    };

    let mut problem = NlpProblem::new(steps * (n + m), objective).with_gradient(gradient);

    for k in 0..steps {
        let values = {
            let spec = Arc::clone(&spec);
            Arc::new(move |flat: &[f64], out: &mut [f64]| {
                let x = if k == 0 {
                    &spec.initial_state[..]
                } else {
                    &flat[state_of(k)..state_of(k) + n]
                };
                let u = &flat[control_of(k)..control_of(k) + m];
                rk4::step_into(&spec, spec.time_at(k), dt, x, u, out);
                for i in 0..n {
                    out[i] = flat[state_of(k + 1) + i] - out[i];
                }
            })
        };
        let weighted_gradient = {
            let spec = Arc::clone(&spec);
            Arc::new(move |flat: &[f64], w: &[f64], g: &mut [f64]| {
                let x = if k == 0 {
                    &spec.initial_state[..]
                } else {
                    &flat[state_of(k)..state_of(k) + n]
                };
                let u = &flat[control_of(k)..control_of(k) + m];
                let step = rk4::step_with_jacobian(&spec, spec.time_at(k), dt, x, u);
                for i in 0..n {
                    g[state_of(k + 1) + i] += w[i];
                }
                if k > 0 {
                    for j in 0..n {
                        let mut acc = 0.0;
                        for i in 0..n {
                            acc += w[i] * step.dphi_dx[i * n + j];
                        }
                        g[state_of(k) + j] -= acc;
                    }
                }
                for j in 0..m {
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += w[i] * step.dphi_du[i * m + j];
                    }
                    g[control_of(k) + j] -= acc;
                }
            })
        };
        problem = problem.with_block(
            ConstraintBlock::new(
                ConstraintKind::Equality,
                n,
                format!("defect[{k}]"),
                values,
            )
            .with_weighted_gradient(weighted_gradient),
        );
    }

    if !spec.path_constraints.is_empty() {
        let d = spec.path_constraints.len();
        let all_gradients = spec.path_constraints.iter().all(|c| c.gradient.is_some());
        for k in 0..steps {
            let values = {
                let spec = Arc::clone(&spec);
                Arc::new(move |flat: &[f64], out: &mut [f64]| {
                    let x = if k == 0 {
                        &spec.initial_state[..]
                    } else {
                        &flat[state_of(k)..state_of(k) + n]
                    };
                    let u = &flat[control_of(k)..control_of(k) + m];
                    for (q, c) in spec.path_constraints.iter().enumerate() {
                        out[q] = (c.value)(spec.time_at(k), x, u);
                    }
                })
            };
            let mut block = ConstraintBlock::new(
                ConstraintKind::Inequality,
                d,
                format!("path[{k}]"),
                values,
            );
            if all_gradients {
                let spec = Arc::clone(&spec);
                block = block.with_weighted_gradient(Arc::new(
                    move |flat: &[f64], w: &[f64], g: &mut [f64]| {
                        let x = if k == 0 {
                            &spec.initial_state[..]
                        } else {
                            &flat[state_of(k)..state_of(k) + n]
                        };
                        let u = &flat[control_of(k)..control_of(k) + m];
                        let mut gx = vec![0.0; n];
                        let mut gu = vec![0.0; m];
                        for (q, c) in spec.path_constraints.iter().enumerate() {
                            if w[q] == 0.0 {
                                continue;
                            }
                            let grad = c.gradient.as_ref().expect("checked above");
                            grad(spec.time_at(k), x, u, &mut gx, &mut gu);
                            if k > 0 {
                                for i in 0..n {
                                    g[state_of(k) + i] += w[q] * gx[i];
                                }
                            }
                            for j in 0..m {
                                g[control_of(k) + j] += w[q] * gu[j];
                            }
                        }
                    },
                ));
            }
            problem = problem.with_block(block);
        }
    }

    // terminal constraints on the final state, one block per kind
    for kind in [ConstraintKind::Inequality, ConstraintKind::Equality] {
        let members: Vec<usize> = spec
            .terminal_constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == kind)
            .map(|(idx, _)| idx)
            .collect();
        if members.is_empty() {
            continue;
        }
        let label = match kind {
            ConstraintKind::Inequality => "terminal-ineq",
            ConstraintKind::Equality => "terminal-eq",
        };
        let values = {
            let spec = Arc::clone(&spec);
            let members = members.clone();
            Arc::new(move |flat: &[f64], out: &mut [f64]| {
                let x_final = &flat[state_of(steps)..state_of(steps) + n];
                for (slot, &idx) in members.iter().enumerate() {
                    out[slot] = (spec.terminal_constraints[idx].value)(x_final);
                }
            })
        };
        let all_gradients = members
            .iter()
            .all(|&idx| spec.terminal_constraints[idx].gradient.is_some());
        let mut block = ConstraintBlock::new(kind, members.len(), label, values);
        if all_gradients {
            let spec = Arc::clone(&spec);
            let members = members.clone();
            block = block.with_weighted_gradient(Arc::new(
                move |flat: &[f64], w: &[f64], g: &mut [f64]| {
                    let x_final = &flat[state_of(steps)..state_of(steps) + n];
                    let mut gx = vec![0.0; n];
                    for (slot, &idx) in members.iter().enumerate() {
                        if w[slot] == 0.0 {
                            continue;
                        }
                        let grad = spec.terminal_constraints[idx]
                            .gradient
                            .as_ref()
                            .expect("checked above");
                        grad(x_final, &mut gx);
                        for i in 0..n {
                            g[state_of(steps) + i] += w[slot] * gx[i];
                        }
                    }
                },
            ));
        }
        problem = problem.with_block(block);
    }

    let mut bounds = vec![Bound::FREE; steps * (n + m)];
    for k in 0..steps {
        bounds[control_of(k)..control_of(k) + m].copy_from_slice(&spec.control_bounds);
    }
    let nlp = problem.with_bounds(bounds);

    DiscretizedOcp { nlp, spec }
}
