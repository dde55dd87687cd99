//! The benchmark control problems driven by the CLI, plus the analytic
//! counterexample problems used by the self-test suite.
//!
//! Every benchmark couples smooth dynamics and running cost with a terminal
//! cost truncated by the floor function. The constructors build the smoothed
//! problem every method optimizes (floor replaced by the C-infinity
//! approximation at `tau = 75`) and keep the raw floor version alongside for
//! honest scoring. All parameters default to the reference values and are
//! overridable; constructed problems echo their parameters.
//!
//! The river stream field is a reconstruction: only its qualitative
//! properties are documented (shore-repelling cross flow, midstream drift
//! too strong for the unit motor, uncontrolled drift to the midline), so the
//! concrete formula here is one choice satisfying them, flagged as such in
//! run metadata.

mod counterexamples;

pub use counterexamples::{Counterexample, CounterexampleCase};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::{map_indices, ExecMode};
use crate::ocp::{segment_feasibility, MayerFn, OcpSpec, PathConstraint, TerminalConstraint};
use crate::problem::{Bound, ConstraintKind, TwoPhaseSettings};
use crate::smoothing::FloorApprox;

/// Strengthening factor shared by every benchmark's floor smoothing.
pub const SMOOTHING_TAU: f64 = 75.0;

/// Norm weighted per component: `|X|_w = sqrt(sum (w_i X_i)^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorm {
    pub weights: [f64; 2],
}

impl WeightedNorm {
    pub fn new(weights: [f64; 2]) -> Self {
        Self { weights }
    }

    pub fn eval(&self, dx: f64, dy: f64) -> f64 {
        let a = self.weights[0] * dx;
        let b = self.weights[1] * dy;
        (a * a + b * b).sqrt()
    }
}

/// River stream: a horizontal drift, strongest midstream and vanishing at
/// the shores, plus a cross-stream component pushing toward the midline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamField {
    pub y_max: f64,
    /// Midstream drift magnitude; above 1 the unit motor cannot fight it.
    pub peak_speed: f64,
    /// Cross-stream strength at the shores.
    pub cross_strength: f64,
}

impl Default for StreamField {
    fn default() -> Self {
        Self {
            y_max: 6.0,
            peak_speed: 3.0,
            cross_strength: 0.5,
        }
    }
}

impl StreamField {
    pub fn velocity(&self, _x: f64, y: f64) -> (f64, f64) {
        let s1 = -self.peak_speed * 4.0 * y * (self.y_max - y) / (self.y_max * self.y_max);
        let s2 = self.cross_strength * (1.0 - 2.0 * y / self.y_max);
        (s1, s2)
    }

    /// Partials of both components with respect to `y` (none depend on `x`).
    pub fn jacobian_y(&self, _x: f64, y: f64) -> (f64, f64) {
        let ds1 = -self.peak_speed * 4.0 * (self.y_max - 2.0 * y) / (self.y_max * self.y_max);
        let ds2 = -2.0 * self.cross_strength / self.y_max;
        (ds1, ds2)
    }
}

/// One smoothed floor term of a terminal cost, kept for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingTerm {
    pub label: &'static str,
    pub tau: f64,
    pub a: i64,
    pub b: i64,
}

/// Plateau geometry of a terminal cost, for plotting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlateauFamily {
    /// Cost constant on bands `[q w, (q+1) w)` of one state component.
    Bands { state_index: usize, width: f64 },
    /// Cost constant on rings of the weighted distance to a center.
    Rings { center: [f64; 2], weights: [f64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BenchmarkId {
    #[serde(rename = "harmonic-oscillator")]
    HarmonicOscillator,
    #[serde(rename = "zermelo1")]
    ZermeloOne,
    #[serde(rename = "zermelo2")]
    ZermeloTwo,
    #[serde(rename = "lotka-volterra")]
    LotkaVolterra,
}

impl BenchmarkId {
    pub fn all() -> [BenchmarkId; 4] {
        [
            BenchmarkId::HarmonicOscillator,
            BenchmarkId::ZermeloOne,
            BenchmarkId::ZermeloTwo,
            BenchmarkId::LotkaVolterra,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            BenchmarkId::HarmonicOscillator => "harmonic-oscillator",
            BenchmarkId::ZermeloOne => "zermelo1",
            BenchmarkId::ZermeloTwo => "zermelo2",
            BenchmarkId::LotkaVolterra => "lotka-volterra",
        }
    }
}

impl std::str::FromStr for BenchmarkId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "harmonic-oscillator" | "ho" => Ok(BenchmarkId::HarmonicOscillator),
            "zermelo1" | "z1" => Ok(BenchmarkId::ZermeloOne),
            "zermelo2" | "z2" => Ok(BenchmarkId::ZermeloTwo),
            "lotka-volterra" | "lv" => Ok(BenchmarkId::LotkaVolterra),
            other => Err(format!(
                "unknown benchmark '{other}' (expected harmonic-oscillator, zermelo1, zermelo2 or lotka-volterra)"
            )),
        }
    }
}

impl std::fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Typed parameter echo of a constructed benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BenchmarkParams {
    HarmonicOscillator(HarmonicOscillatorParams),
    ZermeloOne(ZermeloOneParams),
    ZermeloTwo(ZermeloTwoParams),
    LotkaVolterra(LotkaVolterraParams),
}

/// A benchmark problem: the smoothed problem all methods optimize, the raw
/// floor terminal cost for honest scoring, and reporting metadata.
#[derive(Clone)]
pub struct Benchmark {
    pub id: BenchmarkId,
    pub spec: OcpSpec,
    /// Terminal cost with the raw floor, evaluated on the same state list as
    /// `spec.mayer`.
    pub true_mayer: MayerFn,
    pub params: BenchmarkParams,
    pub smoothing: Vec<SmoothingTerm>,
    pub plateaus: Vec<PlateauFamily>,
}

impl Benchmark {
    /// True (unsmoothed) terminal cost of a trajectory.
    pub fn true_mayer_of_trajectory(&self, states: &[Vec<f64>]) -> f64 {
        let gathered: Vec<Vec<f64>> = self
            .spec
            .mayer_indices
            .iter()
            .map(|&k| states[k].clone())
            .collect();
        (self.true_mayer)(&gathered)
    }

    /// Builds a benchmark with default parameters, optionally overriding the
    /// step count.
    pub fn build(id: BenchmarkId, steps: Option<usize>) -> Benchmark {
        match id {
            BenchmarkId::HarmonicOscillator => {
                let mut p = HarmonicOscillatorParams::default();
                if let Some(n) = steps {
                    p.steps = n;
                }
                harmonic_oscillator(p)
            }
            BenchmarkId::ZermeloOne => {
                let mut p = ZermeloOneParams::default();
                if let Some(n) = steps {
                    p.steps = n;
                }
                zermelo_one(p)
            }
            BenchmarkId::ZermeloTwo => {
                let mut p = ZermeloTwoParams::default();
                if let Some(n) = steps {
                    p.steps = n;
                }
                zermelo_two(p)
            }
            BenchmarkId::LotkaVolterra => {
                let mut p = LotkaVolterraParams::default();
                if let Some(n) = steps {
                    p.steps = n;
                }
                lotka_volterra(p)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarmonicOscillatorParams {
    pub horizon: f64,
    pub steps: usize,
    pub mass: f64,
    pub stiffness: f64,
}

impl Default for HarmonicOscillatorParams {
    fn default() -> Self {
        Self {
            horizon: 60.0,
            steps: 600,
            mass: 2.0,
            stiffness: 0.5,
        }
    }
}

/// Spring-mass system with a bounded external force. The terminal cost is
/// the final kinetic energy minus the floor-truncated final potential
/// energy, so pushing the final elongation across integer thresholds pays
/// off quadratically while the running cost penalizes the average force.
pub fn harmonic_oscillator(params: HarmonicOscillatorParams) -> Benchmark {
    let HarmonicOscillatorParams {
        horizon,
        steps,
        mass,
        stiffness,
    } = params;
    let floor_x = FloorApprox::new(SMOOTHING_TAU, -40, 40);

    let spec = OcpSpec {
        state_dim: 2,
        control_dim: 1,
        horizon,
        steps,
        initial_state: vec![1.0, 0.0],
        dynamics: Arc::new(move |_t, x, u, out| {
            out[0] = x[1];
            out[1] = (-stiffness * x[0] + u[0]) / mass;
        }),
        dynamics_jacobian: Some(Arc::new(move |_t, _x, _u, fx, fu| {
            fx[0] = 0.0;
            fx[1] = 1.0;
            fx[2] = -stiffness / mass;
            fx[3] = 0.0;
            fu[0] = 0.0;
            fu[1] = 1.0 / mass;
        })),
        lagrange: Arc::new(move |_t, _x, u| u[0] / horizon),
        lagrange_gradient: Some(Arc::new(move |_t, _x, _u, gx, gu| {
            gx.fill(0.0);
            gu[0] = 1.0 / horizon;
        })),
        mayer: Arc::new(move |xs: &[Vec<f64>]| {
            let (x, v) = (xs[0][0], xs[0][1]);
            let fl = floor_x.value(x);
            0.5 * mass * v * v - 0.5 * stiffness * fl * fl
        }),
        mayer_indices: vec![steps],
        path_constraints: vec![],
        control_bounds: vec![Bound::new(0.0, 1.0)],
        terminal_constraints: vec![],
        control_initial_guess: vec![0.0],
    };

    Benchmark {
        id: BenchmarkId::HarmonicOscillator,
        spec,
        true_mayer: Arc::new(move |xs: &[Vec<f64>]| {
            let (x, v) = (xs[0][0], xs[0][1]);
            let fl = x.floor();
            0.5 * mass * v * v - 0.5 * stiffness * fl * fl
        }),
        params: BenchmarkParams::HarmonicOscillator(params),
        smoothing: vec![SmoothingTerm {
            label: "final-elongation",
            tau: SMOOTHING_TAU,
            a: -40,
            b: 40,
        }],
        plateaus: vec![PlateauFamily::Bands {
            state_index: 0,
            width: 1.0,
        }],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZermeloOneParams {
    pub horizon: f64,
    pub steps: usize,
    pub stream: StreamField,
}

impl Default for ZermeloOneParams {
    fn default() -> Self {
        Self {
            horizon: 40.0,
            steps: 400,
            stream: StreamField::default(),
        }
    }
}

fn zermelo_dynamics(
    stream: StreamField,
) -> (crate::ocp::DynamicsFn, crate::ocp::DynamicsJacobianFn) {
    let dynamics: crate::ocp::DynamicsFn = Arc::new(move |_t, x, u, out| {
        let (s1, s2) = stream.velocity(x[0], x[1]);
        out[0] = s1 + u[0] * u[1].cos();
        out[1] = s2 + u[0] * u[1].sin();
    });
    let jacobian: crate::ocp::DynamicsJacobianFn = Arc::new(move |_t, x, u, fx, fu| {
        let (ds1, ds2) = stream.jacobian_y(x[0], x[1]);
        fx[0] = 0.0;
        fx[1] = ds1;
        fx[2] = 0.0;
        fx[3] = ds2;
        let (speed, heading) = (u[0], u[1]);
        fu[0] = heading.cos();
        fu[1] = -speed * heading.sin();
        fu[2] = heading.sin();
        fu[3] = speed * heading.cos();
    });
    (dynamics, jacobian)
}

fn river_path_constraints(y_max: f64) -> Vec<PathConstraint> {
    vec![
        PathConstraint {
            label: "below-river".into(),
            value: Arc::new(|_t, x, _u| -x[1]),
            gradient: Some(Arc::new(|_t, _x, _u, gx, gu| {
                gx[0] = 0.0;
                gx[1] = -1.0;
                gu.fill(0.0);
            })),
        },
        PathConstraint {
            label: "above-river".into(),
            value: Arc::new(move |_t, x, _u| x[1] - y_max),
            gradient: Some(Arc::new(|_t, _x, _u, gx, gu| {
                gx[0] = 0.0;
                gx[1] = 1.0;
                gu.fill(0.0);
            })),
        },
    ]
}

/// Boat on a river aiming for the rightmost mooring slot on the far shore:
/// the terminal cost rewards the floor of `x(T) / 10`, the boat must end
/// exactly on the far shore, and the stream repels it from both shores while
/// dragging it left midstream.
pub fn zermelo_one(params: ZermeloOneParams) -> Benchmark {
    let ZermeloOneParams {
        horizon,
        steps,
        stream,
    } = params;
    let y_max = stream.y_max;
    let floor_x = FloorApprox::new(SMOOTHING_TAU, -40, 5);
    let (dynamics, jacobian) = zermelo_dynamics(stream);

    let spec = OcpSpec {
        state_dim: 2,
        control_dim: 2,
        horizon,
        steps,
        initial_state: vec![0.0, 0.0],
        dynamics,
        dynamics_jacobian: Some(jacobian),
        lagrange: Arc::new(move |_t, _x, u| u[0] / horizon),
        lagrange_gradient: Some(Arc::new(move |_t, _x, _u, gx, gu| {
            gx.fill(0.0);
            gu[0] = 1.0 / horizon;
            gu[1] = 0.0;
        })),
        mayer: Arc::new(move |xs: &[Vec<f64>]| -floor_x.value(xs[0][0] / 10.0)),
        mayer_indices: vec![steps],
        path_constraints: river_path_constraints(y_max),
        control_bounds: vec![Bound::new(0.0, 1.0), Bound::FREE],
        terminal_constraints: vec![TerminalConstraint {
            label: "reach-far-shore".into(),
            kind: ConstraintKind::Equality,
            value: Arc::new(move |x: &[f64]| x[1] - y_max),
            gradient: Some(Arc::new(|_x, g| {
                g[0] = 0.0;
                g[1] = 1.0;
            })),
        }],
        // heading toward the far shore: the zero-speed start leaves the
        // heading gradient degenerate, so give the solver a useful angle
        control_initial_guess: vec![0.0, std::f64::consts::FRAC_PI_2],
    };

    Benchmark {
        id: BenchmarkId::ZermeloOne,
        spec,
        true_mayer: Arc::new(move |xs: &[Vec<f64>]| -(xs[0][0] / 10.0).floor()),
        params: BenchmarkParams::ZermeloOne(params),
        smoothing: vec![SmoothingTerm {
            label: "final-position-tenths",
            tau: SMOOTHING_TAU,
            a: -40,
            b: 5,
        }],
        plateaus: vec![PlateauFamily::Bands {
            state_index: 0,
            width: 10.0,
        }],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZermeloTwoParams {
    pub horizon: f64,
    pub steps: usize,
    pub stream: StreamField,
    pub final_target: [f64; 2],
    pub final_weights: [f64; 2],
    pub midtime_target: [f64; 2],
    pub midtime_weights: [f64; 2],
}

impl Default for ZermeloTwoParams {
    fn default() -> Self {
        Self {
            horizon: 40.0,
            steps: 400,
            stream: StreamField::default(),
            final_target: [-325.0, 0.0],
            final_weights: [1.0 / 20.0, 5.0 / 6.0],
            midtime_target: [-175.0, 6.0],
            midtime_weights: [1.0 / 20.0, 0.5],
        }
    }
}

/// Two-target river problem: approach one reference state at the midpoint
/// and another at the final time, both scored by floor-truncated weighted
/// distances. The step count must be even so the midpoint is a step.
pub fn zermelo_two(params: ZermeloTwoParams) -> Benchmark {
    assert!(
        params.steps % 2 == 0,
        "midtime target needs an even step count"
    );
    let ZermeloTwoParams {
        horizon,
        steps,
        stream,
        final_target,
        final_weights,
        midtime_target,
        midtime_weights,
    } = params;
    let y_max = stream.y_max;
    let norm_a = WeightedNorm::new(final_weights);
    let norm_b = WeightedNorm::new(midtime_weights);
    let floor_a = FloorApprox::new(SMOOTHING_TAU, 0, 25);
    let floor_b = FloorApprox::new(SMOOTHING_TAU, 0, 25);
    let (dynamics, jacobian) = zermelo_dynamics(stream);

    // terminal-cost inputs arrive ordered by index: midpoint state first,
    // then the final state
    let spec = OcpSpec {
        state_dim: 2,
        control_dim: 2,
        horizon,
        steps,
        initial_state: vec![0.0, 0.0],
        dynamics,
        dynamics_jacobian: Some(jacobian),
        lagrange: Arc::new(move |_t, _x, u| u[0] / horizon),
        lagrange_gradient: Some(Arc::new(move |_t, _x, _u, gx, gu| {
            gx.fill(0.0);
            gu[0] = 1.0 / horizon;
            gu[1] = 0.0;
        })),
        mayer: Arc::new(move |xs: &[Vec<f64>]| {
            let mid = &xs[0];
            let fin = &xs[1];
            floor_a.value(norm_a.eval(fin[0] - final_target[0], fin[1] - final_target[1]))
                + floor_b.value(norm_b.eval(
                    mid[0] - midtime_target[0],
                    mid[1] - midtime_target[1],
                ))
        }),
        mayer_indices: vec![steps / 2, steps],
        path_constraints: river_path_constraints(y_max),
        control_bounds: vec![Bound::new(0.0, 1.0), Bound::FREE],
        terminal_constraints: vec![
            TerminalConstraint {
                label: "below-river-final".into(),
                kind: ConstraintKind::Inequality,
                value: Arc::new(|x: &[f64]| -x[1]),
                gradient: Some(Arc::new(|_x, g| {
                    g[0] = 0.0;
                    g[1] = -1.0;
                })),
            },
            TerminalConstraint {
                label: "above-river-final".into(),
                kind: ConstraintKind::Inequality,
                value: Arc::new(move |x: &[f64]| x[1] - y_max),
                gradient: Some(Arc::new(|_x, g| {
                    g[0] = 0.0;
                    g[1] = 1.0;
                })),
            },
        ],
        control_initial_guess: vec![0.0, std::f64::consts::FRAC_PI_2],
    };

    Benchmark {
        id: BenchmarkId::ZermeloTwo,
        spec,
        true_mayer: Arc::new(move |xs: &[Vec<f64>]| {
            let mid = &xs[0];
            let fin = &xs[1];
            norm_a
                .eval(fin[0] - final_target[0], fin[1] - final_target[1])
                .floor()
                + norm_b
                    .eval(mid[0] - midtime_target[0], mid[1] - midtime_target[1])
                    .floor()
        }),
        params: BenchmarkParams::ZermeloTwo(params),
        smoothing: vec![
            SmoothingTerm {
                label: "final-distance",
                tau: SMOOTHING_TAU,
                a: 0,
                b: 25,
            },
            SmoothingTerm {
                label: "midtime-distance",
                tau: SMOOTHING_TAU,
                a: 0,
                b: 25,
            },
        ],
        plateaus: vec![
            PlateauFamily::Rings {
                center: final_target,
                weights: final_weights,
            },
            PlateauFamily::Rings {
                center: midtime_target,
                weights: midtime_weights,
            },
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LotkaVolterraParams {
    pub horizon: f64,
    pub steps: usize,
    pub initial: [f64; 2],
    pub equilibrium: [f64; 2],
    pub weights: [f64; 2],
    pub control_cap: f64,
}

impl Default for LotkaVolterraParams {
    fn default() -> Self {
        Self {
            horizon: 60.0,
            steps: 600,
            initial: [2.25, 4.25],
            equilibrium: [1.0, 1.0],
            weights: [1.0, 1.0],
            control_cap: 0.25,
        }
    }
}

/// Predator-prey stabilization: cull predators (bounded rate) to bring the
/// cyclic system near its equilibrium at the final time, scored by the floor
/// of the weighted distance.
pub fn lotka_volterra(params: LotkaVolterraParams) -> Benchmark {
    let LotkaVolterraParams {
        horizon,
        steps,
        initial,
        equilibrium,
        weights,
        control_cap,
    } = params;
    let [x_eq, y_eq] = equilibrium;
    let norm = WeightedNorm::new(weights);
    let floor_d = FloorApprox::new(SMOOTHING_TAU, 0, 10);

    let spec = OcpSpec {
        state_dim: 2,
        control_dim: 1,
        horizon,
        steps,
        initial_state: initial.to_vec(),
        dynamics: Arc::new(move |_t, x, u, out| {
            out[0] = x[0] * (x[1] - y_eq - u[0]);
            out[1] = x[1] * (x_eq - x[0]);
        }),
        dynamics_jacobian: Some(Arc::new(move |_t, x, u, fx, fu| {
            fx[0] = x[1] - y_eq - u[0];
            fx[1] = x[0];
            fx[2] = -x[1];
            fx[3] = x_eq - x[0];
            fu[0] = -x[0];
            fu[1] = 0.0;
        })),
        lagrange: Arc::new(move |_t, _x, u| u[0] / horizon),
        lagrange_gradient: Some(Arc::new(move |_t, _x, _u, gx, gu| {
            gx.fill(0.0);
            gu[0] = 1.0 / horizon;
        })),
        mayer: Arc::new(move |xs: &[Vec<f64>]| {
            floor_d.value(norm.eval(xs[0][0] - x_eq, xs[0][1] - y_eq))
        }),
        mayer_indices: vec![steps],
        path_constraints: vec![],
        control_bounds: vec![Bound::new(0.0, control_cap)],
        terminal_constraints: vec![],
        control_initial_guess: vec![0.0],
    };

    Benchmark {
        id: BenchmarkId::LotkaVolterra,
        spec,
        true_mayer: Arc::new(move |xs: &[Vec<f64>]| {
            norm.eval(xs[0][0] - x_eq, xs[0][1] - y_eq).floor()
        }),
        params: BenchmarkParams::LotkaVolterra(params),
        smoothing: vec![SmoothingTerm {
            label: "distance-to-equilibrium",
            tau: SMOOTHING_TAU,
            a: 0,
            b: 10,
        }],
        plateaus: vec![PlateauFamily::Rings {
            center: equilibrium,
            weights,
        }],
    }
}

/// Rectangular scan grid over a two-dimensional final state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub resolution: (usize, usize),
}

impl ScanGrid {
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        let coord = |lo: f64, hi: f64, idx: usize, count: usize| {
            if count <= 1 {
                lo
            } else {
                lo + (hi - lo) * idx as f64 / (count - 1) as f64
            }
        };
        (
            coord(self.x_range.0, self.x_range.1, i, self.resolution.0),
            coord(self.y_range.0, self.y_range.1, j, self.resolution.1),
        )
    }

    pub fn len(&self) -> usize {
        self.resolution.0 * self.resolution.1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Map of the least violation the solver reaches when asked to steer to each
/// grid point over the full horizon.
///
/// This is the solver-returned infeasibility, not the true least violation:
/// a reachable target can still score high when the violation minimization
/// stalls in a local minimum, and that is precisely the phenomenon the scan
/// visualizes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanResult {
    pub grid: ScanGrid,
    /// Row-major by x index, then y index.
    pub values: Vec<f64>,
}

impl ScanResult {
    pub fn value_at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.resolution.1 + j]
    }

    /// CSV rows `x,y,infeasibility`.
    pub fn csv(&self) -> String {
        let mut out = String::from("x,y,infeasibility\n");
        for i in 0..self.grid.resolution.0 {
            for j in 0..self.grid.resolution.1 {
                let (x, y) = self.grid.point(i, j);
                out.push_str(&format!("{x},{y},{}\n", self.value_at(i, j)));
            }
        }
        out
    }
}

/// Runs the violation minimization of the full-horizon segment toward every
/// grid point.
pub fn infeasibility_scan(
    spec: &OcpSpec,
    grid: &ScanGrid,
    settings: &TwoPhaseSettings,
    exec: ExecMode,
) -> Result<ScanResult> {
    assert_eq!(spec.state_dim, 2, "scan expects a planar state");
    let (nx, ny) = grid.resolution;
    let values_or: Vec<Result<f64>> = map_indices(exec, nx * ny, |idx| {
        let (i, j) = (idx / ny, idx % ny);
        let (x, y) = grid.point(i, j);
        segment_feasibility(spec, 0, &spec.initial_state, spec.steps, &[x, y], settings)
    });
    let mut values = Vec::with_capacity(nx * ny);
    for v in values_or {
        values.push(v?);
    }
    Ok(ScanResult {
        grid: *grid,
        values,
    })
}
