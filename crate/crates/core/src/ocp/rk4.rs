//! Classical fourth-order Runge-Kutta step with zero-order-hold control,
//! plus its exact jacobian chain for the defect constraints.
//!
//! Both entry points are called once per step per constraint evaluation
//! inside solver loops, so each uses a single scratch allocation.

use super::OcpSpec;

/// One RK4 step of length `dt` from state `x` with the control held constant
/// over the step.
pub(crate) fn step_into(spec: &OcpSpec, t: f64, dt: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
    let n = spec.state_dim;
    let mut scratch = vec![0.0; 5 * n];
    let (k1, rest) = scratch.split_at_mut(n);
    let (k2, rest) = rest.split_at_mut(n);
    let (k3, rest) = rest.split_at_mut(n);
    let (k4, stage) = rest.split_at_mut(n);

    (spec.dynamics)(t, x, u, k1);
    for i in 0..n {
        stage[i] = x[i] + 0.5 * dt * k1[i];
    }
    (spec.dynamics)(t + 0.5 * dt, stage, u, k2);
    for i in 0..n {
        stage[i] = x[i] + 0.5 * dt * k2[i];
    }
    (spec.dynamics)(t + 0.5 * dt, stage, u, k3);
    for i in 0..n {
        stage[i] = x[i] + dt * k3[i];
    }
    (spec.dynamics)(t + dt, stage, u, k4);
    for i in 0..n {
        out[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Sensitivities of one step to its state and control: `dphi_dx` (n by n)
/// and `dphi_du` (n by m), both row-major.
pub(crate) struct StepWithJacobian {
    pub dphi_dx: Vec<f64>,
    pub dphi_du: Vec<f64>,
}

/// Jacobians of the dynamics at one stage point, analytic when the problem
/// provides them, otherwise by central finite differences of the dynamics.
fn stage_jacobians(spec: &OcpSpec, t: f64, x: &[f64], u: &[f64], fx: &mut [f64], fu: &mut [f64]) {
    if let Some(jac) = &spec.dynamics_jacobian {
        jac(t, x, u, fx, fu);
        return;
    }
    let n = spec.state_dim;
    let m = spec.control_dim;
    let mut scratch = vec![0.0; 2 * n + n.max(m)];
    let (plus, rest) = scratch.split_at_mut(n);
    let (minus, shifted) = rest.split_at_mut(n);
    shifted[..n].copy_from_slice(x);
    for j in 0..n {
        let h = 1e-7 * x[j].abs().max(1.0);
        shifted[j] = x[j] + h;
        (spec.dynamics)(t, &shifted[..n], u, plus);
        shifted[j] = x[j] - h;
        (spec.dynamics)(t, &shifted[..n], u, minus);
        shifted[j] = x[j];
        for i in 0..n {
            fx[i * n + j] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    shifted[..m].copy_from_slice(u);
    for j in 0..m {
        let h = 1e-7 * u[j].abs().max(1.0);
        shifted[j] = u[j] + h;
        (spec.dynamics)(t, x, &shifted[..m], plus);
        shifted[j] = u[j] - h;
        (spec.dynamics)(t, x, &shifted[..m], minus);
        shifted[j] = u[j];
        for i in 0..n {
            fu[i * m + j] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
}

/// RK4 step with the chain-rule jacobians through all four stages.
pub(crate) fn step_with_jacobian(
    spec: &OcpSpec,
    t: f64,
    dt: f64,
    x: &[f64],
    u: &[f64],
) -> StepWithJacobian {
    let n = spec.state_dim;
    let m = spec.control_dim;
    let nn = n * n;
    let nm = n * m;

    // one scratch block: 4 stage states, 4 stage slopes, fx, fu,
    // 4 dk/dx blocks, 4 dk/du blocks
    let mut scratch = vec![0.0; 8 * n + nn + nm + 4 * nn + 4 * nm];
    let (stages, rest) = scratch.split_at_mut(4 * n);
    let (slopes, rest) = rest.split_at_mut(4 * n);
    let (fx, rest) = rest.split_at_mut(nn);
    let (fu, rest) = rest.split_at_mut(nm);
    let (dk_dx, dk_du) = rest.split_at_mut(4 * nn);

    let offsets = [0.0, 0.5 * dt, 0.5 * dt, dt];
    let scales = [0.0, 0.5 * dt, 0.5 * dt, dt];

    for s in 0..4 {
        {
            let (done_slopes, _) = slopes.split_at(4 * n);
            let prev_slope = if s > 0 {
                &done_slopes[(s - 1) * n..s * n]
            } else {
                &done_slopes[..0]
            };
            let stage = &mut stages[s * n..(s + 1) * n];
            for i in 0..n {
                stage[i] = x[i] + if s == 0 { 0.0 } else { scales[s] * prev_slope[i] };
            }
        }
        let ts = t + offsets[s];
        {
            let (stage_part, _) = stages.split_at(4 * n);
            let stage = &stage_part[s * n..(s + 1) * n];
            (spec.dynamics)(ts, stage, u, &mut slopes[s * n..(s + 1) * n]);
            stage_jacobians(spec, ts, stage, u, fx, fu);
        }

        if s == 0 {
            dk_dx[..nn].copy_from_slice(fx);
            dk_du[..nm].copy_from_slice(fu);
        } else {
            // dk_s/dx = fx (I + scale * dk_{s-1}/dx)
            let (done_dx, todo_dx) = dk_dx.split_at_mut(s * nn);
            let prev_dx = &done_dx[(s - 1) * nn..];
            let cur_dx = &mut todo_dx[..nn];
            for i in 0..n {
                for j in 0..n {
                    let mut acc = fx[i * n + j];
                    for l in 0..n {
                        acc += fx[i * n + l] * scales[s] * prev_dx[l * n + j];
                    }
                    cur_dx[i * n + j] = acc;
                }
            }
            // dk_s/du = fx * scale * dk_{s-1}/du + fu
            let (done_du, todo_du) = dk_du.split_at_mut(s * nm);
            let prev_du = &done_du[(s - 1) * nm..];
            let cur_du = &mut todo_du[..nm];
            for i in 0..n {
                for j in 0..m {
                    let mut acc = fu[i * m + j];
                    for l in 0..n {
                        acc += fx[i * n + l] * scales[s] * prev_du[l * m + j];
                    }
                    cur_du[i * m + j] = acc;
                }
            }
        }
    }

    let mut dphi_dx = vec![0.0; nn];
    let mut dphi_du = vec![0.0; nm];
    for i in 0..n {
        for j in 0..n {
            let idx = i * n + j;
            let blend = dk_dx[idx]
                + 2.0 * dk_dx[nn + idx]
                + 2.0 * dk_dx[2 * nn + idx]
                + dk_dx[3 * nn + idx];
            dphi_dx[idx] = if i == j { 1.0 } else { 0.0 } + dt / 6.0 * blend;
        }
        for j in 0..m {
            let idx = i * m + j;
            let blend = dk_du[idx]
                + 2.0 * dk_du[nm + idx]
                + 2.0 * dk_du[2 * nm + idx]
                + dk_du[3 * nm + idx];
            dphi_du[idx] = dt / 6.0 * blend;
        }
    }

    StepWithJacobian { dphi_dx, dphi_du }
}
