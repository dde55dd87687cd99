use super::*;

fn settings(budget: usize, seed: u64) -> MadsSettings {
    MadsSettings {
        max_evaluations: budget,
        seed,
        ..MadsSettings::default()
    }
}

/// Blackbox mirroring the pinched-constraints example: for y < 1 the
/// subproblem is infeasible with least violation 2(1-y)^2; at and above 1 it
/// is feasible. The objective is y itself.
fn pinched_blackbox(x: &[f64]) -> (f64, f64) {
    let y = x[0];
    let h = if y < 1.0 { 2.0 * (1.0 - y) * (1.0 - y) } else { 0.0 };
    (y, h)
}

#[test]
fn converges_on_smooth_unconstrained_blackbox() {
    let blackbox = |x: &[f64]| ((x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2), 0.0);
    let outcome = solve(&blackbox, &[0.0, 0.0], &settings(2000, 7));
    let (point, value) = outcome.best_feasible.expect("everything is feasible");
    assert!((point[0] - 3.0).abs() < 1e-3, "x = {point:?}");
    assert!((point[1] + 1.0).abs() < 1e-3, "x = {point:?}");
    assert!(value < 1e-5);
}

#[test]
fn barrier_drives_pinched_blackbox_to_feasibility() {
    let outcome = solve(&pinched_blackbox, &[0.0], &settings(500, 3));
    let (point, value) = outcome.best_feasible.expect("feasible region reachable");
    assert!((point[0] - 1.0).abs() <= 1e-2, "incumbent {point:?}");
    assert!((value - 1.0).abs() <= 1e-2);
    // threshold trace never increases
    let mut prev = f64::INFINITY;
    for rec in &outcome.iterations {
        assert!(rec.h_max <= prev, "h_max rose from {prev} to {}", rec.h_max);
        prev = rec.h_max;
    }
}

#[test]
fn nothing_feasible_keeps_lowest_objective_front() {
    let blackbox = |x: &[f64]| (x[0] * x[0], 1.0);
    let outcome = solve(&blackbox, &[2.0], &settings(200, 11));
    assert!(outcome.best_feasible.is_none());
    let (_, f, h) = outcome.best_infeasible.expect("front non-empty");
    assert_eq!(h, 1.0);
    let lowest = outcome
        .history
        .iter()
        .map(|r| r.f)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(f, lowest);
}

#[test]
fn poll_points_in_one_dimension() {
    let s = settings(10, 5);
    let mut state = MadsState::new(&s);
    let points = poll_step(&mut state, &[0.0], &s);
    let mut values: Vec<f64> = points.iter().map(|p| p[0]).collect();
    values.sort_by(f64::total_cmp);
    assert_eq!(values, vec![-1.0, 1.0]);
}

#[test]
fn poll_pairs_are_symmetric_about_center() {
    let s = settings(10, 9);
    let mut state = MadsState::new(&s);
    let center = [0.5, -0.25];
    let points = poll_step(&mut state, &center, &s);
    assert_eq!(points.len(), 4);
    // directions come out in (+d, -d) pairs
    for pair in points.chunks(2) {
        for j in 0..2 {
            let sum = pair[0][j] + pair[1][j];
            assert!(
                (sum - 2.0 * center[j]).abs() < 1e-15,
                "pair {pair:?} not symmetric"
            );
        }
    }
}

#[test]
fn poll_points_lie_on_the_mesh() {
    let s = settings(10, 13);
    let mut state = MadsState::new(&s);
    // shrink a few times so the mesh is finer than the frame
    state.shrink_frame();
    state.shrink_frame();
    let mesh = state.mesh_size();
    let anchor = [0.0, 0.0, 0.0];
    let points = poll_step(&mut state, &anchor, &s);
    assert_eq!(points.len(), 6);
    for p in &points {
        for (j, v) in p.iter().enumerate() {
            let steps = (v - anchor[j]) / mesh;
            assert!(
                (steps - steps.round()).abs() <= 1e-12,
                "coordinate {v} is off the mesh {mesh}"
            );
        }
    }
}

#[test]
fn poll_respects_bounds_by_snapping() {
    let s = MadsSettings {
        bounds: Some(vec![Bound::new(-0.25, 0.25)]),
        ..settings(10, 21)
    };
    let mut state = MadsState::new(&s);
    let points = poll_step(&mut state, &[0.0], &s);
    for p in &points {
        assert!(p[0] >= -0.25 && p[0] <= 0.25, "point {p:?} leaves the box");
    }
}

fn record(index: usize, point: f64, f: f64, h: f64) -> EvalRecord {
    EvalRecord {
        index,
        point: vec![point],
        f,
        h,
        feasible_incumbent: false,
        infeasible_incumbent: false,
    }
}

#[test]
fn barrier_insert_strict_domination() {
    let mut barrier = Barrier::new(f64::INFINITY, 1e-9);
    barrier.insert_batch(&mut [record(0, 0.0, 5.0, 3.0)]);
    let class = barrier.insert_batch(&mut [record(1, 1.0, 4.0, 2.0)]);
    assert_eq!(class, IterationClass::Dominating);
    assert_eq!(barrier.front().len(), 1);
    assert_eq!(barrier.front()[0].f, 4.0);
    assert_eq!(barrier.front()[0].h, 2.0);
}

#[test]
fn barrier_keeps_mutually_undominated_points() {
    let mut barrier = Barrier::new(f64::INFINITY, 1e-9);
    barrier.insert_batch(&mut [record(0, 0.0, 1.0, 4.0), record(1, 1.0, 3.0, 1.0)]);
    let class = barrier.insert_batch(&mut [record(2, 2.0, 2.0, 2.0)]);
    assert_eq!(class, IterationClass::Improving);
    assert_eq!(barrier.front().len(), 3);
}

#[test]
fn barrier_feasible_improvement_leaves_front_alone() {
    let mut barrier = Barrier::new(f64::INFINITY, 1e-9);
    barrier.insert_batch(&mut [record(0, 0.0, 5.0, 3.0)]);
    barrier.insert_batch(&mut [record(1, 1.0, 9.0, 0.0)]);
    let mut improving = [record(2, 2.0, 7.0, 0.0)];
    let class = barrier.insert_batch(&mut improving);
    assert_eq!(class, IterationClass::Dominating);
    assert!(improving[0].feasible_incumbent);
    assert_eq!(barrier.feasible_incumbent().unwrap().1, 7.0);
    assert_eq!(barrier.front().len(), 1);
}

#[test]
fn barrier_rejects_points_above_threshold() {
    let mut barrier = Barrier::new(2.0, 1e-9);
    barrier.insert_batch(&mut [record(0, 0.0, 0.0, 2.0)]);
    let class = barrier.insert_batch(&mut [record(1, -1.0, -1.0, 8.0)]);
    assert_eq!(class, IterationClass::Unsuccessful);
    assert_eq!(barrier.front().len(), 1);
}

#[test]
fn barrier_duplicate_points_are_not_stacked() {
    let mut barrier = Barrier::new(f64::INFINITY, 1e-9);
    barrier.insert_batch(&mut [record(0, 0.0, 1.0, 1.0)]);
    barrier.insert_batch(&mut [record(1, 0.0, 1.0, 1.0)]);
    assert_eq!(barrier.front().len(), 1);
    assert_eq!(barrier.front()[0].eval_index, 0);
}

#[test]
fn mesh_is_min_of_frame_and_its_square() {
    let s = settings(10, 1);
    let mut state = MadsState::new(&s);
    assert_eq!(state.frame_size(), 1.0);
    assert_eq!(state.mesh_size(), 1.0);
    state.expand_frame();
    assert_eq!(state.frame_size(), 2.0);
    assert_eq!(state.mesh_size(), 2.0);
    state.shrink_frame();
    state.shrink_frame();
    assert_eq!(state.frame_size(), 0.5);
    assert_eq!(state.mesh_size(), 0.25);
}

#[test]
fn frame_halvings_and_doublings_follow_iteration_class() {
    let blackbox = |x: &[f64]| {
        let f = (x[0] - 0.7).powi(2) + (x[1] + 0.2).powi(2);
        let h = (x[0] + x[1] - 1.2).max(0.0).powi(2);
        (f, h)
    };
    let outcome = solve(&blackbox, &[3.0, 2.0], &settings(400, 23));
    let mut prev = 1.0f64;
    for rec in &outcome.iterations {
        let ratio = rec.frame_size / prev;
        match rec.class {
            IterationClass::Dominating => assert_eq!(ratio, 2.0),
            IterationClass::Improving => assert_eq!(ratio, 1.0),
            IterationClass::Unsuccessful => assert_eq!(ratio, 0.5),
        }
        let frame = rec.frame_size;
        assert_eq!(rec.mesh_size, frame.min(frame * frame));
        prev = rec.frame_size;
    }
}

#[test]
fn feasible_incumbent_objective_is_monotone() {
    let blackbox = |x: &[f64]| ((x[0] - 2.0).powi(2) * (x[1] + 1.0).abs().sqrt() + x[1].powi(2), 0.0);
    let outcome = solve(&blackbox, &[0.0, 3.0], &settings(600, 17));
    let mut best = f64::INFINITY;
    for rec in &outcome.history {
        if rec.feasible_incumbent {
            assert!(rec.f < best || best.is_infinite());
            best = rec.f;
        }
    }
    assert!(best.is_finite());
}

#[test]
fn fixed_seed_reproduces_history_exactly() {
    let blackbox = |x: &[f64]| {
        let f = (x[0] + 0.7).powi(2) + 0.3 * (x[1] - 0.2).powi(2);
        let h = (x[0] + x[1] - 0.4).max(0.0).powi(2);
        (f, h)
    };
    let a = solve(&blackbox, &[1.0, 1.0], &settings(300, 42));
    let b = solve(&blackbox, &[1.0, 1.0], &settings(300, 42));
    assert_eq!(a.history.len(), b.history.len());
    for (ra, rb) in a.history.iter().zip(&b.history) {
        assert_eq!(ra.point, rb.point);
        assert_eq!(ra.f.to_bits(), rb.f.to_bits());
        assert_eq!(ra.h.to_bits(), rb.h.to_bits());
    }
    let c = solve(&blackbox, &[1.0, 1.0], &settings(300, 43));
    assert_ne!(
        a.history.iter().map(|r| r.point.clone()).collect::<Vec<_>>(),
        c.history.iter().map(|r| r.point.clone()).collect::<Vec<_>>(),
        "different seeds should explore differently"
    );
}

#[test]
fn batch_mode_matches_across_exec_modes() {
    let blackbox = |x: &[f64]| ((x[0] - 1.0).powi(2) + x[1].powi(2), 0.0);
    let base = MadsSettings {
        opportunistic: false,
        ..settings(200, 5)
    };
    let seq = solve(
        &blackbox,
        &[4.0, -3.0],
        &MadsSettings {
            exec: ExecMode::Sequential,
            ..base.clone()
        },
    );
    let par = solve(
        &blackbox,
        &[4.0, -3.0],
        &MadsSettings {
            exec: ExecMode::Parallel,
            ..base
        },
    );
    assert_eq!(seq.history.len(), par.history.len());
    for (a, b) in seq.history.iter().zip(&par.history) {
        assert_eq!(a.point, b.point);
        assert_eq!(a.f.to_bits(), b.f.to_bits());
    }
}

#[test]
fn non_finite_blackbox_values_are_discarded() {
    let blackbox = |x: &[f64]| {
        if x[0] < -0.5 {
            (f64::NAN, f64::NAN)
        } else {
            ((x[0] - 1.0).powi(2), 0.0)
        }
    };
    let outcome = solve(&blackbox, &[0.0], &settings(200, 19));
    let (point, _) = outcome.best_feasible.expect("right half is fine");
    assert!((point[0] - 1.0).abs() < 1e-3);
}

#[test]
fn quadratics_reach_low_accuracy_envelope() {
    // sanity envelope, not a theorem: smooth convex problems in up to four
    // variables reach 1e-3 accuracy within 2000 evaluations
    for (dim, seed) in [(2usize, 101u64), (3, 102), (4, 103)] {
        let target: Vec<f64> = (0..dim).map(|i| 0.3 * i as f64 - 0.4).collect();
        let t = target.clone();
        let blackbox = move |x: &[f64]| {
            let f: f64 = x
                .iter()
                .zip(&t)
                .enumerate()
                .map(|(i, (xi, ti))| (1.0 + i as f64) * (xi - ti).powi(2))
                .sum();
            (f, 0.0)
        };
        let outcome = solve(&blackbox, &vec![1.0; dim], &settings(2000, seed));
        let (_, value) = outcome.best_feasible.expect("unconstrained");
        assert!(value < 1e-3, "dim {dim}: best {value}");
    }
}

#[test]
fn history_csv_has_header_and_rows() {
    let blackbox = |x: &[f64]| (x[0] * x[0], 0.0);
    let outcome = solve(&blackbox, &[1.0], &settings(20, 2));
    let csv = outcome.history_csv();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "eval_index,x0,f,h,feasible_incumbent,infeasible_incumbent"
    );
    assert_eq!(csv.lines().count(), outcome.history.len() + 1);
}
