//! Runner-level checks: initialization sharing, budget semantics, record
//! determinism, persistence, and the toy-scale oracle for the
//! dimension-reduced method.

use plateau_cli::runner::{
    compare, run_dfbbo, run_hybrid, run_so, LambdaChoice, MethodSpec, RunConfig,
};
use plateau_core::benchmarks::{
    harmonic_oscillator, zermelo_two, HarmonicOscillatorParams, ZermeloTwoParams,
};
use plateau_core::ocp::{rk4_step, uncontrolled_trajectory};

#[test]
fn zero_budget_smooth_run_returns_the_initialization() {
    let bench = harmonic_oscillator(HarmonicOscillatorParams {
        steps: 30,
        ..Default::default()
    });
    let config = RunConfig {
        smooth_budget: 0,
        ..Default::default()
    };
    let output = run_so(&bench, &config);
    let init = uncontrolled_trajectory(&bench.spec);
    assert_eq!(output.trajectory.states, init.states);
    assert_eq!(output.record.solver_status, "iteration-limit");
}

#[test]
fn single_evaluation_hybrid_returns_the_uncontrolled_stitch() {
    let bench = harmonic_oscillator(HarmonicOscillatorParams {
        steps: 24,
        ..Default::default()
    });
    let config = RunConfig {
        budget: 1,
        ..Default::default()
    };
    let output = run_hybrid(&bench, &LambdaChoice::FullHorizon, &config);
    let init = uncontrolled_trajectory(&bench.spec);
    // the only evaluated point is the uncontrolled knot vector
    assert_eq!(output.record.evaluations, 1);
    let end = &output.trajectory.states[24];
    assert_eq!(end, &init.states[24]);
}

#[test]
fn dfbbo_reruns_bit_identically_per_seed() {
    let bench = harmonic_oscillator(HarmonicOscillatorParams {
        steps: 20,
        ..Default::default()
    });
    let config = RunConfig {
        budget: 120,
        seed: 9,
        ..Default::default()
    };
    let a = run_dfbbo(&bench, &config);
    let b = run_dfbbo(&bench, &config);
    assert_eq!(a.record.canonical_json(), b.record.canonical_json());
    assert_eq!(a.history_csv, b.history_csv);

    let c = run_dfbbo(
        &bench,
        &RunConfig {
            seed: 10,
            ..config
        },
    );
    assert_ne!(a.record.canonical_json(), c.record.canonical_json());
}

#[test]
fn dfbbo_on_two_controls_matches_grid_oracle() {
    // two steps, one control each, over a short horizon so the dynamics
    // stay tame: the exhaustive grid is the reference
    let bench = harmonic_oscillator(HarmonicOscillatorParams {
        steps: 2,
        horizon: 1.0,
        ..Default::default()
    });
    let spec = &bench.spec;
    let objective = |u: &[f64]| -> f64 {
        let mut x = spec.initial_state.clone();
        let mut states = vec![x.clone()];
        for k in 0..2 {
            x = rk4_step(spec, k, &x, &u[k..k + 1]).unwrap();
            states.push(x.clone());
        }
        let dt = spec.time_step();
        let lagrange: f64 = (0..2)
            .map(|k| dt * (spec.lagrange)(spec.time_at(k), &states[k], &u[k..k + 1]))
            .sum();
        spec.mayer_of_trajectory(&states) + lagrange
    };

    let mut oracle = f64::INFINITY;
    for i in 0..=100 {
        for j in 0..=100 {
            let u = [i as f64 / 100.0, j as f64 / 100.0];
            oracle = oracle.min(objective(&u));
        }
    }

    let config = RunConfig {
        budget: 800,
        seed: 4,
        ..Default::default()
    };
    let output = run_dfbbo(&bench, &config);
    assert!(
        output.record.smoothed_objective <= oracle + 1e-2,
        "direct search {} vs grid oracle {oracle}",
        output.record.smoothed_objective
    );
}

#[test]
fn comparison_shares_initialization_and_sorts_by_true_objective() {
    let bench = harmonic_oscillator(HarmonicOscillatorParams {
        steps: 40,
        ..Default::default()
    });
    let config = RunConfig {
        budget: 60,
        seed: 2,
        ..Default::default()
    };
    let report = compare(&bench, &MethodSpec::default_lineup(), &config);
    assert_eq!(report.entries.len(), 4);
    let hash = &report.entries[0].output.record.initialization_hash;
    assert!(report
        .entries
        .iter()
        .all(|e| &e.output.record.initialization_hash == hash));

    let table = report.table_csv();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,smoothed_objective,true_objective,infeasibility,evaluations,wall_time_secs"
    );
    let objectives: Vec<f64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(objectives.len(), 4);
    assert!(objectives.windows(2).all(|w| w[0] <= w[1]), "{objectives:?}");
}

#[test]
fn persisted_run_writes_all_artifacts() {
    let bench = harmonic_oscillator(HarmonicOscillatorParams {
        steps: 16,
        ..Default::default()
    });
    let config = RunConfig {
        budget: 30,
        seed: 1,
        ..Default::default()
    };
    let mut output = run_hybrid(&bench, &LambdaChoice::FullHorizon, &config);
    let dir = std::env::temp_dir().join(format!("plateau-test-{}", std::process::id()));
    output.persist(&dir).unwrap();
    let traj = output.record.trajectory_file.as_ref().unwrap();
    let hist = output.record.history_file.as_ref().unwrap();
    assert!(std::path::Path::new(traj).exists());
    assert!(std::path::Path::new(hist).exists());
    let contents = std::fs::read_to_string(traj).unwrap();
    assert!(contents.starts_with("t,x0,x1,u0"));
    assert_eq!(contents.lines().count(), 18); // header + 17 states
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn lambda_choice_parsing() {
    assert_eq!(LambdaChoice::parse("N").unwrap(), LambdaChoice::FullHorizon);
    assert_eq!(LambdaChoice::parse("n/2,n").unwrap(), LambdaChoice::Halves);
    assert_eq!(
        LambdaChoice::parse("10, 20,40").unwrap(),
        LambdaChoice::Explicit(vec![10, 20, 40])
    );
    assert!(LambdaChoice::parse("nonsense").is_err());
}

#[test]
fn two_target_single_knot_folds_the_midtime_term() {
    let bench = zermelo_two(ZermeloTwoParams {
        steps: 20,
        ..Default::default()
    });
    let config = RunConfig {
        budget: 2,
        ..Default::default()
    };
    let output = run_hybrid(&bench, &LambdaChoice::FullHorizon, &config);
    assert_eq!(output.record.lambda, Some(vec![20]));
    assert!(output.record.metadata["midtime_term"]
        .as_str()
        .unwrap()
        .contains("folded"));
    // the halves variant carries both cost indices as knots instead
    let halves = run_hybrid(&bench, &LambdaChoice::Halves, &config);
    assert_eq!(halves.record.lambda, Some(vec![10, 20]));
    assert!(halves.record.metadata.get("midtime_term").is_none());
}
