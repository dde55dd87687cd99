//! Command-line driver: run a single method, compare the lineup, scan
//! solver infeasibility over target states, or exercise the self-tests.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 when any run
//! finished degraded (non-converged smooth solve or no feasible incumbent).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use plateau_cli::runner::{
    self, compare, plot, LambdaChoice, MethodChoice, MethodSpec, RunConfig,
};
use plateau_core::benchmarks::{self, Benchmark, BenchmarkId, ScanGrid};
use plateau_core::exec::ExecMode;
use plateau_core::problem::TwoPhaseSettings;

#[derive(Parser)]
#[command(
    name = "plateau",
    about = "Hybrid optimization of control problems with floor-truncated terminal costs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Cap on the worker pool for parallel sections (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Benchmark: harmonic-oscillator | zermelo1 | zermelo2 | lotka-volterra.
    #[arg(long)]
    benchmark: Option<BenchmarkId>,

    /// Step count override (defaults: desk scale for compare, reference
    /// values for run/scan).
    #[arg(long)]
    n_steps: Option<usize>,

    /// Blackbox-evaluation budget for the direct-search methods.
    #[arg(long)]
    budget: Option<usize>,

    #[arg(long)]
    seed: Option<u64>,

    /// Output directory for records, tables and plots.
    #[arg(long)]
    out: Option<PathBuf>,

    /// JSON configuration file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method on one benchmark.
    Run {
        #[command(flatten)]
        common: CommonOpts,

        /// Method: so | dfbbo | hybrid.
        #[arg(long)]
        method: Option<MethodChoice>,

        /// Knot preset for the hybrid method: N | N/2,N | comma-separated
        /// indices.
        #[arg(long)]
        lambda: Option<String>,
    },
    /// Run every method from the shared initialization and emit the
    /// comparison table and plot.
    Compare {
        #[command(flatten)]
        common: CommonOpts,

        /// Comma-separated lineup (so,dfbbo,hybrid-n,hybrid-halves).
        #[arg(long)]
        methods: Option<String>,

        /// Use the reference step counts instead of the desk-scale defaults.
        #[arg(long, default_value_t = false)]
        full_scale: bool,
    },
    /// Map solver-returned infeasibility over a grid of target states.
    Scan {
        #[command(flatten)]
        common: CommonOpts,

        /// Grid as min:max:resolution, applied to both state axes.
        #[arg(long, default_value = "0:5:20")]
        grid: String,
    },
    /// Counterexample suite and property checks.
    Selftest,
}

/// JSON configuration file schema: every field optional, flags win.
#[derive(Debug, Clone, Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    benchmark: Option<BenchmarkId>,
    n_steps: Option<usize>,
    budget: Option<usize>,
    smooth_budget: Option<usize>,
    seed: Option<u64>,
    method: Option<MethodChoice>,
    lambda: Option<String>,
    out: Option<PathBuf>,
    solver: Option<plateau_core::solver::SolverSettings>,
    opportunistic: Option<bool>,
    min_mesh_size: Option<f64>,
    initial_frame_size: Option<f64>,
    feasibility_tolerance: Option<f64>,
    exec: Option<ExecMode>,
}

struct Resolved {
    benchmark: BenchmarkId,
    n_steps: Option<usize>,
    config: RunConfig,
    out: Option<PathBuf>,
    method: Option<MethodChoice>,
    lambda: Option<String>,
}

fn resolve(common: &CommonOpts, method: Option<MethodChoice>, lambda: Option<String>) -> Result<Resolved, String> {
    let file: FileConfig = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| format!("cannot parse config {}: {e}", path.display()))?
        }
        None => FileConfig::default(),
    };

    let benchmark = common
        .benchmark
        .or(file.benchmark)
        .ok_or_else(|| "no benchmark given (use --benchmark or a config file)".to_string())?;

    let mut config = RunConfig::default();
    if let Some(solver) = file.solver {
        config.solver = solver;
    }
    if let Some(v) = file.opportunistic {
        config.opportunistic = v;
    }
    if let Some(v) = file.min_mesh_size {
        config.min_mesh_size = v;
    }
    if let Some(v) = file.initial_frame_size {
        config.initial_frame_size = v;
    }
    if let Some(v) = file.feasibility_tolerance {
        config.feasibility_tolerance = v;
    }
    if let Some(v) = file.exec {
        config.exec = v;
    }
    if let Some(b) = common.budget.or(file.budget) {
        config.budget = b;
    }
    if let Some(b) = file.smooth_budget {
        config.smooth_budget = b;
    }
    if let Some(s) = common.seed.or(file.seed) {
        config.seed = s;
    }

    Ok(Resolved {
        benchmark,
        n_steps: common.n_steps.or(file.n_steps),
        config,
        out: common.out.clone().or(file.out),
        method: method.or(file.method),
        lambda: lambda.or(file.lambda),
    })
}

fn main() -> ExitCode {
    env_logger::try_init().ok();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help/version requests are not errors
            use clap::error::ErrorKind;
            let _ = err.print();
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };

    if cli.threads > 0 {
        configure_thread_pool(cli.threads);
    }

    let result = match cli.command {
        Command::Run {
            common,
            method,
            lambda,
        } => cmd_run(&common, method, lambda),
        Command::Compare {
            common,
            methods,
            full_scale,
        } => cmd_compare(&common, methods, full_scale),
        Command::Scan { common, grid } => cmd_scan(&common, &grid),
        Command::Selftest => cmd_selftest(),
    };

    match result {
        Ok(degraded) => {
            if degraded {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

#[cfg(feature = "parallel")]
fn configure_thread_pool(threads: usize) {
    if let Err(err) = rayon_pool(threads) {
        log::warn!("could not configure the worker pool: {err}");
    }
}

#[cfg(feature = "parallel")]
fn rayon_pool(threads: usize) -> Result<(), String> {
    plateau_core::exec::build_global_pool(threads).map_err(|e| e.to_string())
}

#[cfg(not(feature = "parallel"))]
fn configure_thread_pool(_threads: usize) {
    log::warn!("built without the parallel feature; --threads has no effect");
}

fn cmd_run(
    common: &CommonOpts,
    method: Option<MethodChoice>,
    lambda: Option<String>,
) -> Result<bool, String> {
    let resolved = resolve(common, method, lambda)?;
    let method = resolved
        .method
        .ok_or_else(|| "no method given (use --method or a config file)".to_string())?;
    let bench = Benchmark::build(resolved.benchmark, resolved.n_steps);

    let mut resolved = resolved;
    if matches!(method, MethodChoice::So) {
        if let Some(b) = common.budget {
            resolved.config.smooth_budget = b;
        }
    }
    let spec = match method {
        MethodChoice::So => MethodSpec::So,
        MethodChoice::Dfbbo => MethodSpec::Dfbbo,
        MethodChoice::Hybrid => {
            let lambda = match &resolved.lambda {
                Some(text) => LambdaChoice::parse(text)?,
                None => LambdaChoice::FullHorizon,
            };
            MethodSpec::Hybrid(lambda)
        }
    };

    let mut output = spec.run(&bench, &resolved.config);
    if let Some(dir) = &resolved.out {
        output
            .persist(dir)
            .map_err(|e| format!("cannot write outputs: {e}"))?;
    }
    println!(
        "{} {} | smoothed {:.6} | true {:.6} | infeasibility {:.3e} | {} evaluations | {}",
        output.record.benchmark,
        spec.label(),
        output.record.smoothed_objective,
        output.record.true_objective,
        output.record.infeasibility,
        output.record.evaluations,
        output.record.solver_status,
    );
    Ok(output.record.degraded)
}

fn parse_method_list(text: &str) -> Result<Vec<MethodSpec>, String> {
    text.split(',')
        .map(|item| match item.trim() {
            "so" => Ok(MethodSpec::So),
            "dfbbo" => Ok(MethodSpec::Dfbbo),
            "hybrid-n" | "hybrid" => Ok(MethodSpec::Hybrid(LambdaChoice::FullHorizon)),
            "hybrid-halves" => Ok(MethodSpec::Hybrid(LambdaChoice::Halves)),
            other => Err(format!(
                "unknown lineup entry '{other}' (expected so, dfbbo, hybrid-n, hybrid-halves)"
            )),
        })
        .collect()
}

fn cmd_compare(
    common: &CommonOpts,
    methods: Option<String>,
    full_scale: bool,
) -> Result<bool, String> {
    let resolved = resolve(common, None, None)?;
    let steps = if full_scale {
        resolved.n_steps
    } else {
        Some(
            resolved
                .n_steps
                .unwrap_or_else(|| runner::desk_scale_steps(resolved.benchmark)),
        )
    };
    let bench = Benchmark::build(resolved.benchmark, steps);
    let lineup = match methods {
        Some(text) => parse_method_list(&text)?,
        None => MethodSpec::default_lineup(),
    };

    let mut report = compare(&bench, &lineup, &resolved.config);
    let table = report.table_csv();
    print!("{table}");

    if let Some(dir) = &resolved.out {
        std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
        for entry in report.entries.iter_mut() {
            entry
                .output
                .persist(dir)
                .map_err(|e| format!("cannot write outputs: {e}"))?;
        }
        let stem = format!("{}_comparison", bench.id.name());
        std::fs::write(dir.join(format!("{stem}.csv")), &table).map_err(|e| e.to_string())?;
        std::fs::write(dir.join(format!("{stem}.svg")), report.svg(&bench))
            .map_err(|e| e.to_string())?;
    }

    Ok(report.entries.iter().any(|e| e.output.record.degraded))
}

fn parse_grid(text: &str) -> Result<ScanGrid, String> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid '{text}' is not min:max:resolution"));
    }
    let lo: f64 = parts[0].parse().map_err(|_| "bad grid minimum".to_string())?;
    let hi: f64 = parts[1].parse().map_err(|_| "bad grid maximum".to_string())?;
    let res: usize = parts[2].parse().map_err(|_| "bad grid resolution".to_string())?;
    if res == 0 || hi <= lo {
        return Err(format!("grid '{text}' is empty"));
    }
    Ok(ScanGrid {
        x_range: (lo, hi),
        y_range: (lo, hi),
        resolution: (res, res),
    })
}

fn cmd_scan(common: &CommonOpts, grid_text: &str) -> Result<bool, String> {
    let resolved = resolve(common, None, None)?;
    let bench = Benchmark::build(resolved.benchmark, resolved.n_steps);
    let grid = parse_grid(grid_text)?;
    let settings = TwoPhaseSettings {
        solver: resolved.config.solver.clone(),
    };
    let scan = benchmarks::infeasibility_scan(&bench.spec, &grid, &settings, resolved.config.exec)
        .map_err(|e| e.to_string())?;

    let worst = scan.values.iter().cloned().fold(0.0f64, f64::max);
    let feasible = scan.values.iter().filter(|v| **v <= 1e-8).count();
    println!(
        "scan {}x{} on {}: {} targets reachable at 1e-8, worst infeasibility {:.3e}",
        grid.resolution.0,
        grid.resolution.1,
        bench.id.name(),
        feasible,
        worst
    );

    if let Some(dir) = &resolved.out {
        std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
        let stem = format!("{}_scan", bench.id.name());
        std::fs::write(dir.join(format!("{stem}.csv")), scan.csv()).map_err(|e| e.to_string())?;
        std::fs::write(dir.join(format!("{stem}.svg")), plot::scan_svg(&scan))
            .map_err(|e| e.to_string())?;
    }
    Ok(false)
}

fn cmd_selftest() -> Result<bool, String> {
    use plateau_core::benchmarks::Counterexample;
    use plateau_core::problem::{evaluate_two_phase, solve_feasibility};
    use plateau_core::smoothing::FloorApprox;

    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool, detail: String| {
        println!("{}: {name} — {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    // floor smoothing accuracy away from the integers
    let fa = FloorApprox::new(75.0, -5, 5);
    let mut worst = 0.0f64;
    for i in 0..10_000 {
        let x = -5.0 + 10.0 * (i as f64) / 9_999.0;
        if (x - x.round()).abs() >= 0.2 {
            worst = worst.max((fa.value(x) - x.floor()).abs());
        }
    }
    check(
        "floor-smoothing-accuracy",
        worst <= 1e-6,
        format!("max error {worst:.2e} away from the integers"),
    );

    // the pinched-constraints case follows its closed forms
    let case = Counterexample::InfeasibleHalfLine.case();
    let settings = TwoPhaseSettings::default();
    let mut ok = true;
    let mut detail = String::new();
    for y in [0.0, 0.5, 1.0] {
        let r = evaluate_two_phase(&case.problem, &case.partition, &[y], None, &settings)
            .map_err(|e| e.to_string())?;
        let mu_expected = Counterexample::InfeasibleHalfLine
            .expected_infeasibility(y)
            .unwrap();
        ok &= (r.infeasibility - mu_expected).abs() < 1e-4 && (r.objective - y).abs() < 1e-4;
        detail = format!(
            "last point y={y}: infeasibility {:.4}, objective {:.4}",
            r.infeasibility, r.objective
        );
    }
    check("two-phase-pinched-constraints", ok, detail);

    // unattained infima show the budget-decay signature
    let mut ok = true;
    for case in [
        Counterexample::UnattainedEverywhere,
        Counterexample::UnattainedOffOrigin,
    ] {
        let c = case.case();
        let mut last = f64::INFINITY;
        for budget in [2usize, 20, 200] {
            let s = TwoPhaseSettings {
                solver: plateau_core::solver::SolverSettings {
                    max_inner_iterations: budget,
                    gradient_tolerance: 1e-300,
                    max_step: 3.0,
                    ..Default::default()
                },
            };
            let r = evaluate_two_phase(&c.problem, &c.partition, &[0.7], None, &s)
                .map_err(|e| e.to_string())?;
            ok &= r.objective < last;
            last = r.objective;
        }
    }
    check(
        "unattained-infimum-signature",
        ok,
        "objective strictly decreases as budgets grow tenfold".into(),
    );

    // feasibility flips across the pinch threshold
    let (_, mu_low, _) =
        solve_feasibility(&case.problem, &case.partition, &[0.5], &[0.0], &settings)
            .map_err(|e| e.to_string())?;
    let (_, mu_high, _) =
        solve_feasibility(&case.problem, &case.partition, &[1.5], &[0.0], &settings)
            .map_err(|e| e.to_string())?;
    check(
        "pinch-threshold-feasibility",
        mu_low > 0.4 && mu_high <= 1e-8,
        format!("least violation {mu_low:.3} below, {mu_high:.2e} above"),
    );

    // the barrier walks the pinched blackbox to the feasible corner
    let case = Counterexample::InfeasibleHalfLine.case();
    let evaluator = plateau_core::problem::TwoPhaseEvaluator::new(
        case.problem,
        case.partition,
        TwoPhaseSettings::default(),
    );
    let blackbox = |y: &[f64]| -> (f64, f64) {
        match evaluator.evaluate(y, None) {
            Ok(r) => (r.objective, r.infeasibility),
            Err(_) => (f64::INFINITY, f64::INFINITY),
        }
    };
    let outcome = plateau_core::mads::solve(
        &blackbox,
        &[0.0],
        &plateau_core::mads::MadsSettings {
            max_evaluations: 500,
            seed: 7,
            ..Default::default()
        },
    );
    let feasible_y = outcome.best_feasible.as_ref().map(|(p, _)| p[0]);
    check(
        "barrier-reaches-feasibility",
        feasible_y.is_some_and(|y| (y - 1.0).abs() <= 1e-2),
        format!("feasible incumbent {feasible_y:?}"),
    );

    if failures == 0 {
        println!("selftest: all checks passed");
        Ok(false)
    } else {
        println!("selftest: {failures} check(s) failed");
        Ok(true)
    }
}
