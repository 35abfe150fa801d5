//! Exit criteria, one line each. Runs without the libtest harness so every
//! line is printed; the process fails if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use quadchain::controller::ControllerConfig;
use quadchain::diagnostics::c3_bound;
use quadchain::dynamics::{reference_inertia, PlantParams, SystemState};
use quadchain::integrator::IntegratorConfig;
use quadchain::linear::{build_linear_model, controllability_rank};
use quadchain::manifold::{exp_so3, Vec3};
use quadchain::verification::*;
use quadchain_cli::commands::{cmd_simulate, run_simulation, TRAJECTORY_FILE};
use quadchain_cli::output::PLOT_FILES;
use quadchain_cli::scenario::Scenario;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn conservation_run() -> (ConservationReport, Duration) {
    let start = Instant::now();
    let r = free_flight_conservation(
        &PlantParams::reference(),
        &SystemState::reference_initial(5),
        &IntegratorConfig {
            dt: 1e-3,
            ..Default::default()
        },
        5.0,
    )
    .expect("free flight run");
    (r, start.elapsed())
}

fn energy() -> Outcome {
    let (r, took) = conservation_run();
    outcome(
        r.relative_energy_drift <= 1e-6 && took <= Duration::from_secs(5),
        format!(
            "relative drift {:.3e} <= 1e-6, runtime {took:.2?} <= 5 s",
            r.relative_energy_drift
        ),
    )
}

fn momentum() -> Outcome {
    let (r, _) = conservation_run();
    outcome(
        r.horizontal_momentum_drift <= 1e-8 && r.vertical_momentum_error <= 1e-6,
        format!(
            "horizontal drift {:.3e} <= 1e-8, vertical error {:.3e} <= 1e-6",
            r.horizontal_momentum_drift, r.vertical_momentum_error
        ),
    )
}

fn cross_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r = cross_form(&PlantParams::reference(), &mut rng, 100).expect("cross-form");
    outcome(
        r.max_xddot_gap <= 1e-10 && r.max_qddot_gap <= 1e-10,
        format!(
            "100 states: xddot gap {:.3e}, qddot gap {:.3e} <= 1e-10",
            r.max_xddot_gap, r.max_qddot_gap
        ),
    )
}

fn oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let gap = single_link_oracle_gap(&mut rng, 50).expect("oracle");
    outcome(gap <= 1e-8, format!("50 states: max gap {gap:.3e} <= 1e-8"))
}

fn linearization() -> Outcome {
    let hs = [1e-2, 1e-3, 1e-4];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r = linearization_residuals(&PlantParams::reference(), &mut rng, &hs).expect("residuals");
    let slope = loglog_fit_slope(&hs, &r);
    outcome(
        slope >= 1.9,
        format!(
            "residuals {:.2e} {:.2e} {:.2e}, log-log slope {slope:.4} >= 1.9",
            r[0], r[1], r[2]
        ),
    )
}

fn controllability() -> Outcome {
    let five = controllability_rank(&build_linear_model(&PlantParams::reference())).expect("rank");
    let one_plant = PlantParams::uniform(0.5, reference_inertia(), 1, 0.1, 0.1).expect("plant");
    let one = controllability_rank(&build_linear_model(&one_plant)).expect("rank");
    outcome(
        five == 26 && one == 10,
        format!("rank {five} (want 26), n=1 rank {one} (want 10)"),
    )
}

fn closed_loop() -> Outcome {
    let sc = Scenario::default();
    let start = Instant::now();
    let log = run_simulation(&sc).expect("reference run");
    let took = start.elapsed();
    let last = log.last();
    let pos = (last.state.x - sc.controller.x_d).norm();
    let passed = pos <= 0.01
        && last.e_q <= 0.01
        && last.e_omega <= 0.01
        && log.min_thrust > 0.0
        && took <= Duration::from_secs(10);
    outcome(
        passed,
        format!(
            "|x-x_d| {pos:.3e} <= 0.01, e_q {:.3e} <= 0.01, e_omega {:.3e} <= 0.01, min f {:.3} > 0, runtime {took:.2?} <= 10 s",
            last.e_q, last.e_omega, log.min_thrust
        ),
    )
}

fn lyapunov() -> Outcome {
    let cfg = ControllerConfig::reference();
    let j = reference_inertia();
    let bound = c3_bound(cfg.k_attitude, cfg.k_attitude_rate, &j);
    let r = lyapunov_sandwich(
        cfg.k_attitude,
        cfg.k_attitude_rate,
        &j,
        0.5,
        1.0,
        exp_so3(&Vec3::new(0.7, -0.4, 0.3)),
        Vec3::new(2.0, -1.0, 0.5),
        1e-3,
        5000,
    )
    .expect("transient");
    let m = &r.report;
    outcome(
        bound > 0.0 && m.all_positive_definite() && r.violations == 0 && r.outside_domain == 0,
        format!(
            "bound {bound:.4e} > 0; min eig L1 {:.3e}, L2 {:.3e}, U {:.3e} > 0; sandwich violated at {}/{} samples",
            m.min_eig_l1, m.min_eig_l2, m.min_eig_u, r.violations, r.samples
        ),
    )
}

fn singular_perturbation() -> Outcome {
    let sc = Scenario::default();
    let gaps = singular_perturbation_gaps(
        &sc.plant,
        &sc.controller,
        &sc.initial,
        &sc.integrator,
        sc.duration,
        &[1.0, 0.5, 0.25],
    )
    .expect("runs");
    outcome(
        gaps.windows(2).all(|w| w[1] < w[0]),
        format!(
            "sup |x_full - x_reduced| for eps 1, 0.5, 0.25: {:.4e} > {:.4e} > {:.4e}",
            gaps[0], gaps[1], gaps[2]
        ),
    )
}

fn determinism() -> Outcome {
    let sc = Scenario::default();
    let dirs = [
        tempfile::tempdir().expect("tempdir"),
        tempfile::tempdir().expect("tempdir"),
    ];
    for d in &dirs {
        cmd_simulate(&sc, d.path()).expect("simulate");
    }
    let mut files = vec![TRAJECTORY_FILE];
    files.extend(PLOT_FILES);
    let read = |d: &tempfile::TempDir, f: &str| std::fs::read(d.path().join(f)).expect("output file");
    let identical = files.iter().all(|f| read(&dirs[0], f) == read(&dirs[1], f));
    let csv = read(&dirs[0], TRAJECTORY_FILE);
    let lf_only = !csv.contains(&b'\r');
    outcome(
        identical && lf_only,
        format!(
            "{} files byte-identical across two runs: {identical}; LF line endings: {lf_only}",
            files.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("energy conservation", energy),
        ("momentum law", momentum),
        ("cross-form equivalence", cross_forms),
        ("n=1 minimal-coordinate oracle", oracle),
        ("linearization fidelity", linearization),
        ("controllability", controllability),
        ("closed-loop convergence", closed_loop),
        ("Lyapunov apparatus", lyapunov),
        ("singular-perturbation trend", singular_perturbation),
        ("determinism and format", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {tag} {name}: {}", k + 1, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
