//! The three subcommands, independent of argument parsing.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use quadchain::controller::{GeometricController, ReducedController};
use quadchain::diagnostics::{c3_bound, lyapunov_matrices};
use quadchain::dynamics::build_inertia_table;
use quadchain::integrator::{simulate, ControlLaw, FreeFlight, TrajectoryLog};
use quadchain::linear::{build_linear_model, controllability_rank};
use quadchain::manifold::{exp_so3, Vec3};
use quadchain::verification::{
    cross_form, free_flight_conservation, linearization_residuals, loglog_fit_slope, lyapunov_sandwich,
    single_link_oracle_gap, with_link_spin,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::output::{self, Summary, PLOT_SCRIPT};
use crate::scenario::{ControlMode, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Model(#[from] quadchain::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CommandError + '_ {
    move |source| CommandError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CommandError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

pub fn run_simulation(sc: &Scenario) -> Result<TrajectoryLog, CommandError> {
    let table = build_inertia_table(&sc.plant);
    let cfg = sc.effective_controller();
    let mut law: Box<dyn ControlLaw> = match sc.mode {
        ControlMode::Geometric => Box::new(GeometricController::new(
            cfg,
            &sc.plant,
            table.clone(),
            sc.integrator.dt,
        )?),
        ControlMode::Reduced => Box::new(ReducedController::new(cfg, &sc.plant, table.clone())?),
        ControlMode::Free => Box::new(FreeFlight),
    };
    Ok(simulate(
        &sc.plant,
        &table,
        &sc.initial,
        law.as_mut(),
        &sc.integrator,
        sc.duration,
        sc.output.decimation,
    )?)
}

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const PLOT_SCRIPT_FILE: &str = "plot.gp";

/// Runs the scenario and writes the trajectory, summary and plot data under `out`.
pub fn cmd_simulate(sc: &Scenario, out: &Path) -> Result<Summary, CommandError> {
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let log = run_simulation(sc)?;
    let path = out.join(TRAJECTORY_FILE);
    output::write_trajectory(&log, create(&path)?).map_err(|source| CommandError::Csv { path, source })?;
    let summary = Summary::of(&log, &sc.controller.x_d);
    let path = out.join(SUMMARY_FILE);
    std::fs::write(&path, summary.render()).map_err(io_err(&path))?;
    output::write_plot_data(&log, &sc.controller.x_d, out).map_err(io_err(out))?;
    if sc.output.plot_script {
        let path = out.join(PLOT_SCRIPT_FILE);
        std::fs::write(&path, PLOT_SCRIPT).map_err(io_err(&path))?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizeReport {
    pub dim: usize,
    pub rank: usize,
    pub full_rank: usize,
}

pub const LINEAR_FILES: [&str; 3] = ["M.csv", "G.csv", "B.csv"];

/// Writes `𝐌`, `𝐆`, `𝐁` and reports the controllability rank.
pub fn cmd_linearize(sc: &Scenario, out: &Path) -> Result<LinearizeReport, CommandError> {
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let lm = build_linear_model(&sc.plant);
    for (name, m) in LINEAR_FILES.iter().zip([&lm.mass, &lm.stiffness, &lm.input]) {
        let path = out.join(name);
        output::write_matrix(m, create(&path)?).map_err(|source| CommandError::Csv { path, source })?;
    }
    let rank = controllability_rank(&lm)?;
    let report = LinearizeReport {
        dim: lm.dim(),
        rank,
        full_rank: 2 * lm.dim(),
    };
    let path = out.join("rank.txt");
    std::fs::write(
        &path,
        format!(
            "controllability_rank = {rank}\nstate_dimension = {}\n",
            report.full_rank
        ),
    )
    .map_err(io_err(&path))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<14} {}", self.name, self.detail)
    }
}

pub const ENERGY_TOL: f64 = 1e-6;
pub const HORIZONTAL_MOMENTUM_TOL: f64 = 1e-8;
pub const VERTICAL_MOMENTUM_TOL: f64 = 1e-6;
pub const CROSS_FORM_TOL: f64 = 1e-10;
pub const ORACLE_TOL: f64 = 1e-8;
pub const MIN_SLOPE: f64 = 1.9;
pub const SLOPE_STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];
/// Length of the free-flight run used for the conservation checks (s).
pub const CONSERVATION_HORIZON: f64 = 5.0;

fn check(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

fn failed(name: &'static str, e: impl std::fmt::Display) -> CheckOutcome {
    check(name, false, format!("error: {e}"))
}

/// The property suite on the scenario's plant, gains and integrator.
///
/// The free-flight run starts from the scenario's initial state with an extra
/// seeded 1 rad/s spin on every link, so the check never degenerates to a
/// body at rest.
pub fn cmd_verify(sc: &Scenario, seed: u64) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let s0 = with_link_spin(&sc.initial, &mut rng, 1.0);
    match free_flight_conservation(&sc.plant, &s0, &sc.integrator, CONSERVATION_HORIZON) {
        Ok(r) => {
            out.push(check(
                "energy",
                r.relative_energy_drift <= ENERGY_TOL,
                format!("relative drift {:.3e} (limit {ENERGY_TOL:e})", r.relative_energy_drift),
            ));
            out.push(check(
                "momentum",
                r.horizontal_momentum_drift <= HORIZONTAL_MOMENTUM_TOL && r.vertical_momentum_error <= VERTICAL_MOMENTUM_TOL,
                format!(
                    "horizontal {:.3e} (limit {HORIZONTAL_MOMENTUM_TOL:e}), vertical {:.3e} (limit {VERTICAL_MOMENTUM_TOL:e})",
                    r.horizontal_momentum_drift, r.vertical_momentum_error
                ),
            ));
        }
        Err(e) => {
            out.push(failed("energy", &e));
            out.push(failed("momentum", &e));
        }
    }

    out.push(match cross_form(&sc.plant, &mut rng, 100) {
        Ok(r) => check(
            "cross-form",
            r.max_xddot_gap <= CROSS_FORM_TOL && r.max_qddot_gap <= CROSS_FORM_TOL,
            format!(
                "max gap xddot {:.3e}, qddot {:.3e} (limit {CROSS_FORM_TOL:e})",
                r.max_xddot_gap, r.max_qddot_gap
            ),
        ),
        Err(e) => failed("cross-form", e),
    });

    out.push(match linearization_residuals(&sc.plant, &mut rng, &SLOPE_STEPS) {
        Ok(r) => {
            let slope = loglog_fit_slope(&SLOPE_STEPS, &r);
            check(
                "linearization",
                slope >= MIN_SLOPE,
                format!("log-log slope {slope:.4} (minimum {MIN_SLOPE})"),
            )
        }
        Err(e) => failed("linearization", e),
    });

    out.push(lyapunov_check(sc));

    out.push(match single_link_oracle_gap(&mut rng, 50) {
        Ok(gap) => check(
            "n=1 oracle",
            gap <= ORACLE_TOL,
            format!("max gap {gap:.3e} (limit {ORACLE_TOL:e})"),
        ),
        Err(e) => failed("n=1 oracle", e),
    });
    out
}

fn lyapunov_check(sc: &Scenario) -> CheckOutcome {
    const NAME: &str = "lyapunov";
    let cfg = sc.effective_controller();
    let j = &sc.plant.inertia;
    let bound = c3_bound(cfg.k_attitude, cfg.k_attitude_rate, j);
    let c3 = sc.diagnostics.c3.unwrap_or(0.5 * bound);
    if let Err(e) = lyapunov_matrices(cfg.k_attitude, cfg.k_attitude_rate, j, c3, sc.diagnostics.psi_r) {
        return failed(NAME, e);
    }
    let r = lyapunov_sandwich(
        cfg.k_attitude,
        cfg.k_attitude_rate,
        j,
        c3 / bound,
        sc.diagnostics.psi_r,
        exp_so3(&Vec3::new(0.7, -0.4, 0.3)),
        Vec3::new(2.0, -1.0, 0.5),
        1e-3,
        5000,
    );
    match r {
        Ok(r) => check(
            NAME,
            r.report.all_positive_definite() && r.violations == 0,
            format!(
                "c3 {:.4e} < bound {:.4e}; min eig L1 {:.3e}, L2 {:.3e}, U {:.3e}; sandwich violations {}/{}",
                c3,
                bound,
                r.report.min_eig_l1,
                r.report.min_eig_l2,
                r.report.min_eig_u,
                r.violations,
                r.samples - r.outside_domain
            ),
        ),
        Err(e) => failed(NAME, e),
    }
}
