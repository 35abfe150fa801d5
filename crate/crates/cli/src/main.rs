use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quadchain_cli::commands::{cmd_linearize, cmd_simulate, cmd_verify};
use quadchain_cli::scenario::{parse_scenario, Scenario, ScenarioError};

/// Quadrotor with a cable-suspended payload: simulation, linearization and checks.
#[derive(Parser)]
#[command(name = "quadchain", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop (or free-flight) simulation and write CSV and plot data.
    Simulate(Common),
    /// Write the linearized M, G, B matrices and the controllability rank.
    Linearize(Common),
    /// Run the numerical property checks; exit status 0 iff all pass.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML). Omit for the reference scenario; repeat with --sweep.
    #[arg(long, value_name = "PATH")]
    config: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Override the simulated duration (s).
    #[arg(long, value_name = "S")]
    duration: Option<f64>,
    /// Override the integration step (s).
    #[arg(long, value_name = "S")]
    dt: Option<f64>,
    /// Seed for the randomized checks.
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    /// Run every --config concurrently, each into its own subdirectory of --out.
    #[arg(long)]
    sweep: bool,
}

/// One scenario's input path (if any), parsed config and output directory.
struct Job {
    label: String,
    scenario: Scenario,
    out: PathBuf,
}

fn load(path: Option<&Path>, c: &Common) -> Result<Scenario, ScenarioError> {
    let sc = match path {
        Some(p) => parse_scenario(p)?,
        None => Scenario::default(),
    };
    sc.with_overrides(c.duration, c.dt)
}

fn jobs(c: &Common) -> Result<Vec<Job>, String> {
    if c.config.len() > 1 && !c.sweep {
        return Err("several --config given; add --sweep to run them all".into());
    }
    if c.config.is_empty() {
        let scenario = load(None, c).map_err(|e| e.to_string())?;
        return Ok(vec![Job {
            label: "reference".into(),
            scenario,
            out: c.out.clone(),
        }]);
    }
    let mut seen = std::collections::BTreeSet::new();
    c.config
        .iter()
        .map(|p| {
            let scenario = load(Some(p), c).map_err(|e| format!("{}: {e}", p.display()))?;
            let stem = p
                .file_stem()
                .map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned());
            if c.sweep && !seen.insert(stem.clone()) {
                return Err(format!("two sweep configs share the name `{stem}`"));
            }
            let out = if c.sweep { c.out.join(&stem) } else { c.out.clone() };
            Ok(Job {
                label: p.display().to_string(),
                scenario,
                out,
            })
        })
        .collect()
}

/// Runs one job and returns the text to print and whether it succeeded.
fn run(cmd: &Command, job: &Job, seed: u64) -> (String, bool) {
    match cmd {
        Command::Simulate(_) => match cmd_simulate(&job.scenario, &job.out) {
            Ok(summary) => (format!("wrote {}\n{}", job.out.display(), summary.render()), true),
            Err(e) => (format!("error: {e}\n"), false),
        },
        Command::Linearize(_) => match cmd_linearize(&job.scenario, &job.out) {
            Ok(r) => (
                format!(
                    "wrote {}\ncontrollability rank {} of {} (configuration dimension {})\n",
                    job.out.display(),
                    r.rank,
                    r.full_rank,
                    r.dim
                ),
                true,
            ),
            Err(e) => (format!("error: {e}\n"), false),
        },
        Command::Verify(_) => {
            let checks = cmd_verify(&job.scenario, seed);
            let ok = checks.iter().all(|c| c.passed);
            let mut text: String = checks.iter().map(|c| format!("{c}\n")).collect();
            text.push_str(if ok {
                "all checks passed\n"
            } else {
                "some checks failed\n"
            });
            (text, ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Simulate(c) | Command::Linearize(c) | Command::Verify(c) => c,
    };
    let jobs = match jobs(common) {
        Ok(j) => j,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let results: Vec<(String, bool)> = if jobs.len() > 1 {
        std::thread::scope(|s| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|job| s.spawn(|| run(&cli.command, job, common.seed)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        })
    } else {
        jobs.iter().map(|job| run(&cli.command, job, common.seed)).collect()
    };
    let mut ok = true;
    for (job, (text, passed)) in jobs.iter().zip(results) {
        if jobs.len() > 1 {
            println!("== {}", job.label);
        }
        if !text.starts_with("error:") {
            print!("{text}");
        } else {
            eprint!("{text}");
        }
        ok &= passed;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
