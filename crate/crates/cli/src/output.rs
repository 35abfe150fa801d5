//! Trajectory CSV, run summary and gnuplot data files.
//!
//! Floats are written as `{:.16e}` (17 significant digits), so a value read
//! back is the one that was written.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::DMatrix;
use quadchain::integrator::{Sample, TrajectoryLog};
use quadchain::manifold::Vec3;

pub fn fmt_float(v: f64) -> String {
    // Adding +0 folds −0 into +0.
    format!("{:.16e}", v + 0.0)
}

/// Column names for a chain of `n` links.
pub fn trajectory_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    let vec3 = |h: &mut Vec<String>, name: &str| {
        for k in 1..=3 {
            h.push(format!("{name}{k}"));
        }
    };
    vec3(&mut h, "x");
    vec3(&mut h, "v");
    for i in 1..=3 {
        for j in 1..=3 {
            h.push(format!("R{i}{j}"));
        }
    }
    vec3(&mut h, "Omega");
    vec3(&mut h, "Omega_c");
    for i in 1..=n {
        vec3(&mut h, &format!("q{i}_"));
    }
    for i in 1..=n {
        vec3(&mut h, &format!("w{i}_"));
    }
    h.push("f".into());
    vec3(&mut h, "M");
    h.push("E".into());
    vec3(&mut h, "p");
    h.extend(["e_q", "e_omega", "Psi_R"].map(String::from));
    h
}

fn sample_row(s: &Sample) -> Vec<f64> {
    let st = &s.state;
    let mut row = vec![s.time];
    row.extend(st.x.iter());
    row.extend(st.v.iter());
    let r = st.rotation.matrix();
    for i in 0..3 {
        for j in 0..3 {
            row.push(r[(i, j)]);
        }
    }
    row.extend(st.body_rate.iter());
    row.extend(s.telemetry.omega_c.iter());
    for q in &st.q {
        row.extend(q.as_vec().iter());
    }
    for w in &st.omega {
        row.extend(w.iter());
    }
    row.push(s.actuation.thrust());
    row.extend(s.actuation.moment().iter());
    row.push(s.energy);
    row.extend(s.momentum.iter());
    row.extend([s.e_q, s.e_omega, s.telemetry.psi_r]);
    row
}

pub fn trajectory_rows(log: &TrajectoryLog) -> Vec<Vec<f64>> {
    log.samples.iter().map(sample_row).collect()
}

pub fn write_trajectory<W: Write>(log: &TrajectoryLog, out: W) -> csv::Result<()> {
    let n = log.samples.first().map_or(0, |s| s.state.n());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(trajectory_header(n))?;
    for row in trajectory_rows(log) {
        w.write_record(row.iter().map(|v| fmt_float(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// A numeric CSV table: header and rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_table<R: io::Read>(input: R) -> Result<Table, Box<dyn std::error::Error + Send + Sync>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::parse::<f64>).collect::<Result<Vec<_>, _>>()?);
    }
    Ok(Table { header, rows })
}

/// Writes a dense matrix with a `# rows x cols` comment line and no header.
pub fn write_matrix<W: Write>(m: &DMatrix<f64>, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .flexible(true)
        .from_writer(out);
    w.write_record([format!("# {} x {}", m.nrows(), m.ncols())])?;
    for i in 0..m.nrows() {
        w.write_record((0..m.ncols()).map(|j| fmt_float(m[(i, j)])))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub final_position_error: f64,
    pub final_e_q: f64,
    pub final_e_omega: f64,
    pub min_thrust: f64,
    pub max_thrust: f64,
    pub relative_energy_drift: f64,
    pub samples: usize,
}

impl Summary {
    pub fn of(log: &TrajectoryLog, x_d: &Vec3) -> Self {
        let last = log.last();
        Summary {
            final_position_error: (last.state.x - x_d).norm(),
            final_e_q: last.e_q,
            final_e_omega: last.e_omega,
            min_thrust: log.min_thrust,
            max_thrust: log.max_thrust,
            relative_energy_drift: log.relative_energy_drift(),
            samples: log.samples.len(),
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let rows = [
            ("final_position_error", self.final_position_error),
            ("final_e_q", self.final_e_q),
            ("final_e_omega", self.final_e_omega),
            ("min_thrust", self.min_thrust),
            ("max_thrust", self.max_thrust),
            ("relative_energy_drift", self.relative_energy_drift),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k} = {}", fmt_float(v));
        }
        let _ = writeln!(s, "samples = {}", self.samples);
        s
    }
}

fn write_dat(path: &Path, columns: &[&str], rows: impl Iterator<Item = Vec<f64>>) -> io::Result<()> {
    let mut s = format!("# {}\n", columns.join(" "));
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| fmt_float(*v)).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    std::fs::write(path, s)
}

pub const PLOT_FILES: [&str; 4] = ["position.dat", "link_errors.dat", "attitude_rate.dat", "control.dat"];

/// Whitespace-separated data for position, link errors, `Ω` against `Ω_c`
/// and the control input.
pub fn write_plot_data(log: &TrajectoryLog, x_d: &Vec3, dir: &Path) -> io::Result<()> {
    let s = &log.samples;
    write_dat(
        &dir.join(PLOT_FILES[0]),
        &["t", "x1", "x2", "x3", "xd1", "xd2", "xd3"],
        s.iter()
            .map(|p| [&[p.time][..], p.state.x.as_slice(), x_d.as_slice()].concat()),
    )?;
    write_dat(
        &dir.join(PLOT_FILES[1]),
        &["t", "e_q", "e_omega"],
        s.iter().map(|p| vec![p.time, p.e_q, p.e_omega]),
    )?;
    write_dat(
        &dir.join(PLOT_FILES[2]),
        &["t", "Omega1", "Omega2", "Omega3", "Omega_c1", "Omega_c2", "Omega_c3"],
        s.iter().map(|p| {
            [
                &[p.time][..],
                p.state.body_rate.as_slice(),
                p.telemetry.omega_c.as_slice(),
            ]
            .concat()
        }),
    )?;
    write_dat(
        &dir.join(PLOT_FILES[3]),
        &["t", "f", "M1", "M2", "M3"],
        s.iter()
            .map(|p| [&[p.time, p.actuation.thrust()][..], p.actuation.moment().as_slice()].concat()),
    )
}

pub const PLOT_SCRIPT: &str = "\
set terminal pngcairo size 1200,900
set output 'trajectory.png'
set multiplot layout 2,2
set xlabel 't (s)'
set title 'position'
plot 'position.dat' u 1:2 w l t 'x1', '' u 1:3 w l t 'x2', '' u 1:4 w l t 'x3', \\
     '' u 1:5 w l dt 2 t 'xd1', '' u 1:6 w l dt 2 t 'xd2', '' u 1:7 w l dt 2 t 'xd3'
set title 'link errors'
set logscale y
plot 'link_errors.dat' u 1:2 w l t 'e_q', '' u 1:3 w l t 'e_omega'
unset logscale y
set title 'body rate and command'
plot 'attitude_rate.dat' u 1:2 w l t 'Omega1', '' u 1:3 w l t 'Omega2', '' u 1:4 w l t 'Omega3', \\
     '' u 1:5 w l dt 2 t 'Omega_c1', '' u 1:6 w l dt 2 t 'Omega_c2', '' u 1:7 w l dt 2 t 'Omega_c3'
set title 'control'
plot 'control.dat' u 1:2 w l t 'f', '' u 1:3 w l axes x1y2 t 'M1', '' u 1:4 w l axes x1y2 t 'M2', '' u 1:5 w l axes x1y2 t 'M3'
unset multiplot
";
