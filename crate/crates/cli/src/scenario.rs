//! TOML scenario files.
//!
//! Every field is optional; omitted fields take the reference vehicle, gains
//! and initial condition. An empty file is the full reference scenario.
//!
//! ```toml
//! duration = 10.0
//!
//! [plant]
//! mass = 0.5
//! inertia = [5.57e-3, 5.57e-3, 1.05e-2]   # diagonal, or 3×3 rows
//! links = 5
//! link_mass = 0.1                          # or link_masses = [...]
//! link_length = 0.1                        # or link_lengths = [...]
//!
//! [controller]
//! mode = "geometric"                       # "reduced" | "free"
//! k_q = [11.01, 6.67, 1.97, 0.41, 0.069]
//! epsilon = 1.0
//!
//! [initial]
//! x = [0.6, -0.7, 0.2]
//! links = { generator = "horizontal-arc", theta_max = 1.5707963267948966 }
//! ```

use std::path::Path;

use quadchain::controller::{ControllerConfig, LinkFeedback};
use quadchain::dynamics::{horizontal_arc, reference_inertia, PlantParams, SystemState, STANDARD_GRAVITY};
use quadchain::integrator::{IntegratorConfig, Scheme};
use quadchain::manifold::{exp_so3, project_tangent, Mat3, RotSO3, UnitS2, Vec3};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
    #[error("invalid scenario, {field}: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    #[default]
    Geometric,
    /// Ideal force applied directly, attitude assumed to track.
    Reduced,
    /// Rotors off.
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum FeedbackName {
    Rotated,
    Selector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum SchemeName {
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum MatrixSpec {
    Diagonal([f64; 3]),
    Rows([[f64; 3]; 3]),
}

impl MatrixSpec {
    fn matrix(&self) -> Mat3 {
        match self {
            MatrixSpec::Diagonal(d) => Mat3::from_diagonal(&Vec3::from(*d)),
            MatrixSpec::Rows(r) => Mat3::from_fn(|i, j| r[i][j]),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum LinkSpec {
    Explicit(Vec<[f64; 3]>),
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorSpec {
    generator: String,
    theta_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlant {
    mass: Option<f64>,
    inertia: Option<MatrixSpec>,
    gravity: Option<f64>,
    links: Option<usize>,
    link_mass: Option<f64>,
    link_length: Option<f64>,
    link_masses: Option<Vec<f64>>,
    link_lengths: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawController {
    mode: Option<ControlMode>,
    x_d: Option<[f64; 3]>,
    b1_d: Option<[f64; 3]>,
    k_x: Option<f64>,
    k_v: Option<f64>,
    k_q: Option<Vec<f64>>,
    k_omega: Option<Vec<f64>>,
    /// `k_R/ε²` at `ε = 1`.
    k_R: Option<f64>,
    /// `k_Ω/ε` at `ε = 1`.
    k_Omega: Option<f64>,
    epsilon: Option<f64>,
    link_feedback: Option<FeedbackName>,
    max_command_rate: Option<f64>,
    max_command_accel: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    dt: Option<f64>,
    scheme: Option<SchemeName>,
    renormalize_every: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawInitial {
    x: Option<[f64; 3]>,
    v: Option<[f64; 3]>,
    R: Option<[[f64; 3]; 3]>,
    axis_angle: Option<[f64; 3]>,
    Omega: Option<[f64; 3]>,
    links: Option<LinkSpec>,
    link_rates: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    decimation: Option<usize>,
    plot_script: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiagnostics {
    c3: Option<f64>,
    psi_r: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    duration: Option<f64>,
    #[serde(default)]
    plant: RawPlant,
    #[serde(default)]
    controller: RawController,
    #[serde(default)]
    integrator: RawIntegrator,
    #[serde(default)]
    initial: RawInitial,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    diagnostics: RawDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub decimation: usize,
    pub plot_script: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsConfig {
    /// Cross-term weight; `None` means half the admissible bound.
    pub c3: Option<f64>,
    pub psi_r: f64,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub plant: PlantParams,
    pub mode: ControlMode,
    pub controller: ControllerConfig,
    pub epsilon: f64,
    pub integrator: IntegratorConfig,
    pub initial: SystemState,
    pub duration: f64,
    pub output: OutputConfig,
    pub diagnostics: DiagnosticsConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        parse_scenario_str("").expect("the reference scenario is valid")
    }
}

impl Scenario {
    /// Controller gains with the `ε` scaling applied.
    pub fn effective_controller(&self) -> ControllerConfig {
        self.controller.clone().with_epsilon(self.epsilon)
    }

    /// Overrides from the command line, revalidated.
    pub fn with_overrides(mut self, duration: Option<f64>, dt: Option<f64>) -> Result<Self, ScenarioError> {
        if let Some(d) = duration {
            check_nonneg("duration", d)?;
            self.duration = d;
        }
        if let Some(dt) = dt {
            self.integrator.dt = dt;
            self.integrator
                .validate()
                .map_err(|e| invalid("integrator.dt", e.to_string()))?;
        }
        Ok(self)
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario_str(&text)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario, ScenarioError> {
    let de = toml::Deserializer::parse(text).map_err(|e| ScenarioError::Parse {
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        field: String::new(),
        message: e.message().to_string(),
    })?;
    let raw: RawScenario = serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Parse {
        line: e.inner().span().map_or(1, |s| line_of(text, s.start)),
        field: e.path().to_string(),
        message: e.inner().message().to_string(),
    })?;
    build(raw)
}

fn check_positive(field: &str, value: f64) -> Result<f64, ScenarioError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(invalid(field, format!("must be positive and finite, got {value}")))
    }
}

fn check_nonneg(field: &str, value: f64) -> Result<f64, ScenarioError> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(invalid(field, format!("must be non-negative and finite, got {value}")))
    }
}

fn per_link(
    field: &str,
    list: Option<Vec<f64>>,
    scalar: Option<f64>,
    default: f64,
    n: usize,
) -> Result<Vec<f64>, ScenarioError> {
    match (list, scalar) {
        (Some(_), Some(_)) => Err(invalid(field, "give either the per-link list or the scalar, not both")),
        (Some(v), None) if v.len() != n => Err(invalid(field, format!("{} values listed for n = {n}", v.len()))),
        (Some(v), None) => Ok(v),
        (None, s) => Ok(vec![s.unwrap_or(default); n]),
    }
}

fn build(raw: RawScenario) -> Result<Scenario, ScenarioError> {
    let rp = raw.plant;
    let n = rp
        .links
        .or(rp.link_masses.as_ref().map(Vec::len))
        .or(rp.link_lengths.as_ref().map(Vec::len))
        .unwrap_or(5);
    let plant = PlantParams::new(
        rp.mass.unwrap_or(0.5),
        rp.inertia.map_or_else(reference_inertia, |m| m.matrix()),
        per_link("plant.link_masses", rp.link_masses, rp.link_mass, 0.1, n)?,
        per_link("plant.link_lengths", rp.link_lengths, rp.link_length, 0.1, n)?,
        rp.gravity.unwrap_or(STANDARD_GRAVITY),
    )
    .map_err(|e| invalid("plant", e.to_string()))?;

    let rc = raw.controller;
    let mut controller = ControllerConfig::reference();
    if let Some(x) = rc.x_d {
        controller.x_d = Vec3::from(x);
    }
    if let Some(b) = rc.b1_d {
        controller.b1_d = UnitS2::normalize(Vec3::from(b)).map_err(|e| invalid("controller.b1_d", e.to_string()))?;
    }
    controller.k_x = rc.k_x.unwrap_or(controller.k_x);
    controller.k_xdot = rc.k_v.unwrap_or(controller.k_xdot);
    controller.k_attitude = rc.k_R.unwrap_or(controller.k_attitude);
    controller.k_attitude_rate = rc.k_Omega.unwrap_or(controller.k_attitude_rate);
    controller.max_command_rate = rc.max_command_rate.unwrap_or(controller.max_command_rate);
    controller.max_command_accel = rc.max_command_accel.unwrap_or(controller.max_command_accel);
    controller.link_feedback = match rc.link_feedback {
        Some(FeedbackName::Selector) => LinkFeedback::Selector,
        _ => LinkFeedback::Rotated,
    };
    // The reference link gains only fit the reference chain length.
    if let Some(kq) = rc.k_q {
        controller.k_q = kq;
    }
    if let Some(kw) = rc.k_omega {
        controller.k_omega = kw;
    }
    let mode = rc.mode.unwrap_or_default();
    if mode != ControlMode::Free {
        if controller.k_q.len() != n {
            return Err(invalid(
                "controller.k_q",
                format!("{} gains listed for n = {n}", controller.k_q.len()),
            ));
        }
        if controller.k_omega.len() != n {
            return Err(invalid(
                "controller.k_omega",
                format!("{} gains listed for n = {n}", controller.k_omega.len()),
            ));
        }
        controller
            .validate(n)
            .map_err(|e| invalid("controller", e.to_string()))?;
    }
    let epsilon = check_positive("controller.epsilon", rc.epsilon.unwrap_or(1.0))?;

    let ri = raw.integrator;
    let integrator = IntegratorConfig {
        dt: ri.dt.unwrap_or(1e-3),
        scheme: match ri.scheme {
            Some(SchemeName::Euler) => Scheme::EulerProjected,
            _ => Scheme::Rk4Projected,
        },
        renormalize_every: ri.renormalize_every.unwrap_or(1),
    };
    integrator
        .validate()
        .map_err(|e| invalid("integrator", e.to_string()))?;

    let initial = build_initial(raw.initial, n)?;
    let duration = check_nonneg("duration", raw.duration.unwrap_or(10.0))?;

    let output = OutputConfig {
        decimation: raw.output.decimation.unwrap_or(10),
        plot_script: raw.output.plot_script.unwrap_or(true),
    };
    if output.decimation == 0 {
        return Err(invalid("output.decimation", "must be at least 1"));
    }
    let diagnostics = DiagnosticsConfig {
        c3: raw
            .diagnostics
            .c3
            .map(|c| check_nonneg("diagnostics.c3", c))
            .transpose()?,
        psi_r: raw.diagnostics.psi_r.unwrap_or(1.0),
    };
    if !(diagnostics.psi_r > 0.0 && diagnostics.psi_r < 2.0) {
        return Err(invalid(
            "diagnostics.psi_r",
            format!("must lie in (0, 2), got {}", diagnostics.psi_r),
        ));
    }

    Ok(Scenario {
        plant,
        mode,
        controller,
        epsilon,
        integrator,
        initial,
        duration,
        output,
        diagnostics,
    })
}

fn build_initial(ri: RawInitial, n: usize) -> Result<SystemState, ScenarioError> {
    let mut s = SystemState::reference_initial(n);
    if let Some(x) = ri.x {
        s.x = Vec3::from(x);
    }
    if let Some(v) = ri.v {
        s.v = Vec3::from(v);
    }
    s.rotation = match (ri.R, ri.axis_angle) {
        (Some(_), Some(_)) => return Err(invalid("initial", "give either R or axis_angle, not both")),
        (Some(rows), None) => {
            RotSO3::new(Mat3::from_fn(|i, j| rows[i][j])).map_err(|e| invalid("initial.R", e.to_string()))?
        }
        (None, Some(aa)) => exp_so3(&Vec3::from(aa)),
        (None, None) => RotSO3::identity(),
    };
    if let Some(w) = ri.Omega {
        s.body_rate = Vec3::from(w);
    }
    match ri.links {
        None => {}
        Some(LinkSpec::Explicit(list)) => {
            if list.len() != n {
                return Err(invalid(
                    "initial.links",
                    format!("{} directions listed for n = {n}", list.len()),
                ));
            }
            s.q = list
                .iter()
                .enumerate()
                .map(|(i, q)| {
                    UnitS2::new(Vec3::from(*q)).map_err(|e| invalid(&format!("initial.links[{i}]"), e.to_string()))
                })
                .collect::<Result<_, _>>()?;
        }
        Some(LinkSpec::Generator(g)) => {
            if g.generator != "horizontal-arc" {
                return Err(invalid(
                    "initial.links.generator",
                    format!("unknown generator `{}` (expected `horizontal-arc`)", g.generator),
                ));
            }
            let theta_max = g.theta_max.unwrap_or(std::f64::consts::FRAC_PI_2);
            if !theta_max.is_finite() {
                return Err(invalid("initial.links.theta_max", "must be finite"));
            }
            s.q = horizontal_arc(n, theta_max);
        }
    }
    if let Some(rates) = ri.link_rates {
        if rates.len() != n {
            return Err(invalid(
                "initial.link_rates",
                format!("{} rates listed for n = {n}", rates.len()),
            ));
        }
        for (i, w) in rates.iter().enumerate() {
            let w = Vec3::from(*w);
            let normal = s.q[i].as_vec().dot(&w);
            if normal.abs() > 1e-9 {
                return Err(invalid(
                    &format!("initial.link_rates[{i}]"),
                    format!("must be normal to its link direction (q·ω = {normal:e})"),
                ));
            }
            s.omega[i] = project_tangent(&s.q[i], &w);
        }
    }
    s.validate().map_err(|e| invalid("initial", e.to_string()))?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use quadchain::diagnostics::link_error_metrics;
    use quadchain::manifold::e1;

    #[test]
    fn empty_file_is_reference() {
        let s = parse_scenario_str("").unwrap();
        assert_eq!(s.plant, PlantParams::reference());
        assert_eq!(s.controller, ControllerConfig::reference());
        assert_eq!(s.initial, SystemState::reference_initial(5));
        assert_eq!(s.initial.x, Vec3::new(0.6, -0.7, 0.2));
        assert_eq!(s.initial.rotation, RotSO3::identity());
        assert_eq!(s.duration, 10.0);
        assert_eq!(s.integrator.dt, 1e-3);
        assert_eq!(s.mode, ControlMode::Geometric);
        assert!(link_error_metrics(&s.initial).0 >= 2.0);
    }

    #[test]
    fn missing_link_direction_is_rejected() {
        let text = "[initial]\nlinks = [[0,0,1],[0,0,1],[0,0,1],[0,0,1]]\n";
        match parse_scenario_str(text) {
            Err(ScenarioError::Validation { field, message }) => {
                assert_eq!(field, "initial.links");
                assert!(
                    message.contains("4 directions") && message.contains("n = 5"),
                    "{message}"
                );
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn arc_generator_two_links() {
        let text = "[plant]\nlinks = 2\n[controller]\nk_q = [1.0, 1.0]\nk_omega = [0.1, 0.1]\n\
                    [initial]\nlinks = { generator = \"horizontal-arc\", theta_max = 1.5707963267948966 }\n";
        let s = parse_scenario_str(text).unwrap();
        assert!((s.initial.q[0].as_vec() - e1()).norm() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.initial.q[1].as_vec() - Vec3::new(h, 0.0, h)).norm() < 1e-15);
    }

    #[test]
    fn parse_errors_name_line_and_field() {
        let text = "duration = 2.0\n[plant]\nmass = \"heavy\"\n";
        match parse_scenario_str(text) {
            Err(ScenarioError::Parse { line, field, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(field, "plant.mass");
            }
            other => panic!("{other:?}"),
        }
        match parse_scenario_str("[plant]\nmas = 1.0\n") {
            Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_scenario_str("duration = ["),
            Err(ScenarioError::Parse { .. })
        ));
    }

    #[test]
    fn link_gain_count_must_match_chain() {
        let err = parse_scenario_str("[plant]\nlinks = 3\n").unwrap_err();
        assert!(
            matches!(err, ScenarioError::Validation { ref field, .. } if field == "controller.k_q"),
            "{err}"
        );
        // Free flight needs no gains.
        let s = parse_scenario_str("[plant]\nlinks = 3\n[controller]\nmode = \"free\"\n").unwrap();
        assert_eq!(s.initial.n(), 3);
    }

    #[test]
    fn bad_values_are_rejected() {
        for text in [
            "[plant]\nmass = -1.0\n",
            "[integrator]\ndt = 0.0\n",
            "duration = -1.0\n",
            "[initial]\nR = [[1,0,0],[0,1,0],[0,0,2]]\n",
            "[initial]\nlinks = [[0,0,1],[0,0,1],[0,0,1],[0,0,1],[0,0,2]]\n",
            "[initial]\nlink_rates = [[1,0,0],[0,0,0],[0,0,0],[0,0,0],[0,0,0]]\n",
            "[diagnostics]\npsi_r = 2.0\n",
            "[output]\ndecimation = 0\n",
            "[initial]\nlinks = { generator = \"spiral\" }\n",
        ] {
            assert!(
                matches!(parse_scenario_str(text), Err(ScenarioError::Validation { .. })),
                "{text}"
            );
        }
    }

    #[test]
    fn overrides_apply() {
        let s = Scenario::default().with_overrides(Some(0.5), Some(2e-3)).unwrap();
        assert_eq!(s.duration, 0.5);
        assert_eq!(s.integrator.dt, 2e-3);
        assert!(Scenario::default().with_overrides(None, Some(-1.0)).is_err());
    }
}
