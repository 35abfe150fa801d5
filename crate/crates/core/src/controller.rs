//! Geometric stabilizing controller for the quadrotor and its hanging chain.
//!
//! The translational/chain loop designs an ideal force `A` as if the thrust
//! vector could be pointed anywhere instantly. The attitude loop then tracks
//! `R_c`, the attitude whose third body axis is `−A/‖A‖`, and the thrust
//! magnitude is the projection of `A` on the current thrust axis.

use crate::dynamics::{Actuation, ControlInput, InertiaTable, PlantParams, SystemState};
use crate::error::{Error, Result};
use crate::integrator::{ControlLaw, Telemetry};
use crate::manifold::{e1, e3, hat, vee_skew_part, Mat3, RotSO3, UnitS2, Vec3};

/// Below this norm the ideal thrust has no usable direction (N).
pub const DEGENERATE_THRUST: f64 = 1e-6;

/// How the two-dimensional link feedback is mapped back into a force.
///
/// `Rotated` applies `ê₃ C`: a link swung toward `+e₁` pushes the vehicle
/// toward `+e₁`, which places it back over the payload. `Selector` applies
/// `C` directly; with the reference gains its linearized closed loop has an
/// eigenvalue with positive real part, and it is kept only for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinkFeedback {
    #[default]
    Rotated,
    Selector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub x_d: Vec3,
    pub b1_d: UnitS2,
    pub k_x: f64,
    pub k_xdot: f64,
    pub k_q: Vec<f64>,
    pub k_omega: Vec<f64>,
    /// Attitude gain already divided by ε², i.e. `k_R/ε²`.
    pub k_attitude: f64,
    /// Angular-rate gain already divided by ε, i.e. `k_Ω/ε`.
    pub k_attitude_rate: f64,
    /// Saturation of the differentiated command rate `‖Ω_c‖` (rad/s).
    pub max_command_rate: f64,
    /// Saturation of `‖Ω̇_c‖` (rad/s²).
    pub max_command_accel: f64,
    pub link_feedback: LinkFeedback,
}

impl ControllerConfig {
    /// Gains tuned for the five-link reference vehicle, hovering at the origin.
    pub fn reference() -> Self {
        ControllerConfig {
            x_d: Vec3::zeros(),
            b1_d: UnitS2::normalize(e1()).expect("unit"),
            k_x: 12.8,
            k_xdot: 4.22,
            k_q: vec![11.01, 6.67, 1.97, 0.41, 0.069],
            k_omega: vec![0.93, 0.24, 0.032, 0.030, 0.025],
            k_attitude: 0.65,
            k_attitude_rate: 0.11,
            max_command_rate: 50.0,
            max_command_accel: 2000.0,
            link_feedback: LinkFeedback::Rotated,
        }
    }

    /// Rescales the attitude gains as `k_R/ε²` and `k_Ω/ε`, taking the current
    /// values as those for `ε = 1`.
    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.k_attitude /= eps * eps;
        self.k_attitude_rate /= eps;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k_q.len() != n || self.k_omega.len() != n {
            return Err(Error::InvalidConfig(format!(
                "expected {n} link gains, got {} k_q and {} k_omega",
                self.k_q.len(),
                self.k_omega.len()
            )));
        }
        let positive = [
            ("k_x", self.k_x),
            ("k_xdot", self.k_xdot),
            ("k_attitude", self.k_attitude),
            ("k_attitude_rate", self.k_attitude_rate),
            ("max_command_rate", self.max_command_rate),
            ("max_command_accel", self.max_command_accel),
        ];
        for (name, value) in positive
            .into_iter()
            .chain(self.k_q.iter().map(|k| ("k_q", *k)))
            .chain(self.k_omega.iter().map(|k| ("k_omega", *k)))
        {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {value}")));
            }
        }
        if !self.x_d.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidConfig("x_d must be finite".into()));
        }
        Ok(())
    }
}

/// Desired attitude together with its rate and angular acceleration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeCommand {
    pub r_c: RotSO3,
    pub omega_c: Vec3,
    pub omegadot_c: Vec3,
}

impl AttitudeCommand {
    pub fn fixed(r_c: RotSO3) -> Self {
        AttitudeCommand {
            r_c,
            omega_c: Vec3::zeros(),
            omegadot_c: Vec3::zeros(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeErrors {
    pub e_r: Vec3,
    pub e_omega: Vec3,
    /// `½ tr(I − R_cᵀR)`, in `[0, 2]`.
    pub psi_r: f64,
}

fn horizontal(v: &Vec3) -> Vec3 {
    Vec3::new(v.x, v.y, 0.0)
}

/// Linear feedback `δu` on position, velocity and the link states.
pub fn fictitious_delta_u(s: &SystemState, cfg: &ControllerConfig) -> Vec3 {
    let mut du = -(s.x - cfg.x_d) * cfg.k_x - s.v * cfg.k_xdot;
    let embed = |v: Vec3| match cfg.link_feedback {
        LinkFeedback::Rotated => e3().cross(&horizontal(&v)),
        LinkFeedback::Selector => horizontal(&v),
    };
    for i in 0..s.n() {
        // Cᵀ(e₃ × qᵢ) is the linearized link deflection, Cᵀωᵢ its rate.
        let deflection = e3().cross(s.q[i].as_vec());
        du -= embed(deflection) * cfg.k_q[i] + embed(s.omega[i]) * cfg.k_omega[i];
    }
    du
}

/// Ideal total thrust vector `A = δu − M₀₀ g e₃`.
///
/// With `e₃` pointing down, hover needs an upward force, so at equilibrium
/// `A = −M₀₀ g e₃`, `b₃c = e₃` and `f = M₀₀ g`.
pub fn ideal_thrust(s: &SystemState, t: &InertiaTable, cfg: &ControllerConfig) -> Vec3 {
    fictitious_delta_u(s, cfg) - e3() * (t.m00 * t.gravity)
}

/// Attitude whose third axis is `−A/‖A‖` and whose first axis is `b1_d`
/// projected onto the plane normal to it.
pub fn desired_attitude(a: &Vec3, b1_d: &UnitS2) -> Result<RotSO3> {
    let norm = a.norm();
    if !(norm >= DEGENERATE_THRUST) {
        return Err(Error::DegenerateThrust { norm });
    }
    let b3c = -a / norm;
    let h = hat(&b3c);
    let b2 = h * b1_d.as_vec();
    let b2_norm = b2.norm();
    if b2_norm < DEGENERATE_THRUST {
        return Err(Error::HeadingParallel);
    }
    let b1 = -(h * b2) / b2_norm;
    RotSO3::new(Mat3::from_columns(&[b1, b2 / b2_norm, b3c]))
}

fn clamp_norm(v: Vec3, bound: f64) -> Vec3 {
    let n = v.norm();
    if n > bound {
        v * (bound / n)
    } else {
        v
    }
}

/// Backward-difference estimates of `Ω_c` and `Ω̇_c`, each clamped in norm.
pub fn desired_angular_velocity(
    prev: &AttitudeCommand,
    curr_rc: &RotSO3,
    dt: f64,
    max_rate: f64,
    max_accel: f64,
) -> (Vec3, Vec3) {
    let rel = prev.r_c.matrix().transpose() * curr_rc.matrix();
    let omega_c = clamp_norm(vee_skew_part(&rel) / dt, max_rate);
    let omegadot_c = clamp_norm((omega_c - prev.omega_c) / dt, max_accel);
    (omega_c, omegadot_c)
}

pub fn attitude_errors(s: &SystemState, cmd: &AttitudeCommand) -> AttitudeErrors {
    let r = s.rotation.matrix();
    let rc = cmd.r_c.matrix();
    let rc_t_r = rc.transpose() * r;
    AttitudeErrors {
        e_r: vee_skew_part(&rc_t_r),
        e_omega: s.body_rate - r.transpose() * rc * cmd.omega_c,
        // ½(3 − tr RᵀR_c) = ¼‖R − R_c‖²_F, which keeps precision near zero.
        psi_r: 0.25 * (r - rc).norm_squared(),
    }
}

/// Thrust `f = −A·Re₃` and the attitude-tracking moment.
pub fn control_input(
    s: &SystemState,
    inertia: &Mat3,
    cfg: &ControllerConfig,
    cmd: &AttitudeCommand,
    a: &Vec3,
) -> ControlInput {
    let errs = attitude_errors(s, cmd);
    let r = s.rotation.matrix();
    let rel = r.transpose() * cmd.r_c.matrix();
    let w = s.body_rate;
    let moment = -errs.e_r * cfg.k_attitude - errs.e_omega * cfg.k_attitude_rate + w.cross(&(inertia * w))
        - inertia * (hat(&w) * rel * cmd.omega_c - rel * cmd.omegadot_c);
    ControlInput {
        thrust: -a.dot(&s.rotation.b3()),
        moment,
    }
}

/// Full controller for the physical vehicle, holding the finite-difference memory.
#[derive(Debug, Clone)]
pub struct GeometricController {
    cfg: ControllerConfig,
    table: InertiaTable,
    inertia: Mat3,
    dt: f64,
    prev: Option<AttitudeCommand>,
    updates: usize,
    telemetry: Telemetry,
}

impl GeometricController {
    /// `dt` is the sampling period of the loop and the differencing step.
    pub fn new(cfg: ControllerConfig, p: &PlantParams, table: InertiaTable, dt: f64) -> Result<Self> {
        cfg.validate(p.n())?;
        if !(dt > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "controller step must be positive, got {dt}"
            )));
        }
        Ok(GeometricController {
            cfg,
            table,
            inertia: p.inertia,
            dt,
            prev: None,
            updates: 0,
            telemetry: Telemetry::default(),
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn last_command(&self) -> Option<&AttitudeCommand> {
        self.prev.as_ref()
    }

    /// Advances the command memory by one sample and returns the control.
    pub fn update(&mut self, s: &SystemState) -> Result<(ControlInput, AttitudeCommand)> {
        let a = ideal_thrust(s, &self.table, &self.cfg);
        let r_c = desired_attitude(&a, &self.cfg.b1_d)?;
        let cmd = match &self.prev {
            None => AttitudeCommand::fixed(r_c),
            Some(prev) => {
                let (omega_c, omegadot_c) = desired_angular_velocity(
                    prev,
                    &r_c,
                    self.dt,
                    self.cfg.max_command_rate,
                    self.cfg.max_command_accel,
                );
                // The first difference has no predecessor rate to difference against.
                let omegadot_c = if self.updates < 2 { Vec3::zeros() } else { omegadot_c };
                AttitudeCommand {
                    r_c,
                    omega_c,
                    omegadot_c,
                }
            }
        };
        let u = control_input(s, &self.inertia, &self.cfg, &cmd, &a);
        self.telemetry = Telemetry {
            omega_c: cmd.omega_c,
            psi_r: attitude_errors(s, &cmd).psi_r,
        };
        self.prev = Some(cmd);
        self.updates += 1;
        Ok((u, cmd))
    }
}

impl ControlLaw for GeometricController {
    fn actuation(&mut self, _time: f64, state: &SystemState) -> Result<Actuation> {
        Ok(self.update(state)?.0.into())
    }

    fn telemetry(&self) -> Telemetry {
        self.telemetry
    }
}

/// The translational/chain loop alone, applying `A` directly as a force.
///
/// This is the reduced system in which the attitude is assumed to track `R_c`
/// exactly.
#[derive(Debug, Clone)]
pub struct ReducedController {
    cfg: ControllerConfig,
    table: InertiaTable,
}

impl ReducedController {
    pub fn new(cfg: ControllerConfig, p: &PlantParams, table: InertiaTable) -> Result<Self> {
        cfg.validate(p.n())?;
        Ok(ReducedController { cfg, table })
    }
}

impl ControlLaw for ReducedController {
    fn actuation(&mut self, _time: f64, state: &SystemState) -> Result<Actuation> {
        Ok(Actuation::Fictitious {
            force: ideal_thrust(state, &self.table, &self.cfg),
            moment: Vec3::zeros(),
        })
    }
}
