//! Fixed-step time integration on ℝ³ × SO(3) × (S²)ⁿ.
//!
//! Translational and link variables are advanced in the embedding space and
//! projected back afterwards (links renormalized, link rates made normal to
//! their links). The attitude is only ever updated multiplicatively,
//! `R ← R exp(h Ω̄)`, so it never leaves the rotation group.

use crate::diagnostics::link_error_metrics;
use crate::dynamics::{
    accelerations, generalized_momentum, total_energy, Actuation, ControlInput, InertiaTable, PlantParams, SystemState,
};
use crate::error::{Error, Result};
use crate::manifold::{exp_so3, project_normal, RotSO3, UnitS2, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Rk4Projected,
    EulerProjected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Project back onto the manifold every this many steps.
    pub renormalize_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 1e-3,
            scheme: Scheme::Rk4Projected,
            renormalize_every: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if self.renormalize_every == 0 {
            return Err(Error::InvalidConfig("renormalize_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Time derivative of a state, in the embedding coordinates.
#[derive(Debug, Clone)]
struct Slope {
    xdot: Vec3,
    vdot: Vec3,
    body_rate: Vec3,
    body_rate_dot: Vec3,
    qdot: Vec<Vec3>,
    omegadot: Vec<Vec3>,
}

impl Slope {
    fn combine(parts: [&Slope; 4], weights: [f64; 4]) -> Slope {
        let n = parts[0].qdot.len();
        let vsum = |f: &dyn Fn(&Slope) -> Vec3| {
            parts
                .iter()
                .zip(weights)
                .fold(Vec3::zeros(), |acc, (s, w)| acc + f(s) * w)
        };
        Slope {
            xdot: vsum(&|s| s.xdot),
            vdot: vsum(&|s| s.vdot),
            body_rate: vsum(&|s| s.body_rate),
            body_rate_dot: vsum(&|s| s.body_rate_dot),
            qdot: (0..n).map(|i| vsum(&|s| s.qdot[i])).collect(),
            omegadot: (0..n).map(|i| vsum(&|s| s.omegadot[i])).collect(),
        }
    }
}

fn slope(p: &PlantParams, t: &InertiaTable, s: &SystemState, u: &Actuation) -> Result<Slope> {
    let acc = accelerations(p, t, s, u)?;
    Ok(Slope {
        xdot: s.v,
        vdot: acc.xddot,
        body_rate: s.body_rate,
        body_rate_dot: acc.body_rate_dot,
        qdot: s.qdot(),
        omegadot: acc.omegadot,
    })
}

/// `s` advanced by `h` along `k`, without projection.
fn advance(s: &SystemState, k: &Slope, h: f64) -> SystemState {
    SystemState {
        x: s.x + k.xdot * h,
        v: s.v + k.vdot * h,
        rotation: RotSO3::from_matrix_unchecked(s.rotation.matrix() * exp_so3(&(k.body_rate * h)).matrix()),
        body_rate: s.body_rate + k.body_rate_dot * h,
        q: s.q
            .iter()
            .zip(&k.qdot)
            .map(|(q, qd)| UnitS2::from_vec_unchecked(q.as_vec() + qd * h))
            .collect(),
        omega: s.omega.iter().zip(&k.omegadot).map(|(w, wd)| w + wd * h).collect(),
    }
}

/// Restores `‖qᵢ‖ = 1`, `qᵢ·ωᵢ = 0` and the orthonormality of `R`.
pub fn project(s: &mut SystemState) -> Result<()> {
    for (q, w) in s.q.iter_mut().zip(s.omega.iter_mut()) {
        let unit = UnitS2::normalize(*q.as_vec()).map_err(|_| Error::NonFinite)?;
        *w = project_normal(unit.as_vec(), w);
        *q = unit;
    }
    if s.rotation.orthonormality_residual() > 1e-13 {
        s.rotation = RotSO3::nearest(s.rotation.matrix()).map_err(|_| Error::NonFinite)?;
    }
    Ok(())
}

/// One step of the configured scheme.
///
/// `control` is evaluated at every stage state; pass a closure returning a
/// fixed value for a zero-order hold.
pub fn step<F>(
    p: &PlantParams,
    t: &InertiaTable,
    s: &SystemState,
    mut control: F,
    cfg: &IntegratorConfig,
) -> Result<SystemState>
where
    F: FnMut(&SystemState) -> Result<Actuation>,
{
    let mut next = step_unprojected(p, t, s, &mut control, cfg)?;
    project(&mut next)?;
    Ok(next)
}

fn step_unprojected<F>(
    p: &PlantParams,
    t: &InertiaTable,
    s: &SystemState,
    control: &mut F,
    cfg: &IntegratorConfig,
) -> Result<SystemState>
where
    F: FnMut(&SystemState) -> Result<Actuation>,
{
    let h = cfg.dt;
    let next = match cfg.scheme {
        Scheme::EulerProjected => {
            let k1 = slope(p, t, s, &control(s)?)?;
            advance(s, &k1, h)
        }
        Scheme::Rk4Projected => {
            let k1 = slope(p, t, s, &control(s)?)?;
            let s2 = advance(s, &k1, 0.5 * h);
            let k2 = slope(p, t, &s2, &control(&s2)?)?;
            let s3 = advance(s, &k2, 0.5 * h);
            let k3 = slope(p, t, &s3, &control(&s3)?)?;
            let s4 = advance(s, &k3, h);
            let k4 = slope(p, t, &s4, &control(&s4)?)?;
            let k = Slope::combine([&k1, &k2, &k3, &k4], [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0]);
            advance(s, &k, h)
        }
    };
    if !next.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(next)
}

/// Extra quantities a control law can expose for logging.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Telemetry {
    pub omega_c: Vec3,
    pub psi_r: f64,
}

/// A feedback law sampled once per step and held over it.
pub trait ControlLaw {
    fn actuation(&mut self, time: f64, state: &SystemState) -> Result<Actuation>;

    fn telemetry(&self) -> Telemetry {
        Telemetry::default()
    }
}

/// Rotors off.
#[derive(Debug, Clone, Copy, Default)]
pub struct FreeFlight;

impl ControlLaw for FreeFlight {
    fn actuation(&mut self, _time: f64, _state: &SystemState) -> Result<Actuation> {
        Ok(ControlInput::zero().into())
    }
}

/// A constant actuation, e.g. hover thrust.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub Actuation);

impl ControlLaw for Constant {
    fn actuation(&mut self, _time: f64, _state: &SystemState) -> Result<Actuation> {
        Ok(self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub state: SystemState,
    pub actuation: Actuation,
    pub energy: f64,
    pub momentum: Vec3,
    pub e_q: f64,
    pub e_omega: f64,
    pub telemetry: Telemetry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub dt: f64,
    pub decimation: usize,
    pub samples: Vec<Sample>,
    /// Extremes of the thrust over every step, not only the logged ones.
    pub min_thrust: f64,
    pub max_thrust: f64,
}

impl TrajectoryLog {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("a log always holds the initial sample")
    }

    pub fn energy_drift(&self) -> f64 {
        let e0 = self.samples[0].energy;
        self.samples.iter().map(|s| (s.energy - e0).abs()).fold(0.0, f64::max)
    }

    pub fn relative_energy_drift(&self) -> f64 {
        self.energy_drift() / self.samples[0].energy.abs().max(1.0)
    }
}

/// Number of fixed steps covering `duration`.
pub fn step_count(duration: f64, dt: f64) -> usize {
    (duration / dt * (1.0 + 1e-12)).floor() as usize
}

/// Runs `control` in closed loop for `duration` seconds.
///
/// The control is sampled at the start of each step and held over it. Every
/// `decimation`-th state (including the first) is logged.
pub fn simulate(
    p: &PlantParams,
    t: &InertiaTable,
    s0: &SystemState,
    control: &mut dyn ControlLaw,
    cfg: &IntegratorConfig,
    duration: f64,
    decimation: usize,
) -> Result<TrajectoryLog> {
    cfg.validate()?;
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "duration must be non-negative, got {duration}"
        )));
    }
    if decimation == 0 {
        return Err(Error::InvalidConfig("decimation must be at least 1".into()));
    }
    s0.validate()?;
    let steps = step_count(duration, cfg.dt);
    let mut log = TrajectoryLog {
        dt: cfg.dt,
        decimation,
        samples: Vec::with_capacity(steps / decimation + 1),
        min_thrust: f64::INFINITY,
        max_thrust: f64::NEG_INFINITY,
    };
    let abort = |step: usize| {
        move |e: Error| Error::Aborted {
            step,
            source: Box::new(e),
        }
    };

    let mut s = s0.clone();
    for k in 0..=steps {
        let time = k as f64 * cfg.dt;
        let u = control.actuation(time, &s).map_err(abort(k))?;
        log.min_thrust = log.min_thrust.min(u.thrust());
        log.max_thrust = log.max_thrust.max(u.thrust());
        if k % decimation == 0 {
            let (e_q, e_omega) = link_error_metrics(&s);
            log.samples.push(Sample {
                time,
                energy: total_energy(p, t, &s),
                momentum: generalized_momentum(t, &s),
                e_q,
                e_omega,
                telemetry: control.telemetry(),
                actuation: u,
                state: s.clone(),
            });
        }
        if k == steps {
            break;
        }
        let mut next = step_unprojected(p, t, &s, &mut |_: &SystemState| Ok(u), cfg).map_err(abort(k))?;
        if (k + 1) % cfg.renormalize_every == 0 {
            project(&mut next).map_err(abort(k))?;
        }
        s = next;
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::build_inertia_table;
    use crate::manifold::{e1, e3};

    fn hover(t: &InertiaTable) -> Actuation {
        ControlInput {
            thrust: t.m00 * t.gravity,
            moment: Vec3::zeros(),
        }
        .into()
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let p = PlantParams::reference();
        let t = build_inertia_table(&p);
        let s = SystemState::hanging(5, Vec3::new(0.1, 0.2, 0.3));
        let u = hover(&t);
        let cfg = IntegratorConfig::default();
        let next = step(&p, &t, &s, |_| Ok(u), &cfg).unwrap();
        assert!((next.x - s.x).norm() <= 1e-12);
        assert!(next.v.norm() <= 1e-12);
        assert!((next.rotation.matrix() - s.rotation.matrix()).norm() <= 1e-12);
        for (a, b) in next.q.iter().zip(&s.q) {
            assert!((a.as_vec() - b.as_vec()).norm() <= 1e-12);
        }
    }

    #[test]
    fn free_fall_single_step() {
        let p = PlantParams::reference();
        let t = build_inertia_table(&p);
        let s = SystemState::hanging(5, Vec3::zeros());
        for scheme in [Scheme::Rk4Projected, Scheme::EulerProjected] {
            let cfg = IntegratorConfig {
                scheme,
                ..Default::default()
            };
            let next = step(&p, &t, &s, |_| Ok(ControlInput::zero().into()), &cfg).unwrap();
            assert!((next.v - e3() * (p.gravity * cfg.dt)).norm() <= 1e-12);
        }
    }

    #[test]
    fn invariants_hold_after_every_step() {
        let p = PlantParams::reference();
        let t = build_inertia_table(&p);
        let mut s = SystemState::hanging(5, Vec3::zeros());
        for (i, w) in s.omega.iter_mut().enumerate() {
            *w = e1() * (1.0 + i as f64);
        }
        s.body_rate = Vec3::new(0.5, -1.0, 2.0);
        let u: Actuation = ControlInput {
            thrust: 9.0,
            moment: Vec3::new(1e-3, 0.0, -1e-3),
        }
        .into();
        let cfg = IntegratorConfig::default();
        for _ in 0..500 {
            s = step(&p, &t, &s, |_| Ok(u), &cfg).unwrap();
            assert!(s.rotation.orthonormality_residual() <= 1e-9);
            assert!(s.rotation.matrix().determinant() > 0.0);
            for (q, w) in s.q.iter().zip(&s.omega) {
                assert!((q.as_vec().norm() - 1.0).abs() <= 1e-12);
                assert!(q.as_vec().dot(w).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn log_length_counts_decimated_samples() {
        let p = PlantParams::reference();
        let t = build_inertia_table(&p);
        let s = SystemState::hanging(5, Vec3::zeros());
        let cfg = IntegratorConfig::default();
        let log = simulate(&p, &t, &s, &mut FreeFlight, &cfg, 0.0, 1).unwrap();
        assert_eq!(log.samples.len(), 1);
        let log = simulate(&p, &t, &s, &mut FreeFlight, &cfg, 0.1, 7).unwrap();
        // floor(0.1 / (1e-3 · 7)) + 1
        assert_eq!(log.samples.len(), 15);
        let log = simulate(&p, &t, &s, &mut FreeFlight, &cfg, 0.1, 10).unwrap();
        assert_eq!(log.samples.len(), 11);
        assert!((log.last().time - 0.1).abs() < 1e-12);
    }

    #[test]
    fn simulate_rejects_bad_config() {
        let p = PlantParams::reference();
        let t = build_inertia_table(&p);
        let s = SystemState::hanging(5, Vec3::zeros());
        let bad = IntegratorConfig {
            dt: 0.0,
            ..Default::default()
        };
        assert!(simulate(&p, &t, &s, &mut FreeFlight, &bad, 1.0, 1).is_err());
        let bad = IntegratorConfig {
            renormalize_every: 0,
            ..Default::default()
        };
        assert!(simulate(&p, &t, &s, &mut FreeFlight, &bad, 1.0, 1).is_err());
        assert!(simulate(&p, &t, &s, &mut FreeFlight, &IntegratorConfig::default(), 1.0, 0).is_err());
    }

    #[test]
    fn non_finite_aborts_with_step_index() {
        struct Blowup;
        impl ControlLaw for Blowup {
            fn actuation(&mut self, time: f64, _: &SystemState) -> Result<Actuation> {
                let thrust = if time > 0.0045 { f64::NAN } else { 0.0 };
                Ok(ControlInput {
                    thrust,
                    moment: Vec3::zeros(),
                }
                .into())
            }
        }
        let p = PlantParams::reference();
        let t = build_inertia_table(&p);
        let s = SystemState::hanging(5, Vec3::zeros());
        let err = simulate(&p, &t, &s, &mut Blowup, &IntegratorConfig::default(), 1.0, 1).unwrap_err();
        assert!(matches!(err, Error::Aborted { step: 5, .. }), "{err:?}");
    }
}
