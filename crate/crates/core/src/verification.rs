//! Numerical property checks of the model and controller.
//!
//! Each routine measures one quantity and returns it; pass/fail thresholds
//! are left to the caller.

use rand::Rng;

use crate::controller::{ControllerConfig, GeometricController, ReducedController};
use crate::diagnostics::{
    attitude_transient, c3_bound, lyapunov_matrices, lyapunov_value, sandwich_bounds, LyapunovReport,
};
use crate::dynamics::{
    accelerations, build_inertia_table, qddot_form_accelerations, Actuation, ControlInput, PlantParams, SystemState,
};
use crate::error::Result;
use crate::integrator::{simulate, Constant, FreeFlight, IntegratorConfig, TrajectoryLog};
use crate::linear::{build_linear_model, linear_accelerations, selector, LinearState};
use crate::manifold::{e3, exp_so3, hat, project_tangent, RotSO3, UnitS2, Vec3};
use crate::oracle::{single_link_accelerations, MIN_SIN_THETA};
use crate::sampling::{random_state, random_tangent, random_unit, random_vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservationReport {
    pub relative_energy_drift: f64,
    /// `max |pᵢ(t) − pᵢ(0)|` over the horizontal components (kg·m/s).
    pub horizontal_momentum_drift: f64,
    /// `max |p₃(t) − p₃(0) − M₀₀ g t|` (kg·m/s).
    pub vertical_momentum_error: f64,
}

/// Rotors off from `s0` for `duration` seconds, logging every step.
pub fn free_flight_conservation(
    p: &PlantParams,
    s0: &SystemState,
    cfg: &IntegratorConfig,
    duration: f64,
) -> Result<ConservationReport> {
    let t = build_inertia_table(p);
    let log = simulate(p, &t, s0, &mut FreeFlight, cfg, duration, 1)?;
    Ok(conservation_of(&log, t.m00 * p.gravity))
}

fn conservation_of(log: &TrajectoryLog, weight: f64) -> ConservationReport {
    let p0 = log.samples[0].momentum;
    let mut horizontal: f64 = 0.0;
    let mut vertical: f64 = 0.0;
    for s in &log.samples {
        let d = s.momentum - p0;
        horizontal = horizontal.max(d.x.abs()).max(d.y.abs());
        vertical = vertical.max((d.z - weight * s.time).abs());
    }
    ConservationReport {
        relative_energy_drift: log.relative_energy_drift(),
        horizontal_momentum_drift: horizontal,
        vertical_momentum_error: vertical,
    }
}

/// `s` with each link given a random tangent rate of norm `rate`.
pub fn with_link_spin<R: Rng + ?Sized>(s: &SystemState, rng: &mut R, rate: f64) -> SystemState {
    let mut out = s.clone();
    for (q, w) in out.q.iter().zip(out.omega.iter_mut()) {
        let dir = random_tangent(rng, q, 1.0);
        *w = if dir.norm() > 0.0 {
            dir.normalize() * rate
        } else {
            Vec3::zeros()
        };
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossFormReport {
    pub max_xddot_gap: f64,
    pub max_qddot_gap: f64,
    pub max_constraint_residual: f64,
}

/// Compares the two matrix forms on `count` random states.
pub fn cross_form<R: Rng + ?Sized>(p: &PlantParams, rng: &mut R, count: usize) -> Result<CrossFormReport> {
    let t = build_inertia_table(p);
    let mut report = CrossFormReport {
        max_xddot_gap: 0.0,
        max_qddot_gap: 0.0,
        max_constraint_residual: 0.0,
    };
    for _ in 0..count {
        let s = random_state(rng, p, 3.0);
        let u: Actuation = ControlInput {
            thrust: rng.gen_range(0.0..30.0),
            moment: random_vec3(rng, 0.1),
        }
        .into();
        let a = accelerations(p, &t, &s, &u)?;
        let (xdd, qdd) = qddot_form_accelerations(&t, &s, &u)?;
        report.max_xddot_gap = report.max_xddot_gap.max((a.xddot - xdd).norm());
        for (((q, w), wd), qdd) in s.q.iter().zip(&s.omega).zip(&a.omegadot).zip(&qdd) {
            let q = q.as_vec();
            let rebuilt = -hat(q) * wd - q * w.norm_squared();
            report.max_qddot_gap = report.max_qddot_gap.max((rebuilt - qdd).norm());
            report.max_constraint_residual = report.max_constraint_residual.max(q.dot(wd).abs());
        }
    }
    Ok(report)
}

/// Largest gap between the production accelerations and the minimal-coordinate
/// oracle over `count` random one-link plants and states away from the chart poles.
pub fn single_link_oracle_gap<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < count {
        let p = PlantParams::new(
            rng.gen_range(0.3..1.5),
            crate::dynamics::reference_inertia(),
            vec![rng.gen_range(0.05..0.5)],
            vec![rng.gen_range(0.2..1.0)],
            9.81,
        )?;
        let mut s = random_state(rng, &p, 2.0);
        let q = random_unit(rng);
        let sin_theta = q.as_vec().xy().norm();
        if sin_theta < MIN_SIN_THETA + 0.1 {
            continue;
        }
        s.q[0] = q;
        s.omega[0] = random_tangent(rng, &q, 2.0);
        let u = ControlInput {
            thrust: rng.gen_range(0.0..20.0),
            moment: Vec3::zeros(),
        };
        let t = build_inertia_table(&p);
        let a = accelerations(&p, &t, &s, &u.into())?;
        let force = -u.thrust * s.rotation.b3();
        let (xdd, wd) = single_link_accelerations(&p, &s, &force)?;
        worst = worst.max((a.xddot - xdd).norm()).max((a.omegadot[0] - wd).norm());
        done += 1;
    }
    Ok(worst)
}

/// Residuals between the simplified nonlinear model and its linearization
/// along one random unit perturbation direction scaled by each `h`.
pub fn linearization_residuals<R: Rng + ?Sized>(p: &PlantParams, rng: &mut R, hs: &[f64]) -> Result<Vec<f64>> {
    let t = build_inertia_table(p);
    let lm = build_linear_model(p);
    let n = p.n();
    let horizontal = |v: Vec3| Vec3::new(v.x, v.y, 0.0);
    let mut dx = random_vec3(rng, 1.0);
    let mut dv = random_vec3(rng, 1.0);
    let mut du = random_vec3(rng, 1.0);
    let mut xi: Vec<Vec3> = (0..n).map(|_| horizontal(random_vec3(rng, 1.0))).collect();
    let mut dw: Vec<Vec3> = (0..n).map(|_| horizontal(random_vec3(rng, 1.0))).collect();
    // Unit direction in the joint (state, input) space.
    let norm = [dx, dv, du]
        .iter()
        .chain(&xi)
        .chain(&dw)
        .map(|v| v.norm_squared())
        .sum::<f64>()
        .sqrt();
    for v in [&mut dx, &mut dv, &mut du]
        .into_iter()
        .chain(xi.iter_mut())
        .chain(dw.iter_mut())
    {
        *v /= norm;
    }
    let x_d = random_vec3(rng, 1.0);
    let c_t = selector().transpose();

    hs.iter()
        .map(|&h| {
            let mut s = SystemState::hanging(n, x_d + dx * h);
            s.v = dv * h;
            for i in 0..n {
                let q = UnitS2::normalize(exp_so3(&(xi[i] * h)).apply(&e3()))?;
                s.omega[i] = project_tangent(&q, &(dw[i] * h));
                s.q[i] = q;
            }
            let force = du * h - e3() * (t.m00 * t.gravity);
            let nonlinear = accelerations(
                p,
                &t,
                &s,
                &Actuation::Fictitious {
                    force,
                    moment: Vec3::zeros(),
                },
            )?;

            let mut ls = LinearState::zeros(n);
            ls.dx = dx * h;
            ls.dv = dv * h;
            for i in 0..n {
                ls.xq.fixed_rows_mut::<2>(2 * i).copy_from(&(c_t * xi[i] * h));
                ls.vq.fixed_rows_mut::<2>(2 * i).copy_from(&(c_t * dw[i] * h));
            }
            let (lin_x, lin_q) = linear_accelerations(&lm, &ls, &(du * h))?;
            let mut residual = (nonlinear.xddot - lin_x).norm();
            for i in 0..n {
                let projected = c_t * nonlinear.omegadot[i];
                residual += (projected - lin_q.fixed_rows::<2>(2 * i)).norm();
            }
            Ok(residual)
        })
        .collect()
}

/// Log-log slopes between consecutive `(h, residual)` pairs.
pub fn loglog_slopes(hs: &[f64], residuals: &[f64]) -> Vec<f64> {
    hs.windows(2)
        .zip(residuals.windows(2))
        .map(|(h, r)| (r[0] / r[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

/// Ratio of end-point errors at `dt` and `dt/2` against a fine reference run,
/// for a single link swinging below a hovering quadrotor.
pub fn rk4_convergence_ratio(dt: f64, duration: f64) -> Result<f64> {
    let p = PlantParams::uniform(0.5, crate::dynamics::reference_inertia(), 1, 0.1, 0.5)?;
    let t = build_inertia_table(&p);
    let mut s0 = SystemState::hanging(1, Vec3::zeros());
    s0.q[0] = UnitS2::normalize(exp_so3(&Vec3::new(0.0, 0.8, 0.0)).apply(&e3()))?;
    s0.omega[0] = project_tangent(&s0.q[0], &Vec3::new(0.5, 0.0, 1.0));
    let hover = Constant(
        ControlInput {
            thrust: t.m00 * p.gravity,
            moment: Vec3::zeros(),
        }
        .into(),
    );
    let run = |dt: f64| -> Result<SystemState> {
        let cfg = IntegratorConfig {
            dt,
            ..Default::default()
        };
        let mut ctrl = hover;
        let log = simulate(&p, &t, &s0, &mut ctrl, &cfg, duration, 1)?;
        Ok(log.last().state.clone())
    };
    let err = |a: &SystemState, b: &SystemState| {
        (a.x - b.x).norm()
            + (a.v - b.v).norm()
            + (a.q[0].as_vec() - b.q[0].as_vec()).norm()
            + (a.omega[0] - b.omega[0]).norm()
    };
    let reference = run(1e-5)?;
    let coarse = run(dt)?;
    let fine = run(dt / 2.0)?;
    Ok(err(&coarse, &reference) / err(&fine, &reference))
}

/// Least-squares slope of `log r` against `log h`.
pub fn loglog_fit_slope(hs: &[f64], residuals: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub report: LyapunovReport,
    pub samples: usize,
    /// Samples with `Ψ_R ≥ ψ_R`, outside the certificate's domain.
    pub outside_domain: usize,
    pub violations: usize,
    /// Number of sample-to-sample increases of `𝒲`.
    pub increases: usize,
}

/// Lyapunov report for `c3 = fraction · bound` and the sandwich inequality
/// along an attitude-only transient.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_sandwich(
    k_r: f64,
    k_omega: f64,
    inertia: &crate::manifold::Mat3,
    c3_fraction: f64,
    psi_r: f64,
    r0: RotSO3,
    body_rate0: Vec3,
    dt: f64,
    steps: usize,
) -> Result<SandwichReport> {
    let c3 = c3_fraction * c3_bound(k_r, k_omega, inertia);
    let report = lyapunov_matrices(k_r, k_omega, inertia, c3, psi_r)?;
    let errs = attitude_transient(inertia, k_r, k_omega, r0, body_rate0, RotSO3::identity(), dt, steps)?;
    let mut out = SandwichReport {
        report,
        samples: errs.len(),
        outside_domain: 0,
        violations: 0,
        increases: 0,
    };
    let mut prev = f64::INFINITY;
    for e in &errs {
        if e.psi_r >= psi_r {
            out.outside_domain += 1;
            continue;
        }
        let w = lyapunov_value(e, inertia, k_r, c3, 1.0);
        let (lo, hi) = sandwich_bounds(e, &out.report, 1.0);
        let slack = 1e-12 * w.abs() + 1e-15;
        if lo > w + slack || w > hi + slack {
            out.violations += 1;
        }
        if w > prev + slack {
            out.increases += 1;
        }
        prev = w;
    }
    Ok(out)
}

/// Sup-norm gap between the position trajectories of the full closed loop at
/// each `ε` and the reduced (ideal-attitude) closed loop.
pub fn singular_perturbation_gaps(
    p: &PlantParams,
    cfg: &ControllerConfig,
    s0: &SystemState,
    icfg: &IntegratorConfig,
    duration: f64,
    epsilons: &[f64],
) -> Result<Vec<f64>> {
    let t = build_inertia_table(p);
    let mut reduced = ReducedController::new(cfg.clone(), p, t.clone())?;
    let reference = simulate(p, &t, s0, &mut reduced, icfg, duration, 1)?;
    epsilons
        .iter()
        .map(|&eps| {
            let mut full = GeometricController::new(cfg.clone().with_epsilon(eps), p, t.clone(), icfg.dt)?;
            let log = simulate(p, &t, s0, &mut full, icfg, duration, 1)?;
            Ok(log
                .samples
                .iter()
                .zip(&reference.samples)
                .map(|(a, b)| (a.state.x - b.state.x).norm())
                .fold(0.0, f64::max))
        })
        .collect()
}
