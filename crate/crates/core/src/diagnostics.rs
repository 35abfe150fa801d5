//! Convergence metrics and the attitude-loop Lyapunov certificate.
//!
//! The certificate is stated in terms of the scaled error `ē_R = e_R/ε` and
//! `ζ = [‖ē_R‖, ‖e_Ω‖]`. With `c₃` below [`c3_bound`], the function
//! `𝒲 = ½ e_Ω·J e_Ω + (k_R/ε²) Ψ_R + (c₃/ε) e_R·e_Ω` satisfies
//! `ζᵀL₁ζ ≤ 𝒲 ≤ ζᵀL₂ζ` on `Ψ_R < ψ_R`, and `ε𝒲̇ ≤ −ζᵀUζ`.

use nalgebra::{Matrix2, Vector2};

use crate::controller::{attitude_errors, AttitudeCommand, AttitudeErrors};
use crate::dynamics::{attitude_acceleration, SystemState};
use crate::error::{Error, Result};
use crate::manifold::{e3, exp_so3, Mat3, RotSO3, Vec3};

/// `(e_q, e_ω) = (Σ‖qᵢ − e₃‖, Σ‖ωᵢ‖)`.
pub fn link_error_metrics(s: &SystemState) -> (f64, f64) {
    let e_q = s.q.iter().map(|q| (q.as_vec() - e3()).norm()).sum();
    let e_omega = s.omega.iter().map(|w| w.norm()).sum();
    (e_q, e_omega)
}

/// Smallest and largest eigenvalue of a symmetric 3×3 matrix.
pub fn eigen_extremes(j: &Mat3) -> (f64, f64) {
    let eig = j.symmetric_eigenvalues();
    (eig.min(), eig.max())
}

/// Upper bound on the cross-term weight `c₃`.
pub fn c3_bound(k_r: f64, k_omega: f64, inertia: &Mat3) -> f64 {
    let (lm, lmax) = eigen_extremes(inertia);
    let first = (k_r * lm).sqrt();
    let second = 4.0 * k_r * k_omega * lm * lm / (k_omega * k_omega * lmax + 4.0 * k_r * lm * lm);
    first.min(second)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReport {
    pub c3_bound: f64,
    pub c3_used: f64,
    pub psi_r: f64,
    pub l1: Matrix2<f64>,
    pub l2: Matrix2<f64>,
    pub u: Matrix2<f64>,
    pub min_eig_l1: f64,
    pub min_eig_l2: f64,
    pub min_eig_u: f64,
}

impl LyapunovReport {
    pub fn all_positive_definite(&self) -> bool {
        self.min_eig_l1 > 0.0 && self.min_eig_l2 > 0.0 && self.min_eig_u > 0.0
    }
}

fn min_eig(m: &Matrix2<f64>) -> f64 {
    m.symmetric_eigenvalues().min()
}

/// Builds `L₁`, `L₂` and `U` for gains `k_R`, `k_Ω` (the unscaled ones).
///
/// `c3` may be zero; it must stay strictly below the bound.
pub fn lyapunov_matrices(k_r: f64, k_omega: f64, inertia: &Mat3, c3: f64, psi_r: f64) -> Result<LyapunovReport> {
    if !(psi_r > 0.0 && psi_r < 2.0) {
        return Err(Error::InvalidConfig(format!("psi_R must lie in (0, 2), got {psi_r}")));
    }
    let bound = c3_bound(k_r, k_omega, inertia);
    if !(c3 >= 0.0) || c3 >= bound {
        return Err(Error::C3TooLarge { c3, bound });
    }
    let (lm, lmax) = eigen_extremes(inertia);
    let l1 = Matrix2::new(k_r / 2.0, -c3 / 2.0, -c3 / 2.0, lm / 2.0);
    let l2 = Matrix2::new(k_r / (2.0 - psi_r), c3 / 2.0, c3 / 2.0, lmax / 2.0);
    let off = -c3 * k_omega / (2.0 * lm);
    let u = Matrix2::new(c3 * k_r / lmax, off, off, k_omega - c3);
    Ok(LyapunovReport {
        c3_bound: bound,
        c3_used: c3,
        psi_r,
        min_eig_l1: min_eig(&l1),
        min_eig_l2: min_eig(&l2),
        min_eig_u: min_eig(&u),
        l1,
        l2,
        u,
    })
}

/// `𝒲` for the effective gain `k_R/ε²`.
pub fn lyapunov_value(errs: &AttitudeErrors, inertia: &Mat3, k_r_eff: f64, c3: f64, eps: f64) -> f64 {
    0.5 * errs.e_omega.dot(&(inertia * errs.e_omega)) + k_r_eff * errs.psi_r + c3 / eps * errs.e_r.dot(&errs.e_omega)
}

/// `(ζᵀL₁ζ, ζᵀL₂ζ)` for the given errors.
pub fn sandwich_bounds(errs: &AttitudeErrors, report: &LyapunovReport, eps: f64) -> (f64, f64) {
    let zeta = Vector2::new(errs.e_r.norm() / eps, errs.e_omega.norm());
    (zeta.dot(&(report.l1 * zeta)), zeta.dot(&(report.l2 * zeta)))
}

/// Attitude-only closed loop tracking a fixed `R_c`:
/// `J Ω̇ = −k_R e_R − k_Ω e_Ω` after the gyroscopic term is cancelled.
///
/// Returns the errors at every step, starting with the initial condition.
#[allow(clippy::too_many_arguments)]
pub fn attitude_transient(
    inertia: &Mat3,
    k_r_eff: f64,
    k_omega_eff: f64,
    r0: RotSO3,
    body_rate0: Vec3,
    r_c: RotSO3,
    dt: f64,
    steps: usize,
) -> Result<Vec<AttitudeErrors>> {
    let cmd = AttitudeCommand::fixed(r_c);
    let mut s = SystemState::hanging(0, Vec3::zeros());
    s.rotation = r0;
    s.body_rate = body_rate0;

    let rate_dot = |s: &SystemState| -> Result<Vec3> {
        let e = attitude_errors(s, &cmd);
        let w = s.body_rate;
        let moment = -e.e_r * k_r_eff - e.e_omega * k_omega_eff + w.cross(&(inertia * w));
        attitude_acceleration(inertia, &w, &moment)
    };
    let shifted = |s: &SystemState, w: &Vec3, wd: &Vec3, h: f64| {
        let mut out = s.clone();
        out.rotation = s.rotation.compose(&exp_so3(&(w * h)));
        out.body_rate = s.body_rate + wd * h;
        out
    };

    let mut out = Vec::with_capacity(steps + 1);
    out.push(attitude_errors(&s, &cmd));
    for _ in 0..steps {
        let (w1, a1) = (s.body_rate, rate_dot(&s)?);
        let s2 = shifted(&s, &w1, &a1, dt / 2.0);
        let (w2, a2) = (s2.body_rate, rate_dot(&s2)?);
        let s3 = shifted(&s, &w2, &a2, dt / 2.0);
        let (w3, a3) = (s3.body_rate, rate_dot(&s3)?);
        let s4 = shifted(&s, &w3, &a3, dt);
        let (w4, a4) = (s4.body_rate, rate_dot(&s4)?);
        let w = (w1 + w2 * 2.0 + w3 * 2.0 + w4) / 6.0;
        let a = (a1 + a2 * 2.0 + a3 * 2.0 + a4) / 6.0;
        s = shifted(&s, &w, &a, dt);
        if !s.is_finite() {
            return Err(Error::NonFinite);
        }
        out.push(attitude_errors(&s, &cmd));
    }
    Ok(out)
}
