//! Reference accelerations for a single link, from minimal coordinates.
//!
//! The generalized coordinates are the quadrotor position and the spherical
//! angles `(θ, φ)` of the link, `q = (sinθ cosφ, sinθ sinφ, cosθ)`. The
//! Lagrangian is written directly from the point-mass kinetic and potential
//! energies and the Euler–Lagrange equations are formed by finite
//! differences, so nothing here shares code with [`crate::dynamics`].

use nalgebra::{DMatrix, DVector, SVector};

use crate::dynamics::{PlantParams, SystemState};
use crate::error::{Error, Result};
use crate::manifold::Vec3;

type Coords = SVector<f64, 5>;

/// Smallest `sin θ` accepted; the angle chart is singular at the poles.
pub const MIN_SIN_THETA: f64 = 0.2;

struct Pendulum {
    m: f64,
    m1: f64,
    l1: f64,
    g: f64,
}

fn direction(theta: f64, phi: f64) -> Vec3 {
    Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

fn d_theta(theta: f64, phi: f64) -> Vec3 {
    Vec3::new(theta.cos() * phi.cos(), theta.cos() * phi.sin(), -theta.sin())
}

fn d_phi(theta: f64, phi: f64) -> Vec3 {
    Vec3::new(-theta.sin() * phi.sin(), theta.sin() * phi.cos(), 0.0)
}

impl Pendulum {
    fn lagrangian(&self, r: &Coords, rd: &Coords) -> f64 {
        let (theta, phi) = (r[3], r[4]);
        let xdot = Vec3::new(rd[0], rd[1], rd[2]);
        let qdot = d_theta(theta, phi) * rd[3] + d_phi(theta, phi) * rd[4];
        let payload_vel = xdot + qdot * self.l1;
        let kinetic = 0.5 * self.m * xdot.norm_squared() + 0.5 * self.m1 * payload_vel.norm_squared();
        // Height is measured against e₃, which points down.
        let payload_depth = r[2] + self.l1 * direction(theta, phi)[2];
        let potential = -self.m * self.g * r[2] - self.m1 * self.g * payload_depth;
        kinetic - potential
    }

    /// `∂L/∂ṙ`; exact up to round-off because `L` is quadratic in `ṙ`.
    fn momentum(&self, r: &Coords, rd: &Coords) -> Coords {
        Coords::from_fn(|k, _| {
            let mut plus = *rd;
            let mut minus = *rd;
            plus[k] += 1.0;
            minus[k] -= 1.0;
            0.5 * (self.lagrangian(r, &plus) - self.lagrangian(r, &minus))
        })
    }
}

/// Sixth-order central difference of `f` at 0.
fn derivative<T, F>(f: F, h: f64) -> T
where
    F: Fn(f64) -> T,
    T: std::ops::Sub<Output = T> + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let a = f(h) - f(-h);
    let b = f(2.0 * h) - f(-2.0 * h);
    let c = f(3.0 * h) - f(-3.0 * h);
    (a * 45.0 + b * -9.0 + c) * (1.0 / (60.0 * h))
}

/// `(ẍ, ω̇₁)` for a one-link plant under the inertial force `force` on the quadrotor.
pub fn single_link_accelerations(p: &PlantParams, s: &SystemState, force: &Vec3) -> Result<(Vec3, Vec3)> {
    if p.n() != 1 || s.n() != 1 {
        return Err(Error::InvalidState(
            "the minimal-coordinate oracle handles one link".into(),
        ));
    }
    let q = *s.q[0].as_vec();
    let sin_theta = (q.x * q.x + q.y * q.y).sqrt();
    if sin_theta < MIN_SIN_THETA {
        return Err(Error::InvalidState(format!(
            "link too close to the pole (sin θ = {sin_theta})"
        )));
    }
    let theta = sin_theta.atan2(q.z);
    let phi = q.y.atan2(q.x);
    let qdot = s.omega[0].cross(&q);
    let theta_dot = qdot.dot(&d_theta(theta, phi));
    let phi_dot = qdot.dot(&d_phi(theta, phi)) / (sin_theta * sin_theta);

    let sys = Pendulum {
        m: p.mass,
        m1: p.link_masses[0],
        l1: p.link_lengths[0],
        g: p.gravity,
    };
    let r = Coords::from_column_slice(&[s.x.x, s.x.y, s.x.z, theta, phi]);
    let rd = Coords::from_column_slice(&[s.v.x, s.v.y, s.v.z, theta_dot, phi_dot]);

    let mut mass = DMatrix::zeros(5, 5);
    for k in 0..5 {
        let mut plus = rd;
        let mut minus = rd;
        plus[k] += 1.0;
        minus[k] -= 1.0;
        let col = (sys.momentum(&r, &plus) - sys.momentum(&r, &minus)) * 0.5;
        mass.column_mut(k).copy_from(&col);
    }
    let h = 1e-3;
    let grad = Coords::from_fn(|k, _| {
        derivative(
            |e| {
                let mut rr = r;
                rr[k] += e;
                sys.lagrangian(&rr, &rd)
            },
            h,
        )
    });
    let speed = rd.norm().max(1.0);
    let convective = derivative(|e| sys.momentum(&(r + rd * e), &rd), h / speed);
    let mut generalized_force = Coords::zeros();
    generalized_force.fixed_rows_mut::<3>(0).copy_from(force);

    let rhs = generalized_force + grad - convective;
    let rdd = mass
        .lu()
        .solve(&DVector::from_column_slice(rhs.as_slice()))
        .ok_or(Error::SingularMassMatrix {
            condition: f64::INFINITY,
        })?;

    let (tdd, pdd) = (rdd[3], rdd[4]);
    // Second derivatives of the angle chart.
    let q_tt = -direction(theta, phi);
    let q_tp = Vec3::new(-theta.cos() * phi.sin(), theta.cos() * phi.cos(), 0.0);
    let q_pp = Vec3::new(-theta.sin() * phi.cos(), -theta.sin() * phi.sin(), 0.0);
    let qdd = d_theta(theta, phi) * tdd
        + d_phi(theta, phi) * pdd
        + q_tt * (theta_dot * theta_dot)
        + q_tp * (2.0 * theta_dot * phi_dot)
        + q_pp * (phi_dot * phi_dot);
    let q_chart = direction(theta, phi);
    Ok((Vec3::new(rdd[0], rdd[1], rdd[2]), q_chart.cross(&qdd)))
}
