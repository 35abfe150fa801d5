//! Seeded random draws of valid states, used by the property checks.

use rand::Rng;

use crate::dynamics::{PlantParams, SystemState};
use crate::manifold::{exp_so3, project_tangent, UnitS2, Vec3};

/// Uniform point in the cube `[-scale, scale]³`.
pub fn random_vec3<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Vec3 {
    Vec3::new(
        rng.gen_range(-scale..=scale),
        rng.gen_range(-scale..=scale),
        rng.gen_range(-scale..=scale),
    )
}

/// Uniform direction on the sphere (rejection from the unit ball).
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> UnitS2 {
    loop {
        let v = random_vec3(rng, 1.0);
        let n2 = v.norm_squared();
        if n2 > 1e-4 && n2 <= 1.0 {
            return UnitS2::normalize(v).expect("nonzero sample");
        }
    }
}

/// A tangent vector at `q` with norm at most `max_norm`.
pub fn random_tangent<R: Rng + ?Sized>(rng: &mut R, q: &UnitS2, max_norm: f64) -> Vec3 {
    let w = project_tangent(q, &random_vec3(rng, 1.0));
    let norm = w.norm();
    if norm < 1e-12 {
        return Vec3::zeros();
    }
    w * (rng.gen_range(0.0..=max_norm) / norm)
}

/// A random valid state for `p`: arbitrary position, attitude and link directions,
/// velocities bounded by `max_rate` (m/s or rad/s).
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, p: &PlantParams, max_rate: f64) -> SystemState {
    let n = p.n();
    let q: Vec<UnitS2> = (0..n).map(|_| random_unit(rng)).collect();
    let omega = q.iter().map(|qi| random_tangent(rng, qi, max_rate)).collect();
    SystemState {
        x: random_vec3(rng, 2.0),
        v: random_vec3(rng, max_rate),
        rotation: exp_so3(&random_vec3(rng, 2.0)),
        body_rate: random_vec3(rng, max_rate),
        q,
        omega,
    }
}
