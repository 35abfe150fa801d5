//! Small-dimension geometry on SO(3) and the two-sphere.
//!
//! Everything here is a pure value-to-value function. Vectors and matrices are
//! plain `nalgebra` types; the two constrained types, [`RotSO3`] and
//! [`UnitS2`], are newtypes that validate on construction.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance on `‖RᵀR − I‖`, `|‖q‖ − 1|` and skew-symmetry residuals.
pub const ORTHO_TOL: f64 = 1e-9;

/// Below this rotation angle `exp_so3` switches to its Taylor series.
const SMALL_ANGLE: f64 = 1e-6;

pub fn e1() -> Vec3 {
    Vec3::x()
}

pub fn e2() -> Vec3 {
    Vec3::y()
}

/// Inertial third axis; points along gravity.
pub fn e3() -> Vec3 {
    Vec3::z()
}

/// Maps `v` to the skew-symmetric matrix with `hat(v) w = v × w`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(
        0.0, -v[2], v[1], //
        v[2], 0.0, -v[0], //
        -v[1], v[0], 0.0,
    )
}

/// Inverse of [`hat`]. Fails when the symmetric part of `m` exceeds [`ORTHO_TOL`].
pub fn vee(m: &Mat3) -> Result<Vec3> {
    let sym = (m + m.transpose()) * 0.5;
    let residual = sym.amax();
    if residual > ORTHO_TOL {
        return Err(Error::NotSkew { residual });
    }
    Ok(vee_skew_part(m))
}

/// Vee of the skew part of `m`, with no skew-symmetry check.
pub(crate) fn vee_skew_part(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Rodrigues' formula.
pub fn exp_so3(v: &Vec3) -> RotSO3 {
    let theta2 = v.norm_squared();
    let theta = theta2.sqrt();
    let k = hat(v);
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    RotSO3(Mat3::identity() + k * a + k * k * b)
}

/// `w − (q·w) q`, the component of `w` normal to `q`.
pub fn project_tangent(q: &UnitS2, w: &Vec3) -> Vec3 {
    project_normal(q.as_vec(), w)
}

/// Same as [`project_tangent`] but tolerant of a slightly non-unit `q`.
pub(crate) fn project_normal(q: &Vec3, w: &Vec3) -> Vec3 {
    w - q * (q.dot(w) / q.norm_squared())
}

/// `hat(q)²`, which equals `q qᵀ − I` for unit `q`.
pub fn q_squared_hat(q: &UnitS2) -> Mat3 {
    let h = hat(q.as_vec());
    h * h
}

/// A rotation matrix; `‖RᵀR − I‖ ≤ 1e−9` and `det R > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotSO3(Mat3);

impl RotSO3 {
    pub fn identity() -> Self {
        RotSO3(Mat3::identity())
    }

    pub fn new(m: Mat3) -> Result<Self> {
        let residual = orthonormality_residual(&m);
        if !m.iter().all(|x| x.is_finite()) || residual > ORTHO_TOL || m.determinant() <= 0.0 {
            return Err(Error::NotRotation { residual });
        }
        Ok(RotSO3(m))
    }

    /// Nearest rotation to `m` (polar factor), for re-orthonormalizing drifted attitudes.
    pub fn nearest(m: &Mat3) -> Result<Self> {
        let svd = m.svd(true, true);
        let (u, vt) = match (svd.u, svd.v_t) {
            (Some(u), Some(vt)) => (u, vt),
            _ => return Err(Error::NotRotation { residual: f64::NAN }),
        };
        let mut d = Mat3::identity();
        if (u * vt).determinant() < 0.0 {
            d[(2, 2)] = -1.0;
        }
        RotSO3::new(u * d * vt)
    }

    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        RotSO3(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> RotSO3 {
        RotSO3(self.0.transpose())
    }

    pub fn compose(&self, other: &RotSO3) -> RotSO3 {
        RotSO3(self.0 * other.0)
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Third body axis expressed in the inertial frame, `R e₃`.
    pub fn b3(&self) -> Vec3 {
        self.0.column(2).into_owned()
    }

    pub fn orthonormality_residual(&self) -> f64 {
        orthonormality_residual(&self.0)
    }
}

fn orthonormality_residual(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).norm()
}

/// A direction on the two-sphere; `|‖q‖ − 1| ≤ 1e−9`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitS2(Vec3);

impl UnitS2 {
    /// Accepts `v` only if it is already unit length.
    pub fn new(v: Vec3) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > ORTHO_TOL {
            return Err(Error::NotUnit { norm });
        }
        Ok(UnitS2(v))
    }

    /// Normalizes `v`; fails for a zero or non-finite vector.
    pub fn normalize(v: Vec3) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::NotUnit { norm });
        }
        Ok(UnitS2(v / norm))
    }

    pub(crate) fn from_vec_unchecked(v: Vec3) -> Self {
        UnitS2(v)
    }

    pub fn e3() -> Self {
        UnitS2(e3())
    }

    pub fn as_vec(&self) -> &Vec3 {
        &self.0
    }

    pub fn into_vec(self) -> Vec3 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn vec3() -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-10.0..10.0f64).prop_map(Vec3::from)
    }

    fn unit() -> impl Strategy<Value = UnitS2> {
        vec3()
            .prop_filter("nonzero", |v| v.norm() > 1e-3)
            .prop_map(|v| UnitS2::normalize(v).unwrap())
    }

    #[test]
    fn hat_examples() {
        assert_eq!(hat(&e3()) * e1(), e2());
        let h = hat(&Vec3::new(1.0, 2.0, 3.0));
        let expected = Mat3::new(0.0, -3.0, 2.0, 3.0, 0.0, -1.0, -2.0, 1.0, 0.0);
        assert_eq!(h, expected);
        assert_eq!(hat(&Vec3::zeros()), Mat3::zeros());
    }

    #[test]
    fn vee_examples() {
        let v = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(vee(&hat(&v)).unwrap(), v);
        assert_eq!(vee(&Mat3::zeros()).unwrap(), Vec3::zeros());
        let m = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(vee(&m).unwrap(), e3());
    }

    #[test]
    fn vee_rejects_symmetric_part() {
        let m = Mat3::identity();
        assert!(matches!(vee(&m), Err(Error::NotSkew { .. })));
    }

    #[test]
    fn exp_examples() {
        assert_eq!(*exp_so3(&Vec3::zeros()).matrix(), Mat3::identity());
        let half = exp_so3(&Vec3::new(PI, 0.0, 0.0));
        assert_relative_eq!(
            *half.matrix(),
            Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0)),
            epsilon = 1e-15
        );
    }

    #[test]
    fn exp_small_angle_branch_is_continuous() {
        let v = Vec3::new(3e-7, -2e-7, 5e-7);
        let series = exp_so3(&v);
        let big = exp_so3(&(v * 10.0));
        assert!(series.orthonormality_residual() < 1e-15);
        // Second-order behaviour matches I + hat(v) + ½hat(v)² on both sides of the switch.
        let taylor = |w: Vec3| Mat3::identity() + hat(&w) + hat(&w) * hat(&w) * 0.5;
        assert_relative_eq!(*series.matrix(), taylor(v), epsilon = 1e-15);
        assert_relative_eq!(*big.matrix(), taylor(v * 10.0), epsilon = 1e-15);
    }

    #[test]
    fn tangent_and_q_squared_examples() {
        let q = UnitS2::e3();
        assert_eq!(project_tangent(&q, &Vec3::new(1.0, 2.0, 3.0)), Vec3::new(1.0, 2.0, 0.0));
        assert_eq!(project_tangent(&q, &e3()), Vec3::zeros());
        assert_eq!(q_squared_hat(&q) * e1(), -e1());
        assert_eq!(q_squared_hat(&q) * e3(), Vec3::zeros());
    }

    #[test]
    fn constructors_validate() {
        assert!(UnitS2::new(Vec3::new(1.0, 1.0, 0.0)).is_err());
        assert!(UnitS2::normalize(Vec3::zeros()).is_err());
        assert!(RotSO3::new(Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0))).is_err());
        assert!(RotSO3::new(Mat3::identity() * 1.1).is_err());
        let drifted = exp_so3(&Vec3::new(0.3, -0.2, 1.0)).matrix() + Mat3::repeat(1e-6);
        let fixed = RotSO3::nearest(&drifted).unwrap();
        assert!(fixed.orthonormality_residual() < 1e-14);
    }

    proptest! {
        #[test]
        fn hat_is_cross_product(v in vec3(), w in vec3()) {
            let h = hat(&v);
            prop_assert_eq!(h.transpose(), -h);
            prop_assert!((h * w - v.cross(&w)).norm() <= 1e-12);
            prop_assert!((hat(&v) * w + hat(&w) * v).norm() <= 1e-12);
        }

        #[test]
        fn hat_vee_roundtrip(v in vec3()) {
            prop_assert_eq!(vee(&hat(&v)).unwrap(), v);
        }

        #[test]
        fn exp_stays_on_so3(v in prop::array::uniform3(-4.0 * PI / 1.7320508..4.0 * PI / 1.7320508).prop_map(Vec3::from)) {
            let r = exp_so3(&v);
            prop_assert!(r.orthonormality_residual() <= ORTHO_TOL);
            prop_assert!(r.matrix().determinant() > 0.0);
            let back = r.compose(&exp_so3(&-v));
            prop_assert!((back.matrix() - Mat3::identity()).norm() <= 1e-12);
        }

        #[test]
        fn tangent_projection_is_normal(q in unit(), w in vec3()) {
            prop_assert!(q.as_vec().dot(&project_tangent(&q, &w)).abs() <= 1e-12);
        }

        #[test]
        fn q_squared_hat_identity(q in unit(), v in vec3()) {
            let lhs = -q_squared_hat(&q) * v;
            let rhs = v - q.as_vec() * q.as_vec().dot(&v);
            prop_assert!((lhs - rhs).norm() <= 1e-12);
        }
    }
}
