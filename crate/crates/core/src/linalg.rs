//! Dense solves shared by the nonlinear and linearized models.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest accepted ratio between the biggest and smallest pivot of the LU factor.
pub const MAX_CONDITION: f64 = 1e12;

/// Solves `a x = b` by LU with partial pivoting.
///
/// The condition number is estimated from the spread of the pivots on the
/// diagonal of `U`; systems beyond [`MAX_CONDITION`] are reported as singular.
pub fn solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = a.lu();
    let condition = pivot_condition(&lu.u());
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularMassMatrix { condition });
    }
    lu.solve(b).ok_or(Error::SingularMassMatrix {
        condition: f64::INFINITY,
    })
}

/// Same as [`solve`] for several right-hand sides at once.
pub fn solve_many(a: DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = a.lu();
    let condition = pivot_condition(&lu.u());
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularMassMatrix { condition });
    }
    lu.solve(b).ok_or(Error::SingularMassMatrix {
        condition: f64::INFINITY,
    })
}

fn pivot_condition(u: &DMatrix<f64>) -> f64 {
    let diag = u.diagonal();
    let max = diag.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    let min = diag.iter().fold(f64::INFINITY, |acc, d| acc.min(d.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
