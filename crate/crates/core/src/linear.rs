//! Linearization of the simplified model about the hanging equilibrium.
//!
//! State ordering is `(δx, Cᵀξ₁, …, Cᵀξₙ)` with `C = [e₁, e₂]`, where `ξᵢ`
//! parameterizes the link deflection `δqᵢ = ξᵢ × e₃` and `ξ̇ᵢ = δωᵢ`.
//! The model is `𝐌 ẍ + 𝐆 x = 𝐁 δu`.

use nalgebra::{DMatrix, DVector, Matrix3x2};

use crate::controller::{ControllerConfig, LinkFeedback};
use crate::dynamics::{build_inertia_table, PlantParams, SystemState};
use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{e3, hat, Vec3};

/// `C = [e₁, e₂]`.
pub fn selector() -> Matrix3x2<f64> {
    Matrix3x2::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub input: DMatrix<f64>,
    n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearState {
    pub dx: Vec3,
    /// Stacked `Cᵀξᵢ`, length `2n`.
    pub xq: DVector<f64>,
    pub dv: Vec3,
    /// Stacked `Cᵀδωᵢ`, length `2n`.
    pub vq: DVector<f64>,
}

impl LinearState {
    pub fn zeros(n: usize) -> Self {
        LinearState {
            dx: Vec3::zeros(),
            xq: DVector::zeros(2 * n),
            dv: Vec3::zeros(),
            vq: DVector::zeros(2 * n),
        }
    }

    /// Linear coordinates of a nonlinear state near the equilibrium at `x_d`,
    /// using `ξᵢ = e₃ × qᵢ` and `δωᵢ = ωᵢ`.
    pub fn from_state(s: &SystemState, x_d: &Vec3) -> Self {
        let n = s.n();
        let c_t = selector().transpose();
        let mut xq = DVector::zeros(2 * n);
        let mut vq = DVector::zeros(2 * n);
        for i in 0..n {
            xq.fixed_rows_mut::<2>(2 * i)
                .copy_from(&(c_t * e3().cross(s.q[i].as_vec())));
            vq.fixed_rows_mut::<2>(2 * i).copy_from(&(c_t * s.omega[i]));
        }
        LinearState {
            dx: s.x - x_d,
            xq,
            dv: s.v,
            vq,
        }
    }

    fn position(&self) -> DVector<f64> {
        let mut out = DVector::zeros(3 + self.xq.len());
        out.fixed_rows_mut::<3>(0).copy_from(&self.dx);
        out.rows_mut(3, self.xq.len()).copy_from(&self.xq);
        out
    }
}

impl LinearModel {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Configuration dimension `3 + 2n`.
    pub fn dim(&self) -> usize {
        3 + 2 * self.n
    }

    /// First-order form `(Ã, B̃)` with `Ã = [[0, I], [−𝐌⁻¹𝐆, 0]]`, `B̃ = [0; 𝐌⁻¹𝐁]`.
    pub fn first_order(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let d = self.dim();
        let minv_g = linalg::solve_many(self.mass.clone(), &self.stiffness)?;
        let minv_b = linalg::solve_many(self.mass.clone(), &self.input)?;
        let mut a = DMatrix::zeros(2 * d, 2 * d);
        a.view_mut((0, d), (d, d)).fill_with_identity();
        a.view_mut((d, 0), (d, d)).copy_from(&(-minv_g));
        let mut b = DMatrix::zeros(2 * d, 3);
        b.view_mut((d, 0), (d, 3)).copy_from(&minv_b);
        Ok((a, b))
    }

    /// Position and velocity gain matrices `(K_x, K_ẋ)` realizing the
    /// controller's linear feedback `δu = −K_x x − K_ẋ ẋ`.
    pub fn feedback_gains(&self, cfg: &ControllerConfig) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        cfg.validate(self.n)?;
        let embed: nalgebra::Matrix3x2<f64> = match cfg.link_feedback {
            LinkFeedback::Rotated => hat(&e3()) * selector(),
            LinkFeedback::Selector => selector(),
        };
        let d = self.dim();
        let mut kx = DMatrix::zeros(3, d);
        let mut kv = DMatrix::zeros(3, d);
        kx.view_mut((0, 0), (3, 3)).fill_with_identity();
        kx.view_mut((0, 0), (3, 3)).scale_mut(cfg.k_x);
        kv.view_mut((0, 0), (3, 3)).fill_with_identity();
        kv.view_mut((0, 0), (3, 3)).scale_mut(cfg.k_xdot);
        for i in 0..self.n {
            kx.fixed_view_mut::<3, 2>(0, 3 + 2 * i).copy_from(&(embed * cfg.k_q[i]));
            kv.fixed_view_mut::<3, 2>(0, 3 + 2 * i)
                .copy_from(&(embed * cfg.k_omega[i]));
        }
        Ok((kx, kv))
    }

    /// First-order closed-loop matrix under the controller's linear feedback.
    pub fn closed_loop(&self, cfg: &ControllerConfig) -> Result<DMatrix<f64>> {
        let (kx, kv) = self.feedback_gains(cfg)?;
        let (mut a, b) = self.first_order()?;
        let d = self.dim();
        let bk = &b * kx;
        let bkv = &b * kv;
        let mut lower_left = a.view((d, 0), (d, d)).into_owned();
        lower_left -= bk.view((d, 0), (d, d));
        a.view_mut((d, 0), (d, d)).copy_from(&lower_left);
        a.view_mut((d, d), (d, d))
            .copy_from(&(-bkv.view((d, 0), (d, d)).into_owned()));
        Ok(a)
    }
}

pub fn build_linear_model(p: &PlantParams) -> LinearModel {
    let t = build_inertia_table(p);
    let n = p.n();
    let d = 3 + 2 * n;
    let c = selector();
    let mut mass = DMatrix::zeros(d, d);
    let mut stiffness = DMatrix::zeros(d, d);
    let mut input = DMatrix::zeros(d, 3);
    mass.view_mut((0, 0), (3, 3)).fill_with_identity();
    mass.view_mut((0, 0), (3, 3)).scale_mut(t.m00);
    input.view_mut((0, 0), (3, 3)).fill_with_identity();
    let e3_hat_c = hat(&e3()) * c;
    for i in 0..n {
        let mxq = e3_hat_c * -t.m0[i];
        mass.fixed_view_mut::<3, 2>(0, 3 + 2 * i).copy_from(&mxq);
        mass.fixed_view_mut::<2, 3>(3 + 2 * i, 0).copy_from(&mxq.transpose());
        for j in 0..n {
            let mut blk = mass.fixed_view_mut::<2, 2>(3 + 2 * i, 3 + 2 * j);
            blk.fill_with_identity();
            blk.scale_mut(t.mij[(i, j)]);
        }
        let mut g = stiffness.fixed_view_mut::<2, 2>(3 + 2 * i, 3 + 2 * i);
        g.fill_with_identity();
        g.scale_mut(t.m0[i] * t.gravity);
    }
    LinearModel {
        mass,
        stiffness,
        input,
        n,
    }
}

/// Rank of the controllability matrix of the first-order system.
///
/// The Krylov blocks `ÃᵏB̃` grow like powers of the squared modal
/// frequencies, so each block is normalized before the singular values are
/// taken; column scaling does not change the rank. Singular values below
/// `σ_max · d · 1e−12` count as zero.
pub fn controllability_rank(lm: &LinearModel) -> Result<usize> {
    let (a, b) = lm.first_order()?;
    let d = a.nrows();
    let mut ctrb = DMatrix::zeros(d, d * b.ncols());
    let mut block = b;
    for k in 0..d {
        let norm = block.norm();
        let scaled = if norm > 0.0 { &block / norm } else { block.clone() };
        ctrb.view_mut((0, k * scaled.ncols()), (d, scaled.ncols()))
            .copy_from(&scaled);
        block = &a * block;
    }
    let sv = ctrb.singular_values();
    let threshold = sv.max() * d as f64 * 1e-12;
    Ok(sv.iter().filter(|s| **s > threshold).count())
}

/// Solves `𝐌 ẍ = 𝐁 δu − 𝐆 x` for `(δẍ, ẍ_q)`.
pub fn linear_accelerations(lm: &LinearModel, ls: &LinearState, du: &Vec3) -> Result<(Vec3, DVector<f64>)> {
    if ls.xq.len() != 2 * lm.n {
        return Err(Error::InvalidState(format!(
            "linear state has {} link coordinates, model expects {}",
            ls.xq.len(),
            2 * lm.n
        )));
    }
    let rhs = &lm.input * DVector::from_column_slice(du.as_slice()) - &lm.stiffness * ls.position();
    let sol = linalg::solve(lm.mass.clone(), &rhs)?;
    Ok((sol.fixed_rows::<3>(0).into_owned(), sol.rows(3, 2 * lm.n).into_owned()))
}

/// Largest real part among the eigenvalues of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}
