//! Euler–Lagrange dynamics of a quadrotor towing a chain of `n` point-mass links.
//!
//! The configuration is `(x, R, q₁..qₙ) ∈ ℝ³ × SO(3) × (S²)ⁿ`. Each link carries
//! its mass at the outboard end and the first link hangs from the quadrotor's
//! center of mass. The inertial third axis `e₃` points along gravity, so the
//! weight of a body is `+m g e₃` and the rotor thrust is `−f R e₃`.
//!
//! Two algebraically equivalent forms of the translational/chain equations are
//! provided. The angular-velocity form ([`accelerations`]) is the production
//! path; the `q̈` form ([`qddot_form_accelerations`]) exists to cross-check it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{e2, e3, exp_so3, hat, project_normal, Mat3, RotSO3, UnitS2, Vec3, ORTHO_TOL};

pub const STANDARD_GRAVITY: f64 = 9.81;

/// Physical parameters of the quadrotor and its links.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantParams {
    /// Quadrotor mass (kg).
    pub mass: f64,
    /// Quadrotor inertia in the body frame (kg·m²).
    pub inertia: Mat3,
    /// Link masses `m₁..mₙ` (kg); `mₙ` is the payload.
    pub link_masses: Vec<f64>,
    /// Link lengths `l₁..lₙ` (m).
    pub link_lengths: Vec<f64>,
    /// Gravitational acceleration (m/s²).
    pub gravity: f64,
}

impl PlantParams {
    pub fn new(mass: f64, inertia: Mat3, link_masses: Vec<f64>, link_lengths: Vec<f64>, gravity: f64) -> Result<Self> {
        let p = PlantParams {
            mass,
            inertia,
            link_masses,
            link_lengths,
            gravity,
        };
        p.validate()?;
        Ok(p)
    }

    /// `n` identical links hanging from a quadrotor.
    pub fn uniform(mass: f64, inertia: Mat3, n: usize, link_mass: f64, link_length: f64) -> Result<Self> {
        Self::new(
            mass,
            inertia,
            vec![link_mass; n],
            vec![link_length; n],
            STANDARD_GRAVITY,
        )
    }

    /// The five-link reference vehicle: 0.5 kg quadrotor, 0.1 kg / 0.1 m links.
    pub fn reference() -> Self {
        Self::uniform(0.5, reference_inertia(), 5, 0.1, 0.1).expect("reference plant is valid")
    }

    pub fn n(&self) -> usize {
        self.link_masses.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return bad(format!("quadrotor mass must be positive, got {}", self.mass));
        }
        if !(self.gravity >= 0.0 && self.gravity.is_finite()) {
            return bad(format!("gravity must be non-negative, got {}", self.gravity));
        }
        if self.link_masses.is_empty() {
            return bad("at least one link is required".into());
        }
        if self.link_masses.len() != self.link_lengths.len() {
            return bad(format!(
                "{} link masses but {} link lengths",
                self.link_masses.len(),
                self.link_lengths.len()
            ));
        }
        if let Some(m) = self.link_masses.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
            return bad(format!("link masses must be positive, got {m}"));
        }
        if let Some(l) = self.link_lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return bad(format!("link lengths must be positive, got {l}"));
        }
        let j = &self.inertia;
        if !j.iter().all(|x| x.is_finite()) || (j - j.transpose()).amax() > 1e-12 * j.amax() {
            return bad("inertia must be symmetric".into());
        }
        if j.cholesky().is_none() {
            return bad("inertia must be positive-definite".into());
        }
        Ok(())
    }
}

/// `diag[0.557, 0.557, 1.05] × 10⁻² kg·m²`.
pub fn reference_inertia() -> Mat3 {
    Mat3::from_diagonal(&Vec3::new(0.557e-2, 0.557e-2, 1.05e-2))
}

/// Constant inertia coefficients of the kinetic energy.
///
/// `M₀₀ = m + Σmᵢ`, `M₀ᵢ = (Σ_{a≥i} m_a) lᵢ`, `Mᵢⱼ = (Σ_{a≥max(i,j)} m_a) lᵢ lⱼ`.
#[derive(Debug, Clone, PartialEq)]
pub struct InertiaTable {
    pub m00: f64,
    pub m0: Vec<f64>,
    pub mij: DMatrix<f64>,
    /// Copied from the plant so the right-hand sides need only the table.
    pub gravity: f64,
}

impl InertiaTable {
    pub fn n(&self) -> usize {
        self.m0.len()
    }
}

pub fn build_inertia_table(p: &PlantParams) -> InertiaTable {
    let n = p.n();
    // tail[i] = Σ_{a ≥ i} m_a
    let mut tail = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        acc += p.link_masses[i];
        tail[i] = acc;
    }
    let m0 = (0..n).map(|i| tail[i] * p.link_lengths[i]).collect();
    let mij = DMatrix::from_fn(n, n, |i, j| tail[i.max(j)] * p.link_lengths[i] * p.link_lengths[j]);
    InertiaTable {
        m00: p.mass + acc,
        m0,
        mij,
        gravity: p.gravity,
    }
}

/// Full configuration and velocity.
///
/// `body_rate` is `Ω` in the body frame; `omega[i]` is the link angular
/// velocity `ωᵢ` in the inertial frame, normal to `q[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub x: Vec3,
    pub v: Vec3,
    pub rotation: RotSO3,
    pub body_rate: Vec3,
    pub q: Vec<UnitS2>,
    pub omega: Vec<Vec3>,
}

impl SystemState {
    /// All links along `e₃`, everything at rest, level attitude.
    pub fn hanging(n: usize, x: Vec3) -> Self {
        SystemState {
            x,
            v: Vec3::zeros(),
            rotation: RotSO3::identity(),
            body_rate: Vec3::zeros(),
            q: vec![UnitS2::e3(); n],
            omega: vec![Vec3::zeros(); n],
        }
    }

    /// Reference start: links along [`horizontal_arc`]`(n, π/2)`, quadrotor
    /// at `(0.6, −0.7, 0.2)`, at rest and level.
    pub fn reference_initial(n: usize) -> Self {
        let mut s = SystemState::hanging(n, Vec3::new(0.6, -0.7, 0.2));
        s.q = horizontal_arc(n, std::f64::consts::FRAC_PI_2);
        s
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// Slopes `q̇ᵢ = ωᵢ × qᵢ`.
    pub fn qdot(&self) -> Vec<Vec3> {
        self.q
            .iter()
            .zip(&self.omega)
            .map(|(q, w)| w.cross(q.as_vec()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.len() != self.omega.len() {
            return Err(Error::InvalidState(format!(
                "{} link directions but {} link rates",
                self.q.len(),
                self.omega.len()
            )));
        }
        if !self.is_finite() {
            return Err(Error::NonFinite);
        }
        let residual = self.rotation.orthonormality_residual();
        if residual > ORTHO_TOL || self.rotation.matrix().determinant() <= 0.0 {
            return Err(Error::NotRotation { residual });
        }
        for (i, (q, w)) in self.q.iter().zip(&self.omega).enumerate() {
            let norm = q.as_vec().norm();
            if (norm - 1.0).abs() > ORTHO_TOL {
                return Err(Error::NotUnit { norm });
            }
            let dot = q.as_vec().dot(w);
            if dot.abs() > ORTHO_TOL {
                return Err(Error::InvalidState(format!(
                    "link {} rate is not normal to its direction (q·ω = {dot:e})",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(self.v.iter())
            .chain(self.body_rate.iter())
            .all(|c| c.is_finite())
            && self.rotation.matrix().iter().all(|c| c.is_finite())
            && self.q.iter().all(|q| q.as_vec().iter().all(|c| c.is_finite()))
            && self.omega.iter().all(|w| w.iter().all(|c| c.is_finite()))
    }
}

/// `qᵢ = exp(θᵢ e₂) e₃` with `θᵢ = θ_max (n − i + 1)/n`, so the link at the
/// quadrotor is bent furthest.
pub fn horizontal_arc(n: usize, theta_max: f64) -> Vec<UnitS2> {
    (1..=n)
        .map(|i| {
            let theta = theta_max * (n - i + 1) as f64 / n as f64;
            UnitS2::from_vec_unchecked(exp_so3(&(e2() * theta)).apply(&e3()))
        })
        .collect()
}

/// Physical control input: thrust magnitude `f` along `−R e₃` and body moment `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    pub thrust: f64,
    pub moment: Vec3,
}

impl ControlInput {
    pub fn zero() -> Self {
        ControlInput {
            thrust: 0.0,
            moment: Vec3::zeros(),
        }
    }
}

/// What drives the translational equation.
///
/// `Thrust` is the physical vehicle (`−f R e₃`). `Fictitious` replaces that
/// term with a freely assignable inertial force, which is the simplified
/// model used for the linear design and as the reduced system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Actuation {
    Thrust(ControlInput),
    Fictitious { force: Vec3, moment: Vec3 },
}

impl Actuation {
    pub fn translational_force(&self, rotation: &RotSO3) -> Vec3 {
        match self {
            Actuation::Thrust(u) => -u.thrust * rotation.b3(),
            Actuation::Fictitious { force, .. } => *force,
        }
    }

    pub fn moment(&self) -> Vec3 {
        match self {
            Actuation::Thrust(u) => u.moment,
            Actuation::Fictitious { moment, .. } => *moment,
        }
    }

    /// Thrust magnitude; for a fictitious force, its norm.
    pub fn thrust(&self) -> f64 {
        match self {
            Actuation::Thrust(u) => u.thrust,
            Actuation::Fictitious { force, .. } => force.norm(),
        }
    }
}

impl From<ControlInput> for Actuation {
    fn from(u: ControlInput) -> Self {
        Actuation::Thrust(u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Accelerations {
    pub xddot: Vec3,
    pub omegadot: Vec<Vec3>,
    pub body_rate_dot: Vec3,
}

fn set_block(m: &mut DMatrix<f64>, row: usize, col: usize, block: &Mat3) {
    m.fixed_view_mut::<3, 3>(3 * row, 3 * col).copy_from(block);
}

fn set_segment(v: &mut DVector<f64>, row: usize, seg: &Vec3) {
    v.fixed_rows_mut::<3>(3 * row).copy_from(seg);
}

fn segment(v: &DVector<f64>, row: usize) -> Vec3 {
    v.fixed_rows::<3>(3 * row).into_owned()
}

/// Mass matrix of the angular-velocity form, unknowns `(ẍ, ω̇₁, …, ω̇ₙ)`.
pub fn mass_matrix_omega_form(t: &InertiaTable, s: &SystemState) -> DMatrix<f64> {
    let n = t.n();
    let mut m = DMatrix::zeros(3 + 3 * n, 3 + 3 * n);
    let hats: Vec<Mat3> = s.q.iter().map(|q| hat(q.as_vec())).collect();
    set_block(&mut m, 0, 0, &(Mat3::identity() * t.m00));
    for i in 0..n {
        set_block(&mut m, 0, i + 1, &(hats[i] * -t.m0[i]));
        set_block(&mut m, i + 1, 0, &(hats[i] * t.m0[i]));
        for j in 0..n {
            let block = if i == j {
                Mat3::identity() * t.mij[(i, i)]
            } else {
                hats[i] * hats[j] * -t.mij[(i, j)]
            };
            set_block(&mut m, i + 1, j + 1, &block);
        }
    }
    m
}

/// Right-hand side of the angular-velocity form.
pub fn rhs_omega_form(t: &InertiaTable, s: &SystemState, u: &Actuation) -> DVector<f64> {
    let n = t.n();
    let g = t.gravity;
    let mut rhs = DVector::zeros(3 + 3 * n);
    let q: Vec<&Vec3> = s.q.iter().map(|q| q.as_vec()).collect();
    let w2: Vec<f64> = s.omega.iter().map(|w| w.norm_squared()).collect();

    let mut row0 = u.translational_force(&s.rotation) + e3() * (t.m00 * g);
    for j in 0..n {
        row0 += q[j] * (t.m0[j] * w2[j]);
    }
    set_segment(&mut rhs, 0, &row0);

    for i in 0..n {
        let hq = hat(q[i]);
        let mut acc = Vec3::zeros();
        for j in (0..n).filter(|&j| j != i) {
            acc += q[j] * (t.mij[(i, j)] * w2[j]);
        }
        // Σ_{a≥i} m_a g lᵢ = M₀ᵢ g
        let row = hq * (acc + e3() * (t.m0[i] * g));
        set_segment(&mut rhs, i + 1, &row);
    }
    rhs
}

fn check_dims(t: &InertiaTable, s: &SystemState) -> Result<()> {
    if s.q.len() != t.n() || s.omega.len() != t.n() {
        return Err(Error::InvalidState(format!(
            "state has {} links, plant has {}",
            s.q.len(),
            t.n()
        )));
    }
    Ok(())
}

/// Solves the angular-velocity form for `(ẍ, ω̇ᵢ)` and the attitude equation for `Ω̇`.
///
/// Each `ω̇ᵢ` is re-projected normal to `qᵢ` after the solve.
pub fn accelerations(p: &PlantParams, t: &InertiaTable, s: &SystemState, u: &Actuation) -> Result<Accelerations> {
    check_dims(t, s)?;
    let sol = linalg::solve(mass_matrix_omega_form(t, s), &rhs_omega_form(t, s, u))?;
    let omegadot =
        s.q.iter()
            .enumerate()
            .map(|(i, q)| project_normal(q.as_vec(), &segment(&sol, i + 1)))
            .collect();
    Ok(Accelerations {
        xddot: segment(&sol, 0),
        omegadot,
        body_rate_dot: attitude_acceleration(&p.inertia, &s.body_rate, &u.moment())?,
    })
}

/// `Ω̇ = J⁻¹(M − Ω × JΩ)`; independent of the translational and chain motion.
pub fn attitude_acceleration(inertia: &Mat3, body_rate: &Vec3, moment: &Vec3) -> Result<Vec3> {
    let j_inv = inertia
        .try_inverse()
        .ok_or_else(|| Error::InvalidParams("inertia is singular".into()))?;
    Ok(j_inv * (moment - body_rate.cross(&(inertia * body_rate))))
}

/// Solves the `q̈` form for `(ẍ, q̈₁, …, q̈ₙ)`, with `q̇ᵢ = ωᵢ × qᵢ`.
pub fn qddot_form_accelerations(t: &InertiaTable, s: &SystemState, u: &Actuation) -> Result<(Vec3, Vec<Vec3>)> {
    check_dims(t, s)?;
    let n = t.n();
    let g = t.gravity;
    let dim = 3 + 3 * n;
    let mut m = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    let qdot = s.qdot();
    let hq2: Vec<Mat3> =
        s.q.iter()
            .map(|q| {
                let h = hat(q.as_vec());
                h * h
            })
            .collect();

    set_block(&mut m, 0, 0, &(Mat3::identity() * t.m00));
    for i in 0..n {
        set_block(&mut m, 0, i + 1, &(Mat3::identity() * t.m0[i]));
    }
    set_segment(&mut rhs, 0, &(u.translational_force(&s.rotation) + e3() * (t.m00 * g)));

    for i in 0..n {
        set_block(&mut m, i + 1, 0, &(hq2[i] * -t.m0[i]));
        for j in 0..n {
            let block = if i == j {
                Mat3::identity() * t.mij[(i, i)]
            } else {
                hq2[i] * -t.mij[(i, j)]
            };
            set_block(&mut m, i + 1, j + 1, &block);
        }
        let row = -s.q[i].as_vec() * (qdot[i].norm_squared() * t.mij[(i, i)]) - hq2[i] * e3() * (t.m0[i] * g);
        set_segment(&mut rhs, i + 1, &row);
    }

    let sol = linalg::solve(m, &rhs)?;
    Ok((segment(&sol, 0), (0..n).map(|i| segment(&sol, i + 1)).collect()))
}

/// Kinetic plus gravitational potential energy (J).
pub fn total_energy(p: &PlantParams, t: &InertiaTable, s: &SystemState) -> f64 {
    let n = t.n();
    let g = t.gravity;
    let qdot = s.qdot();
    let mut kinetic = 0.5 * t.m00 * s.v.norm_squared();
    for i in 0..n {
        kinetic += t.m0[i] * s.v.dot(&qdot[i]);
        for j in 0..n {
            kinetic += 0.5 * t.mij[(i, j)] * qdot[i].dot(&qdot[j]);
        }
    }
    kinetic += 0.5 * s.body_rate.dot(&(p.inertia * s.body_rate));

    let mut potential = -t.m00 * g * s.x[2];
    for i in 0..n {
        potential -= t.m0[i] * g * s.q[i].as_vec()[2];
    }
    kinetic + potential
}

/// Translational momentum `M₀₀ẋ + Σ M₀ᵢ q̇ᵢ`; its rate is `−fRe₃ + M₀₀ g e₃`.
pub fn generalized_momentum(t: &InertiaTable, s: &SystemState) -> Vec3 {
    s.qdot()
        .iter()
        .zip(&t.m0)
        .fold(s.v * t.m00, |acc, (qd, m0)| acc + qd * *m0)
}

/// Inertial positions of the link masses, `xᵢ = x + Σ_{a≤i} l_a q_a`.
pub fn link_positions(s: &SystemState, p: &PlantParams) -> Vec<Vec3> {
    s.q.iter()
        .zip(&p.link_lengths)
        .scan(s.x, |pos, (q, l)| {
            *pos += q.as_vec() * *l;
            Some(*pos)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn horizontal_arc_examples() {
        let q = horizontal_arc(2, std::f64::consts::FRAC_PI_2);
        assert!((q[0].as_vec() - e1()).norm() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((q[1].as_vec() - Vec3::new(h, 0.0, h)).norm() < 1e-15);
        let s = SystemState::reference_initial(5);
        let (e_q, _) = crate::diagnostics::link_error_metrics(&s);
        assert!(e_q >= 2.0 && (e_q - 4.43).abs() < 0.01, "{e_q}");
        s.validate().unwrap();
    }

    use super::*;
    use crate::manifold::{e1, exp_so3};
    use crate::sampling::random_state;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reference() -> (PlantParams, InertiaTable) {
        let p = PlantParams::reference();
        let t = build_inertia_table(&p);
        (p, t)
    }

    /// Independent evaluation of the inertia sums straight from their definitions.
    fn brute_force_mij(p: &PlantParams, i: usize, j: usize) -> f64 {
        let mut total = 0.0;
        for a in 0..p.n() {
            if a >= i && a >= j {
                total += p.link_masses[a];
            }
        }
        total * p.link_lengths[i] * p.link_lengths[j]
    }

    #[test]
    fn inertia_table_reference_values() {
        let (p, t) = reference();
        assert_relative_eq!(t.m00, 1.0, epsilon = 1e-15);
        assert_relative_eq!(t.m0[0], 0.05, epsilon = 1e-15);
        assert_relative_eq!(t.m0[4], 0.01, epsilon = 1e-15);
        assert_relative_eq!(t.mij[(0, 0)], 0.005, epsilon = 1e-15);
        assert_relative_eq!(t.mij[(1, 4)], 0.001, epsilon = 1e-15);
        assert_eq!(t.mij[(1, 4)], t.mij[(4, 1)]);
        for i in 0..5 {
            for j in 0..5 {
                assert_relative_eq!(t.mij[(i, j)], brute_force_mij(&p, i, j), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn params_validation() {
        let j = reference_inertia();
        assert!(PlantParams::uniform(0.0, j, 2, 0.1, 0.1).is_err());
        assert!(PlantParams::uniform(1.0, j, 0, 0.1, 0.1).is_err());
        assert!(PlantParams::uniform(1.0, j, 2, -0.1, 0.1).is_err());
        assert!(PlantParams::uniform(1.0, -j, 2, 0.1, 0.1).is_err());
        assert!(PlantParams::new(1.0, j, vec![0.1], vec![0.1, 0.2], 9.81).is_err());
        let mut asym = j;
        asym[(0, 1)] = 1e-3;
        assert!(PlantParams::uniform(1.0, asym, 2, 0.1, 0.1).is_err());
    }

    #[test]
    fn mass_matrix_blocks() {
        let p = PlantParams::uniform(0.5, reference_inertia(), 1, 0.1, 0.1).unwrap();
        let t = build_inertia_table(&p);
        let s = SystemState::hanging(1, Vec3::zeros());
        let m = mass_matrix_omega_form(&t, &s);
        let block: Mat3 = m.fixed_view::<3, 3>(0, 3).into_owned();
        assert_eq!(block, hat(&e3()) * -t.m0[0]);

        let (_, t5) = reference();
        let m5 = mass_matrix_omega_form(&t5, &SystemState::hanging(5, Vec3::zeros()));
        let lead: Mat3 = m5.fixed_view::<3, 3>(0, 0).into_owned();
        assert_relative_eq!(lead, Mat3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn mass_matrix_symmetric_and_positive_on_tangent_space() {
        let (p, t) = reference();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let s = random_state(&mut rng, &p, 3.0);
            let m = mass_matrix_omega_form(&t, &s);
            assert!((&m - m.transpose()).amax() <= 1e-12);
            // Basis of ℝ³ × Π T_{qᵢ}S²; the restricted quadratic form must be PD.
            let n = p.n();
            let mut basis = DMatrix::zeros(3 + 3 * n, 3 + 2 * n);
            for k in 0..3 {
                basis[(k, k)] = 1.0;
            }
            for i in 0..n {
                let q = s.q[i].as_vec();
                let a = if q.x.abs() < 0.9 { e1() } else { Vec3::y() };
                let t1 = q.cross(&a).normalize();
                let t2 = q.cross(&t1);
                basis.fixed_view_mut::<3, 1>(3 + 3 * i, 3 + 2 * i).copy_from(&t1);
                basis.fixed_view_mut::<3, 1>(3 + 3 * i, 4 + 2 * i).copy_from(&t2);
            }
            let reduced = basis.transpose() * &m * &basis;
            let eig = reduced.symmetric_eigenvalues();
            assert!(eig.min() > 0.0);
        }
    }

    #[test]
    fn rhs_at_equilibrium_vanishes() {
        let (p, t) = reference();
        let s = SystemState::hanging(5, Vec3::zeros());
        let hover = Actuation::Thrust(ControlInput {
            thrust: t.m00 * p.gravity,
            moment: Vec3::zeros(),
        });
        assert!(rhs_omega_form(&t, &s, &hover).amax() < 1e-15);

        let free = rhs_omega_form(&t, &s, &ControlInput::zero().into());
        assert_relative_eq!(segment(&free, 0), e3() * (t.m00 * p.gravity), epsilon = 1e-15);
        for i in 1..=5 {
            assert_eq!(segment(&free, i), Vec3::zeros());
        }
    }

    #[test]
    fn rhs_link_rows_are_normal_to_links() {
        let (p, t) = reference();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let s = random_state(&mut rng, &p, 3.0);
            let u = ControlInput {
                thrust: 7.0,
                moment: Vec3::zeros(),
            }
            .into();
            let rhs = rhs_omega_form(&t, &s, &u);
            for i in 0..5 {
                assert!(s.q[i].as_vec().dot(&segment(&rhs, i + 1)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn equilibrium_accelerations_are_zero() {
        let (p, t) = reference();
        let s = SystemState::hanging(5, Vec3::new(0.3, -0.2, 1.0));
        let u = ControlInput {
            thrust: t.m00 * p.gravity,
            moment: Vec3::zeros(),
        };
        let a = accelerations(&p, &t, &s, &u.into()).unwrap();
        assert_eq!(a.xddot, Vec3::zeros());
        assert!(a.omegadot.iter().all(|w| *w == Vec3::zeros()));
        assert_eq!(a.body_rate_dot, Vec3::zeros());

        let (xdd, qdd) = qddot_form_accelerations(&t, &s, &u.into()).unwrap();
        assert_eq!(xdd, Vec3::zeros());
        assert!(qdd.iter().all(|q| q.norm() == 0.0));
    }

    #[test]
    fn free_momentum_rate_is_weight() {
        // With f = 0 the row-0 residual d/dt(M₀₀ẋ + ΣM₀ᵢq̇ᵢ) − M₀₀ g e₃ vanishes.
        let (p, t) = reference();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let s = random_state(&mut rng, &p, 3.0);
            let a = accelerations(&p, &t, &s, &ControlInput::zero().into()).unwrap();
            let mut pdot = a.xddot * t.m00;
            for i in 0..5 {
                let q = s.q[i].as_vec();
                let qdd = -hat(q) * a.omegadot[i] - q * s.omega[i].norm_squared();
                pdot += qdd * t.m0[i];
            }
            assert!((pdot - e3() * (t.m00 * p.gravity)).norm() < 1e-12);
        }
    }

    #[test]
    fn cross_form_agreement() {
        let (p, t) = reference();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let s = random_state(&mut rng, &p, 3.0);
            let u: Actuation = ControlInput {
                thrust: 12.0,
                moment: Vec3::new(0.1, 0.0, -0.1),
            }
            .into();
            let a = accelerations(&p, &t, &s, &u).unwrap();
            let (xdd, qdd) = qddot_form_accelerations(&t, &s, &u).unwrap();
            assert!((a.xddot - xdd).norm() <= 1e-10);
            for (((q, w), wd), qdd) in s.q.iter().zip(&s.omega).zip(&a.omegadot).zip(&qdd) {
                let q = q.as_vec();
                let rebuilt = -hat(q) * wd - q * w.norm_squared();
                assert!((rebuilt - qdd).norm() <= 1e-10);
                assert!(q.dot(wd).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn energy_reference_values() {
        let (p, t) = reference();
        let mut s = SystemState::hanging(5, Vec3::zeros());
        // V = −g Σ M₀ᵢ = −9.81 × 0.15
        assert_relative_eq!(total_energy(&p, &t, &s), -1.4715, epsilon = 1e-12);

        let e0 = total_energy(&p, &t, &s);
        s.x = e3() * 0.25;
        assert_relative_eq!(e0 - total_energy(&p, &t, &s), t.m00 * p.gravity * 0.25, epsilon = 1e-12);

        let mut spin = SystemState::hanging(5, Vec3::zeros());
        spin.body_rate = e3();
        assert_relative_eq!(total_energy(&p, &t, &spin) - e0, 0.5 * 1.05e-2, epsilon = 1e-15);
    }

    #[test]
    fn momentum_examples() {
        let (_, t) = reference();
        let mut s = SystemState::hanging(5, Vec3::zeros());
        assert_eq!(generalized_momentum(&t, &s), Vec3::zeros());
        s.v = e1();
        assert_eq!(generalized_momentum(&t, &s), e1() * t.m00);
    }

    #[test]
    fn link_position_examples() {
        let p = PlantParams::reference();
        let s = SystemState::hanging(5, Vec3::zeros());
        assert_relative_eq!(link_positions(&s, &p)[4], Vec3::new(0.0, 0.0, 0.5), epsilon = 1e-15);

        let p1 = PlantParams::uniform(1.0, reference_inertia(), 1, 0.2, 0.7).unwrap();
        let mut s1 = SystemState::hanging(1, Vec3::new(1.0, 2.0, 3.0));
        s1.q[0] = UnitS2::new(e1()).unwrap();
        assert_relative_eq!(link_positions(&s1, &p1)[0], Vec3::new(1.7, 2.0, 3.0), epsilon = 1e-15);

        let xd = Vec3::new(0.4, 0.1, -2.0);
        let hanging = SystemState::hanging(5, xd);
        assert_relative_eq!(
            link_positions(&hanging, &p)[4],
            xd + e3() * p.link_lengths.iter().sum::<f64>(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn attitude_equation_is_decoupled() {
        let (p, t) = reference();
        let mut s = SystemState::hanging(5, Vec3::zeros());
        s.rotation = exp_so3(&Vec3::new(0.2, 0.1, 0.0));
        s.body_rate = Vec3::new(1.0, -2.0, 0.5);
        let m = Vec3::new(0.01, 0.02, -0.03);
        let a = accelerations(&p, &t, &s, &ControlInput { thrust: 5.0, moment: m }.into()).unwrap();
        let expected = p.inertia.try_inverse().unwrap() * (m - s.body_rate.cross(&(p.inertia * s.body_rate)));
        assert_relative_eq!(a.body_rate_dot, expected, epsilon = 1e-14);
    }
}
