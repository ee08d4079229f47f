//! Quasi-static pusher-slider physics: ellipsoidal limit surface, contact
//! Jacobian, friction cone, contact-mode templates and the Euler step.

use alloc::vec::Vec;

use crate::math::{self, Vec2};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("invalid friction parameters: {0}")]
    InvalidParams(&'static str),
    #[error("mismatched layout: expected {expected} entries, got {got}")]
    MismatchedLayout { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrictionParams {
    pub mu_table: f64,
    pub mu_pusher: f64,
    pub integration_constant: f64,
    pub mass: f64,
    pub gravity: f64,
}

impl Default for FrictionParams {
    fn default() -> Self {
        Self { mu_table: 0.5, mu_pusher: 0.05, integration_constant: 0.3, mass: 1.0, gravity: 9.81 }
    }
}

impl FrictionParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.mu_table) {
            return Err(DynamicsError::InvalidParams("mu_table must be positive"));
        }
        if !(self.mu_pusher.is_finite() && self.mu_pusher >= 0.0) {
            return Err(DynamicsError::InvalidParams("mu_pusher must be nonnegative"));
        }
        if !(self.integration_constant > 0.0 && self.integration_constant <= 1.0) {
            return Err(DynamicsError::InvalidParams("integration constant must lie in (0, 1]"));
        }
        if !ok(self.mass) {
            return Err(DynamicsError::InvalidParams("mass must be positive"));
        }
        if !ok(self.gravity) {
            return Err(DynamicsError::InvalidParams("gravity must be positive"));
        }
        Ok(())
    }
}

/// Ellipsoidal limit surface `H(F) = ½ Fᵀ D F`, `D = diag(1/c_f, 1/c_f, 1/c_τ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitSurfaceModel {
    pub c_f: f64,
    pub c_tau: f64,
}

impl LimitSurfaceModel {
    pub fn diag(&self) -> [f64; 3] {
        [1.0 / self.c_f, 1.0 / self.c_f, 1.0 / self.c_tau]
    }

    pub fn value(&self, f: &SpatialForce) -> f64 {
        let d = self.diag();
        0.5 * (d[0] * f.f[0] * f.f[0] + d[1] * f.f[1] * f.f[1] + d[2] * f.tau * f.tau)
    }
}

pub fn limit_surface(params: &FrictionParams, r_char: f64) -> Result<LimitSurfaceModel, DynamicsError> {
    params.validate()?;
    if !(r_char.is_finite() && r_char > 0.0) {
        return Err(DynamicsError::InvalidParams("characteristic radius must be positive"));
    }
    let c_f = params.mu_table * params.mass * params.gravity;
    Ok(LimitSurfaceModel { c_f, c_tau: params.integration_constant * r_char * c_f })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SpatialForce {
    pub f: Vec2,
    pub tau: f64,
}

impl SpatialForce {
    /// Wrench of a point force `f` applied at `p_c` (both in the slider frame).
    pub fn from_contact(p_c: Vec2, f: Vec2) -> Self {
        Self { f, tau: math::cross(p_c, f) }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { f: math::scale(self.f, s), tau: self.tau * s }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SpatialVelocity {
    pub v: Vec2,
    pub omega: f64,
}

/// `J(p_c) = [[1, 0, −p_y], [0, 1, p_x]]`; `F = Jᵀ f`.
pub fn contact_jacobian(p_c: Vec2) -> [[f64; 3]; 2] {
    [[1.0, 0.0, -p_c[1]], [0.0, 1.0, p_c[0]]]
}

/// `V = D F`.
pub fn quasi_static_velocity(model: &LimitSurfaceModel, force: &SpatialForce) -> SpatialVelocity {
    let d = model.diag();
    SpatialVelocity { v: [d[0] * force.f[0], d[1] * force.f[1]], omega: d[2] * force.tau }
}

/// Scales every wrench with a nonzero velocity onto `H(F) = 1`.
pub fn rescale_forces_to_limit_surface(
    model: &LimitSurfaceModel,
    forces: &[SpatialForce],
    velocities: &[SpatialVelocity],
) -> Vec<SpatialForce> {
    forces
        .iter()
        .zip(velocities)
        .map(|(f, v)| {
            let moving = math::abs(v.v[0]).max(math::abs(v.v[1])).max(math::abs(v.omega)) > 1e-8;
            let h = model.value(f);
            if moving && h > 0.0 {
                f.scaled(math::sqrt(1.0 / h))
            } else {
                *f
            }
        })
        .collect()
}

/// Contact force in face coordinates: `f = −λ_n n̂ + λ_f t̂`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactForceDecomposition {
    pub lambda_n: f64,
    pub lambda_f: f64,
    pub face: usize,
}

impl ContactForceDecomposition {
    pub fn to_cartesian(&self, normal: Vec2, tangent: Vec2) -> Vec2 {
        math::add(math::scale(normal, -self.lambda_n), math::scale(tangent, self.lambda_f))
    }
}

/// `(λ_n, μ λ_n − |λ_f|)`; both nonnegative inside the cone.
pub fn friction_cone_residuals(dec: &ContactForceDecomposition, mu: f64) -> [f64; 2] {
    [dec.lambda_n, mu * dec.lambda_n - math::abs(dec.lambda_f)]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContactModeKind {
    Sticking,
    SlidingLeft,
    SlidingRight,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    /// `row = 0`
    Eq,
    /// `row ≥ 0`
    Ge,
    /// `row ≤ 0`
    Le,
}

/// Affine template `a_v v⊥ + a_n λ_n + a_f λ_f (sense) 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeConstraint {
    pub coeffs: [f64; 3],
    pub sense: Sense,
}

impl ModeConstraint {
    pub fn value(&self, v_perp: f64, lambda_n: f64, lambda_f: f64) -> f64 {
        self.coeffs[0] * v_perp + self.coeffs[1] * lambda_n + self.coeffs[2] * lambda_f
    }

    /// Signed violation: zero when satisfied.
    pub fn violation(&self, v_perp: f64, lambda_n: f64, lambda_f: f64) -> f64 {
        let v = self.value(v_perp, lambda_n, lambda_f);
        match self.sense {
            Sense::Eq => v,
            Sense::Ge => v.min(0.0),
            Sense::Le => v.max(0.0),
        }
    }
}

pub fn mode_constraints(kind: ContactModeKind, mu: f64) -> Vec<ModeConstraint> {
    match kind {
        ContactModeKind::Sticking => alloc::vec![ModeConstraint { coeffs: [1.0, 0.0, 0.0], sense: Sense::Eq }],
        ContactModeKind::SlidingLeft => alloc::vec![
            ModeConstraint { coeffs: [1.0, 0.0, 0.0], sense: Sense::Le },
            ModeConstraint { coeffs: [0.0, mu, 1.0], sense: Sense::Eq },
        ],
        ContactModeKind::SlidingRight => alloc::vec![
            ModeConstraint { coeffs: [1.0, 0.0, 0.0], sense: Sense::Ge },
            ModeConstraint { coeffs: [0.0, -mu, 1.0], sense: Sense::Eq },
        ],
    }
}

/// State `x = (p^S, r, p^P)`: slider position (world), rotation parameters
/// `(cos θ, sin θ)`, pusher position (slider frame).
pub const STATE_DIM: usize = 6;
/// Input `u = (f, v^P)`: contact force (slider frame), pusher velocity.
pub const INPUT_DIM: usize = 4;

fn check(len: usize, expected: usize) -> Result<(), DynamicsError> {
    if len == expected {
        Ok(())
    } else {
        Err(DynamicsError::MismatchedLayout { expected, got: len })
    }
}

/// Residual of one discrete step.
///
/// Rows 0–1: `p^S_{k+1} − p^S_k − h R(r_k) f / c_f`.
/// Row 2: `c_k s_{k+1} − s_k c_{k+1} − h ω` (sine of the rotation increment).
/// Row 3: `‖r_{k+1}‖² − ‖r_k‖²`.
/// Rows 4–5: `p^P_{k+1} − p^P_k − h v^P`.
pub fn euler_step_residual(
    x_k: &[f64],
    x_next: &[f64],
    u_k: &[f64],
    contact_point: Vec2,
    h: f64,
    model: &LimitSurfaceModel,
) -> Result<[f64; 6], DynamicsError> {
    check(x_k.len(), STATE_DIM)?;
    check(x_next.len(), STATE_DIM)?;
    check(u_k.len(), INPUT_DIM)?;
    let f = [u_k[0], u_k[1]];
    let wrench = SpatialForce::from_contact(contact_point, f);
    let vel = quasi_static_velocity(model, &wrench);
    let r = [x_k[2], x_k[3]];
    let v_world = math::rotate(r, vel.v);
    Ok([
        x_next[0] - x_k[0] - h * v_world[0],
        x_next[1] - x_k[1] - h * v_world[1],
        x_k[2] * x_next[3] - x_k[3] * x_next[2] - h * vel.omega,
        x_next[2] * x_next[2] + x_next[3] * x_next[3] - x_k[2] * x_k[2] - x_k[3] * x_k[3],
        x_next[4] - x_k[4] - h * u_k[2],
        x_next[5] - x_k[5] - h * u_k[3],
    ])
}

/// Analytic Jacobian of [`euler_step_residual`] with respect to the stacked
/// vector `(x_k, x_{k+1}, u_k, p^c)` (18 columns), row-major 6 × 18.
pub fn euler_step_jacobian(
    x_k: &[f64],
    x_next: &[f64],
    u_k: &[f64],
    contact_point: Vec2,
    h: f64,
    model: &LimitSurfaceModel,
) -> Result<[[f64; 18]; 6], DynamicsError> {
    check(x_k.len(), STATE_DIM)?;
    check(x_next.len(), STATE_DIM)?;
    check(u_k.len(), INPUT_DIM)?;
    let (c, s) = (x_k[2], x_k[3]);
    let (fx, fy) = (u_k[0], u_k[1]);
    let (px, py) = (contact_point[0], contact_point[1]);
    let a = h / model.c_f;
    let b = h / model.c_tau;
    let mut j = [[0.0; 18]; 6];
    // x_k: 0..6, x_next: 6..12, u: 12..16, p^c: 16..18
    j[0][0] = -1.0;
    j[0][6] = 1.0;
    j[0][2] = -a * fx;
    j[0][3] = a * fy;
    j[0][12] = -a * c;
    j[0][13] = a * s;
    j[1][1] = -1.0;
    j[1][7] = 1.0;
    j[1][2] = -a * fy;
    j[1][3] = -a * fx;
    j[1][12] = -a * s;
    j[1][13] = -a * c;
    j[2][2] = x_next[3];
    j[2][3] = -x_next[2];
    j[2][8] = -s;
    j[2][9] = c;
    j[2][12] = b * py;
    j[2][13] = -b * px;
    j[2][16] = -b * fy;
    j[2][17] = b * fx;
    j[3][2] = -2.0 * c;
    j[3][3] = -2.0 * s;
    j[3][8] = 2.0 * x_next[2];
    j[3][9] = 2.0 * x_next[3];
    j[4][4] = -1.0;
    j[4][10] = 1.0;
    j[4][14] = -h;
    j[5][5] = -1.0;
    j[5][11] = 1.0;
    j[5][15] = -h;
    Ok(j)
}

/// Advances one step so that [`euler_step_residual`] vanishes: the slider
/// translates by `h R(r_k) f / c_f` and turns by `asin(h ω)`, the pusher
/// moves by `h v^P`.
pub fn simulate_step(
    x_k: &[f64],
    u_k: &[f64],
    contact_point: Vec2,
    h: f64,
    model: &LimitSurfaceModel,
) -> Result<[f64; 6], DynamicsError> {
    check(x_k.len(), STATE_DIM)?;
    check(u_k.len(), INPUT_DIM)?;
    let wrench = SpatialForce::from_contact(contact_point, [u_k[0], u_k[1]]);
    let vel = quasi_static_velocity(model, &wrench);
    let r = [x_k[2], x_k[3]];
    let dp = math::rotate(r, math::scale(vel.v, h));
    let sin_step = (h * vel.omega).clamp(-1.0, 1.0);
    let step = [math::sqrt(1.0 - sin_step * sin_step), sin_step];
    let r_next = math::rotate(step, r);
    Ok([
        x_k[0] + dp[0],
        x_k[1] + dp[1],
        r_next[0],
        r_next[1],
        x_k[4] + h * u_k[2],
        x_k[5] + h * u_k[3],
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> LimitSurfaceModel {
        limit_surface(&FrictionParams::default(), 0.25).unwrap()
    }

    #[test]
    fn limit_surface_constants() {
        let m = model();
        assert!((m.c_f - 4.905).abs() < 1e-12);
        assert!((m.c_tau - 0.367875).abs() < 1e-12);
        let bad = FrictionParams { mu_table: 0.0, ..FrictionParams::default() };
        assert!(matches!(limit_surface(&bad, 0.25), Err(DynamicsError::InvalidParams(_))));
        let heavy = FrictionParams { mass: 2.0, ..FrictionParams::default() };
        let m2 = limit_surface(&heavy, 0.25).unwrap();
        assert!((m2.c_f - 2.0 * m.c_f).abs() < 1e-12 && (m2.c_tau - 2.0 * m.c_tau).abs() < 1e-12);
    }

    #[test]
    fn jacobian_examples() {
        assert_eq!(contact_jacobian([0.0, 0.0]), [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        assert_eq!(contact_jacobian([0.1, 0.05]), [[1.0, 0.0, -0.05], [0.0, 1.0, 0.1]]);
        let w = SpatialForce::from_contact([0.0, 0.1], [1.0, 0.0]);
        assert_eq!((w.f, w.tau), ([1.0, 0.0], -0.1));
    }

    #[test]
    fn velocity_examples() {
        let m = model();
        let v = quasi_static_velocity(&m, &SpatialForce { f: [m.c_f, 0.0], tau: 0.0 });
        assert_eq!((v.v, v.omega), ([1.0, 0.0], 0.0));
        let v = quasi_static_velocity(&m, &SpatialForce { f: [0.0, 0.0], tau: m.c_tau });
        assert_eq!((v.v, v.omega), ([0.0, 0.0], 1.0));
    }

    #[test]
    fn rescale_example() {
        let m = model();
        let f = SpatialForce { f: [2.0 * m.c_f, 0.0], tau: 0.0 };
        let v = quasi_static_velocity(&m, &f);
        let out = rescale_forces_to_limit_surface(&m, &[f, SpatialForce::default()], &[v, SpatialVelocity::default()]);
        let s = (2.0 / (4.0 * m.c_f)).sqrt();
        assert!((out[0].f[0] - s * 2.0 * m.c_f).abs() < 1e-12);
        assert!((m.value(&out[0]) - 1.0).abs() < 1e-12);
        assert_eq!(out[1], SpatialForce::default());
    }

    #[test]
    fn friction_examples() {
        let r = friction_cone_residuals(&ContactForceDecomposition { lambda_n: 1.0, lambda_f: 0.04, face: 0 }, 0.05);
        assert!((r[0] - 1.0).abs() < 1e-15 && (r[1] - 0.01).abs() < 1e-12);
        let r = friction_cone_residuals(&ContactForceDecomposition { lambda_n: 1.0, lambda_f: 0.06, face: 0 }, 0.05);
        assert!((r[1] + 0.01).abs() < 1e-12);
        let r = friction_cone_residuals(&ContactForceDecomposition { lambda_n: 0.0, lambda_f: 0.0, face: 0 }, 0.05);
        assert_eq!(r, [0.0, 0.0]);
    }

    #[test]
    fn mode_template_examples() {
        let mu = 0.05;
        let stick = mode_constraints(ContactModeKind::Sticking, mu);
        assert_eq!(stick[0].violation(0.0, 1.0, 0.0), 0.0);
        let left = mode_constraints(ContactModeKind::SlidingLeft, mu);
        assert!(left.iter().all(|c| c.violation(-0.1, 1.0, -0.05).abs() < 1e-15));
        let right = mode_constraints(ContactModeKind::SlidingRight, mu);
        let eq = right[1].violation(0.0, 1.0, -mu);
        assert!((eq.abs() - 2.0 * mu).abs() < 1e-15);
    }

    #[test]
    fn pure_translation_step() {
        let m = LimitSurfaceModel { c_f: 4.905, c_tau: 0.367875 };
        let x = [0.0, 0.0, 1.0, 0.0, -0.11, 0.0];
        let u = [4.905, 0.0, 1.0, 0.0];
        let next = simulate_step(&x, &u, [-0.1, 0.0], 0.1, &m).unwrap();
        assert!((next[0] - 0.1).abs() < 1e-15 && next[1] == 0.0);
        assert_eq!([next[2], next[3]], [1.0, 0.0]);
        let r = euler_step_residual(&x, &next, &u, [-0.1, 0.0], 0.1, &m).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn off_centre_push_turns_counter_clockwise() {
        let m = LimitSurfaceModel { c_f: 4.905, c_tau: 0.367875 };
        let w = SpatialForce::from_contact([0.0, -0.1], [4.905, 0.0]);
        assert!((w.tau - 0.4905).abs() < 1e-15);
        assert!(quasi_static_velocity(&m, &w).omega > 0.0);
    }

    #[test]
    fn zero_input_residual_is_state_difference() {
        let m = model();
        let x = [0.1, 0.2, 1.0, 0.0, 0.3, 0.0];
        let r = euler_step_residual(&x, &x, &[0.0; 4], [0.0, 0.0], 0.1, &m).unwrap();
        assert!(r.iter().all(|v| *v == 0.0));
        let moved = [0.2, 0.2, 1.0, 0.0, 0.3, 0.0];
        let r = euler_step_residual(&x, &moved, &[0.0; 4], [0.0, 0.0], 0.1, &m).unwrap();
        assert!((r[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn layout_mismatch() {
        let m = model();
        let e = euler_step_residual(&[0.0; 5], &[0.0; 6], &[0.0; 4], [0.0, 0.0], 0.1, &m);
        assert_eq!(e, Err(DynamicsError::MismatchedLayout { expected: 6, got: 5 }));
    }
}
