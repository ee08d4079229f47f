//! Independent feasibility check of a stitched trajectory, computed from
//! raw knot values, the slider polygon and the physics model only.

use pushgcs_core::dynamics::{euler_step_residual, friction_cone_residuals, ContactForceDecomposition, LimitSurfaceModel};
use pushgcs_core::geometry::SliderGeometry;
use pushgcs_core::math::{self, Vec2};
use pushgcs_core::modes::{KnotTrajectory, ModeKind};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AuditReport {
    /// Euler translation and pusher rows.
    pub dynamics: f64,
    /// Rotation-step row.
    pub rotation: f64,
    pub so2: f64,
    /// Negative `r_k · r_{k+1}`: a step turning past a quarter turn.
    pub step_angle: f64,
    pub friction: f64,
    /// Pusher off its face, outside the face span, or slipping.
    pub contact: f64,
    /// Penetration of the pusher disk into the slider.
    pub penetration: f64,
    /// Slider motion outside contact.
    pub free_slider: f64,
    pub continuity: f64,
    pub endpoints: f64,
    pub workspace: f64,
}

impl AuditReport {
    pub fn max_equality(&self) -> f64 {
        [self.dynamics, self.rotation, self.so2, self.contact, self.free_slider, self.continuity, self.endpoints]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn max_inequality(&self) -> f64 {
        [self.friction, self.step_angle, self.penetration, self.workspace].into_iter().fold(0.0, f64::max)
    }

    pub fn passes(&self, eq_tol: f64, ineq_tol: f64) -> bool {
        self.max_equality() <= eq_tol && self.max_inequality() <= ineq_tol
    }
}

pub struct AuditInput<'a> {
    pub geometry: &'a SliderGeometry,
    pub pusher_radius: f64,
    pub mu_pusher: f64,
    pub limit_surface: &'a LimitSurfaceModel,
    pub workspace_side: f64,
    pub start: [f64; 6],
    pub goal: [f64; 6],
}

fn state(t: &KnotTrajectory, k: usize) -> [f64; 6] {
    let s = &t.states[k];
    [s.slider_pos[0], s.slider_pos[1], s.rot[0], s.rot[1], s.pusher_pos[0], s.pusher_pos[1]]
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn audit(segments: &[KnotTrajectory], input: &AuditInput) -> AuditReport {
    let mut r = AuditReport::default();
    let faces = input.geometry.faces();
    let half = 0.5 * input.workspace_side;
    for (m, t) in segments.iter().enumerate() {
        let n = t.states.len();
        for k in 0..n {
            let x = state(t, k);
            r.so2 = r.so2.max((x[2] * x[2] + x[3] * x[3] - 1.0).abs());
            r.workspace = r.workspace.max(x[0].abs() - half).max(x[1].abs() - half);
            let clearance = input.geometry.disk_clearance([x[4], x[5]], input.pusher_radius);
            r.penetration = r.penetration.max(-clearance);
        }
        for k in 0..n.saturating_sub(1) {
            let (x0, x1) = (state(t, k), state(t, k + 1));
            let u = &t.inputs[k];
            let uk = [u.force[0], u.force[1], u.pusher_vel[0], u.pusher_vel[1]];
            match t.mode {
                ModeKind::Contact { face } => {
                    let f = &faces[face];
                    let contact_point: Vec2 = math::sub([x0[4], x0[5]], math::scale(f.normal, input.pusher_radius));
                    match euler_step_residual(&x0, &x1, &uk, contact_point, t.timestep, input.limit_surface) {
                        Ok(res) => {
                            r.dynamics = r.dynamics.max(max_abs(&[res[0], res[1], res[4], res[5]]));
                            r.rotation = r.rotation.max(res[2].abs());
                        }
                        Err(_) => r.dynamics = f64::INFINITY,
                    }
                    r.step_angle = r.step_angle.max(-(x0[2] * x1[2] + x0[3] * x1[3]));
                    let dec = ContactForceDecomposition {
                        lambda_n: -math::dot(u.force, f.normal),
                        lambda_f: math::dot(u.force, f.tangent),
                        face,
                    };
                    for v in friction_cone_residuals(&dec, input.mu_pusher) {
                        r.friction = r.friction.max(-v);
                    }
                    // Force must have no component outside the face frame.
                    let rebuilt = dec.to_cartesian(f.normal, f.tangent);
                    r.dynamics = r.dynamics.max(math::norm(math::sub(rebuilt, u.force)));
                    r.contact = r.contact.max(math::norm(math::sub([x1[4], x1[5]], [x0[4], x0[5]])));
                }
                ModeKind::NonContact { .. } => {
                    r.free_slider = r.free_slider.max(max_abs(&[x1[0] - x0[0], x1[1] - x0[1], x1[2] - x0[2], x1[3] - x0[3]]));
                    r.dynamics = r.dynamics.max(max_abs(&[
                        x1[4] - x0[4] - t.timestep * u.pusher_vel[0],
                        x1[5] - x0[5] - t.timestep * u.pusher_vel[1],
                        u.force[0],
                        u.force[1],
                    ]));
                }
            }
        }
        if let ModeKind::Contact { face } = t.mode {
            let f = &faces[face];
            for s in &t.states {
                let off = math::dot(math::sub(s.pusher_pos, f.start), f.normal) - input.pusher_radius;
                let along = math::dot(math::sub(s.pusher_pos, f.start), f.tangent);
                let outside = (-along).max(along - f.length).max(0.0);
                r.contact = r.contact.max(off.abs()).max(outside);
            }
        }
        if m > 0 {
            let prev = &segments[m - 1];
            let a = state(prev, prev.states.len() - 1);
            let b = state(t, 0);
            let d: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p - q).collect();
            r.continuity = r.continuity.max(max_abs(&d));
        }
    }
    if let (Some(first), Some(last)) = (segments.first(), segments.last()) {
        let a = state(first, 0);
        let b = state(last, last.states.len() - 1);
        for i in 0..6 {
            r.endpoints = r.endpoints.max((a[i] - input.start[i]).abs()).max((b[i] - input.goal[i]).abs());
        }
    } else {
        r.endpoints = f64::INFINITY;
    }
    r
}
