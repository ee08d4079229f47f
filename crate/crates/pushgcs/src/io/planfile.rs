//! Plan output as JSON.

use serde::Serialize;

use pushgcs_core::math::{self, Vec2};
use pushgcs_core::modes::{KnotTrajectory, ModeKind};

use crate::planner::audit::AuditReport;
use crate::planner::pipeline::{CandidateReport, Timings};
use crate::planner::PlanResult;

use super::taskfile::SCHEMA_VERSION;

#[derive(Debug, Serialize)]
pub struct PlanFile {
    pub schema_version: u32,
    pub seed: u64,
    pub mode_sequence: Vec<String>,
    pub vertex_path: Vec<usize>,
    pub segments: Vec<SegmentOut>,
    pub costs: CostsOut,
    pub residuals: ResidualsOut,
    pub candidates: Vec<CandidateOut>,
    /// Absent when timings are suppressed for reproducible output.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<TimingsOut>,
}

#[derive(Debug, Serialize)]
pub struct SegmentOut {
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub face: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region: Option<usize>,
    pub timestep: f64,
    pub knots: Vec<KnotOut>,
    pub intervals: Vec<IntervalOut>,
}

#[derive(Debug, Serialize)]
pub struct KnotOut {
    pub slider: [f64; 2],
    pub theta: f64,
    pub rotation: [f64; 2],
    /// Pusher in the slider frame.
    pub pusher: [f64; 2],
    pub pusher_world: [f64; 2],
}

#[derive(Debug, Serialize)]
pub struct IntervalOut {
    /// Contact force in the slider frame as planned.
    pub force: [f64; 2],
    /// The same force rescaled onto the limit surface.
    pub force_scaled: [f64; 2],
    pub pusher_velocity: [f64; 2],
}

#[derive(Debug, Serialize)]
pub struct CostsOut {
    pub c_relax: f64,
    pub c_round: f64,
    pub c_round_scaled_forces: f64,
    pub gap: f64,
}

#[derive(Debug, Serialize)]
pub struct ResidualsOut {
    pub quadratic: f64,
    pub affine: f64,
    pub audit: AuditOut,
}

#[derive(Debug, Serialize)]
pub struct AuditOut {
    pub dynamics: f64,
    pub rotation: f64,
    pub so2: f64,
    pub step_angle: f64,
    pub friction: f64,
    pub contact: f64,
    pub penetration: f64,
    pub free_slider: f64,
    pub continuity: f64,
    pub endpoints: f64,
    pub workspace: f64,
}

impl From<&AuditReport> for AuditOut {
    fn from(a: &AuditReport) -> Self {
        Self {
            dynamics: a.dynamics,
            rotation: a.rotation,
            so2: a.so2,
            step_angle: a.step_angle,
            friction: a.friction,
            contact: a.contact,
            penetration: a.penetration,
            free_slider: a.free_slider,
            continuity: a.continuity,
            endpoints: a.endpoints,
            workspace: a.workspace,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CandidateOut {
    pub vertices: Vec<usize>,
    pub restriction_cost: Option<f64>,
    pub refined_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl From<&CandidateReport> for CandidateOut {
    fn from(c: &CandidateReport) -> Self {
        Self {
            vertices: c.vertices.clone(),
            restriction_cost: c.restriction_cost,
            refined_cost: c.refined_cost,
            message: c.message.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct TimingsOut {
    pub relaxation_s: f64,
    pub rounding_s: f64,
    pub refinement_s: f64,
}

impl From<&Timings> for TimingsOut {
    fn from(t: &Timings) -> Self {
        Self { relaxation_s: t.relaxation_s, rounding_s: t.rounding_s, refinement_s: t.refinement_s }
    }
}

fn segment_out(seg: &KnotTrajectory, scaled: &[Vec2]) -> SegmentOut {
    let (mode, face, region) = match seg.mode {
        ModeKind::Contact { face } => ("contact", Some(face), None),
        ModeKind::NonContact { region } => ("free", None, Some(region)),
    };
    SegmentOut {
        mode: mode.into(),
        face,
        region,
        timestep: seg.timestep,
        knots: seg
            .states
            .iter()
            .map(|s| KnotOut {
                slider: s.slider_pos,
                theta: math::angle_of(s.rot),
                rotation: s.rot,
                pusher: s.pusher_pos,
                pusher_world: math::add(s.slider_pos, math::rotate(s.rot, s.pusher_pos)),
            })
            .collect(),
        intervals: seg
            .inputs
            .iter()
            .zip(scaled)
            .map(|(u, f)| IntervalOut { force: u.force, force_scaled: *f, pusher_velocity: u.pusher_vel })
            .collect(),
    }
}

impl PlanFile {
    pub fn new(result: &PlanResult, seed: u64, with_timings: bool) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed,
            mode_sequence: result.mode_labels.clone(),
            vertex_path: result.vertex_path.clone(),
            segments: result.segments.iter().zip(&result.scaled_forces).map(|(s, f)| segment_out(s, f)).collect(),
            costs: CostsOut {
                c_relax: result.c_relax,
                c_round: result.c_round,
                c_round_scaled_forces: result.c_round_scaled,
                gap: result.gap,
            },
            residuals: ResidualsOut {
                quadratic: result.quadratic_residual,
                affine: result.affine_residual,
                audit: (&result.audit).into(),
            },
            candidates: result.candidates.iter().map(Into::into).collect(),
            timings: with_timings.then(|| (&result.timings).into()),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan serializes");
        s.push('\n');
        s
    }
}
