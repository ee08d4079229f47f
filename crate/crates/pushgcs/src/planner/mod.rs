//! Planning pipeline: mode graph, relaxation, rounding, refinement, and
//! certification.

pub mod audit;
pub mod graph;
pub mod pipeline;
pub mod refine;
pub mod sample;
pub mod task;

use pushgcs_core::dynamics::DynamicsError;
use pushgcs_core::gcs::GcsError;
use pushgcs_core::geometry::GeometryError;
use pushgcs_core::modes::ModeError;

pub use pipeline::{certify_gap, plan, plan_on_graph, PlanOptions, PlanResult};
pub use graph::{build_mode_graph, Endpoint, ModeGraph, VertexRole};
pub use task::{Pose, TaskSpec};

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Mode(#[from] ModeError),
    #[error(transparent)]
    Gcs(#[from] GcsError),
    #[error("target is not reachable in the mode graph")]
    UnreachableTarget,
    #[error("no rounded candidate produced a feasible trajectory")]
    NoFeasiblePlan(Vec<pipeline::CandidateReport>),
    #[error(transparent)]
    Gap(#[from] pipeline::GapError),
}

impl PlanError {
    /// True when the task itself is malformed rather than unsolvable.
    pub fn is_input_error(&self) -> bool {
        matches!(self, PlanError::InvalidTask(_) | PlanError::Geometry(_) | PlanError::Dynamics(_) | PlanError::Mode(_))
    }
}
