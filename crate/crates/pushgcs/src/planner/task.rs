//! Planning task: slider, pusher, physics, cost weights, and endpoints.

use pushgcs_core::dynamics::{limit_surface, FrictionParams};
use pushgcs_core::geometry::{decompose_regions, PusherSpec, SliderGeometry, DEFAULT_WORKSPACE_SIDE};
use pushgcs_core::math::{self, Vec2};
use pushgcs_core::modes::{CostWeights, KnotState, ModeContext};

use super::PlanError;

/// Timestep used when a task does not set one, in seconds.
pub const DEFAULT_TIMESTEP: f64 = 0.5;
pub const DEFAULT_KNOTS: usize = 3;

/// Planar pose: world position and heading.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Pose {
    pub position: Vec2,
    pub theta: f64,
}

impl Pose {
    pub fn rot(&self) -> Vec2 {
        math::rot_from_angle(self.theta)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub geometry: SliderGeometry,
    pub pusher: PusherSpec,
    pub friction: FrictionParams,
    pub weights: CostWeights,
    pub knots: usize,
    pub timestep: f64,
    pub workspace_side: f64,
    pub initial_slider: Pose,
    pub target_slider: Pose,
    /// Pusher positions in the slider frame.
    pub initial_pusher: Vec2,
    pub target_pusher: Vec2,
}

impl TaskSpec {
    /// Default physics and weights with the given slider and endpoints.
    pub fn new(
        geometry: SliderGeometry,
        initial_slider: Pose,
        target_slider: Pose,
        initial_pusher: Vec2,
        target_pusher: Vec2,
    ) -> Self {
        Self {
            geometry,
            pusher: PusherSpec::default(),
            friction: FrictionParams::default(),
            weights: CostWeights::default(),
            knots: DEFAULT_KNOTS,
            timestep: DEFAULT_TIMESTEP,
            workspace_side: DEFAULT_WORKSPACE_SIDE,
            initial_slider,
            target_slider,
            initial_pusher,
            target_pusher,
        }
    }

    pub fn initial_state(&self) -> KnotState {
        KnotState { slider_pos: self.initial_slider.position, rot: self.initial_slider.rot(), pusher_pos: self.initial_pusher }
    }

    pub fn target_state(&self) -> KnotState {
        KnotState { slider_pos: self.target_slider.position, rot: self.target_slider.rot(), pusher_pos: self.target_pusher }
    }

    /// Checks every invariant and builds the shared mode context.
    pub fn context(&self) -> Result<ModeContext, PlanError> {
        let regions = decompose_regions(&self.geometry, self.pusher, self.workspace_side)?;
        let limit_surface = limit_surface(&self.friction, self.geometry.characteristic_radius())?;
        let ctx = ModeContext {
            geometry: self.geometry.clone(),
            regions,
            limit_surface,
            mu_pusher: self.friction.mu_pusher,
            weights: self.weights,
            knots: self.knots,
            timestep: self.timestep,
        };
        ctx.validate()?;
        let half = 0.5 * self.workspace_side;
        for (name, pose) in [("initial", &self.initial_slider), ("target", &self.target_slider)] {
            let p = pose.position;
            if !(p[0].abs() <= half && p[1].abs() <= half && pose.theta.is_finite()) {
                return Err(PlanError::InvalidTask(format!("{name} slider pose outside the workspace")));
            }
        }
        for (name, p) in [("initial", self.initial_pusher), ("target", self.target_pusher)] {
            match ctx.regions.min_gap(p) {
                Ok((g, _)) if g >= -1e-9 => {}
                _ => return Err(PlanError::InvalidTask(format!("{name} pusher position is not collision-free"))),
            }
        }
        Ok(ctx)
    }
}
