//! Allocation-only core of the planar-pushing planner.
//!
//! Everything here is pure computation over owned data: polygon geometry,
//! quasi-static contact physics, per-mode trajectory transcriptions, the
//! block Shor relaxation of those transcriptions, a solver-neutral conic
//! program representation, and the graph-of-convex-sets machinery. Conic
//! solves go through the [`conic::ConicSolver`] trait so that no solver
//! backend is linked into this crate.
#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod conic;
pub mod dynamics;
pub mod expr;
pub mod gcs;

pub mod geometry;
pub mod linalg;
pub mod math;
pub mod modes;

pub mod sdp;

pub use conic::{Cone, ConeConstraint, ConicProgram, ConicSolver, SolveSettings, SolveStatus, SolverOutcome};
pub use dynamics::{FrictionParams, LimitSurfaceModel, SpatialForce, SpatialVelocity};
pub use expr::{Affine, QuadForm};
pub use geometry::{PusherSpec, RegionDecomposition, SliderGeometry};
pub use modes::{CostWeights, KnotTrajectory, ModeContext, ModeTranscription};
