//! Task files: versioned JSON with unknown keys rejected.

use serde::{Deserialize, Serialize};

use pushgcs_core::dynamics::FrictionParams;
use pushgcs_core::geometry::{PusherSpec, SliderGeometry, DEFAULT_WORKSPACE_SIDE};
use pushgcs_core::modes::CostWeights;

use crate::planner::task::{DEFAULT_KNOTS, DEFAULT_TIMESTEP};
use crate::planner::{Pose, TaskSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum TaskFileError {
    #[error("{path}: {message} (line {line}, column {column})")]
    Schema { path: String, message: String, line: usize, column: usize },
    #[error("unsupported schema_version {0}, expected {SCHEMA_VERSION}")]
    Version(u32),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrictionSection {
    pub mu_table: f64,
    pub mu_pusher: f64,
    pub integration_constant: f64,
    pub mass: f64,
    pub gravity: f64,
}

impl Default for FrictionSection {
    fn default() -> Self {
        let d = FrictionParams::default();
        Self {
            mu_table: d.mu_table,
            mu_pusher: d.mu_pusher,
            integration_constant: d.integration_constant,
            mass: d.mass,
            gravity: d.gravity,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsSection {
    pub k_pusher_arc: f64,
    pub k_slider_arc: f64,
    pub k_pusher_energy: f64,
    pub k_slider_energy: f64,
    pub k_force: f64,
    pub k_time: f64,
    pub k_proximity: f64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        let w = CostWeights::default();
        Self {
            k_pusher_arc: w.k_pp,
            k_slider_arc: w.k_ps,
            k_pusher_energy: w.k_vp,
            k_slider_energy: w.k_vs,
            k_force: w.k_f,
            k_time: w.k_t,
            k_proximity: w.k_phi,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSection {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigurationSection {
    pub slider: PoseSection,
    /// Pusher position in the slider frame.
    pub pusher: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    pub schema_version: u32,
    pub geometry: GeometrySection,
    #[serde(default = "default_radius")]
    pub pusher_radius: f64,
    #[serde(default)]
    pub friction: FrictionSection,
    #[serde(default)]
    pub weights: WeightsSection,
    #[serde(default = "default_knots")]
    pub knots: usize,
    #[serde(default = "default_timestep")]
    pub timestep: f64,
    #[serde(default = "default_workspace")]
    pub workspace_side: f64,
    pub initial: ConfigurationSection,
    pub target: ConfigurationSection,
    #[serde(default)]
    pub seed: u64,
}

fn default_radius() -> f64 {
    PusherSpec::default().radius
}
fn default_knots() -> usize {
    DEFAULT_KNOTS
}
fn default_timestep() -> f64 {
    DEFAULT_TIMESTEP
}
fn default_workspace() -> f64 {
    DEFAULT_WORKSPACE_SIDE
}

pub fn preset_geometry(name: &str) -> Option<SliderGeometry> {
    match name {
        "box" => Some(SliderGeometry::box_preset()),
        "tee" => Some(SliderGeometry::tee_preset()),
        _ => None,
    }
}

impl TaskFile {
    pub fn parse(text: &str) -> Result<Self, TaskFileError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: TaskFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            TaskFileError::Schema { path, message: inner.to_string(), line: inner.line(), column: inner.column() }
        })?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(TaskFileError::Version(file.schema_version));
        }
        Ok(file)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, TaskFileError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn geometry(&self) -> Result<SliderGeometry, TaskFileError> {
        match (&self.geometry.preset, &self.geometry.vertices) {
            (Some(name), None) => {
                preset_geometry(name).ok_or_else(|| TaskFileError::Invalid(format!("geometry.preset: unknown preset {name:?}")))
            }
            (None, Some(v)) => SliderGeometry::new(v.clone()).map_err(|e| TaskFileError::Invalid(format!("geometry.vertices: {e}"))),
            _ => Err(TaskFileError::Invalid("geometry: give exactly one of preset or vertices".into())),
        }
    }

    /// Builds the task; invariants are checked when the planner runs.
    pub fn to_task(&self) -> Result<TaskSpec, TaskFileError> {
        let pose = |p: &PoseSection| Pose { position: [p.x, p.y], theta: p.theta };
        let f = &self.friction;
        let w = &self.weights;
        let pusher = PusherSpec::new(self.pusher_radius).map_err(|e| TaskFileError::Invalid(format!("pusher_radius: {e}")))?;
        let mut task = TaskSpec::new(
            self.geometry()?,
            pose(&self.initial.slider),
            pose(&self.target.slider),
            self.initial.pusher,
            self.target.pusher,
        );
        task.pusher = pusher;
        task.friction = FrictionParams {
            mu_table: f.mu_table,
            mu_pusher: f.mu_pusher,
            integration_constant: f.integration_constant,
            mass: f.mass,
            gravity: f.gravity,
        };
        task.weights = CostWeights {
            k_pp: w.k_pusher_arc,
            k_ps: w.k_slider_arc,
            k_vp: w.k_pusher_energy,
            k_vs: w.k_slider_energy,
            k_f: w.k_force,
            k_t: w.k_time,
            k_phi: w.k_proximity,
        };
        task.knots = self.knots;
        task.timestep = self.timestep;
        task.workspace_side = self.workspace_side;
        Ok(task)
    }

    /// Task file describing `task` with geometry given by `preset` when set.
    pub fn from_task(task: &TaskSpec, preset: Option<&str>, seed: u64) -> Self {
        let config = |pose: &Pose, pusher: [f64; 2]| ConfigurationSection {
            slider: PoseSection { x: pose.position[0], y: pose.position[1], theta: pose.theta },
            pusher,
        };
        let f = &task.friction;
        let w = &task.weights;
        Self {
            schema_version: SCHEMA_VERSION,
            geometry: match preset {
                Some(p) => GeometrySection { preset: Some(p.into()), vertices: None },
                None => GeometrySection { preset: None, vertices: Some(task.geometry.vertices().to_vec()) },
            },
            pusher_radius: task.pusher.radius,
            friction: FrictionSection {
                mu_table: f.mu_table,
                mu_pusher: f.mu_pusher,
                integration_constant: f.integration_constant,
                mass: f.mass,
                gravity: f.gravity,
            },
            weights: WeightsSection {
                k_pusher_arc: w.k_pp,
                k_slider_arc: w.k_ps,
                k_pusher_energy: w.k_vp,
                k_slider_energy: w.k_vs,
                k_force: w.k_f,
                k_time: w.k_t,
                k_proximity: w.k_phi,
            },
            knots: task.knots,
            timestep: task.timestep,
            workspace_side: task.workspace_side,
            initial: config(&task.initial_slider, task.initial_pusher),
            target: config(&task.target_slider, task.target_pusher),
            seed,
        }
    }
}
