//! Random planning instances for batch experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pushgcs_core::geometry::{decompose_regions, SliderGeometry};
use pushgcs_core::math::{self, Vec2};

use super::task::{Pose, TaskSpec};

const PI: f64 = std::f64::consts::PI;

/// Heading differences this close to a half turn are resampled: the
/// shortest rotation between them is not unique.
pub const HALF_TURN_MARGIN: f64 = 1e-3;

fn uniform_pose(rng: &mut ChaCha8Rng, half: f64) -> Pose {
    Pose { position: [rng.gen_range(-half..=half), rng.gen_range(-half..=half)], theta: rng.gen_range(-PI..PI) }
}

fn free_pusher(rng: &mut ChaCha8Rng, task: &TaskSpec, half: f64) -> Vec2 {
    let regions = decompose_regions(&task.geometry, task.pusher, task.workspace_side).expect("valid preset geometry");
    loop {
        let p = [rng.gen_range(-half..=half), rng.gen_range(-half..=half)];
        if matches!(regions.min_gap(p), Ok((g, _)) if g >= 0.0) {
            return p;
        }
    }
}

/// Task `index` of the batch seeded with `seed`: slider poses uniform in the
/// workspace and headings uniform on the circle, pusher endpoints uniform
/// over the collision-free part of the workspace.
pub fn sample_task(geometry: &SliderGeometry, seed: u64, index: u64) -> TaskSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut task = TaskSpec::new(geometry.clone(), Pose::default(), Pose::default(), [0.0, 0.0], [0.0, 0.0]);
    let half = 0.5 * task.workspace_side;
    loop {
        let a = uniform_pose(&mut rng, half);
        let b = uniform_pose(&mut rng, half);
        if (math::wrap_angle(b.theta - a.theta).abs() - PI).abs() > HALF_TURN_MARGIN {
            task.initial_slider = a;
            task.target_slider = b;
            break;
        }
    }
    task.initial_pusher = free_pusher(&mut rng, &task, half);
    task.target_pusher = free_pusher(&mut rng, &task, half);
    task
}
