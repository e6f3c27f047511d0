use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{MotionCommand, MotionNoise};
use crate::world::{MapObject, Point2, Pose2D, Rect, WorldMap};

pub const BLOCK_HALF_EXTENT: f64 = 2.5;

/// Minimum distance between any ground-truth pose and the nearest object
/// surface or map edge.
pub const TRAJECTORY_CLEARANCE: f64 = 1.0;

/// Block centers in a 50 x 50 m world centered on the origin. The layout is
/// deliberately irregular so that no two places along the loop see the same
/// constellation of blocks.
const BLOCK_CENTERS: [(f64, f64); 12] = [
    (-10.0, -20.0),
    (4.0, -10.0),
    (20.0, -8.0),
    (9.0, 2.0),
    (20.0, 12.0),
    (5.0, 20.0),
    (-12.0, 19.0),
    (-20.0, 6.0),
    (-9.0, -6.0),
    (-3.0, 9.0),
    (-20.0, -12.0),
    (10.0, 10.0),
];

/// Square loop corners, 30 m a side.
const LOOP_HALF_SIDE: f64 = 15.0;
const STEP_LENGTH: f64 = 1.0;

/// Per-step odometry noise of the default trajectory.
const DEFAULT_NOISE: MotionNoise = MotionNoise {
    trans: 0.1,
    rot1: 0.02,
    rot2: 0.02,
};

/// The 50 x 50 m block world with twelve 5 x 5 m blocks.
pub fn build_block_world() -> WorldMap {
    let bounds = Rect::new(Point2::new(-25.0, -25.0), Point2::new(25.0, 25.0));
    let objects = BLOCK_CENTERS
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            MapObject::new(
                i as u32 + 1,
                "block",
                Point2::new(x, y),
                Point2::new(BLOCK_HALF_EXTENT, BLOCK_HALF_EXTENT),
            )
        })
        .collect();
    WorldMap::new(bounds, objects).expect("builtin block world is valid")
}

/// Start pose plus the commands that drive the ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub start: Pose2D,
    pub commands: Vec<MotionCommand>,
}

impl Trajectory {
    /// Noise-free ground-truth poses after each command.
    pub fn rollout(&self) -> Vec<Pose2D> {
        let mut pose = self.start;
        self.commands
            .iter()
            .map(|cmd| {
                pose = cmd.apply(&pose);
                pose
            })
            .collect()
    }

    /// Checks that every ground-truth pose, start included, keeps
    /// [`TRAJECTORY_CLEARANCE`] from the map edges and all objects.
    pub fn check_clearance(&self, map: &WorldMap) -> Result<()> {
        let b = map.bounds();
        let inner = Rect::new(
            Point2::new(b.min.x + TRAJECTORY_CLEARANCE, b.min.y + TRAJECTORY_CLEARANCE),
            Point2::new(b.max.x - TRAJECTORY_CLEARANCE, b.max.y - TRAJECTORY_CLEARANCE),
        );
        for (i, pose) in std::iter::once(self.start).chain(self.rollout()).enumerate() {
            let p = pose.position();
            if !inner.contains(p) {
                return Err(Error::InvalidArgument(format!(
                    "trajectory pose {i} at ({:.2}, {:.2}) is too close to the map edge",
                    p.x, p.y
                )));
            }
            for obj in map.objects() {
                if rect_distance(&obj.rect(), p) < TRAJECTORY_CLEARANCE {
                    return Err(Error::InvalidArgument(format!(
                        "trajectory pose {i} at ({:.2}, {:.2}) is within {TRAJECTORY_CLEARANCE} m of object {}",
                        p.x, p.y, obj.id
                    )));
                }
            }
        }
        Ok(())
    }
}

fn rect_distance(r: &Rect, p: Point2) -> f64 {
    let dx = (r.min.x - p.x).max(0.0).max(p.x - r.max.x);
    let dy = (r.min.y - p.y).max(0.0).max(p.y - r.max.y);
    dx.hypot(dy)
}

/// Counter-clockwise square loop through the block world: 30 one-meter steps
/// per side, a quarter turn at each corner, and a final turn restoring the
/// start heading. Fails if `map` leaves less than the required clearance.
pub fn default_trajectory(map: &WorldMap) -> Result<Trajectory> {
    let start = Pose2D::new(-LOOP_HALF_SIDE, -LOOP_HALF_SIDE, 0.0);
    let per_side = (2.0 * LOOP_HALF_SIDE / STEP_LENGTH).round() as usize;
    let mut commands = Vec::with_capacity(4 * per_side);
    for side in 0..4 {
        for k in 0..per_side {
            let rot1 = if side > 0 && k == 0 { FRAC_PI_2 } else { 0.0 };
            let rot2 = if side == 3 && k == per_side - 1 { FRAC_PI_2 } else { 0.0 };
            commands.push(MotionCommand::new(rot1, STEP_LENGTH, rot2).with_noise(DEFAULT_NOISE));
        }
    }
    let trajectory = Trajectory { start, commands };
    trajectory.check_clearance(map)?;
    Ok(trajectory)
}
