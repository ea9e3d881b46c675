use nalgebra::{Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{HalfStepTrajectory, NominalGait, CYCLIC_TOLERANCE};
use crate::error::{GaitError, Result};
use crate::kinematics::{forward_kinematics, swing_sole_pose, Footprint, Side};
use crate::model::MechanismModel;

/// World placement of a half-step's local (stance sole) frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StancePose {
    pub origin: Vector2<f64>,
    /// Unwrapped heading, rad.
    pub heading: f64,
    pub side: Side,
}

impl StancePose {
    pub fn new(origin: Vector2<f64>, heading: f64, side: Side) -> Self {
        Self { origin, heading, side }
    }

    pub fn to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let s = self.side.mirror_sign();
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), self.heading);
        rot * Vector3::new(p.x, s * p.y, p.z) + Vector3::new(self.origin.x, self.origin.y, 0.0)
    }

    pub fn to_world_2d(&self, p: Vector2<f64>) -> Vector2<f64> {
        self.to_world(&Vector3::new(p.x, p.y, 0.0)).xy()
    }

    /// World heading of a local yaw angle.
    pub fn world_heading(&self, local: f64) -> f64 {
        self.heading + self.side.mirror_sign() * local
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfStepPlacement {
    pub index: usize,
    pub trajectory: HalfStepTrajectory,
    pub stance: StancePose,
    pub stance_footprint: Footprint,
    /// Where the swing foot lands at the end of the half-step.
    pub landing_footprint: Footprint,
    /// World time of the first sample, s.
    pub start_time: f64,
    /// Swing-foot sole centre at the first sample, world.
    pub swing_start: Vector3<f64>,
    /// Swing-foot sole centre at the last sample, world.
    pub swing_end: Vector3<f64>,
}

/// A chain of half-steps with alternating stance placed in the world.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WalkSegment {
    pub half_steps: Vec<HalfStepPlacement>,
}

impl WalkSegment {
    pub fn is_empty(&self) -> bool {
        self.half_steps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.half_steps.len()
    }

    /// Stance footprints, one per half-step.
    pub fn footprints(&self) -> Vec<Footprint> {
        self.half_steps.iter().map(|h| h.stance_footprint.clone()).collect()
    }

    pub fn duration(&self) -> f64 {
        self.half_steps.iter().map(|h| h.trajectory.duration).sum()
    }

    /// Total swing-foot travel over the segment, m.
    pub fn forward_progress(&self) -> f64 {
        self.half_steps
            .iter()
            .map(|h| (h.swing_end - h.swing_start).xy().norm())
            .sum()
    }

    /// World heading of the walk after the last half-step.
    pub fn final_heading(&self) -> Option<f64> {
        self.half_steps.last().map(|h| h.landing_footprint.heading)
    }
}

fn footprint(
    model: &MechanismModel,
    pose: &StancePose,
    local_center: Vector2<f64>,
    local_heading: f64,
    side: Side,
    step_index: usize,
) -> Footprint {
    Footprint::rectangle(
        pose.to_world_2d(local_center),
        pose.world_heading(local_heading),
        model.foot.length_x,
        model.foot.width_y,
        side,
        step_index,
    )
}

/// Places consecutive half-steps in the world: each landing swing foot
/// becomes the next stance foot.
pub fn assemble_walk(
    model: &MechanismModel,
    trajectories: Vec<HalfStepTrajectory>,
    start: StancePose,
) -> Result<WalkSegment> {
    let mut pose = start;
    let mut time = 0.0;
    let mut half_steps = Vec::with_capacity(trajectories.len());
    for (index, trajectory) in trajectories.into_iter().enumerate() {
        trajectory.check()?;
        if trajectory.stance_side != pose.side {
            return Err(GaitError::Trajectory(format!(
                "half-step {index} has {:?} stance, expected {:?}",
                trajectory.stance_side, pose.side
            )));
        }
        let first = forward_kinematics(model, &trajectory.samples[0].q);
        let last = forward_kinematics(
            model,
            &trajectory.samples.last().expect("checked trajectory").q,
        );
        let start_sole = swing_sole_pose(model, &first);
        let end_sole = swing_sole_pose(model, &last);

        let stance_footprint = footprint(model, &pose, Vector2::zeros(), 0.0, pose.side, index);
        let landing_footprint = footprint(
            model,
            &pose,
            end_sole.translation.xy(),
            end_sole.heading(),
            pose.side.other(),
            index + 1,
        );
        let next = StancePose::new(
            pose.to_world_2d(end_sole.translation.xy()),
            pose.world_heading(end_sole.heading()),
            pose.side.other(),
        );
        let duration = trajectory.duration;
        half_steps.push(HalfStepPlacement {
            index,
            swing_start: pose.to_world(&start_sole.translation),
            swing_end: pose.to_world(&end_sole.translation),
            trajectory,
            stance: pose,
            stance_footprint,
            landing_footprint,
            start_time: time,
        });
        time += duration;
        pose = next;
    }
    Ok(WalkSegment { half_steps })
}

/// Chains `n_steps` nominal half-steps, starting on the right foot at the
/// world origin.
pub fn stitch(model: &MechanismModel, gait: &NominalGait, n_steps: usize) -> Result<WalkSegment> {
    let mismatch = gait.cyclic_residual(model);
    if !(mismatch <= CYCLIC_TOLERANCE) {
        return Err(GaitError::NonCyclic { mismatch });
    }
    let trajectories = (0..n_steps)
        .map(|k| {
            let side = if k % 2 == 0 { Side::Right } else { Side::Left };
            gait.half_step(side).clone()
        })
        .collect();
    assemble_walk(model, trajectories, StancePose::new(Vector2::zeros(), 0.0, Side::Right))
}
