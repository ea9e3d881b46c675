//! Nominal half-step synthesis (prescribed legs + semi-inverse trunk) and
//! stitching of half-steps into walks.

mod csv;
mod legs;
mod trunk;
mod walk;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

pub use self::csv::{read_trajectory_csv, write_trajectory_csv};
pub use self::legs::{
    boundary_pelvis, leg_ik, legs_configuration, swing_sole_target, synthesize_leg_trajectories,
    LegAngles,
};
pub use self::trunk::{semi_inverse_trunk, TrunkBoundary, TrunkConfig};
pub use self::walk::{assemble_walk, stitch, HalfStepPlacement, StancePose, WalkSegment};

use crate::error::{GaitError, Result};
use crate::kinematics::{forward_kinematics, Side};
use crate::model::{joint, Configuration, MechanismModel};

/// Largest mirror mismatch of the prescribed leg joints for a cyclic gait, rad.
pub const CYCLIC_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitParameters {
    /// Swing-foot travel over one half-step, m.
    pub step_length: f64,
    /// Half-step duration, s.
    pub step_duration: f64,
    pub foot_clearance: f64,
    /// ZMP target in the stance sole frame (sole centre by default), m.
    pub zmp_target: Vector2<f64>,
    /// Integration intervals per half-step.
    pub n_int: usize,
    /// Hip joint height above the ground, m.
    pub hip_height: f64,
}

impl Default for GaitParameters {
    fn default() -> Self {
        Self {
            step_length: 0.4,
            step_duration: 0.5,
            foot_clearance: 0.02,
            zmp_target: Vector2::zeros(),
            n_int: 100,
            hip_height: 0.86,
        }
    }
}

impl GaitParameters {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GaitError::InvalidParameters(msg));
        if !(self.step_length >= 0.0 && self.step_length.is_finite()) {
            return bad(format!("step_length {} must be >= 0", self.step_length));
        }
        if !(self.step_duration > 0.0 && self.step_duration.is_finite()) {
            return bad(format!("step_duration {} must be > 0", self.step_duration));
        }
        if !(self.foot_clearance >= 0.0) {
            return bad(format!("foot_clearance {} must be >= 0", self.foot_clearance));
        }
        if self.n_int < 10 {
            return bad(format!("n_int {} must be at least 10", self.n_int));
        }
        if !(self.hip_height > 0.0) {
            return bad(format!("hip_height {} must be > 0", self.hip_height));
        }
        if !self.zmp_target.iter().all(|v| v.is_finite()) {
            return bad("zmp_target must be finite".into());
        }
        Ok(())
    }
}

/// One single-support phase sampled at `n_int + 1` uniformly spaced
/// instants, expressed in the stance sole frame (y-mirrored for left
/// support).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfStepTrajectory {
    pub samples: Vec<Configuration>,
    pub dt: f64,
    pub duration: f64,
    pub stance_side: Side,
    pub n_int: usize,
}

impl HalfStepTrajectory {
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn dof(&self) -> usize {
        self.samples.first().map_or(0, |s| s.dof())
    }

    /// Largest gap between sampled velocities and central differences of
    /// sampled positions over interior samples, rad/s.
    pub fn velocity_consistency_residual(&self) -> f64 {
        let s = &self.samples;
        let mut worst = 0.0f64;
        for i in 1..s.len().saturating_sub(1) {
            for j in 0..s[i].dof() {
                let fd = (s[i + 1].q[j] - s[i - 1].q[j]) / (2.0 * self.dt);
                worst = worst.max((fd - s[i].qd[j]).abs());
            }
        }
        worst
    }

    pub fn check(&self) -> Result<()> {
        let err = |m: String| Err(GaitError::Trajectory(m));
        if self.n_int < 10 {
            return err(format!("n_int {} < 10", self.n_int));
        }
        if self.samples.len() != self.n_int + 1 {
            return err(format!("{} samples for n_int {}", self.samples.len(), self.n_int));
        }
        if (self.dt * self.n_int as f64 - self.duration).abs() > 1e-12 * self.duration.max(1.0) {
            return err(format!("dt {} inconsistent with duration {}", self.dt, self.duration));
        }
        if !self.samples.iter().all(Configuration::is_finite) {
            return err("non-finite sample".into());
        }
        Ok(())
    }
}

/// The nominal walk: one right-support half-step and its mirror image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalGait {
    pub right_support: HalfStepTrajectory,
    pub left_support: HalfStepTrajectory,
    pub params: GaitParameters,
}

impl NominalGait {
    pub fn half_step(&self, side: Side) -> &HalfStepTrajectory {
        match side {
            Side::Right => &self.right_support,
            Side::Left => &self.left_support,
        }
    }

    /// Mirror mismatch of the prescribed leg joints between the end of one
    /// half-step and the start of the next, rad.
    pub fn cyclic_residual(&self, model: &MechanismModel) -> f64 {
        let a = leg_mismatch(model, &self.right_support, &self.left_support);
        let b = leg_mismatch(model, &self.left_support, &self.right_support);
        a.max(b)
    }

    /// Same measure for the trunk and arm joints (reported, not enforced).
    pub fn trunk_cyclic_residual(&self, model: &MechanismModel) -> f64 {
        let end = &self.right_support.samples.last().expect("samples").q;
        let next = mirror_relabel(model, end);
        let start = &self.left_support.samples[0].q;
        (joint::WAIST_ROLL..=joint::SWING_ELBOW)
            .map(|id| (next[id - 1] - start[id - 1]).abs())
            .fold(0.0, f64::max)
    }

    /// Largest angle between the two legs over the half-step (sagittal
    /// plane), rad.
    pub fn beta_nom(&self, model: &MechanismModel) -> f64 {
        self.right_support
            .samples
            .iter()
            .map(|s| inter_leg_angle(model, &s.q))
            .fold(0.0, f64::max)
    }
}

fn leg_mismatch(model: &MechanismModel, from: &HalfStepTrajectory, to: &HalfStepTrajectory) -> f64 {
    let end = &from.samples.last().expect("samples").q;
    let next = mirror_relabel(model, end);
    let start = &to.samples[0].q;
    (joint::STANCE_ANKLE_PITCH..=joint::SWING_ANKLE_PITCH)
        .map(|id| (next[id - 1] - start[id - 1]).abs())
        .fold(0.0, f64::max)
}

/// Sagittal angle between the hip-to-ankle lines of the two legs.
pub fn inter_leg_angle(model: &MechanismModel, q: &[f64]) -> f64 {
    let poses = forward_kinematics(model, q);
    let stance_hip = poses[joint::idx(joint::STANCE_HIP_PITCH)].translation;
    let stance_ankle = poses[joint::idx(joint::STANCE_ANKLE_PITCH)].translation;
    let swing_hip = poses[joint::idx(joint::SWING_HIP_PITCH)].translation;
    let swing_ankle = poses[joint::idx(joint::SWING_ANKLE_PITCH)].translation;
    let dir = |a: Vector3<f64>, b: Vector3<f64>| {
        let d = a - b;
        d.x.atan2(-d.z)
    };
    (dir(swing_ankle, swing_hip) - dir(stance_ankle, stance_hip)).abs()
}

/// Rewrites a configuration so the swing leg becomes the stance leg, seen
/// in the y-mirrored frame of the next half-step.
pub fn mirror_relabel(model: &MechanismModel, q: &[f64]) -> Vec<f64> {
    // (source, destination, chain reversed)
    const MAP: [(usize, usize, bool); 20] = [
        (1, 1, false),
        (2, 2, false),
        (14, 3, true),
        (13, 4, true),
        (12, 5, true),
        (11, 6, true),
        (10, 7, true),
        (9, 8, true),
        (8, 9, true),
        (7, 10, true),
        (6, 11, true),
        (5, 12, true),
        (4, 13, true),
        (3, 14, true),
        (15, 15, false),
        (16, 16, false),
        (19, 17, false),
        (20, 18, false),
        (17, 19, false),
        (18, 20, false),
    ];
    let mirror = |v: Vector3<f64>| Vector3::new(v.x, -v.y, v.z);
    let mut out = vec![0.0; q.len()];
    for (src, dst, reversed) in MAP {
        // M R_a(t) M = R_{Ma}(-t) for the reflection M; reversal inverts.
        let align = model.joint(dst).axis.dot(&mirror(model.joint(src).axis));
        let sign = if reversed { align } else { -align };
        out[dst - 1] = sign * q[src - 1];
    }
    out
}

/// Synthesizes the nominal gait: parametric legs, then semi-inverse trunk.
pub fn synthesize_nominal(
    model: &MechanismModel,
    params: &GaitParameters,
    trunk: &TrunkConfig,
) -> Result<NominalGait> {
    let legs = synthesize_leg_trajectories(model, params)?;
    let right = semi_inverse_trunk(model, &legs, params.zmp_target, trunk)?;
    let left = HalfStepTrajectory {
        stance_side: Side::Left,
        ..right.clone()
    };
    Ok(NominalGait {
        right_support: right,
        left_support: left,
        params: params.clone(),
    })
}
