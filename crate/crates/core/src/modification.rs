//! On-line modifications of the nominal half-step: turning, time scaling,
//! step extension and static compensation offsets.

use std::collections::BTreeMap;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{GaitError, Result};
use crate::gait::{
    assemble_walk, inter_leg_angle, HalfStepTrajectory, NominalGait, StancePose, WalkSegment,
    CYCLIC_TOLERANCE,
};
use crate::kinematics::Side;
use crate::model::{joint, MechanismModel};

/// Joints that may carry a compensation offset.
pub const COMPENSATION_JOINTS: [usize; 4] = [
    joint::STANCE_ANKLE_PITCH,
    joint::STANCE_ANKLE_ROLL,
    joint::WAIST_ROLL,
    joint::WAIST_PITCH,
];

pub const MAX_COMPENSATION: f64 = 40.0 * std::f64::consts::PI / 180.0;

pub const MAX_SCALE: f64 = 4.0;

/// Upper bound on the extended inter-leg angle, rad.
pub const MAX_INTER_LEG_ANGLE: f64 = 70.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnPhase {
    /// The landing foot turns by alpha relative to the stance foot.
    Deflect,
    /// The hip-yaw offset is removed so the feet end parallel.
    Correct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnSpec {
    /// Heading change per deflect/correct cycle, rad (positive turns left).
    pub alpha: f64,
    pub phase: TurnPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSpec {
    pub c: f64,
}

impl ScaleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.c > 0.0 && self.c <= MAX_SCALE {
            Ok(())
        } else {
            Err(GaitError::InvalidModification(format!(
                "time scale c = {} outside (0, {MAX_SCALE}]",
                self.c
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendSpec {
    /// Added maximal inter-leg angle, rad.
    pub beta_ext: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CompensationSpec {
    /// Joint id to constant offset, rad.
    pub offsets: BTreeMap<usize, f64>,
}

impl CompensationSpec {
    pub fn new(offsets: impl IntoIterator<Item = (usize, f64)>) -> Self {
        Self {
            offsets: offsets.into_iter().collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (&id, &off) in &self.offsets {
            if !COMPENSATION_JOINTS.contains(&id) {
                return Err(GaitError::DisallowedJoint(id));
            }
            if !(off.abs() <= MAX_COMPENSATION) {
                return Err(GaitError::InvalidModification(format!(
                    "offset {:.3} deg on joint {id} exceeds 40 deg",
                    off.to_degrees()
                )));
            }
        }
        Ok(())
    }

    /// Largest |offset|, rad.
    pub fn max_abs(&self) -> f64 {
        self.offsets.values().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Modifications applied to every half-step of a walk. Turning alternates
/// deflect (even half-steps) and correct (odd half-steps) phases.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModificationStack {
    /// Heading change per cycle, rad.
    pub turn: Option<f64>,
    pub scale: Option<ScaleSpec>,
    pub extend: Option<ExtendSpec>,
    pub compensation: Option<CompensationSpec>,
}

impl ModificationStack {
    pub fn validate(&self) -> Result<()> {
        if let Some(alpha) = self.turn {
            if !alpha.is_finite() {
                return Err(GaitError::InvalidModification("turn angle must be finite".into()));
            }
        }
        if let Some(s) = &self.scale {
            s.validate()?;
        }
        if let Some(e) = &self.extend {
            if !e.beta_ext.is_finite() {
                return Err(GaitError::InvalidModification("beta_ext must be finite".into()));
            }
        }
        if let Some(c) = &self.compensation {
            c.validate()?;
        }
        Ok(())
    }
}

/// Adds the position ramp `offset(i)` and its constant rate to joint `id`.
fn add_ramp(traj: &mut HalfStepTrajectory, id: usize, offset: impl Fn(f64) -> f64, rate: f64) {
    let j = joint::idx(id);
    for (i, s) in traj.samples.iter_mut().enumerate() {
        s.q[j] += offset(i as f64);
        s.qd[j] += rate;
    }
}

/// Ramps the two hip yaw joints so the landing foot turns by alpha
/// (deflect), or removes that offset again (correct).
pub fn apply_turning(traj: &HalfStepTrajectory, spec: &TurnSpec) -> HalfStepTrajectory {
    if spec.alpha == 0.0 {
        return traj.clone();
    }
    let mut out = traj.clone();
    let n = traj.n_int as f64;
    // Local frames of left support are mirrored, so a left turn flips sign.
    let a = traj.stance_side.mirror_sign() * spec.alpha;
    let half_increment = 0.5 * a / n;
    let rate = 0.5 * a / traj.duration;
    for id in [joint::STANCE_HIP_YAW, joint::SWING_HIP_YAW] {
        match spec.phase {
            TurnPhase::Deflect => add_ramp(&mut out, id, |i| i * half_increment, rate),
            TurnPhase::Correct => add_ramp(&mut out, id, |i| -(n - i) * half_increment, rate),
        }
    }
    out
}

/// Replays the half-step `c` times faster: same positions per sample,
/// velocities times c, accelerations times c squared.
pub fn apply_time_scaling(traj: &HalfStepTrajectory, spec: &ScaleSpec) -> Result<HalfStepTrajectory> {
    spec.validate()?;
    if spec.c == 1.0 {
        return Ok(traj.clone());
    }
    let c = spec.c;
    let mut out = traj.clone();
    for s in &mut out.samples {
        s.qd.iter_mut().for_each(|v| *v *= c);
        s.qdd.iter_mut().for_each(|v| *v *= c * c);
    }
    out.duration = traj.duration / c;
    out.dt = out.duration / out.n_int as f64;
    Ok(out)
}

fn pitch_sign(model: &MechanismModel, id: usize) -> f64 {
    model.joint(id).axis.y.signum()
}

/// Opens the legs by up to `beta_ext` (half per leg) over the half-step.
/// The sagittal ankles absorb the change so the pelvis keeps its pitch and
/// the swing foot stays parallel to the ground.
pub fn apply_step_extension(
    model: &MechanismModel,
    traj: &HalfStepTrajectory,
    spec: &ExtendSpec,
) -> Result<HalfStepTrajectory> {
    if spec.beta_ext == 0.0 {
        return Ok(traj.clone());
    }
    let beta_nom = traj
        .samples
        .iter()
        .map(|s| inter_leg_angle(model, &s.q))
        .fold(0.0, f64::max);
    let beta = beta_nom + spec.beta_ext;
    if !(0.0..=MAX_INTER_LEG_ANGLE).contains(&beta) {
        return Err(GaitError::InvalidModification(format!(
            "extended inter-leg angle {:.2} deg outside [0, {:.0}] deg",
            beta.to_degrees(),
            MAX_INTER_LEG_ANGLE.to_degrees()
        )));
    }
    let mut out = traj.clone();
    let half_increment = 0.5 * spec.beta_ext / traj.n_int as f64;
    let rate = 0.5 * spec.beta_ext / traj.duration;
    let pairs = [
        (joint::STANCE_HIP_PITCH, joint::STANCE_ANKLE_PITCH),
        (joint::SWING_HIP_PITCH, joint::SWING_ANKLE_PITCH),
    ];
    for (hip, ankle) in pairs {
        let k = -pitch_sign(model, hip) / pitch_sign(model, ankle);
        add_ramp(&mut out, hip, |i| i * half_increment, rate);
        add_ramp(&mut out, ankle, |i| k * i * half_increment, k * rate);
    }
    Ok(out)
}

/// Adds constant offsets to the named joints' positions.
pub fn apply_compensation(
    traj: &HalfStepTrajectory,
    spec: &CompensationSpec,
) -> Result<HalfStepTrajectory> {
    spec.validate()?;
    let mut out = traj.clone();
    for (&id, &off) in &spec.offsets {
        if off == 0.0 {
            continue;
        }
        let j = joint::idx(id);
        out.samples.iter_mut().for_each(|s| s.q[j] += off);
    }
    Ok(out)
}

/// Applies the stack to one half-step of a walk, in the fixed order
/// extend, turn, scale, compensation.
pub fn modify_half_step(
    model: &MechanismModel,
    traj: &HalfStepTrajectory,
    stack: &ModificationStack,
    index: usize,
) -> Result<HalfStepTrajectory> {
    let mut t = traj.clone();
    if let Some(e) = &stack.extend {
        t = apply_step_extension(model, &t, e)?;
    }
    if let Some(alpha) = stack.turn {
        let phase = if index.is_multiple_of(2) {
            TurnPhase::Deflect
        } else {
            TurnPhase::Correct
        };
        t = apply_turning(&t, &TurnSpec { alpha, phase });
    }
    if let Some(s) = &stack.scale {
        t = apply_time_scaling(&t, s)?;
    }
    if let Some(c) = &stack.compensation {
        t = apply_compensation(&t, c)?;
    }
    Ok(t)
}

/// Modified walk of `n_steps` half-steps, starting on the right foot at
/// the world origin.
pub fn apply_stack(
    model: &MechanismModel,
    gait: &NominalGait,
    stack: &ModificationStack,
    n_steps: usize,
) -> Result<WalkSegment> {
    stack.validate()?;
    let mismatch = gait.cyclic_residual(model);
    if !(mismatch <= CYCLIC_TOLERANCE) {
        return Err(GaitError::NonCyclic { mismatch });
    }
    let trajectories = (0..n_steps)
        .map(|k| {
            let side = if k % 2 == 0 { Side::Right } else { Side::Left };
            modify_half_step(model, gait.half_step(side), stack, k)
        })
        .collect::<Result<Vec<_>>>()?;
    assemble_walk(
        model,
        trajectories,
        StancePose::new(Vector2::zeros(), 0.0, Side::Right),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait::{synthesize_nominal, GaitParameters, TrunkConfig};
    use crate::kinematics::forward_kinematics;
    use crate::model::build_reference_mechanism;

    fn nominal() -> (MechanismModel, NominalGait) {
        let m = build_reference_mechanism();
        let params = GaitParameters {
            n_int: 100,
            ..GaitParameters::default()
        };
        let g = synthesize_nominal(&m, &params, &TrunkConfig::default()).unwrap();
        (m, g)
    }

    #[test]
    fn identity_specs_return_the_input() {
        let (m, g) = nominal();
        let t = &g.right_support;
        let turn = TurnSpec { alpha: 0.0, phase: TurnPhase::Deflect };
        assert_eq!(&apply_turning(t, &turn), t);
        assert_eq!(&apply_time_scaling(t, &ScaleSpec { c: 1.0 }).unwrap(), t);
        assert_eq!(&apply_step_extension(&m, t, &ExtendSpec { beta_ext: 0.0 }).unwrap(), t);
        assert_eq!(&apply_compensation(t, &CompensationSpec::default()).unwrap(), t);
    }

    #[test]
    fn turning_increments_match_the_schedule() {
        let (_, g) = nominal();
        let t = &g.right_support;
        let alpha = 5f64.to_radians();
        let out = apply_turning(t, &TurnSpec { alpha, phase: TurnPhase::Deflect });
        for id in [joint::STANCE_HIP_YAW, joint::SWING_HIP_YAW] {
            let j = joint::idx(id);
            let step = out.samples[1].q[j] - t.samples[1].q[j];
            assert!((step - 0.025f64.to_radians()).abs() < 1e-15);
            let end = out.samples[100].q[j] - t.samples[100].q[j];
            assert!((end - 2.5f64.to_radians()).abs() < 1e-14);
        }
        assert!(out.velocity_consistency_residual() <= 1e-3);
        let corr = apply_turning(&g.left_support, &TurnSpec { alpha, phase: TurnPhase::Correct });
        let j = joint::idx(joint::STANCE_HIP_YAW);
        // Left support is mirrored: the correction starts at +alpha/2 locally.
        assert!((corr.samples[0].q[j] - 2.5f64.to_radians()).abs() < 1e-14);
        assert_eq!(corr.samples[100].q[j], g.left_support.samples[100].q[j]);
    }

    #[test]
    fn time_scaling_follows_the_chain_rule() {
        let (_, g) = nominal();
        let t = &g.right_support;
        let out = apply_time_scaling(t, &ScaleSpec { c: 1.2 }).unwrap();
        assert!((out.duration - t.duration / 1.2).abs() < 1e-15);
        assert_eq!(out.samples.len(), t.samples.len());
        for (a, b) in out.samples.iter().zip(&t.samples) {
            assert_eq!(a.q, b.q);
            for j in 0..20 {
                assert!((a.qd[j] - 1.2 * b.qd[j]).abs() <= 1e-15 * b.qd[j].abs().max(1.0));
                assert!((a.qdd[j] - 1.44 * b.qdd[j]).abs() <= 1e-14 * b.qdd[j].abs().max(1.0));
            }
        }
        assert!(apply_time_scaling(t, &ScaleSpec { c: 0.0 }).is_err());
        assert!(apply_time_scaling(t, &ScaleSpec { c: 4.5 }).is_err());
    }

    #[test]
    fn extension_opens_hips_and_keeps_pelvis_pitch() {
        let (m, g) = nominal();
        let t = &g.right_support;
        let out = apply_step_extension(&m, t, &ExtendSpec { beta_ext: 6f64.to_radians() }).unwrap();
        for id in [joint::STANCE_HIP_PITCH, joint::SWING_HIP_PITCH] {
            let j = joint::idx(id);
            let step = out.samples[1].q[j] - t.samples[1].q[j];
            assert!((step - 0.03f64.to_radians()).abs() < 1e-15);
        }
        // Without the ankle correction the pelvis would tilt by the full
        // hip ramp; the correction is exact only for parallel pitch axes, so
        // the small ankle roll leaves a residual of a few percent.
        let mut drift = 0.0f64;
        for (a, b) in out.samples.iter().zip(&t.samples) {
            let pa = forward_kinematics(&m, &a.q)[joint::idx(joint::STANCE_HIP_ROLL)].rotation;
            let pb = forward_kinematics(&m, &b.q)[joint::idx(joint::STANCE_HIP_ROLL)].rotation;
            drift = drift.max((pa - pb).abs().max());
        }
        assert!(drift < 0.05 * 3f64.to_radians(), "pelvis rotation drift {drift:e}");
        let huge = apply_step_extension(&m, t, &ExtendSpec { beta_ext: 80f64.to_radians() });
        assert!(matches!(huge, Err(GaitError::InvalidModification(_))));
    }

    #[test]
    fn compensation_shifts_positions_only() {
        let (_, g) = nominal();
        let t = &g.right_support;
        let spec = CompensationSpec::new([(3, -0.05), (16, 0.02)]);
        let out = apply_compensation(t, &spec).unwrap();
        for (a, b) in out.samples.iter().zip(&t.samples) {
            assert_eq!(a.q[2], b.q[2] - 0.05);
            assert_eq!(a.q[15], b.q[15] + 0.02);
            assert_eq!(a.qd, b.qd);
            assert_eq!(a.qdd, b.qdd);
        }
        let err = apply_compensation(t, &CompensationSpec::new([(5, 0.01)])).unwrap_err();
        assert!(matches!(err, GaitError::DisallowedJoint(5)));
        assert!(apply_compensation(t, &CompensationSpec::new([(4, 0.8)])).is_err());
    }

    #[test]
    fn empty_stack_matches_the_stitched_nominal() {
        let (m, g) = nominal();
        let a = apply_stack(&m, &g, &ModificationStack::default(), 4).unwrap();
        let b = crate::gait::stitch(&m, &g, 4).unwrap();
        assert_eq!(a, b);
    }
}
