//! Parametric leg motion: cycloidal swing foot, pendulum-shaped centre of
//! mass, and closed-form leg inverse kinematics.

use nalgebra::{Matrix3, Vector2, Vector3};

use super::{GaitParameters, HalfStepTrajectory};
use crate::error::{GaitError, Result};
use crate::kinematics::{center_of_mass, Side};
use crate::model::{joint, Configuration, LegGeometry, MechanismModel};

/// Leg angles in foot-to-pelvis order: ankle pitch, ankle roll, knee,
/// hip pitch, hip yaw, hip roll (stance-leg axis conventions).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegAngles {
    pub ankle_pitch: f64,
    pub ankle_roll: f64,
    pub knee: f64,
    pub hip_pitch: f64,
    pub hip_yaw: f64,
    pub hip_roll: f64,
}

fn ry(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rx(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Solves a leg chain whose ankle sits at `ankle` with foot orientation
/// `foot_rot`, and whose hip joint sits at `hip` with pelvis orientation
/// `pelvis_rot`.
pub fn leg_ik(
    ankle: &Vector3<f64>,
    hip: &Vector3<f64>,
    foot_rot: &Matrix3<f64>,
    pelvis_rot: &Matrix3<f64>,
    geom: &LegGeometry,
    leg: &'static str,
) -> Result<LegAngles> {
    let (l1, l2) = (geom.shank, geom.thigh);
    let d = foot_rot.transpose() * (hip - ankle);
    let dist = d.norm();
    if dist >= l1 + l2 || dist <= (l1 - l2).abs() {
        return Err(GaitError::Unreachable {
            leg,
            required: dist,
            available: l1 + l2,
        });
    }
    let cos_k = (dist * dist - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    let knee = cos_k.clamp(-1.0, 1.0).acos();
    // Direction of the ankle-to-hip vector in the rolled ankle frame.
    let alpha = (-l2 * knee.sin()).atan2(l1 + l2 * knee.cos());
    let (sa, ca) = alpha.sin_cos();
    let dh = d / dist;
    let ankle_roll = (dh.y / ca).clamp(-1.0, 1.0).asin();
    let ankle_pitch = dh.x.atan2(dh.z) - sa.atan2(ca * ankle_roll.cos());

    // Remaining hip rotation R_y(-h) R_z(y) R_x(-r).
    let lower = ry(ankle_pitch) * rx(-ankle_roll) * ry(-knee);
    let m = lower.transpose() * foot_rot.transpose() * pelvis_rot;
    let theta1 = (-m[(2, 0)]).atan2(m[(0, 0)]);
    let theta2 = m[(1, 0)].atan2((m[(1, 1)].powi(2) + m[(1, 2)].powi(2)).sqrt());
    let theta3 = (-m[(1, 2)]).atan2(m[(1, 1)]);
    Ok(LegAngles {
        ankle_pitch,
        ankle_roll,
        knee,
        hip_pitch: -theta1,
        hip_yaw: theta2,
        hip_roll: -theta3,
    })
}

impl LegAngles {
    pub fn write_stance(&self, q: &mut [f64]) {
        q[joint::idx(joint::STANCE_ANKLE_PITCH)] = self.ankle_pitch;
        q[joint::idx(joint::STANCE_ANKLE_ROLL)] = self.ankle_roll;
        q[joint::idx(joint::STANCE_KNEE)] = self.knee;
        q[joint::idx(joint::STANCE_HIP_PITCH)] = self.hip_pitch;
        q[joint::idx(joint::STANCE_HIP_YAW)] = self.hip_yaw;
        q[joint::idx(joint::STANCE_HIP_ROLL)] = self.hip_roll;
    }

    /// The swing chain runs pelvis to foot, so each relative rotation is
    /// inverted; the knee axis is flipped as well.
    pub fn write_swing(&self, q: &mut [f64]) {
        q[joint::idx(joint::SWING_HIP_ROLL)] = -self.hip_roll;
        q[joint::idx(joint::SWING_HIP_YAW)] = -self.hip_yaw;
        q[joint::idx(joint::SWING_HIP_PITCH)] = -self.hip_pitch;
        q[joint::idx(joint::SWING_KNEE)] = self.knee;
        q[joint::idx(joint::SWING_ANKLE_ROLL)] = -self.ankle_roll;
        q[joint::idx(joint::SWING_ANKLE_PITCH)] = -self.ankle_pitch;
    }
}

/// Swing sole-centre position at time `t` of a half-step.
pub fn swing_sole_target(params: &GaitParameters, hip_spacing: f64, t: f64) -> Vector3<f64> {
    let theta = 2.0 * std::f64::consts::PI * t / params.step_duration;
    let l = params.step_length;
    Vector3::new(
        -0.5 * l + l * (theta - theta.sin()) / (2.0 * std::f64::consts::PI),
        hip_spacing,
        params.foot_clearance * 0.5 * (1.0 - theta.cos()),
    )
}

/// Leg joint angles for a pelvis centre at `pelvis` (upright, zero yaw)
/// and a swing sole centre at `swing_sole` (flat, zero yaw). Trunk and
/// arm joints are zero.
pub fn legs_configuration(
    model: &MechanismModel,
    pelvis: &Vector3<f64>,
    swing_sole: &Vector3<f64>,
) -> Result<Vec<f64>> {
    let geom = model.leg_geometry();
    let id = Matrix3::identity();
    let half = Vector3::new(0.0, 0.5 * geom.hip_spacing, 0.0);
    let stance = leg_ik(&geom.ankle_offset, &(pelvis - half), &id, &id, &geom, "stance")?;
    let swing = leg_ik(
        &(swing_sole + geom.ankle_offset),
        &(pelvis + half),
        &id,
        &id,
        &geom,
        "swing",
    )?;
    let mut q = vec![0.0; model.dof()];
    stance.write_stance(&mut q);
    swing.write_swing(&mut q);
    Ok(q)
}

/// Centre-of-mass plan of a linear inverted pendulum whose ZMP sits on the
/// target, pinned to given COM values at both ends of the half-step.
#[derive(Debug, Clone, Copy)]
struct PendulumPlan {
    target: Vector2<f64>,
    sinh_coef: Vector2<f64>,
    cosh_coef: Vector2<f64>,
    time_constant: f64,
    half: f64,
}

impl PendulumPlan {
    fn new(target: Vector2<f64>, start: Vector2<f64>, end: Vector2<f64>, height: f64, g: f64, duration: f64) -> Self {
        let time_constant = (height / g).sqrt();
        let half = 0.5 * duration;
        let u = half / time_constant;
        Self {
            target,
            sinh_coef: (end - start) / (2.0 * u.sinh()),
            cosh_coef: ((start + end) * 0.5 - target) / u.cosh(),
            time_constant,
            half,
        }
    }

    fn at(&self, t: f64) -> Vector2<f64> {
        let u = (t - self.half) / self.time_constant;
        self.target + self.sinh_coef * u.sinh() + self.cosh_coef * u.cosh()
    }
}

/// Pelvis placements that make the upright-trunk COM follow the pendulum
/// plan, with fixed pelvis positions at the two ends.
struct PelvisPlanner<'a> {
    model: &'a MechanismModel,
    params: &'a GaitParameters,
    plan: PendulumPlan,
    spacing: f64,
}

const PELVIS_FIXED_POINT_ITERS: usize = 200;

impl<'a> PelvisPlanner<'a> {
    fn new(model: &'a MechanismModel, params: &'a GaitParameters) -> Result<Self> {
        let spacing = model.leg_geometry().hip_spacing;
        let (p0, p1) = boundary_pelvis(params, spacing);
        let c0 = center_of_mass(model, &legs_configuration(model, &p0, &swing_sole_target(params, spacing, 0.0))?);
        let c1 = center_of_mass(
            model,
            &legs_configuration(model, &p1, &swing_sole_target(params, spacing, params.step_duration))?,
        );
        let g = if model.gravity > 0.0 { model.gravity } else { 9.81 };
        let plan = PendulumPlan::new(
            params.zmp_target,
            c0.xy(),
            c1.xy(),
            0.5 * (c0.z + c1.z),
            g,
            params.step_duration,
        );
        Ok(Self {
            model,
            params,
            plan,
            spacing,
        })
    }

    fn configuration(&self, t: f64) -> Result<Vec<f64>> {
        let swing = swing_sole_target(self.params, self.spacing, t);
        let want = self.plan.at(t);
        let mut pelvis = Vector3::new(want.x, want.y, self.params.hip_height);
        let mut q = legs_configuration(self.model, &pelvis, &swing)?;
        for _ in 0..PELVIS_FIXED_POINT_ITERS {
            let err = want - center_of_mass(self.model, &q).xy();
            pelvis.x += err.x;
            pelvis.y += err.y;
            q = legs_configuration(self.model, &pelvis, &swing)?;
            if err.norm() < 1e-15 {
                break;
            }
        }
        Ok(q)
    }
}

/// Pelvis centre at the start and end of a half-step, stance sole at the origin.
pub fn boundary_pelvis(params: &GaitParameters, hip_spacing: f64) -> (Vector3<f64>, Vector3<f64>) {
    let qtr = 0.25 * params.step_length;
    let y = 0.5 * hip_spacing;
    (
        Vector3::new(-qtr, y, params.hip_height),
        Vector3::new(qtr, y, params.hip_height),
    )
}

/// Samples leg joint trajectories for a right-support half-step; trunk and
/// arm joints stay at zero.
pub fn synthesize_leg_trajectories(
    model: &MechanismModel,
    params: &GaitParameters,
) -> Result<HalfStepTrajectory> {
    params.validate()?;
    let planner = PelvisPlanner::new(model, params)?;
    let n = params.n_int;
    let duration = params.step_duration;
    let dt = duration / n as f64;
    let positions = (0..=n)
        .map(|i| planner.configuration(i as f64 * dt))
        .collect::<Result<Vec<_>>>()?;
    // Interior derivatives are differences of the samples themselves, so the
    // sampled motion is self-consistent; the two ends use a fine stencil.
    let h = 2e-4 * duration;
    let mut samples = Vec::with_capacity(n + 1);
    for (i, q) in positions.iter().enumerate() {
        let (qp, qm, step) = if i == 0 || i == n {
            let t = i as f64 * dt;
            (planner.configuration(t + h)?, planner.configuration(t - h)?, h)
        } else {
            (positions[i + 1].clone(), positions[i - 1].clone(), dt)
        };
        let qd = qp.iter().zip(&qm).map(|(a, b)| (a - b) / (2.0 * step)).collect();
        let qdd = qp
            .iter()
            .zip(&qm)
            .zip(q)
            .map(|((a, b), c)| (a - 2.0 * c + b) / (step * step))
            .collect();
        samples.push(Configuration { q: q.clone(), qd, qdd });
    }
    Ok(HalfStepTrajectory {
        samples,
        dt,
        duration,
        stance_side: Side::Right,
        n_int: n,
    })
}
