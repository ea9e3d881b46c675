//! Inverse dynamics of the tree with the stance foot as fixed base, the
//! ground-reaction wrench, and the zero-moment point.
//!
//! Torques follow `tau = H(q) qdd + h(q, qd) + G(q)`. The velocity term
//! depends on `q` as well as `qd`.
//!
//! ZMP sign convention: with the reaction wrench `(F, M_O)` taken about the
//! world origin, `x_zmp = -M_O.y / F.z` and `y_zmp = M_O.x / F.z`.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::kinematics::{axis_rotation, FramePose};
use crate::model::{Configuration, MechanismModel};

/// Joint torques; unpowered entries are reported but cannot be actuated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorqueVector {
    pub tau: Vec<f64>,
    pub powered: Vec<bool>,
}

impl TorqueVector {
    pub fn unpowered_ids(&self) -> Vec<usize> {
        self.powered
            .iter()
            .enumerate()
            .filter(|(_, p)| !**p)
            .map(|(k, _)| k + 1)
            .collect()
    }
}

/// Reaction wrench the ground applies to the mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundWrench {
    pub force: Vector3<f64>,
    pub moment_about: Vector2<f64>,
    pub moment: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZmpPoint {
    pub position: Vector2<f64>,
    /// False when the vertical reaction is not positive.
    pub valid: bool,
}

/// Vertical reaction at or below this fraction of the weight marks the
/// ZMP invalid.
pub const ZMP_MIN_FZ_FRACTION: f64 = 1e-9;

struct Rnea {
    tau: Vec<f64>,
    base_force: Vector3<f64>,
    base_moment: Vector3<f64>,
}

fn rnea(model: &MechanismModel, cfg: &Configuration) -> Rnea {
    let n = model.dof();
    let mut pose = Vec::<FramePose>::with_capacity(n);
    let mut axis_w = Vec::with_capacity(n);
    let mut omega = Vec::<Vector3<f64>>::with_capacity(n);
    let mut omega_dot = Vec::<Vector3<f64>>::with_capacity(n);
    let mut acc = Vec::<Vector3<f64>>::with_capacity(n);
    let mut force = Vec::<Vector3<f64>>::with_capacity(n);
    let mut moment = Vec::<Vector3<f64>>::with_capacity(n);

    // Gravity enters as an upward acceleration of the ground frame.
    let ground_acc = Vector3::new(0.0, 0.0, model.gravity);

    for (k, j) in model.joints.iter().enumerate() {
        let (pp, w_p, wd_p, a_p) = match j.parent {
            Some(p) => (pose[p - 1], omega[p - 1], omega_dot[p - 1], acc[p - 1]),
            None => (FramePose::identity(), Vector3::zeros(), Vector3::zeros(), ground_acc),
        };
        let o = pp.transform_point(&j.origin);
        let z = pp.rotation * j.axis;
        let r = pp.rotation * axis_rotation(&j.axis, cfg.q[k]);
        let d = o - pp.translation;

        let w = w_p + z * cfg.qd[k];
        let wd = wd_p + z * cfg.qdd[k] + w_p.cross(&(z * cfg.qd[k]));
        let a = a_p + wd_p.cross(&d) + w_p.cross(&w_p.cross(&d));

        let link = &model.links[k];
        let rc = r * link.com;
        let a_c = a + wd.cross(&rc) + w.cross(&w.cross(&rc));
        let inertia = r * link.inertia * r.transpose();
        let f = a_c * link.mass;
        let nm = inertia * wd + w.cross(&(inertia * w)) + rc.cross(&f);

        pose.push(FramePose { rotation: r, translation: o });
        axis_w.push(z);
        omega.push(w);
        omega_dot.push(wd);
        acc.push(a);
        force.push(f);
        moment.push(nm);
    }

    let mut tau = vec![0.0; n];
    for k in (0..n).rev() {
        tau[k] = axis_w[k].dot(&moment[k]);
        if let Some(p) = model.joints[k].parent {
            let lever = pose[k].translation - pose[p - 1].translation;
            let (fk, nk) = (force[k], moment[k]);
            force[p - 1] += fk;
            moment[p - 1] += nk + lever.cross(&fk);
        }
    }

    // Wrench transmitted from the ground into the root joint, about the world origin.
    let root = pose[0].translation;
    Rnea {
        tau,
        base_force: force[0],
        base_moment: moment[0] + root.cross(&force[0]),
    }
}

pub fn inverse_dynamics(model: &MechanismModel, cfg: &Configuration) -> TorqueVector {
    TorqueVector {
        tau: rnea(model, cfg).tau,
        powered: model.joints.iter().map(|j| j.powered).collect(),
    }
}

pub fn gravity_torques(model: &MechanismModel, q: &[f64]) -> TorqueVector {
    inverse_dynamics(model, &Configuration::at_rest(q.to_vec()))
}

/// Acceleration- and velocity-dependent part `tau - G`.
pub fn motion_torques(model: &MechanismModel, cfg: &Configuration) -> Vec<f64> {
    let full = inverse_dynamics(model, cfg).tau;
    let g = gravity_torques(model, &cfg.q).tau;
    full.iter().zip(&g).map(|(a, b)| a - b).collect()
}

pub fn ground_reaction_wrench(
    model: &MechanismModel,
    cfg: &Configuration,
    about: Vector2<f64>,
) -> GroundWrench {
    let r = rnea(model, cfg);
    let p = Vector3::new(about.x, about.y, 0.0);
    GroundWrench {
        force: r.base_force,
        moment_about: about,
        moment: r.base_moment - p.cross(&r.base_force),
    }
}

/// Closed-form ZMP from the reaction wrench about the origin. Invalid
/// samples report the origin; callers must branch on `valid`.
pub fn zmp(model: &MechanismModel, cfg: &Configuration) -> ZmpPoint {
    let r = rnea(model, cfg);
    zmp_from_wrench(&r.base_force, &r.base_moment, model.weight())
}

pub(crate) fn zmp_from_wrench(force: &Vector3<f64>, moment_o: &Vector3<f64>, weight: f64) -> ZmpPoint {
    let fz = force.z;
    if !(fz > ZMP_MIN_FZ_FRACTION * weight) || !moment_o.iter().all(|v| v.is_finite()) {
        return ZmpPoint {
            position: Vector2::zeros(),
            valid: false,
        };
    }
    ZmpPoint {
        position: Vector2::new(-moment_o.y / fz, moment_o.x / fz),
        valid: true,
    }
}

/// Reaction moment about `about` split into its affine parts, used by the
/// semi-inverse solver. Returns `(F, M_about)`.
pub(crate) fn wrench_about(
    model: &MechanismModel,
    cfg: &Configuration,
    about: Vector2<f64>,
) -> (Vector3<f64>, Vector3<f64>) {
    let w = ground_reaction_wrench(model, cfg, about);
    (w.force, w.moment)
}
