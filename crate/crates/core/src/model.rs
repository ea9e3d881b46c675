//! The articulated mechanism: a 20-joint kinematic tree rooted at the
//! stance-foot contact frame.
//!
//! Joint numbering is stance-relative. During a right-support half-step the
//! numbers below name the physical right/left joints directly; a
//! left-support half-step is the y-mirror image of the same local motion.
//!
//! | id | role                     | axis | link after the joint     |
//! |----|--------------------------|------|--------------------------|
//! | 1  | contact roll (unpowered) | +x   | fictitious               |
//! | 2  | contact pitch (unpowered)| +y   | stance foot              |
//! | 3  | stance ankle pitch       | +y   | fictitious               |
//! | 4  | stance ankle roll        | -x   | stance shank             |
//! | 5  | stance knee              | -y   | stance thigh             |
//! | 6  | stance hip pitch         | -y   | fictitious               |
//! | 7  | stance hip yaw           | +z   | fictitious               |
//! | 8  | stance hip roll          | -x   | pelvis                   |
//! | 9  | swing hip roll           | -x   | fictitious               |
//! | 10 | swing hip yaw            | +z   | fictitious               |
//! | 11 | swing hip pitch          | -y   | swing thigh              |
//! | 12 | swing knee               | +y   | swing shank              |
//! | 13 | swing ankle roll         | -x   | fictitious               |
//! | 14 | swing ankle pitch        | +y   | swing foot               |
//! | 15 | waist roll               | -x   | fictitious               |
//! | 16 | waist pitch              | +y   | trunk + head             |
//! | 17 | stance-side shoulder     | +y   | upper arm                |
//! | 18 | stance-side elbow        | +y   | forearm                  |
//! | 19 | swing-side shoulder      | +y   | upper arm                |
//! | 20 | swing-side elbow         | +y   | forearm                  |
//!
//! Sign conventions in the local (right-support) frame: positive 3 and 16
//! lean the body forward, positive 4 and 15 lean it medially (+y, toward
//! the swing side), positive 6 and 11 open the legs, positive 5 and 12 flex
//! the knees.

use std::fmt;
use std::path::Path;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{GaitError, Result};

/// Number of joints in the mechanism.
pub const DOF: usize = 20;

/// Schema version written into model files.
pub const MODEL_SCHEMA_VERSION: &str = "gaitmod-model/1";

/// Named joint ids (1-based, as in the joint table).
pub mod joint {
    pub const CONTACT_ROLL: usize = 1;
    pub const CONTACT_PITCH: usize = 2;
    pub const STANCE_ANKLE_PITCH: usize = 3;
    pub const STANCE_ANKLE_ROLL: usize = 4;
    pub const STANCE_KNEE: usize = 5;
    pub const STANCE_HIP_PITCH: usize = 6;
    pub const STANCE_HIP_YAW: usize = 7;
    pub const STANCE_HIP_ROLL: usize = 8;
    pub const SWING_HIP_ROLL: usize = 9;
    pub const SWING_HIP_YAW: usize = 10;
    pub const SWING_HIP_PITCH: usize = 11;
    pub const SWING_KNEE: usize = 12;
    pub const SWING_ANKLE_ROLL: usize = 13;
    pub const SWING_ANKLE_PITCH: usize = 14;
    pub const WAIST_ROLL: usize = 15;
    pub const WAIST_PITCH: usize = 16;
    pub const STANCE_SHOULDER: usize = 17;
    pub const STANCE_ELBOW: usize = 18;
    pub const SWING_SHOULDER: usize = 19;
    pub const SWING_ELBOW: usize = 20;

    /// Zero-based index into configuration vectors.
    #[inline]
    pub const fn idx(id: usize) -> usize {
        id - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Real,
    Fictitious,
}

/// One single-DOF rotational joint of the tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub id: usize,
    pub name: String,
    /// Rotation axis in the parent link frame.
    pub axis: Vector3<f64>,
    /// Parent joint id; `None` means the ground-contact frame.
    pub parent: Option<usize>,
    /// Joint origin relative to the parent joint origin, parent frame.
    pub origin: Vector3<f64>,
    pub powered: bool,
    pub kind: JointKind,
}

/// Inertial parameters of the link moved by a joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub mass: f64,
    /// Centre of mass in the link frame.
    pub com: Vector3<f64>,
    /// Inertia tensor about the centre of mass, link frame.
    pub inertia: Matrix3<f64>,
    pub length: f64,
    /// Zero-size link between single-DOF joints of a multi-DOF joint.
    #[serde(default)]
    pub fictitious: bool,
}

impl LinkParams {
    pub fn fictitious() -> Self {
        Self {
            mass: 0.0,
            com: Vector3::zeros(),
            inertia: Matrix3::zeros(),
            length: 0.0,
            fictitious: true,
        }
    }

    fn solid(mass: f64, com: [f64; 3], inertia_diag: [f64; 3], length: f64) -> Self {
        Self {
            mass,
            com: Vector3::from(com),
            inertia: Matrix3::from_diagonal(&Vector3::from(inertia_diag)),
            length,
            fictitious: false,
        }
    }
}

/// Sole rectangle of each foot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootGeometry {
    pub length_x: f64,
    pub width_y: f64,
    /// Ankle joint position relative to the sole centre, foot frame.
    pub ankle_offset: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismModel {
    pub schema_version: String,
    pub joints: Vec<JointSpec>,
    /// `links[k]` is the link moved by `joints[k]`.
    pub links: Vec<LinkParams>,
    pub foot: FootGeometry,
    /// Gravitational acceleration magnitude, directed along -z.
    pub gravity: f64,
}

/// Joint-space state: positions, velocities and accelerations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub q: Vec<f64>,
    pub qd: Vec<f64>,
    pub qdd: Vec<f64>,
}

impl Configuration {
    pub fn zeros(n: usize) -> Self {
        Self {
            q: vec![0.0; n],
            qd: vec![0.0; n],
            qdd: vec![0.0; n],
        }
    }

    pub fn at_rest(q: Vec<f64>) -> Self {
        let n = q.len();
        Self {
            q,
            qd: vec![0.0; n],
            qdd: vec![0.0; n],
        }
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q
            .iter()
            .chain(&self.qd)
            .chain(&self.qdd)
            .all(|v| v.is_finite())
    }
}

/// Lengths the leg synthesis needs, read off the joint origins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegGeometry {
    pub ankle_offset: Vector3<f64>,
    pub shank: f64,
    pub thigh: f64,
    pub hip_spacing: f64,
}

impl LegGeometry {
    pub fn reach(&self) -> f64 {
        self.shank + self.thigh
    }
}

/// Total mass of the reference mechanism, kg.
pub const REFERENCE_TOTAL_MASS: f64 = 70.0;

impl MechanismModel {
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    pub fn weight(&self) -> f64 {
        self.total_mass() * self.gravity
    }

    pub fn joint(&self, id: usize) -> &JointSpec {
        &self.joints[id - 1]
    }

    pub fn link(&self, id: usize) -> &LinkParams {
        &self.links[id - 1]
    }

    pub fn leg_geometry(&self) -> LegGeometry {
        LegGeometry {
            ankle_offset: self.joint(joint::STANCE_ANKLE_PITCH).origin,
            shank: self.joint(joint::STANCE_KNEE).origin.norm(),
            thigh: self.joint(joint::STANCE_HIP_PITCH).origin.norm(),
            hip_spacing: self.joint(joint::SWING_HIP_ROLL).origin.y,
        }
    }

    /// Copy of the model with every link mass (and inertia) multiplied by `s`.
    pub fn with_mass_scale(&self, s: f64) -> Self {
        let mut m = self.clone();
        for link in &mut m.links {
            link.mass *= s;
            link.inertia *= s;
        }
        m
    }

    pub fn with_gravity(&self, g: f64) -> Self {
        let mut m = self.clone();
        m.gravity = g;
        m
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.schema_version != MODEL_SCHEMA_VERSION {
            return Err(GaitError::InvalidModel(format!(
                "unsupported schema_version {:?} (expected {MODEL_SCHEMA_VERSION:?})",
                model.schema_version
            )));
        }
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

fn spec(
    id: usize,
    name: &str,
    axis: [f64; 3],
    parent: Option<usize>,
    origin: [f64; 3],
    kind: JointKind,
) -> JointSpec {
    JointSpec {
        id,
        name: name.to_string(),
        axis: Vector3::from(axis),
        parent,
        origin: Vector3::from(origin),
        powered: id > 2,
        kind,
    }
}

/// Desk-scale anthropomorphic stand-in: 70 kg, 1.70 m, 0.25 m x 0.10 m feet.
///
/// At `q = 0` the mechanism stands straight with both feet flat, legs 0.18 m
/// apart. Heights (m): ankle 0.08, knee 0.50, hip 0.92, waist 1.02, shoulder
/// 1.47, top of head 1.70. The parameter set is fixed; changing it is a new
/// model version.
pub fn build_reference_mechanism() -> MechanismModel {
    use JointKind::{Fictitious as F, Real as R};
    // Only the contact joints are fictitious joints; fictitious links are
    // flagged on the link parameters.
    const X: [f64; 3] = [1.0, 0.0, 0.0];
    const NX: [f64; 3] = [-1.0, 0.0, 0.0];
    const Y: [f64; 3] = [0.0, 1.0, 0.0];
    const NY: [f64; 3] = [0.0, -1.0, 0.0];
    const Z: [f64; 3] = [0.0, 0.0, 1.0];
    const O: [f64; 3] = [0.0, 0.0, 0.0];

    let ankle = [-0.03, 0.0, 0.08];
    let joints = vec![
        spec(1, "contact_roll", X, None, O, F),
        spec(2, "contact_pitch", Y, Some(1), O, F),
        spec(3, "stance_ankle_pitch", Y, Some(2), ankle, R),
        spec(4, "stance_ankle_roll", NX, Some(3), O, R),
        spec(5, "stance_knee", NY, Some(4), [0.0, 0.0, 0.42], R),
        spec(6, "stance_hip_pitch", NY, Some(5), [0.0, 0.0, 0.42], R),
        spec(7, "stance_hip_yaw", Z, Some(6), O, R),
        spec(8, "stance_hip_roll", NX, Some(7), O, R),
        spec(9, "swing_hip_roll", NX, Some(8), [0.0, 0.18, 0.0], R),
        spec(10, "swing_hip_yaw", Z, Some(9), O, R),
        spec(11, "swing_hip_pitch", NY, Some(10), O, R),
        spec(12, "swing_knee", Y, Some(11), [0.0, 0.0, -0.42], R),
        spec(13, "swing_ankle_roll", NX, Some(12), [0.0, 0.0, -0.42], R),
        spec(14, "swing_ankle_pitch", Y, Some(13), O, R),
        spec(15, "waist_roll", NX, Some(8), [0.0, 0.09, 0.10], R),
        spec(16, "waist_pitch", Y, Some(15), O, R),
        spec(17, "stance_shoulder", Y, Some(16), [0.0, -0.20, 0.45], R),
        spec(18, "stance_elbow", Y, Some(17), [0.0, 0.0, -0.30], R),
        spec(19, "swing_shoulder", Y, Some(16), [0.0, 0.20, 0.45], R),
        spec(20, "swing_elbow", Y, Some(19), [0.0, 0.0, -0.30], R),
    ];

    let foot = |com: [f64; 3]| LinkParams::solid(1.1, com, [0.001366, 0.006178, 0.006646], 0.25);
    let shank = |z: f64| LinkParams::solid(3.3, [0.0, 0.0, z], [0.05018, 0.05018, 0.00334], 0.42);
    let thigh = |z: f64| LinkParams::solid(7.0, [0.0, 0.0, z], [0.1115, 0.1115, 0.01715], 0.42);
    let upper_arm = LinkParams::solid(2.0, [0.0, 0.0, -0.13], [0.0158, 0.0158, 0.0016], 0.30);
    let forearm = LinkParams::solid(1.6, [0.0, 0.0, -0.14], [0.01264, 0.01264, 0.00128], 0.30);

    let links = vec![
        LinkParams::fictitious(),
        foot([0.0, 0.0, 0.035]),
        LinkParams::fictitious(),
        shank(0.24),
        thigh(0.24),
        LinkParams::fictitious(),
        LinkParams::fictitious(),
        LinkParams::solid(10.0, [0.0, 0.09, 0.05], [0.09375, 0.03075, 0.087], 0.18),
        LinkParams::fictitious(),
        LinkParams::fictitious(),
        thigh(-0.18),
        shank(-0.18),
        LinkParams::fictitious(),
        foot([0.03, 0.0, -0.045]),
        LinkParams::fictitious(),
        LinkParams::solid(30.0, [0.0, 0.0, 0.30], [1.462, 1.256, 0.406], 0.68),
        upper_arm.clone(),
        forearm.clone(),
        upper_arm,
        forearm,
    ];

    MechanismModel {
        schema_version: MODEL_SCHEMA_VERSION.to_string(),
        joints,
        links,
        foot: FootGeometry {
            length_x: 0.25,
            width_y: 0.10,
            ankle_offset: Vector3::from(ankle),
        },
        gravity: 9.81,
    }
}

/// One broken model invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Joint (or link) id the rule concerns; `None` for whole-model rules.
    pub id: Option<usize>,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.id {
            Some(id) => write!(f, "joint/link {id}: {}", self.rule),
            None => write!(f, "model: {}", self.rule),
        }
    }
}

/// Checks every structural and inertial invariant of the model; an empty
/// list means the model is valid.
pub fn validate_model(model: &MechanismModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |id: Option<usize>, rule: String| out.push(Violation { id, rule });

    if model.joints.len() != DOF {
        push(None, format!("expected {DOF} joints, found {}", model.joints.len()));
    }
    if model.links.len() != model.joints.len() {
        push(
            None,
            format!("{} links for {} joints", model.links.len(), model.joints.len()),
        );
    }
    if !(model.gravity.is_finite() && model.gravity >= 0.0) {
        push(None, format!("gravity {} must be finite and non-negative", model.gravity));
    }
    let foot = &model.foot;
    if !(foot.length_x > 0.0 && foot.width_y > 0.0) {
        push(None, "foot rectangle must have positive size".into());
    }

    for (k, j) in model.joints.iter().enumerate() {
        let id = k + 1;
        if j.id != id {
            push(Some(id), format!("id {} out of order", j.id));
        }
        let norm = j.axis.norm();
        if (norm - 1.0).abs() > 1e-12 {
            push(Some(id), format!("axis norm {norm} is not 1"));
        }
        let should_power = id > 2;
        if j.powered != should_power {
            push(
                Some(id),
                if should_power {
                    "joint must be powered".into()
                } else {
                    "contact joints 1 and 2 must be unpowered".into()
                },
            );
        }
        match j.parent {
            None if id != 1 => push(Some(id), "only joint 1 may attach to the ground".into()),
            Some(p) if p == 0 || p >= id => {
                push(Some(id), format!("parent {p} does not precede the joint (cycle or bad id)"))
            }
            Some(p) if model.links.get(p - 1).is_some_and(|l| l.fictitious)
                && j.origin.norm() != 0.0 =>
            {
                push(Some(id), format!("offset from fictitious link {p} must be zero"))
            }
            _ => {}
        }
        if !j.origin.iter().all(|v| v.is_finite()) {
            push(Some(id), "origin must be finite".into());
        }
    }

    for (k, l) in model.links.iter().enumerate() {
        let id = k + 1;
        if !(l.mass >= 0.0) {
            push(Some(id), format!("link mass {} is negative", l.mass));
        }
        let sym = (l.inertia - l.inertia.transpose()).abs().max();
        if sym > 1e-12 {
            push(Some(id), "inertia tensor is not symmetric".into());
        } else {
            let min_eig = SymmetricEigen::new(l.inertia).eigenvalues.min();
            if min_eig < -1e-12 {
                push(Some(id), format!("inertia not positive semidefinite (eigenvalue {min_eig:.3e})"));
            }
        }
        if l.fictitious && (l.mass != 0.0 || l.length != 0.0 || l.inertia.abs().max() != 0.0) {
            push(Some(id), "fictitious link must have zero mass, length and inertia".into());
        }
    }

    if model.joints.len() == DOF {
        let chained = |child: usize, parent: usize| model.joint(child).parent == Some(parent);
        let fict = |id: usize| model.link(id).fictitious;
        if !(chained(4, 3) && fict(3)) {
            push(Some(3), "ankle grouping 3-4 missing".into());
        }
        if !(chained(7, 6) && chained(8, 7) && fict(6) && fict(7)) {
            push(Some(6), "hip grouping 6-7-8 missing".into());
        }
        if !(chained(16, 15) && fict(15)) {
            push(Some(15), "waist grouping 15-16 missing".into());
        }
    }

    if !(model.total_mass() > 0.0) {
        push(None, "total mass must be positive".into());
    }
    out
}
