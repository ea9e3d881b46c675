//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::sync::OnceLock;

use gaitmod_core::gait::{synthesize_nominal, GaitParameters, NominalGait, TrunkConfig};
use gaitmod_core::model::{
    build_reference_mechanism, Configuration, FootGeometry, JointKind, JointSpec, LinkParams,
    MechanismModel, MODEL_SCHEMA_VERSION,
};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{rngs::StdRng, Rng};

pub fn reference() -> &'static MechanismModel {
    static MODEL: OnceLock<MechanismModel> = OnceLock::new();
    MODEL.get_or_init(build_reference_mechanism)
}

/// Nominal gait with default parameters, synthesized once per test binary.
pub fn nominal() -> &'static NominalGait {
    static GAIT: OnceLock<NominalGait> = OnceLock::new();
    GAIT.get_or_init(|| {
        synthesize_nominal(reference(), &GaitParameters::default(), &TrunkConfig::default())
            .expect("nominal gait")
    })
}

pub fn random_configuration(rng: &mut StdRng, dof: usize, q_span: f64) -> Configuration {
    let mut v = |s: f64| (0..dof).map(|_| rng.gen_range(-s..s)).collect::<Vec<_>>();
    Configuration {
        q: v(q_span),
        qd: v(2.0),
        qdd: v(5.0),
    }
}

fn inertia(xx: f64, yy: f64, zz: f64, xy: f64) -> Matrix3<f64> {
    Matrix3::new(xx, xy, 0.0, xy, yy, 0.0, 0.0, 0.0, zz)
}

/// Three-joint spatial chain rooted at the ground, with off-axis centres of
/// mass and non-diagonal inertias.
pub fn three_link_chain() -> MechanismModel {
    let joint = |id: usize, axis: Vector3<f64>, origin: [f64; 3]| JointSpec {
        id,
        name: format!("j{id}"),
        axis: axis.normalize(),
        parent: if id == 1 { None } else { Some(id - 1) },
        origin: Vector3::from(origin),
        powered: true,
        kind: JointKind::Real,
    };
    let link = |mass: f64, com: [f64; 3], i: Matrix3<f64>| LinkParams {
        mass,
        com: Vector3::from(com),
        inertia: i,
        length: 0.4,
        fictitious: false,
    };
    MechanismModel {
        schema_version: MODEL_SCHEMA_VERSION.to_string(),
        joints: vec![
            joint(1, Vector3::new(0.0, 1.0, 0.0), [0.0, 0.0, 0.1]),
            joint(2, Vector3::new(1.0, 0.0, 0.2), [0.02, 0.0, 0.4]),
            joint(3, Vector3::new(0.0, 0.3, 1.0), [0.0, 0.05, 0.35]),
        ],
        links: vec![
            link(3.0, [0.01, 0.0, 0.2], inertia(0.05, 0.04, 0.01, 0.002)),
            link(2.0, [0.0, 0.02, 0.18], inertia(0.03, 0.02, 0.008, -0.001)),
            link(1.5, [0.05, 0.0, 0.1], inertia(0.01, 0.015, 0.006, 0.0015)),
        ],
        foot: FootGeometry {
            length_x: 0.25,
            width_y: 0.1,
            ankle_offset: Vector3::zeros(),
        },
        gravity: 9.81,
    }
}

fn rodrigues(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let k = axis.cross_matrix();
    Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
}

/// Link rotations and centre-of-mass positions by direct composition.
pub fn naive_link_frames(model: &MechanismModel, q: &[f64]) -> Vec<(Matrix3<f64>, Vector3<f64>)> {
    let mut frames: Vec<(Matrix3<f64>, Vector3<f64>)> = Vec::new();
    for (k, j) in model.joints.iter().enumerate() {
        let (rp, op) = match j.parent {
            Some(p) => frames[p - 1],
            None => (Matrix3::identity(), Vector3::zeros()),
        };
        let o = op + rp * j.origin;
        frames.push((rp * rodrigues(&j.axis, q[k]), o));
    }
    frames
}

fn com_and_rot(model: &MechanismModel, q: &[f64]) -> Vec<(Matrix3<f64>, Vector3<f64>)> {
    naive_link_frames(model, q)
        .into_iter()
        .zip(&model.links)
        .map(|((r, o), l)| (r, o + r * l.com))
        .collect()
}

/// Potential energy of the chain.
pub fn potential(model: &MechanismModel, q: &[f64]) -> f64 {
    com_and_rot(model, q)
        .iter()
        .zip(&model.links)
        .map(|((_, c), l)| l.mass * model.gravity * c.z)
        .sum()
}

/// Joint-space mass matrix from finite-difference Jacobians.
pub fn mass_matrix(model: &MechanismModel, q: &[f64]) -> DMatrix<f64> {
    let n = q.len();
    let h = 1e-6;
    let base = com_and_rot(model, q);
    let mut jv = vec![DMatrix::<f64>::zeros(3, n); n];
    let mut jw = vec![DMatrix::<f64>::zeros(3, n); n];
    for j in 0..n {
        let mut qp = q.to_vec();
        let mut qm = q.to_vec();
        qp[j] += h;
        qm[j] -= h;
        let (fp, fm) = (com_and_rot(model, &qp), com_and_rot(model, &qm));
        for k in 0..n {
            let dv = (fp[k].1 - fm[k].1) / (2.0 * h);
            let dr = (fp[k].0 - fm[k].0) / (2.0 * h);
            let w = dr * base[k].0.transpose();
            let dw = Vector3::new(w[(2, 1)] - w[(1, 2)], w[(0, 2)] - w[(2, 0)], w[(1, 0)] - w[(0, 1)]) * 0.5;
            for r in 0..3 {
                jv[k][(r, j)] = dv[r];
                jw[k][(r, j)] = dw[r];
            }
        }
    }
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        let r = base[k].0;
        let iw = DMatrix::from_iterator(3, 3, (r * model.links[k].inertia * r.transpose()).iter().copied());
        m += jv[k].transpose() * &jv[k] * model.links[k].mass + jw[k].transpose() * iw * &jw[k];
    }
    m
}

/// Euler-Lagrange torques: M qdd + (dM/dt) qd - 1/2 d(qd' M qd)/dq + dV/dq.
pub fn lagrangian_torques(model: &MechanismModel, cfg: &Configuration) -> Vec<f64> {
    let n = cfg.q.len();
    let h = 1e-4;
    let qd = DVector::from_column_slice(&cfg.qd);
    let qdd = DVector::from_column_slice(&cfg.qdd);
    let m = mass_matrix(model, &cfg.q);
    let mut mdot = DMatrix::zeros(n, n);
    let mut dkin = DVector::zeros(n);
    let mut dpot = DVector::zeros(n);
    for k in 0..n {
        let mut qp = cfg.q.clone();
        let mut qm = cfg.q.clone();
        qp[k] += h;
        qm[k] -= h;
        let dm = (mass_matrix(model, &qp) - mass_matrix(model, &qm)) / (2.0 * h);
        mdot += &dm * qd[k];
        dkin[k] = 0.5 * (qd.transpose() * &dm * &qd)[(0, 0)];
        dpot[k] = (potential(model, &qp) - potential(model, &qm)) / (2.0 * h);
    }
    let tau = &m * qdd + mdot * &qd - dkin + dpot;
    tau.iter().copied().collect()
}

/// Largest element-wise error relative to the oracle's largest magnitude.
pub fn relative_error(a: &[f64], oracle: &[f64]) -> f64 {
    let scale = oracle.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
    a.iter().zip(oracle).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}
