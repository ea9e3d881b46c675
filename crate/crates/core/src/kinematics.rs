//! Forward kinematics, centre of mass, footprints and support polygons.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Unit, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{GaitError, Result};
use crate::model::{joint, MechanismModel};

/// World pose of a joint frame (and of the link it moves).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl FramePose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.translation + self.rotation * p
    }

    pub fn compose(&self, other: &FramePose) -> FramePose {
        FramePose {
            rotation: self.rotation * other.rotation,
            translation: self.transform_point(&other.translation),
        }
    }

    /// Yaw of the frame's x axis projected on the ground, in (-pi, pi].
    pub fn heading(&self) -> f64 {
        wrap_angle(self.rotation[(1, 0)].atan2(self.rotation[(0, 0)]))
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

pub(crate) fn axis_rotation(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Unit::new_unchecked(*axis), angle).into_inner()
}

/// Poses of every joint frame for positions `q`, composed parent to child.
pub fn forward_kinematics(model: &MechanismModel, q: &[f64]) -> Vec<FramePose> {
    let mut poses: Vec<FramePose> = Vec::with_capacity(model.dof());
    for (k, j) in model.joints.iter().enumerate() {
        let parent = match j.parent {
            Some(p) => poses[p - 1],
            None => FramePose::identity(),
        };
        let translation = parent.transform_point(&j.origin);
        let rotation = parent.rotation * axis_rotation(&j.axis, q[k]);
        poses.push(FramePose { rotation, translation });
    }
    poses
}

/// World position of every link's centre of mass.
pub fn link_com_positions(model: &MechanismModel, poses: &[FramePose]) -> Vec<Vector3<f64>> {
    poses
        .iter()
        .zip(&model.links)
        .map(|(p, l)| p.transform_point(&l.com))
        .collect()
}

pub fn center_of_mass(model: &MechanismModel, q: &[f64]) -> Vector3<f64> {
    let poses = forward_kinematics(model, q);
    center_of_mass_from_poses(model, &poses)
}

pub fn center_of_mass_from_poses(model: &MechanismModel, poses: &[FramePose]) -> Vector3<f64> {
    let total = model.total_mass();
    let weighted = poses
        .iter()
        .zip(&model.links)
        .fold(Vector3::zeros(), |acc, (p, l)| acc + p.transform_point(&l.com) * l.mass);
    weighted / total
}

/// Sole-centre frame of the stance foot.
pub fn stance_sole_pose(poses: &[FramePose]) -> FramePose {
    poses[joint::idx(joint::CONTACT_PITCH)]
}

/// Sole-centre frame of the swing foot.
pub fn swing_sole_pose(model: &MechanismModel, poses: &[FramePose]) -> FramePose {
    let ankle = poses[joint::idx(joint::SWING_ANKLE_PITCH)];
    FramePose {
        rotation: ankle.rotation,
        translation: ankle.transform_point(&(-model.foot.ankle_offset)),
    }
}

/// Corners of a sole rectangle in its own frame, CCW seen from above.
pub fn sole_corners(model: &MechanismModel) -> [Vector3<f64>; 4] {
    let hx = 0.5 * model.foot.length_x;
    let hy = 0.5 * model.foot.width_y;
    [
        Vector3::new(-hx, -hy, 0.0),
        Vector3::new(hx, -hy, 0.0),
        Vector3::new(hx, hy, 0.0),
        Vector3::new(-hx, hy, 0.0),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// +1 for right support (local frame = world orientation), -1 for left
    /// support (local frame is y-mirrored).
    pub fn mirror_sign(self) -> f64 {
        match self {
            Side::Right => 1.0,
            Side::Left => -1.0,
        }
    }
}

/// A foot placed on the ground.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    /// Ground-plane corners, CCW.
    pub corners: [Vector2<f64>; 4],
    pub heading: f64,
    pub side: Side,
    pub step_index: usize,
}

impl Footprint {
    /// Rectangle of size `length_x` x `width_y` centred at `center`, yawed by `heading`.
    pub fn rectangle(
        center: Vector2<f64>,
        heading: f64,
        length_x: f64,
        width_y: f64,
        side: Side,
        step_index: usize,
    ) -> Self {
        let (s, c) = heading.sin_cos();
        let hx = 0.5 * length_x;
        let hy = 0.5 * width_y;
        let local = [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)];
        let corners = local.map(|(x, y)| center + Vector2::new(c * x - s * y, s * x + c * y));
        Self {
            corners,
            heading: wrap_angle(heading),
            side,
            step_index,
        }
    }

    pub fn center(&self) -> Vector2<f64> {
        self.corners.iter().sum::<Vector2<f64>>() / 4.0
    }
}

/// Convex contact region, CCW vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportPolygon {
    pub vertices: Vec<Vector2<f64>>,
}

fn cross(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

impl SupportPolygon {
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|i| cross(self.vertices[i], self.vertices[(i + 1) % n]))
            .sum::<f64>()
    }

    fn is_convex_ccw(&self) -> bool {
        let n = self.vertices.len();
        n >= 3
            && (0..n).all(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                let c = self.vertices[(i + 2) % n];
                cross(b - a, c - b) > 0.0
            })
    }

    /// Half-plane containment test (boundary counts as inside).
    pub fn contains(&self, p: Vector2<f64>) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            cross(b - a, p - a) >= 0.0
        })
    }

    pub fn centroid(&self) -> Vector2<f64> {
        let n = self.vertices.len();
        let a = self.area();
        let mut c = Vector2::zeros();
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            c += (p + q) * cross(p, q);
        }
        c / (6.0 * a)
    }
}

/// Support polygon of a single-support phase: the stance sole rectangle.
pub fn stance_support_polygon(footprint: &Footprint) -> Result<SupportPolygon> {
    let poly = SupportPolygon {
        vertices: footprint.corners.to_vec(),
    };
    if !poly.vertices.iter().all(|v| v.x.is_finite() && v.y.is_finite()) {
        return Err(GaitError::DegenerateFootprint("non-finite corner".into()));
    }
    let area = poly.area();
    if !(area > 1e-12) || !poly.is_convex_ccw() {
        return Err(GaitError::DegenerateFootprint(format!(
            "corners do not form a convex CCW quadrilateral (area {area:.3e})"
        )));
    }
    Ok(poly)
}

fn segment_distance(p: Vector2<f64>, a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Signed distance from `p` to the polygon boundary: positive inside,
/// negative outside.
pub fn polygon_margin(p: Vector2<f64>, poly: &SupportPolygon) -> f64 {
    let n = poly.vertices.len();
    let d = (0..n)
        .map(|i| segment_distance(p, poly.vertices[i], poly.vertices[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min);
    if poly.contains(p) {
        d
    } else {
        -d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_reference_mechanism;
    use nalgebra::Matrix4;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    /// Independent oracle: naive 4x4 homogeneous products along each root path.
    fn naive_positions(model: &MechanismModel, q: &[f64]) -> Vec<Vector3<f64>> {
        let homog = |k: usize| {
            let j = &model.joints[k];
            let (x, y, z) = (j.axis.x, j.axis.y, j.axis.z);
            let (s, c) = q[k].sin_cos();
            let t = 1.0 - c;
            // Rodrigues in explicit form.
            let r = Matrix3::new(
                t * x * x + c,
                t * x * y - s * z,
                t * x * z + s * y,
                t * x * y + s * z,
                t * y * y + c,
                t * y * z - s * x,
                t * x * z - s * y,
                t * y * z + s * x,
                t * z * z + c,
            );
            let mut m = Matrix4::identity();
            m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
            m.fixed_view_mut::<3, 1>(0, 3).copy_from(&j.origin);
            m
        };
        (0..model.dof())
            .map(|k| {
                let mut chain = vec![k];
                while let Some(p) = model.joints[*chain.last().unwrap()].parent {
                    chain.push(p - 1);
                }
                let m = chain.iter().rev().fold(Matrix4::identity(), |acc, &i| acc * homog(i));
                let com = model.links[k].com;
                let p = m * nalgebra::Vector4::new(com.x, com.y, com.z, 1.0);
                Vector3::new(p.x, p.y, p.z)
            })
            .collect()
    }

    fn random_q(rng: &mut StdRng) -> Vec<f64> {
        (0..20).map(|_| rng.gen_range(-0.6..0.6)).collect()
    }

    #[test]
    fn home_pose_feet_flat() {
        let m = build_reference_mechanism();
        let poses = forward_kinematics(&m, &[0.0; 20]);
        let stance = stance_sole_pose(&poses);
        let swing = swing_sole_pose(&m, &poses);
        for c in sole_corners(&m) {
            assert!(stance.transform_point(&c).z.abs() < 1e-12);
            assert!(swing.transform_point(&c).z.abs() < 1e-12);
        }
        assert!((swing.translation.y - 0.18).abs() < 1e-12);
    }

    #[test]
    fn hip_yaw_rotates_swing_chain_only() {
        let m = build_reference_mechanism();
        let theta = 0.3;
        let mut q = [0.0; 20];
        let base = forward_kinematics(&m, &q);
        q[joint::idx(joint::STANCE_HIP_YAW)] = theta;
        let poses = forward_kinematics(&m, &q);
        for id in 1..=7 {
            assert!((poses[id - 1].translation - base[id - 1].translation).norm() < 1e-15);
        }
        let hip = poses[joint::idx(joint::STANCE_HIP_YAW)].translation;
        let rz = axis_rotation(&Vector3::z(), theta);
        for id in 8..=20 {
            let expect = hip + rz * (base[id - 1].translation - hip);
            assert!((poses[id - 1].translation - expect).norm() < 1e-12, "joint {id}");
        }
    }

    #[test]
    fn fk_matches_naive_transform_chain() {
        let m = build_reference_mechanism();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let q = random_q(&mut rng);
            let poses = forward_kinematics(&m, &q);
            let fast = link_com_positions(&m, &poses);
            let slow = naive_positions(&m, &q);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn fk_rotations_are_proper() {
        let m = build_reference_mechanism();
        let mut rng = StdRng::seed_from_u64(8);
        let q = random_q(&mut rng);
        for p in forward_kinematics(&m, &q) {
            let r = p.rotation;
            assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-9);
            assert!((r.determinant() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fk_subchain_composition() {
        // pose(child) == pose(parent) * local(child)
        let m = build_reference_mechanism();
        let mut rng = StdRng::seed_from_u64(9);
        let q = random_q(&mut rng);
        let poses = forward_kinematics(&m, &q);
        for (k, j) in m.joints.iter().enumerate() {
            if let Some(p) = j.parent {
                let local = FramePose {
                    rotation: axis_rotation(&j.axis, q[k]),
                    translation: j.origin,
                };
                let composed = poses[p - 1].compose(&local);
                assert!((composed.translation - poses[k].translation).norm() < 1e-10);
                assert!((composed.rotation - poses[k].rotation).abs().max() < 1e-10);
            }
        }
    }

    #[test]
    fn com_matches_direct_summation() {
        let m = build_reference_mechanism();
        let mut rng = StdRng::seed_from_u64(10);
        for _ in 0..20 {
            let q = random_q(&mut rng);
            let pos = naive_positions(&m, &q);
            let total: f64 = m.links.iter().map(|l| l.mass).sum();
            let sum = pos
                .iter()
                .zip(&m.links)
                .fold(Vector3::zeros(), |a, (p, l)| a + p * l.mass);
            assert!((center_of_mass(&m, &q) - sum / total).norm() < 1e-10);
        }
    }

    #[test]
    fn symmetric_standing_com_on_midline() {
        let m = build_reference_mechanism();
        let com = center_of_mass(&m, &[0.0; 20]);
        // Bilateral symmetry plane sits halfway between the feet.
        let mid = 0.5 * m.leg_geometry().hip_spacing;
        assert!((com.y - mid).abs() < 1e-9);
    }

    #[test]
    fn single_link_com() {
        let mut m = build_reference_mechanism();
        for (k, l) in m.links.iter_mut().enumerate() {
            if k != 15 {
                l.mass = 0.0;
            }
        }
        let q: Vec<f64> = (0..20).map(|i| 0.05 * i as f64).collect();
        let poses = forward_kinematics(&m, &q);
        let expect = poses[15].transform_point(&m.links[15].com);
        assert!((center_of_mass(&m, &q) - expect).norm() < 1e-12);
    }

    fn fp(heading: f64) -> Footprint {
        Footprint::rectangle(Vector2::zeros(), heading, 0.25, 0.1, Side::Right, 0)
    }

    #[test]
    fn axis_aligned_polygon() {
        let poly = stance_support_polygon(&fp(0.0)).unwrap();
        assert_eq!(poly.vertices[0], Vector2::new(-0.125, -0.05));
        assert_eq!(poly.vertices[2], Vector2::new(0.125, 0.05));
        assert!((poly.area() - 0.025).abs() < 1e-12);
    }

    #[test]
    fn yawed_polygon_is_rotated_rectangle() {
        let h = 25f64.to_radians();
        let poly = stance_support_polygon(&fp(h)).unwrap();
        let r = axis_rotation(&Vector3::z(), h);
        let v = r * Vector3::new(0.125, 0.05, 0.0);
        assert!((poly.vertices[2] - Vector2::new(v.x, v.y)).norm() < 1e-15);
        assert!((poly.area() - 0.025).abs() < 1e-12);
    }

    #[test]
    fn degenerate_footprint_rejected() {
        let mut f = fp(0.0);
        f.corners[2] = f.corners[1];
        assert!(stance_support_polygon(&f).is_err());
        let flat = Footprint::rectangle(Vector2::zeros(), 0.0, 0.25, 0.0, Side::Left, 0);
        assert!(stance_support_polygon(&flat).is_err());
    }

    #[test]
    fn margin_at_centroid_and_edge() {
        let poly = stance_support_polygon(&fp(0.0)).unwrap();
        assert!((polygon_margin(poly.centroid(), &poly) - 0.05).abs() < 1e-15);
        assert!(polygon_margin(Vector2::new(0.03, 0.05), &poly).abs() < 1e-12);
    }

    #[test]
    fn margin_outside_vertex_matches_dense_sampling() {
        let poly = stance_support_polygon(&fp(0.0)).unwrap();
        let dir = Vector2::new(1.0, 1.0).normalize();
        let p = Vector2::new(0.125, 0.05) + dir * 0.02;
        // Brute force: dense boundary sampling.
        let n = poly.vertices.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            let a = poly.vertices[i];
            let b = poly.vertices[(i + 1) % n];
            for s in 0..=20_000 {
                let t = s as f64 / 20_000.0;
                best = best.min((p - (a + (b - a) * t)).norm());
            }
        }
        let m = polygon_margin(p, &poly);
        assert!((m + best).abs() < 1e-9);
        assert!((m + 0.02).abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn margin_sign_agrees_with_containment(
                x in -0.3f64..0.3, y in -0.2f64..0.2, h in -3.1f64..3.1
            ) {
                let poly = stance_support_polygon(&fp(h)).unwrap();
                let p = Vector2::new(x, y);
                let m = polygon_margin(p, &poly);
                prop_assert_eq!(m >= 0.0, poly.contains(p));
            }

            #[test]
            fn com_ignores_extra_fictitious_mass_free_link(q in proptest::collection::vec(-0.5f64..0.5, 20)) {
                let m = build_reference_mechanism();
                let mut m2 = m.clone();
                // Re-point joint 16 through an extra zero-mass joint: COM unchanged.
                let mut extra = m2.joints[14].clone();
                extra.id = 21;
                m2.joints.push(extra);
                m2.links.push(crate::model::LinkParams::fictitious());
                let mut q2 = q.clone();
                q2.push(0.7);
                let a = center_of_mass(&m, &q);
                let b = center_of_mass(&m2, &q2);
                prop_assert!((a - b).norm() < 1e-12);
            }
        }
    }
}
