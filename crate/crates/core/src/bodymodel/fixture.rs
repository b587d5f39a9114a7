//! Procedural "capsule-person": a deterministic articulated body built from closed
//! capsules, one per bone, each rigidly skinned to the joint that drives it.
//!
//! The body is T-posed with y up, facing +z, pelvis at the origin. Every capsule is a
//! closed indexed surface, so every edge is shared by exactly two faces.

use std::f64::consts::{FRAC_PI_2, PI};
use std::str::FromStr;

use super::{BodyError, BodyModel, BodyModelParts, DEFAULT_SHAPE_DIM};
use crate::geom::Vec3;
use crate::scalar::Scalar;

/// Supported `detail` values, each mapping to (segments around, bands per hemisphere).
pub const FIXTURE_DETAIL_LEVELS: [(u32, usize, usize); 3] = [(1, 10, 3), (2, 12, 4), (3, 16, 4)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixturePreset {
    CapsulePerson,
}

impl FixturePreset {
    pub fn name(self) -> &'static str {
        match self {
            FixturePreset::CapsulePerson => "capsule-person",
        }
    }
}

impl FromStr for FixturePreset {
    type Err = BodyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "capsule-person" => Ok(FixturePreset::CapsulePerson),
            other => Err(BodyError::UnknownPreset(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Region {
    Torso,
    Head,
    Arm(f64),
    Leg(f64),
}

const SHOULDER_X: f64 = 0.18;
const SHOULDER_Y: f64 = 0.48;
const HIP_X: f64 = 0.10;
const HIP_Y: f64 = -0.05;
const SPINE_Y: f64 = 0.25;
const NECK_Y: f64 = 0.52;

struct JointDef {
    name: &'static str,
    pos: [f64; 3],
    parent: Option<usize>,
    region: Region,
}

const fn joint(name: &'static str, pos: [f64; 3], parent: Option<usize>, region: Region) -> JointDef {
    JointDef { name, pos, parent, region }
}

const L: Region = Region::Arm(1.0);
const R: Region = Region::Arm(-1.0);
const LL: Region = Region::Leg(1.0);
const RL: Region = Region::Leg(-1.0);

const JOINTS: [JointDef; 16] = [
    joint("pelvis", [0.0, 0.0, 0.0], None, Region::Torso),
    joint("spine", [0.0, SPINE_Y, 0.0], Some(0), Region::Torso),
    joint("neck", [0.0, NECK_Y, 0.0], Some(1), Region::Torso),
    joint("head_top", [0.0, 0.80, 0.0], Some(2), Region::Head),
    joint("left_shoulder", [SHOULDER_X, SHOULDER_Y, 0.0], Some(1), L),
    joint("left_elbow", [0.46, SHOULDER_Y, 0.0], Some(4), L),
    joint("left_wrist", [0.72, SHOULDER_Y, 0.0], Some(5), L),
    joint("right_shoulder", [-SHOULDER_X, SHOULDER_Y, 0.0], Some(1), R),
    joint("right_elbow", [-0.46, SHOULDER_Y, 0.0], Some(7), R),
    joint("right_wrist", [-0.72, SHOULDER_Y, 0.0], Some(8), R),
    joint("left_hip", [HIP_X, HIP_Y, 0.0], Some(0), LL),
    joint("left_knee", [HIP_X, -0.48, 0.0], Some(10), LL),
    joint("left_ankle", [HIP_X, -0.90, 0.0], Some(11), LL),
    joint("right_hip", [-HIP_X, HIP_Y, 0.0], Some(0), RL),
    joint("right_knee", [-HIP_X, -0.48, 0.0], Some(13), RL),
    joint("right_ankle", [-HIP_X, -0.90, 0.0], Some(14), RL),
];

struct CapsuleDef {
    from: [f64; 3],
    to: [f64; 3],
    /// Cross-section radii along the two frame axes.
    radii: (f64, f64),
    joint: usize,
    region: Region,
}

fn capsules() -> Vec<CapsuleDef> {
    let c = |from, to, radii, joint: usize| CapsuleDef { from, to, radii, joint, region: JOINTS[joint].region };
    let mut out = vec![
        c([0.0, -0.08, 0.0], [0.0, SPINE_Y, 0.0], (0.15, 0.11), 0),
        c([0.0, SPINE_Y, 0.0], [0.0, 0.46, 0.0], (0.17, 0.11), 1),
        CapsuleDef { from: [0.0, 0.60, 0.0], to: [0.0, 0.70, 0.0], radii: (0.10, 0.10), joint: 2, region: Region::Head },
    ];
    for (shoulder, elbow, wrist) in [(4, 5, 6), (7, 8, 9)] {
        out.push(c(JOINTS[shoulder].pos, JOINTS[elbow].pos, (0.05, 0.05), shoulder));
        out.push(c(JOINTS[elbow].pos, JOINTS[wrist].pos, (0.045, 0.045), elbow));
    }
    for (hip, knee, ankle) in [(10, 11, 12), (13, 14, 15)] {
        out.push(c(JOINTS[hip].pos, JOINTS[knee].pos, (0.075, 0.075), hip));
        out.push(c(JOINTS[knee].pos, JOINTS[ankle].pos, (0.055, 0.055), knee));
    }
    out
}

/// Displacement per unit coefficient of shape component `k` at point `p`.
///
/// Components: 0 global scale, 1 torso width, 2 torso depth, 3 arm length, 4 leg length,
/// 5 limb girth, 6 head size, 7 shoulder width, 8 hip width, 9 torso length.
fn shape_offset(k: usize, p: [f64; 3], region: Region) -> [f64; 3] {
    let [x, y, z] = p;
    match (k, region) {
        (0, _) => [0.08 * x, 0.08 * y, 0.08 * z],
        (1, Region::Torso) => [0.15 * x, 0.0, 0.0],
        (2, Region::Torso) => [0.0, 0.0, 0.15 * z],
        (3, Region::Arm(s)) => [s * 0.12 * (s * x - SHOULDER_X).max(0.0), 0.0, 0.0],
        (4, Region::Leg(_)) => [0.0, 0.12 * (y - HIP_Y).min(0.0), 0.0],
        (5, Region::Arm(_)) => [0.0, 0.15 * (y - SHOULDER_Y), 0.15 * z],
        (5, Region::Leg(s)) => [0.15 * (x - s * HIP_X), 0.0, 0.15 * z],
        (6, Region::Head) => [0.15 * x, 0.15 * (y - NECK_Y), 0.15 * z],
        (7, Region::Arm(s)) => [s * 0.04, 0.0, 0.0],
        (8, Region::Leg(s)) => [s * 0.03, 0.0, 0.0],
        (9, Region::Torso | Region::Head) => [0.0, 0.12 * (y - SPINE_Y).max(0.0), 0.0],
        (9, Region::Arm(_)) => [0.0, 0.12 * (SHOULDER_Y - SPINE_Y), 0.0],
        _ => [0.0; 3],
    }
}

struct MeshBuilder {
    vertices: Vec<[f64; 3]>,
    regions: Vec<Region>,
    joints: Vec<usize>,
    faces: Vec<[u32; 3]>,
}

impl MeshBuilder {
    fn push_vertex(&mut self, p: [f64; 3], cap: &CapsuleDef) -> u32 {
        self.vertices.push(p);
        self.regions.push(cap.region);
        self.joints.push(cap.joint);
        (self.vertices.len() - 1) as u32
    }

    /// Closed capsule: two poles plus `2 * bands` rings of `segments` vertices.
    /// Faces wind counter-clockwise seen from outside.
    fn add_capsule(&mut self, cap: &CapsuleDef, segments: usize, bands: usize) {
        let a = Vec3::<f64>::from_array(cap.from);
        let b = Vec3::<f64>::from_array(cap.to);
        let axis = (b - a).normalized().expect("capsule has length");
        let hint = if axis.z.abs() > 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 0.0, 1.0) };
        let e1 = hint.cross(axis).normalized().expect("hint is not parallel to axis");
        let e2 = axis.cross(e1);
        let (r1, r2) = cap.radii;
        let r_axial = 0.5 * (r1 + r2);

        let ring_point = |center: Vec3<f64>, phi: f64, theta: f64| {
            let (s, c) = phi.sin_cos();
            center + axis * (r_axial * s) + (e1 * (r1 * theta.cos()) + e2 * (r2 * theta.sin())) * c
        };

        let bottom = self.push_vertex((a - axis * r_axial).to_array(), cap);
        let mut rings: Vec<u32> = Vec::new();
        // bottom hemisphere (excluding pole) up to the equator at `a`, then the top one from `b`
        let mut latitudes: Vec<(Vec3<f64>, f64)> = Vec::new();
        for k in 1..=bands {
            latitudes.push((a, -FRAC_PI_2 + FRAC_PI_2 * k as f64 / bands as f64));
        }
        for k in 0..bands {
            latitudes.push((b, FRAC_PI_2 * k as f64 / bands as f64));
        }
        for &(center, phi) in &latitudes {
            let start = self.vertices.len() as u32;
            for s in 0..segments {
                let theta = 2.0 * PI * s as f64 / segments as f64;
                self.push_vertex(ring_point(center, phi, theta).to_array(), cap);
            }
            rings.push(start);
        }
        let top = self.push_vertex((b + axis * r_axial).to_array(), cap);

        let n = segments as u32;
        let first = rings[0];
        for s in 0..n {
            let t = (s + 1) % n;
            self.faces.push([bottom, first + t, first + s]);
        }
        for w in rings.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            for s in 0..n {
                let t = (s + 1) % n;
                self.faces.push([lo + s, lo + t, hi + t]);
                self.faces.push([lo + s, hi + t, hi + s]);
            }
        }
        let last = *rings.last().expect("at least one ring");
        for s in 0..n {
            let t = (s + 1) % n;
            self.faces.push([top, last + s, last + t]);
        }
    }
}

/// Builds the deterministic test body for `preset` at `detail` (see [`FIXTURE_DETAIL_LEVELS`]).
pub fn make_fixture_body<T: Scalar>(preset: &str, detail: u32) -> Result<BodyModel<T>, BodyError> {
    let FixturePreset::CapsulePerson = preset.parse::<FixturePreset>()?;
    let (_, segments, bands) = FIXTURE_DETAIL_LEVELS
        .iter()
        .copied()
        .find(|&(d, _, _)| d == detail)
        .ok_or(BodyError::UnknownDetail(detail))?;

    let mut mesh = MeshBuilder { vertices: vec![], regions: vec![], joints: vec![], faces: vec![] };
    for cap in capsules() {
        mesh.add_capsule(&cap, segments, bands);
    }

    let to_t = |p: [f64; 3]| Vec3::<T>::from_f64(p);
    let shape_basis = (0..DEFAULT_SHAPE_DIM)
        .map(|k| mesh.vertices.iter().zip(&mesh.regions).map(|(&p, &r)| to_t(shape_offset(k, p, r))).collect())
        .collect();
    let joint_shape_basis = (0..DEFAULT_SHAPE_DIM)
        .map(|k| JOINTS.iter().map(|j| to_t(shape_offset(k, j.pos, j.region))).collect())
        .collect();

    BodyModel::new(BodyModelParts {
        vertices_template: mesh.vertices.iter().map(|&p| to_t(p)).collect(),
        faces: mesh.faces,
        shape_basis,
        joint_shape_basis,
        joints_rest: JOINTS.iter().map(|j| to_t(j.pos)).collect(),
        parents: JOINTS.iter().map(|j| j.parent).collect(),
        skin_weights: mesh.joints.iter().map(|&j| vec![(j, T::one())]).collect(),
        joint_names: JOINTS.iter().map(|j| j.name.to_string()).collect(),
    })
}
