//! Shared test fixtures: random fixture scenes and an independent per-pixel ray caster.
//!
//! The caster uses the Möller–Trumbore test in plain `f64` arrays and flags pixels whose
//! ray passes within a barycentric epsilon of any triangle edge. Only non-flagged pixels
//! carry an exact expected count.

#![allow(dead_code)]

use occond_core::bodymodel::{make_fixture_body, BodyModel, PoseSpec, ShapeVector};
use occond_core::geom::{Mat3, Vec3};
use occond_core::scene::{Camera, Extrinsic, HumanSpec, SceneSpec};
use rand::Rng;

pub const GRAZING_EPS: f64 = 1e-6;
pub const FIXTURE_REF: &str = "fixture:capsule-person:1";

pub fn fixture(detail: u32) -> BodyModel<f64> {
    make_fixture_body("capsule-person", detail).expect("fixture body")
}

pub fn camera(width: usize, height: usize, distance: f64) -> Camera<f64> {
    // a 1.9 m tall body fills about 80% of the frame height
    let focal = 0.8 * height as f64 * distance / 1.9;
    let mut cam = Camera::centered(width, height, focal, Extrinsic::facing_negative_z(Vec3::new(0.0, 0.0, distance)));
    cam.near = 0.01;
    cam.depth_clip = 5.0;
    cam
}

pub fn random_pose<R: Rng>(rng: &mut R, joints: usize, spread: f64, translation: [f64; 3]) -> PoseSpec<f64> {
    PoseSpec {
        root_translation: Vec3::from_array(translation),
        joint_rotations: (0..joints)
            .map(|_| Vec3::new(rng.gen_range(-spread..spread), rng.gen_range(-spread..spread), rng.gen_range(-spread..spread)))
            .collect(),
    }
}

pub fn random_human<R: Rng>(rng: &mut R, model: &BodyModel<f64>, translation: [f64; 3]) -> HumanSpec<f64> {
    HumanSpec {
        beta: ShapeVector((0..model.shape_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect()),
        pose: random_pose(rng, model.joint_count(), 0.6, translation),
        face_landmarks: None,
    }
}

/// One or two bodies, the second partly behind the first.
pub fn random_scene<R: Rng>(rng: &mut R, model: &BodyModel<f64>, size: usize, max_humans: usize) -> SceneSpec<f64> {
    let n = rng.gen_range(1..=max_humans);
    let humans = (0..n)
        .map(|i| {
            let x = rng.gen_range(-0.4..0.4);
            let z = -(i as f64) * rng.gen_range(0.3..0.9);
            let y = rng.gen_range(-0.1..0.1);
            random_human(rng, model, [x, y, z])
        })
        .collect();
    SceneSpec { camera: camera(size, size, rng.gen_range(2.6..3.6)), humans, model_ref: FIXTURE_REF.into() }
}

pub type Tri = [[f64; 3]; 3];

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Camera-space triangles of every human in scene order.
pub fn camera_triangles(scene: &SceneSpec<f64>, model: &BodyModel<f64>) -> Vec<Tri> {
    let r: Mat3<f64> = scene.camera.extrinsic.rotation;
    let t = scene.camera.extrinsic.translation.to_array();
    let to_cam = |p: [f64; 3]| {
        let m = r.rows;
        [0, 1, 2].map(|i| m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2] + t[i])
    };
    let mut tris = Vec::new();
    for h in &scene.humans {
        let mesh = model.posed(&h.beta, &h.pose).expect("posed mesh");
        for f in &mesh.faces {
            tris.push(f.map(|i| to_cam(mesh.vertices[i as usize].to_array())));
        }
    }
    tris
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TriHit {
    Miss,
    Hit(f64),
    Grazing,
}

/// Möller–Trumbore from the origin along `dir`, with `t` reported along `dir`.
pub fn intersect(dir: [f64; 3], tri: &Tri, near: f64, clip: f64) -> TriHit {
    let e1 = sub(tri[1], tri[0]);
    let e2 = sub(tri[2], tri[0]);
    let p = cross(dir, e2);
    let det = dot(e1, p);
    let scale = norm(e1) * norm(e2) * norm(dir);
    if scale == 0.0 || norm(cross(e1, e2)) == 0.0 {
        return TriHit::Miss;
    }
    if det.abs() <= 1e-12 * scale {
        // ray nearly in the triangle's plane
        let n = cross(e1, e2);
        return if dot(n, tri[0]).abs() <= 1e-9 * norm(n) { TriHit::Grazing } else { TriHit::Miss };
    }
    let s = [-tri[0][0], -tri[0][1], -tri[0][2]];
    let u = dot(s, p) / det;
    let q = cross(s, e1);
    let v = dot(dir, q) / det;
    let w = 1.0 - u - v;
    let t = dot(e2, q) / det;
    let min_bary = u.min(v).min(w);
    if min_bary < -GRAZING_EPS {
        return TriHit::Miss;
    }
    let near_plane = (t - near).abs() <= 1e-9 || (t - clip).abs() <= 1e-9;
    if min_bary <= GRAZING_EPS || near_plane {
        return TriHit::Grazing;
    }
    if t > near && t <= clip {
        TriHit::Hit(t)
    } else {
        TriHit::Miss
    }
}

#[derive(Debug, Clone)]
pub struct OracleBuffers {
    pub width: usize,
    pub height: usize,
    pub count: Vec<u32>,
    pub depth: Vec<f64>,
    pub grazing: Vec<bool>,
}

pub fn pixel_dir(cam: &Camera<f64>, row: usize, col: usize) -> [f64; 3] {
    [(col as f64 + 0.5 - cam.cx) / cam.fx, (row as f64 + 0.5 - cam.cy) / cam.fy, 1.0]
}

pub fn oracle_render(tris: &[Tri], cam: &Camera<f64>) -> OracleBuffers {
    let (w, h) = (cam.width, cam.height);
    let mut out = OracleBuffers {
        width: w,
        height: h,
        count: vec![0; w * h],
        depth: vec![f64::INFINITY; w * h],
        grazing: vec![false; w * h],
    };
    for row in 0..h {
        for col in 0..w {
            let i = row * w + col;
            let dir = pixel_dir(cam, row, col);
            for tri in tris {
                match intersect(dir, tri, cam.near, cam.depth_clip) {
                    TriHit::Miss => {}
                    TriHit::Grazing => out.grazing[i] = true,
                    TriHit::Hit(t) => {
                        out.count[i] += 1;
                        out.depth[i] = out.depth[i].min(t);
                    }
                }
            }
        }
    }
    out
}

/// Mismatching non-grazing pixels as `(index, expected count, got count)`.
pub fn compare_with_oracle(oracle: &OracleBuffers, count: &[u32], depth: &[f64]) -> Vec<(usize, u32, u32)> {
    let mut bad = Vec::new();
    for i in 0..oracle.count.len() {
        if oracle.grazing[i] {
            continue;
        }
        let (de, dg) = (oracle.depth[i], depth[i]);
        let depth_ok = if de.is_finite() { (de - dg).abs() <= 1e-9 * de.max(1.0) } else { !dg.is_finite() };
        if oracle.count[i] != count[i] || !depth_ok {
            bad.push((i, oracle.count[i], count[i]));
        }
    }
    bad
}
