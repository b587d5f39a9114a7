mod support;

use std::collections::HashMap;

use occond_core::bodymodel::{make_fixture_body, BodyModel, PoseSpec, ShapeVector, FIXTURE_DETAIL_LEVELS};
use occond_core::geom::{Mat3, Vec3};
use proptest::prelude::*;
use support::fixture;

fn betas(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, dim)
}

fn axis_angle() -> impl Strategy<Value = [f64; 3]> {
    [-1.5..1.5f64, -1.5..1.5f64, -1.5..1.5f64]
}

fn close(a: Vec3<f64>, b: Vec3<f64>, tol: f64) -> bool {
    (a - b).norm() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shape_is_linear(b in betas(10), a in -3.0..3.0f64) {
        let model = fixture(1);
        let template = model.vertices_template();
        let once = model.apply_shape(&ShapeVector(b.clone())).unwrap();
        let scaled = model.apply_shape(&ShapeVector(b.iter().map(|x| a * x).collect())).unwrap();
        for ((t, o), s) in template.iter().zip(&once).zip(&scaled) {
            prop_assert!(close(*s - *t, (*o - *t) * a, 1e-12));
        }
    }

    #[test]
    fn root_motion_is_rigid(b in betas(10), r in axis_angle(), t in axis_angle()) {
        let model = fixture(1);
        let beta = ShapeVector(b);
        let rest = model.posed(&beta, &PoseSpec::identity(model.joint_count())).unwrap();
        let mut pose = PoseSpec::translated(model.joint_count(), Vec3::from_array(t));
        pose.joint_rotations[0] = Vec3::from_array(r);
        let moved = model.posed(&beta, &pose).unwrap();
        let root = model.shape_body(&beta).unwrap().joints[0];
        let rot = Mat3::from_axis_angle(Vec3::from_array(r));
        for (v, m) in rest.vertices.iter().zip(&moved.vertices) {
            let expected = rot.mul_vec(*v - root) + root + Vec3::from_array(t);
            prop_assert!(close(*m, expected, 1e-9));
        }
    }

    #[test]
    fn bone_lengths_survive_posing(b in betas(10), rots in prop::collection::vec(axis_angle(), 16)) {
        let model = fixture(1);
        let beta = ShapeVector(b);
        let rest = model.joint_positions(&beta, &PoseSpec::identity(16)).unwrap();
        let pose = PoseSpec { root_translation: Vec3::zero(), joint_rotations: rots.into_iter().map(Vec3::from_array).collect() };
        let posed = model.joint_positions(&beta, &pose).unwrap();
        for (j, p) in model.parents().iter().enumerate() {
            if let Some(p) = *p {
                prop_assert!((rest[j].distance(rest[p]) - posed[j].distance(posed[p])).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn identity_pose_returns_shaped_vertices_exactly() {
    let model = fixture(2);
    let beta = ShapeVector(vec![0.3, -0.2, 0.1, 0.0, 0.5, -0.4, 0.2, 0.0, 0.1, -0.1]);
    let shaped = model.shape_body(&beta).unwrap();
    let posed = model.pose_mesh(&shaped, &PoseSpec::identity(model.joint_count())).unwrap();
    assert_eq!(posed.vertices, shaped.vertices);
}

#[test]
fn every_fixture_level_is_closed_and_sized() {
    for (detail, _, _) in FIXTURE_DETAIL_LEVELS {
        let model: BodyModel<f64> = make_fixture_body("capsule-person", detail).unwrap();
        assert!(model.joint_count() >= 14);
        let faces = model.faces();
        assert!((1000..=3000).contains(&faces.len()), "{} faces", faces.len());
        let mut edges: HashMap<(u32, u32), usize> = HashMap::new();
        for f in faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        assert!(edges.values().all(|&n| n == 2));
    }
}

#[test]
fn fixture_is_deterministic_and_round_trips() {
    let a: BodyModel<f64> = make_fixture_body("capsule-person", 2).unwrap();
    let b: BodyModel<f64> = make_fixture_body("capsule-person", 2).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let back = BodyModel::<f64>::from_json(&a.to_json()).unwrap();
    assert_eq!(back, a);
    let narrow: BodyModel<f32> = make_fixture_body("capsule-person", 1).unwrap();
    assert_eq!(narrow.vertex_count(), fixture(1).vertex_count());
}

#[test]
fn dimension_errors() {
    let model = fixture(1);
    assert!(model.apply_shape(&ShapeVector(vec![0.0; 9])).is_err());
    let shaped = model.shape_body(&ShapeVector::zeros(10)).unwrap();
    assert!(model.pose_mesh(&shaped, &PoseSpec::identity(3)).is_err());
    assert!(make_fixture_body::<f64>("capsule-person", 9).is_err());
    assert!(make_fixture_body::<f64>("robot", 1).is_err());
}
