//! Minimal SMPL-style parametric body: linear shape blendshapes on a template mesh,
//! articulated by forward kinematics and linear blend skinning.
//!
//! There are no pose-corrective blendshapes. Joint rotations are axis-angle, composed
//! child-after-parent. Shaped joint locations come from an optional per-joint shape
//! basis stored next to the vertex basis; a model without one keeps its joints fixed.

mod fixture;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::{Mat3, Vec3};
use crate::scalar::Scalar;

pub use fixture::{make_fixture_body, FixturePreset, FIXTURE_DETAIL_LEVELS};

/// Value of the `version` field of a body model document.
pub const BODY_FORMAT_VERSION: &str = "occond-body/1";

/// Default number of shape coefficients.
pub const DEFAULT_SHAPE_DIM: usize = 10;

const SKIN_WEIGHT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum BodyError {
    #[error("shape vector has {got} coefficients, model expects {expected}")]
    ShapeDimension { expected: usize, got: usize },
    #[error("pose has {got} joint rotations, model expects {expected}")]
    PoseDimension { expected: usize, got: usize },
    #[error("shaped body has {got} vertices, model expects {expected}")]
    VertexCount { expected: usize, got: usize },
    #[error("invalid body model: {0}")]
    Invalid(String),
    #[error("unknown fixture preset {0:?}")]
    UnknownPreset(String),
    #[error("unsupported fixture detail level {0}")]
    UnknownDetail(u32),
    #[error("body model document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Shape coefficients β.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeVector<T>(pub Vec<T>);

impl<T: Scalar> ShapeVector<T> {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![T::zero(); dim])
    }

    pub fn betas(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<T> From<Vec<T>> for ShapeVector<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

/// Articulation: root translation plus one axis-angle rotation per joint (radians).
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSpec<T> {
    pub root_translation: Vec3<T>,
    pub joint_rotations: Vec<Vec3<T>>,
}

impl<T: Scalar> PoseSpec<T> {
    pub fn identity(joint_count: usize) -> Self {
        Self { root_translation: Vec3::zero(), joint_rotations: vec![Vec3::zero(); joint_count] }
    }

    pub fn translated(joint_count: usize, translation: Vec3<T>) -> Self {
        Self { root_translation: translation, ..Self::identity(joint_count) }
    }
}

/// Rest-pose geometry after shape blendshapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapedBody<T> {
    pub vertices: Vec<Vec3<T>>,
    pub joints: Vec<Vec3<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosedMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub faces: Vec<[u32; 3]>,
}

/// World rotation of a joint plus the displacement of its origin from the rest location.
#[derive(Debug, Clone, Copy)]
struct JointTransform<T> {
    rotation: Mat3<T>,
    offset: Vec3<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodyModel<T> {
    vertices_template: Vec<Vec3<T>>,
    faces: Vec<[u32; 3]>,
    shape_basis: Vec<Vec<Vec3<T>>>,
    joint_shape_basis: Vec<Vec<Vec3<T>>>,
    joints_rest: Vec<Vec3<T>>,
    parents: Vec<Option<usize>>,
    skin_weights: Vec<Vec<(usize, T)>>,
    joint_names: Vec<String>,
}

/// Unvalidated constituents of a [`BodyModel`].
#[derive(Debug, Clone, Default)]
pub struct BodyModelParts<T> {
    pub vertices_template: Vec<Vec3<T>>,
    pub faces: Vec<[u32; 3]>,
    pub shape_basis: Vec<Vec<Vec3<T>>>,
    /// Empty means joints do not move with shape.
    pub joint_shape_basis: Vec<Vec<Vec3<T>>>,
    pub joints_rest: Vec<Vec3<T>>,
    pub parents: Vec<Option<usize>>,
    pub skin_weights: Vec<Vec<(usize, T)>>,
    pub joint_names: Vec<String>,
}

impl<T: Scalar> BodyModel<T> {
    pub fn new(parts: BodyModelParts<T>) -> Result<Self, BodyError> {
        let BodyModelParts {
            vertices_template,
            faces,
            shape_basis,
            mut joint_shape_basis,
            joints_rest,
            parents,
            skin_weights,
            joint_names,
        } = parts;
        let nv = vertices_template.len();
        let nj = joints_rest.len();
        let invalid = |msg: String| Err(BodyError::Invalid(msg));

        if nv == 0 || nj == 0 {
            return invalid("model needs at least one vertex and one joint".into());
        }
        if let Some(i) = vertices_template.iter().position(|v| !v.is_finite()) {
            return invalid(format!("vertices[{i}] is not finite"));
        }
        if let Some(i) = joints_rest.iter().position(|v| !v.is_finite()) {
            return invalid(format!("joints_rest[{i}] is not finite"));
        }
        for (f, face) in faces.iter().enumerate() {
            if face.iter().any(|&i| i as usize >= nv) {
                return invalid(format!("faces[{f}] references a vertex >= {nv}"));
            }
        }
        if parents.len() != nj {
            return invalid(format!("{} parents for {nj} joints", parents.len()));
        }
        for (j, p) in parents.iter().enumerate() {
            if let Some(p) = *p {
                if p >= j {
                    return invalid(format!("parents[{j}] = {p} is not an earlier joint"));
                }
            }
        }
        for (k, offsets) in shape_basis.iter().enumerate() {
            if offsets.len() != nv {
                return invalid(format!("shape_basis[{k}] has {} offsets for {nv} vertices", offsets.len()));
            }
            if offsets.iter().any(|o| !o.is_finite()) {
                return invalid(format!("shape_basis[{k}] has a non-finite offset"));
            }
        }
        if joint_shape_basis.is_empty() {
            joint_shape_basis = vec![vec![Vec3::zero(); nj]; shape_basis.len()];
        } else if joint_shape_basis.len() != shape_basis.len() {
            return invalid(format!(
                "joint_shape_basis has {} entries, shape_basis has {}",
                joint_shape_basis.len(),
                shape_basis.len()
            ));
        }
        for (k, offsets) in joint_shape_basis.iter().enumerate() {
            if offsets.len() != nj || offsets.iter().any(|o| !o.is_finite()) {
                return invalid(format!("joint_shape_basis[{k}] must hold {nj} finite offsets"));
            }
        }
        if skin_weights.len() != nv {
            return invalid(format!("{} skin weight lists for {nv} vertices", skin_weights.len()));
        }
        for (v, weights) in skin_weights.iter().enumerate() {
            if weights.is_empty() {
                return invalid(format!("skin_weights[{v}] is empty"));
            }
            let mut sum = 0.0;
            for &(j, w) in weights {
                let w = w.to_f64_lossy();
                if j >= nj || !(w >= 0.0) || !w.is_finite() {
                    return invalid(format!("skin_weights[{v}] has an invalid entry ({j}, {w})"));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > SKIN_WEIGHT_TOLERANCE {
                return invalid(format!("skin_weights[{v}] sums to {sum}"));
            }
        }
        if !joint_names.is_empty() && joint_names.len() != nj {
            return invalid(format!("{} joint names for {nj} joints", joint_names.len()));
        }

        Ok(Self {
            vertices_template,
            faces,
            shape_basis,
            joint_shape_basis,
            joints_rest,
            parents,
            skin_weights,
            joint_names,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices_template.len()
    }

    pub fn joint_count(&self) -> usize {
        self.joints_rest.len()
    }

    /// Number of shape coefficients K.
    pub fn shape_dim(&self) -> usize {
        self.shape_basis.len()
    }

    pub fn vertices_template(&self) -> &[Vec3<T>] {
        &self.vertices_template
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn shape_basis(&self) -> &[Vec<Vec3<T>>] {
        &self.shape_basis
    }

    pub fn joints_rest(&self) -> &[Vec3<T>] {
        &self.joints_rest
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn skin_weights(&self) -> &[Vec<(usize, T)>] {
        &self.skin_weights
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    fn check_shape(&self, beta: &ShapeVector<T>) -> Result<(), BodyError> {
        if beta.len() == self.shape_dim() {
            Ok(())
        } else {
            Err(BodyError::ShapeDimension { expected: self.shape_dim(), got: beta.len() })
        }
    }

    fn check_pose(&self, pose: &PoseSpec<T>) -> Result<(), BodyError> {
        if pose.joint_rotations.len() == self.joint_count() {
            Ok(())
        } else {
            Err(BodyError::PoseDimension { expected: self.joint_count(), got: pose.joint_rotations.len() })
        }
    }

    /// `template + Σ_k beta_k · basis_k`, accumulated in basis order.
    pub fn apply_shape(&self, beta: &ShapeVector<T>) -> Result<Vec<Vec3<T>>, BodyError> {
        self.check_shape(beta)?;
        Ok(blend(&self.vertices_template, &self.shape_basis, beta.betas()))
    }

    pub fn shape_body(&self, beta: &ShapeVector<T>) -> Result<ShapedBody<T>, BodyError> {
        self.check_shape(beta)?;
        Ok(ShapedBody {
            vertices: blend(&self.vertices_template, &self.shape_basis, beta.betas()),
            joints: blend(&self.joints_rest, &self.joint_shape_basis, beta.betas()),
        })
    }

    fn forward_kinematics(&self, joints: &[Vec3<T>], pose: &PoseSpec<T>) -> Vec<JointTransform<T>> {
        let mut out: Vec<JointTransform<T>> = Vec::with_capacity(joints.len());
        for (j, aa) in pose.joint_rotations.iter().enumerate() {
            let local = Mat3::from_axis_angle(*aa);
            let transform = match self.parents[j] {
                None => JointTransform { rotation: local, offset: Vec3::zero() },
                Some(p) => {
                    let parent = out[p];
                    // D_j = D_p + (W_p - I)(J_j - J_p) stays exactly zero while every
                    // ancestor is unrotated.
                    let bone = joints[j] - joints[p];
                    JointTransform {
                        rotation: parent.rotation.mul_mat(&local),
                        offset: parent.offset + parent.rotation.minus_identity().mul_vec(bone),
                    }
                }
            };
            out.push(transform);
        }
        out
    }

    /// Linear blend skinning of a shaped body. Faces are carried over unchanged.
    pub fn pose_mesh(&self, shaped: &ShapedBody<T>, pose: &PoseSpec<T>) -> Result<PosedMesh<T>, BodyError> {
        self.check_pose(pose)?;
        if shaped.vertices.len() != self.vertex_count() {
            return Err(BodyError::VertexCount { expected: self.vertex_count(), got: shaped.vertices.len() });
        }
        if shaped.joints.len() != self.joint_count() {
            return Err(BodyError::Invalid(format!(
                "shaped body has {} joints, model has {}",
                shaped.joints.len(),
                self.joint_count()
            )));
        }
        let transforms = self.forward_kinematics(&shaped.joints, pose);
        let deltas: Vec<Mat3<T>> = transforms.iter().map(|t| t.rotation.minus_identity()).collect();

        let vertices = shaped
            .vertices
            .iter()
            .zip(&self.skin_weights)
            .map(|(&v, weights)| {
                // v' = v + Σ w_j [(W_j - I)(v - J_j) + D_j]
                let mut disp = Vec3::zero();
                for &(j, w) in weights {
                    let local = deltas[j].mul_vec(v - shaped.joints[j]) + transforms[j].offset;
                    disp += local * w;
                }
                v + disp + pose.root_translation
            })
            .collect();
        Ok(PosedMesh { vertices, faces: self.faces.clone() })
    }

    /// World-space joint origins from the same kinematic pass as [`Self::pose_mesh`].
    pub fn joint_positions(&self, beta: &ShapeVector<T>, pose: &PoseSpec<T>) -> Result<Vec<Vec3<T>>, BodyError> {
        self.check_pose(pose)?;
        let shaped = self.shape_body(beta)?;
        let transforms = self.forward_kinematics(&shaped.joints, pose);
        Ok(shaped
            .joints
            .iter()
            .zip(&transforms)
            .map(|(&j, t)| j + t.offset + pose.root_translation)
            .collect())
    }

    /// Shape then pose in one call.
    pub fn posed(&self, beta: &ShapeVector<T>, pose: &PoseSpec<T>) -> Result<PosedMesh<T>, BodyError> {
        let shaped = self.shape_body(beta)?;
        self.pose_mesh(&shaped, pose)
    }

    pub fn to_document(&self) -> BodyModelDocument {
        let conv = |v: &[Vec3<T>]| v.iter().map(|p| p.to_f64()).collect::<Vec<_>>();
        let has_joint_basis = self.joint_shape_basis.iter().flatten().any(|o| *o != Vec3::zero());
        BodyModelDocument {
            version: BODY_FORMAT_VERSION.to_string(),
            vertices: conv(&self.vertices_template),
            faces: self.faces.clone(),
            shape_basis: self.shape_basis.iter().map(|b| conv(b)).collect(),
            joint_shape_basis: has_joint_basis
                .then(|| self.joint_shape_basis.iter().map(|b| conv(b)).collect()),
            joints_rest: conv(&self.joints_rest),
            parents: self.parents.iter().map(|p| p.map_or(-1, |p| p as i64)).collect(),
            skin_weights: self
                .skin_weights
                .iter()
                .map(|ws| ws.iter().map(|&(j, w)| (j, w.to_f64_lossy())).collect())
                .collect(),
            joint_names: (!self.joint_names.is_empty()).then(|| self.joint_names.clone()),
        }
    }

    pub fn from_document(doc: &BodyModelDocument) -> Result<Self, BodyError> {
        if doc.version != BODY_FORMAT_VERSION {
            return Err(BodyError::Invalid(format!(
                "version {:?}, expected {BODY_FORMAT_VERSION:?}",
                doc.version
            )));
        }
        let conv = |v: &[[f64; 3]]| v.iter().map(|&p| Vec3::from_f64(p)).collect::<Vec<_>>();
        let mut parents = Vec::with_capacity(doc.parents.len());
        for (j, &p) in doc.parents.iter().enumerate() {
            parents.push(match p {
                -1 => None,
                p if p >= 0 => Some(p as usize),
                _ => return Err(BodyError::Invalid(format!("parents[{j}] = {p}; use -1 for the root"))),
            });
        }
        Self::new(BodyModelParts {
            vertices_template: conv(&doc.vertices),
            faces: doc.faces.clone(),
            shape_basis: doc.shape_basis.iter().map(|b| conv(b)).collect(),
            joint_shape_basis: doc
                .joint_shape_basis
                .as_ref()
                .map(|jb| jb.iter().map(|b| conv(b)).collect())
                .unwrap_or_default(),
            joints_rest: conv(&doc.joints_rest),
            parents,
            skin_weights: doc
                .skin_weights
                .iter()
                .map(|ws| ws.iter().map(|&(j, w)| (j, T::of(w))).collect())
                .collect(),
            joint_names: doc.joint_names.clone().unwrap_or_default(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("body model document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, BodyError> {
        let doc: BodyModelDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BodyError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| BodyError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BodyError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json())
            .map_err(|source| BodyError::Io { path: path.display().to_string(), source })
    }
}

fn blend<T: Scalar>(base: &[Vec3<T>], basis: &[Vec<Vec3<T>>], coeffs: &[T]) -> Vec<Vec3<T>> {
    let mut out = base.to_vec();
    for (offsets, &c) in basis.iter().zip(coeffs) {
        if c == T::zero() {
            continue;
        }
        for (o, &d) in out.iter_mut().zip(offsets) {
            *o += d * c;
        }
    }
    out
}

/// On-disk body model, schema `occond-body/1`. Lengths in meters, parents use -1 for roots,
/// skin weights are `[joint, weight]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyModelDocument {
    pub version: String,
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[u32; 3]>,
    pub shape_basis: Vec<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_shape_basis: Option<Vec<Vec<[f64; 3]>>>,
    pub joints_rest: Vec<[f64; 3]>,
    pub parents: Vec<i64>,
    pub skin_weights: Vec<Vec<(usize, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_names: Option<Vec<String>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two joints on the x axis, one triangle skinned fully to the root.
    fn chain() -> BodyModel<f64> {
        BodyModel::new(BodyModelParts {
            vertices_template: vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            faces: vec![[0, 1, 2]],
            shape_basis: vec![vec![Vec3::new(1.0, 0.0, 0.0); 3], vec![Vec3::new(0.0, 0.5, 0.0); 3]],
            joint_shape_basis: vec![],
            joints_rest: vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)],
            parents: vec![None, Some(0)],
            skin_weights: vec![vec![(0, 1.0)]; 3],
            joint_names: vec![],
        })
        .unwrap()
    }

    #[test]
    fn zero_beta_is_template() {
        let m = chain();
        assert_eq!(m.apply_shape(&ShapeVector::zeros(2)).unwrap(), m.vertices_template());
    }

    #[test]
    fn wrong_dimensions_rejected() {
        let m = chain();
        assert!(matches!(
            m.apply_shape(&ShapeVector(vec![0.0; 3])),
            Err(BodyError::ShapeDimension { expected: 2, got: 3 })
        ));
        let shaped = m.shape_body(&ShapeVector::zeros(2)).unwrap();
        assert!(matches!(
            m.pose_mesh(&shaped, &PoseSpec::identity(5)),
            Err(BodyError::PoseDimension { expected: 2, got: 5 })
        ));
    }

    #[test]
    fn child_joint_rotates_about_parent() {
        let m = chain();
        let mut pose = PoseSpec::identity(2);
        pose.joint_rotations[0] = Vec3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let joints = m.joint_positions(&ShapeVector::zeros(2), &pose).unwrap();
        // (1,0,0) rotated a quarter turn about z around the origin
        assert_eq!(joints[0], Vec3::zero());
        assert!((joints[1].x - 0.0).abs() < 1e-15);
        assert!((joints[1].y - 1.0).abs() < 1e-15);
        assert_eq!(joints[1].z, 0.0);
    }

    #[test]
    fn invalid_models_rejected() {
        let base = || BodyModelParts {
            vertices_template: vec![Vec3::<f64>::zero(); 3],
            faces: vec![[0, 1, 2]],
            shape_basis: vec![],
            joint_shape_basis: vec![],
            joints_rest: vec![Vec3::zero(); 2],
            parents: vec![None, Some(0)],
            skin_weights: vec![vec![(0, 1.0)]; 3],
            joint_names: vec![],
        };
        assert!(BodyModel::new(base()).is_ok());
        let mut p = base();
        p.faces = vec![[0, 1, 3]];
        assert!(BodyModel::new(p).is_err());
        let mut p = base();
        p.parents = vec![Some(1), None];
        assert!(BodyModel::new(p).is_err());
        let mut p = base();
        p.skin_weights[1] = vec![(0, 0.5), (1, 0.4)];
        assert!(BodyModel::new(p).is_err());
        let mut p = base();
        p.skin_weights[1] = vec![(0, 1.5), (1, -0.5)];
        assert!(BodyModel::new(p).is_err());
        let mut p = base();
        p.shape_basis = vec![vec![Vec3::zero(); 2]];
        assert!(BodyModel::new(p).is_err());
    }

    #[test]
    fn document_round_trip() {
        let m = chain();
        let back = BodyModel::<f64>::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let mut doc = m.to_document();
        doc.version = "occond-body/0".into();
        assert!(BodyModel::<f64>::from_document(&doc).is_err());
    }
}
