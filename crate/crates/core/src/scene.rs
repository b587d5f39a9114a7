//! Pinhole camera and multi-human scene description.
//!
//! Pixel `(row, col)` has its center at `(u, v) = (col + 0.5, row + 0.5)`; camera rays
//! are cast through pixel centers. Camera space is x right, y down, z forward.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bodymodel::{BodyModel, PoseSpec, ShapeVector};
use crate::geom::{Mat3, Vec3};
use crate::scalar::Scalar;

pub const SCENE_FORMAT_VERSION: &str = "occond-scene/1";
pub const DEFAULT_NEAR: f64 = 0.01;
pub const DEFAULT_DEPTH_CLIP: f64 = 5.0;
pub const FACE_LANDMARK_COUNT: usize = 5;

const ROTATION_TOLERANCE: f64 = 1e-6;

/// World-to-camera rigid transform: `p_cam = rotation · p_world + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsic<T> {
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
}

impl<T: Scalar> Extrinsic<T> {
    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zero() }
    }

    /// Camera at world position `eye` looking down world −z with world +y up in the image.
    pub fn facing_negative_z(eye: Vec3<T>) -> Self {
        let (o, z) = (T::one(), T::zero());
        let rotation = Mat3::from_rows([[o, z, z], [z, -o, z], [z, z, -o]]);
        Self { rotation, translation: -rotation.mul_vec(eye) }
    }

    pub fn apply(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(p) + self.translation
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
    pub extrinsic: Extrinsic<T>,
    pub near: T,
    pub depth_clip: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection<T> {
    Visible { u: T, v: T, depth: T },
    BehindCamera,
}

impl<T: Scalar> Camera<T> {
    /// Square-pixel camera with the principal point at the image center.
    pub fn centered(width: usize, height: usize, focal: T, extrinsic: Extrinsic<T>) -> Self {
        let half = T::of(0.5);
        Self {
            fx: focal,
            fy: focal,
            cx: T::of(width as f64) * half,
            cy: T::of(height as f64) * half,
            width,
            height,
            extrinsic,
            near: T::of(DEFAULT_NEAR),
            depth_clip: T::of(DEFAULT_DEPTH_CLIP),
        }
    }

    pub fn project(&self, point: Vec3<T>) -> Projection<T> {
        let p = self.extrinsic.apply(point);
        if p.z <= self.near {
            return Projection::BehindCamera;
        }
        Projection::Visible { u: self.fx * p.x / p.z + self.cx, v: self.fy * p.y / p.z + self.cy, depth: p.z }
    }

    /// Camera-space direction through the center of pixel `(row, col)`, with z = 1 so that
    /// the ray parameter equals depth.
    pub fn pixel_ray(&self, row: usize, col: usize) -> Vec3<T> {
        let half = T::of(0.5);
        let u = T::of(col as f64) + half;
        let v = T::of(row as f64) + half;
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, T::one())
    }

    /// Rescales the image size, scaling intrinsics to keep the same field of view.
    pub fn resized(&self, width: usize, height: usize) -> Self {
        let sx = T::of(width as f64 / self.width as f64);
        let sy = T::of(height as f64 / self.height as f64);
        Self {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width,
            height,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HumanSpec<T> {
    pub beta: ShapeVector<T>,
    pub pose: PoseSpec<T>,
    /// Five image-space points: two eyes, nose, two mouth corners.
    pub face_landmarks: Option<Vec<[T; 2]>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec<T> {
    pub camera: Camera<T>,
    pub humans: Vec<HumanSpec<T>>,
    pub model_ref: String,
}

/// A scene that passed [`validate_scene`] against a particular model.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedScene<T>(SceneSpec<T>);

impl<T> CheckedScene<T> {
    pub fn spec(&self) -> &SceneSpec<T> {
        &self.0
    }

    pub fn into_spec(self) -> SceneSpec<T> {
        self.0
    }
}

impl<T> std::ops::Deref for CheckedScene<T> {
    type Target = SceneSpec<T>;

    fn deref(&self) -> &SceneSpec<T> {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("invalid scene: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("scene document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

struct Checker(Vec<Violation>);

impl Checker {
    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation { path: path.into(), message: message.into() });
    }

    fn finite<T: Scalar>(&mut self, path: &str, values: &[T]) {
        if values.iter().any(|v| !v.is_finite()) {
            self.fail(path, "non-finite value");
        }
    }
}

/// Checks every scene invariant, reporting all violations with a path into the document.
pub fn validate_scene<T: Scalar>(spec: SceneSpec<T>, model: &BodyModel<T>) -> Result<CheckedScene<T>, SceneError> {
    let mut c = Checker(Vec::new());
    let cam = &spec.camera;

    c.finite("camera", &[cam.fx, cam.fy, cam.cx, cam.cy, cam.near, cam.depth_clip]);
    if !(cam.fx > T::zero()) {
        c.fail("camera.fx", "must be > 0");
    }
    if !(cam.fy > T::zero()) {
        c.fail("camera.fy", "must be > 0");
    }
    if cam.width < 1 {
        c.fail("camera.width", "must be >= 1");
    }
    if cam.height < 1 {
        c.fail("camera.height", "must be >= 1");
    }
    if !(cam.near > T::zero()) {
        c.fail("camera.near", "must be > 0");
    }
    if !(cam.near < cam.depth_clip) {
        c.fail("camera.depth_clip", "must be greater than near");
    }
    let rot = &cam.extrinsic.rotation;
    if !rot.is_finite() || !cam.extrinsic.translation.is_finite() {
        c.fail("camera.rotation", "non-finite value");
    } else if rot.orthonormality_error().to_f64_lossy() > ROTATION_TOLERANCE
        || (rot.determinant().to_f64_lossy() - 1.0).abs() > ROTATION_TOLERANCE
    {
        c.fail("camera.rotation", "must be a proper rotation matrix");
    }

    if spec.humans.is_empty() {
        c.fail("humans", "scene needs at least one human");
    }
    for (i, h) in spec.humans.iter().enumerate() {
        if h.beta.len() != model.shape_dim() {
            c.fail(format!("humans[{i}].beta"), format!("length {}, model expects {}", h.beta.len(), model.shape_dim()));
        }
        c.finite(&format!("humans[{i}].beta"), h.beta.betas());
        if h.pose.joint_rotations.len() != model.joint_count() {
            c.fail(
                format!("humans[{i}].pose.joint_rotations"),
                format!("length {}, model expects {}", h.pose.joint_rotations.len(), model.joint_count()),
            );
        }
        if let Some(j) = h.pose.joint_rotations.iter().position(|r| !r.is_finite()) {
            c.fail(format!("humans[{i}].pose.joint_rotations[{j}]"), "non-finite value");
        }
        if !h.pose.root_translation.is_finite() {
            c.fail(format!("humans[{i}].pose.root_translation"), "non-finite value");
        }
        if let Some(lm) = &h.face_landmarks {
            if lm.len() != FACE_LANDMARK_COUNT {
                c.fail(format!("humans[{i}].face_landmarks"), format!("expected {FACE_LANDMARK_COUNT} points, got {}", lm.len()));
            }
            if let Some(k) = lm.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
                c.fail(format!("humans[{i}].face_landmarks[{k}]"), "non-finite value");
            }
        }
    }

    if c.0.is_empty() {
        Ok(CheckedScene(spec))
    } else {
        Err(SceneError::Invalid(c.0))
    }
}

fn default_near() -> f64 {
    DEFAULT_NEAR
}

fn default_depth_clip() -> f64 {
    DEFAULT_DEPTH_CLIP
}

fn identity_rows() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

/// Camera block of a scene document. `rotation` is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraDocument {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    #[serde(default = "identity_rows")]
    pub rotation: [[f64; 3]; 3],
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default = "default_near")]
    pub near: f64,
    #[serde(default = "default_depth_clip")]
    pub depth_clip: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseDocument {
    #[serde(default)]
    pub root_translation: [f64; 3],
    pub joint_rotations: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanDocument {
    pub beta: Vec<f64>,
    pub pose: PoseDocument,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_landmarks: Option<Vec<[f64; 2]>>,
}

/// On-disk scene, schema `occond-scene/1`. Lengths in meters, angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDocument {
    pub version: String,
    pub model_ref: String,
    pub camera: CameraDocument,
    pub humans: Vec<HumanDocument>,
}

impl SceneDocument {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| SceneError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let doc: SceneDocument = serde_json::from_str(text)?;
        if doc.version != SCENE_FORMAT_VERSION {
            return Err(SceneError::Invalid(vec![Violation {
                path: "version".into(),
                message: format!("{:?}, expected {SCENE_FORMAT_VERSION:?}", doc.version),
            }]));
        }
        Ok(doc)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene document serializes")
    }

    pub fn to_spec<T: Scalar>(&self) -> SceneSpec<T> {
        let c = &self.camera;
        SceneSpec {
            camera: Camera {
                fx: T::of(c.fx),
                fy: T::of(c.fy),
                cx: T::of(c.cx),
                cy: T::of(c.cy),
                width: c.width,
                height: c.height,
                extrinsic: Extrinsic { rotation: Mat3::from_f64(c.rotation), translation: Vec3::from_f64(c.translation) },
                near: T::of(c.near),
                depth_clip: T::of(c.depth_clip),
            },
            humans: self
                .humans
                .iter()
                .map(|h| HumanSpec {
                    beta: ShapeVector(h.beta.iter().map(|&b| T::of(b)).collect()),
                    pose: PoseSpec {
                        root_translation: Vec3::from_f64(h.pose.root_translation),
                        joint_rotations: h.pose.joint_rotations.iter().map(|&r| Vec3::from_f64(r)).collect(),
                    },
                    face_landmarks: h.face_landmarks.as_ref().map(|lm| lm.iter().map(|p| [T::of(p[0]), T::of(p[1])]).collect()),
                })
                .collect(),
            model_ref: self.model_ref.clone(),
        }
    }

    pub fn from_spec<T: Scalar>(spec: &SceneSpec<T>) -> Self {
        let c = &spec.camera;
        let f = |v: T| v.to_f64_lossy();
        SceneDocument {
            version: SCENE_FORMAT_VERSION.to_string(),
            model_ref: spec.model_ref.clone(),
            camera: CameraDocument {
                fx: f(c.fx),
                fy: f(c.fy),
                cx: f(c.cx),
                cy: f(c.cy),
                width: c.width,
                height: c.height,
                rotation: c.extrinsic.rotation.to_f64(),
                translation: c.extrinsic.translation.to_f64(),
                near: f(c.near),
                depth_clip: f(c.depth_clip),
            },
            humans: spec
                .humans
                .iter()
                .map(|h| HumanDocument {
                    beta: h.beta.betas().iter().map(|&b| f(b)).collect(),
                    pose: PoseDocument {
                        root_translation: h.pose.root_translation.to_f64(),
                        joint_rotations: h.pose.joint_rotations.iter().map(|r| r.to_f64()).collect(),
                    },
                    face_landmarks: h.face_landmarks.as_ref().map(|lm| lm.iter().map(|p| [f(p[0]), f(p[1])]).collect()),
                })
                .collect(),
        }
    }
}
