//! Occlusion-aware conditioning for multi-human image generation: a parametric body model,
//! a deterministic depth/normal/face-count renderer, occlusion masks and depth edges,
//! spatially varying guidance math, body-shape control and geometry-level metrics.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The aliases below fix the
//! scalar for callers that do not need the choice.

pub mod bodymodel;
pub mod geom;
pub mod grid;
pub mod guidance;
pub mod io;
pub mod metrics;
pub mod occlusion;
pub mod raster;
pub mod scalar;
pub mod scene;
pub mod shapectl;

pub use grid::{BinaryMap, Grid, SizeMismatch};
pub use scalar::{lerp_exact, Scalar};

pub type Vec3f = geom::Vec3<f32>;
pub type Vec3d = geom::Vec3<f64>;
pub type Mat3f = geom::Mat3<f32>;
pub type Mat3d = geom::Mat3<f64>;

pub type BodyModelF32 = bodymodel::BodyModel<f32>;
pub type BodyModelF64 = bodymodel::BodyModel<f64>;
pub type ShapeVectorF32 = bodymodel::ShapeVector<f32>;
pub type ShapeVectorF64 = bodymodel::ShapeVector<f64>;
pub type PoseSpecF32 = bodymodel::PoseSpec<f32>;
pub type PoseSpecF64 = bodymodel::PoseSpec<f64>;

pub type CameraF32 = scene::Camera<f32>;
pub type CameraF64 = scene::Camera<f64>;
pub type SceneSpecF32 = scene::SceneSpec<f32>;
pub type SceneSpecF64 = scene::SceneSpec<f64>;

pub type RasterBuffersF32 = raster::RasterBuffers<f32>;
pub type RasterBuffersF64 = raster::RasterBuffers<f64>;

pub type FieldF32 = guidance::Field<f32>;
pub type FieldF64 = guidance::Field<f64>;
pub type GuidanceParamsF32 = guidance::GuidanceParams<f32>;
pub type GuidanceParamsF64 = guidance::GuidanceParams<f64>;
