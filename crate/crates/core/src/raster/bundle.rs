//! Conditioning bundle: raster buffers, occlusion mask and edge maps written to one
//! directory, plus a manifest with input hashes, output-affecting parameters and file hashes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{rasterize_with, RasterDiagnostics, RasterError, RasterOptions};
use crate::bodymodel::BodyModel;
use crate::io::{self, IoError, PfmImage};
use crate::occlusion::{
    edges_with, masked_edges, occlusion_mask, refine_mask, EdgeMethod, OcclusionError, RefineParams,
    OCCLUSION_COUNT_THRESHOLD,
};
use crate::scalar::Scalar;
use crate::scene::{CheckedScene, SceneDocument};

pub const BUNDLE_FORMAT_VERSION: &str = "occond-bundle/1";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEPTH_FILE: &str = "depth.pfm";
pub const NORMAL_FILE: &str = "normal.pfm";
pub const COUNT_FILE: &str = "count.png";
pub const MASK_FILE: &str = "mask.png";
pub const EDGES_FILE: &str = "edges.png";
pub const MASKED_EDGES_FILE: &str = "masked_edges.png";
pub const NORMAL_PNG_FILE: &str = "normal.png";
pub const BUNDLE_FILES: [&str; 6] = [DEPTH_FILE, NORMAL_FILE, COUNT_FILE, MASK_FILE, EDGES_FILE, MASKED_EDGES_FILE];

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Occlusion(#[from] OcclusionError),
    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

/// Everything besides the scene and model that shapes the bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleParams {
    pub refine: RefineParams,
    pub edge: EdgeMethod,
    /// Worker threads; does not affect any output byte.
    pub threads: usize,
    pub normal_png: bool,
}

impl BundleParams {
    pub fn for_image(width: usize, height: usize) -> Self {
        Self { refine: RefineParams::for_image(width, height), edge: EdgeMethod::default(), threads: 0, normal_png: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleInputs {
    pub model_ref: String,
    /// Hash of the canonical scene JSON after all overrides.
    pub scene_sha256: String,
    /// Hash of the canonical body model JSON.
    pub model_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestParameters {
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub depth_clip: f64,
    pub occlusion_count_threshold: u32,
    pub refine: RefineParams,
    pub edge: EdgeMethod,
    pub normal_png: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleFile {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelStats {
    pub covered: usize,
    pub raw_occluded: usize,
    pub mask: usize,
    pub edges: usize,
    pub masked_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub version: String,
    pub inputs: BundleInputs,
    pub parameters: ManifestParameters,
    pub files: Vec<BundleFile>,
    pub diagnostics: RasterDiagnostics,
    pub pixels: PixelStats,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl BundleManifest {
    pub fn load(dir: &Path) -> Result<Self, BundleError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|source| IoError::Io { path: path.clone(), source })?;
        let manifest: BundleManifest = serde_json::from_str(&text)
            .map_err(|e| BundleError::Manifest { path: path.clone(), message: e.to_string() })?;
        if manifest.version != BUNDLE_FORMAT_VERSION {
            return Err(BundleError::Manifest {
                path,
                message: format!("version {:?}, expected {BUNDLE_FORMAT_VERSION:?}", manifest.version),
            });
        }
        Ok(manifest)
    }

    /// Re-hashes every listed file in `dir`.
    pub fn verify(&self, dir: &Path) -> Result<(), BundleError> {
        for f in &self.files {
            let path = dir.join(&f.name);
            let bytes = std::fs::read(&path).map_err(|source| IoError::Io { path: path.clone(), source })?;
            if bytes.len() as u64 != f.bytes || sha256_hex(&bytes) != f.sha256 {
                return Err(BundleError::Manifest { path, message: "content does not match the manifest hash".into() });
            }
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

/// Renders and writes a full bundle into `out_dir`, which must exist.
pub fn render_bundle<T: Scalar>(
    scene: &CheckedScene<T>,
    model: &BodyModel<T>,
    out_dir: &Path,
    params: BundleParams,
) -> Result<BundleManifest, BundleError> {
    let cam = &scene.camera;
    let buffers = rasterize_with(scene, model, RasterOptions { threads: params.threads, ..RasterOptions::default() })?;
    let raw = occlusion_mask(&buffers.count);
    let mask = refine_mask(&raw.mask, params.refine);
    let edges = edges_with(&buffers.depth, params.edge, cam.depth_clip)?;
    let masked = masked_edges(&edges, &mask)?;

    let mut outputs: Vec<(&str, Vec<u8>)> = vec![
        (DEPTH_FILE, PfmImage::from_grid(&buffers.depth).encode()),
        (NORMAL_FILE, PfmImage::from_vectors(&buffers.normal).encode()),
        (COUNT_FILE, io::encode_count_png(&buffers.count)),
        (MASK_FILE, io::encode_mask_png(&mask.mask)),
        (EDGES_FILE, io::encode_mask_png(&edges.edges)),
        (MASKED_EDGES_FILE, io::encode_mask_png(&masked.edges)),
    ];
    if params.normal_png {
        outputs.push((NORMAL_PNG_FILE, io::encode_normal_png(&buffers.normal)));
    }
    let mut files = Vec::with_capacity(outputs.len());
    for (name, bytes) in &outputs {
        io::write_bytes(&out_dir.join(name), bytes)?;
        files.push(BundleFile { name: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
    }

    let scene_json = serde_json::to_string(&SceneDocument::from_spec(scene.spec())).expect("scene serializes");
    let manifest = BundleManifest {
        version: BUNDLE_FORMAT_VERSION.to_string(),
        inputs: BundleInputs {
            model_ref: scene.model_ref.clone(),
            scene_sha256: sha256_hex(scene_json.as_bytes()),
            model_sha256: sha256_hex(model.to_json().as_bytes()),
        },
        parameters: ManifestParameters {
            width: cam.width,
            height: cam.height,
            near: cam.near.to_f64_lossy(),
            depth_clip: cam.depth_clip.to_f64_lossy(),
            occlusion_count_threshold: OCCLUSION_COUNT_THRESHOLD,
            refine: params.refine,
            edge: params.edge,
            normal_png: params.normal_png,
        },
        files,
        diagnostics: buffers.diagnostics,
        pixels: PixelStats {
            covered: buffers.count.as_slice().iter().filter(|&&c| c > 0).count(),
            raw_occluded: raw.mask.count_set(),
            mask: mask.mask.count_set(),
            edges: edges.edges.count_set(),
            masked_edges: masked.edges.count_set(),
        },
    };
    io::write_bytes(&out_dir.join(MANIFEST_FILE), manifest.to_json_pretty().as_bytes())?;
    Ok(manifest)
}
