//! Geometry-level evaluation: face identity similarity, body shape similarity, root-aligned
//! MPJPE and single-threshold keypoint AP, computed from precomputed embeddings,
//! shape vectors and joint sets.
//!
//! Face and body scores average per image first, then across images. MPJPE and AP follow
//! the same two-level scheme.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bodymodel::ShapeVector;
use crate::geom::Vec3;
use crate::scalar::Scalar;
use crate::shapectl::{cosine_similarity, ShapeError};

pub const EVAL_FORMAT_VERSION: &str = "occond-eval/1";
pub const FACE_EMBEDDING_DIM: usize = 512;
pub const DEFAULT_OKS_THRESHOLD: f64 = 0.5;
pub const DEFAULT_KEYPOINT_SIGMA: f64 = 0.05;
/// Pelvis.
pub const DEFAULT_ROOT_JOINT: usize = 0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("image {image}, pair {pair}: {source}")]
    Pair { image: usize, pair: usize, source: ShapeError },
    #[error("image {0} has no humans to compare")]
    EmptyImage(usize),
    #[error("no images to evaluate")]
    NoImages,
    #[error("no matched humans in any image")]
    NoMatches,
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> MetricError {
    MetricError::Schema { path: path.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceEmbedding<T>(Vec<T>);

impl<T: Scalar> FaceEmbedding<T> {
    pub fn new(values: Vec<T>) -> Result<Self, MetricError> {
        if values.len() != FACE_EMBEDDING_DIM {
            return Err(MetricError::Invalid(format!(
                "face embedding has {} values, expected {FACE_EMBEDDING_DIM}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MetricError::Invalid("face embedding is not finite".into()));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

/// Joint positions of one human, millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSet3D<T> {
    pub joints: Vec<Vec3<T>>,
    pub human_id: Option<String>,
}

impl<T: Scalar> JointSet3D<T> {
    pub fn new(joints: Vec<Vec3<T>>) -> Self {
        Self { joints, human_id: None }
    }
}

/// 2D keypoints of one human in pixels, with an object-area proxy in pixels².
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoints2D<T> {
    pub points: Vec<[T; 2]>,
    pub visible: Vec<bool>,
    pub scale: T,
}

/// Mean of per-image values plus the per-image breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate<T> {
    pub value: T,
    pub per_image: Vec<T>,
}

fn mean<T: Scalar>(values: &[T]) -> T {
    values.iter().fold(T::zero(), |a, &v| a + v) / T::of(values.len() as f64)
}

fn two_level<T: Scalar, P>(
    images: &[Vec<P>],
    mut term: impl FnMut(usize, usize, &P) -> Result<T, MetricError>,
) -> Result<Aggregate<T>, MetricError> {
    if images.is_empty() {
        return Err(MetricError::NoImages);
    }
    let mut per_image = Vec::with_capacity(images.len());
    for (i, pairs) in images.iter().enumerate() {
        if pairs.is_empty() {
            return Err(MetricError::EmptyImage(i));
        }
        let terms = pairs.iter().enumerate().map(|(j, p)| term(i, j, p)).collect::<Result<Vec<_>, _>>()?;
        per_image.push(mean(&terms));
    }
    Ok(Aggregate { value: mean(&per_image), per_image })
}

/// Face identity preservation: per pair `max(0, cos)`, averaged over humans, then images.
pub fn s_face<T: Scalar>(images: &[Vec<(FaceEmbedding<T>, FaceEmbedding<T>)>]) -> Result<Aggregate<T>, MetricError> {
    two_level(images, |image, pair, (r, g)| {
        cosine_similarity(r.as_slice(), g.as_slice())
            .map(|c| c.max(T::zero()))
            .map_err(|source| MetricError::Pair { image, pair, source })
    })
}

/// Body shape preservation: plain cosine per pair (may be negative), two-level mean.
pub fn s_body<T: Scalar>(images: &[Vec<(ShapeVector<T>, ShapeVector<T>)>]) -> Result<Aggregate<T>, MetricError> {
    two_level(images, |image, pair, (r, g)| {
        cosine_similarity(r.betas(), g.betas()).map_err(|source| MetricError::Pair { image, pair, source })
    })
}

/// Greedy pairing of targets to predictions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Matching {
    /// `(target, prediction)` in the order they were chosen.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_targets: Vec<usize>,
    pub unmatched_predictions: Vec<usize>,
}

/// Repeatedly takes the best remaining pair; ties go to the lower target index, then the
/// lower prediction index.
fn greedy_match(n_targets: usize, n_preds: usize, score: impl Fn(usize, usize) -> f64, higher_is_better: bool) -> Matching {
    let mut candidates: Vec<(f64, usize, usize)> =
        (0..n_targets).flat_map(|t| (0..n_preds).map(move |p| (t, p))).map(|(t, p)| (score(t, p), t, p)).collect();
    candidates.sort_by(|a, b| {
        let by_score = if higher_is_better { b.0.total_cmp(&a.0) } else { a.0.total_cmp(&b.0) };
        by_score.then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    });
    let mut used_t = vec![false; n_targets];
    let mut used_p = vec![false; n_preds];
    let mut pairs = Vec::new();
    for (_, t, p) in candidates {
        if !used_t[t] && !used_p[p] {
            used_t[t] = true;
            used_p[p] = true;
            pairs.push((t, p));
        }
    }
    Matching {
        pairs,
        unmatched_targets: (0..n_targets).filter(|&t| !used_t[t]).collect(),
        unmatched_predictions: (0..n_preds).filter(|&p| !used_p[p]).collect(),
    }
}

/// Pairs humans by root-joint distance.
pub fn match_humans_3d<T: Scalar>(targets: &[JointSet3D<T>], preds: &[JointSet3D<T>], root: usize) -> Result<Matching, MetricError> {
    let root_of = |s: &JointSet3D<T>, what: &str, i: usize| {
        s.joints.get(root).copied().ok_or_else(|| MetricError::Invalid(format!("{what} {i} has no joint {root}")))
    };
    let t_roots = targets.iter().enumerate().map(|(i, s)| root_of(s, "target", i)).collect::<Result<Vec<_>, _>>()?;
    let p_roots = preds.iter().enumerate().map(|(i, s)| root_of(s, "prediction", i)).collect::<Result<Vec<_>, _>>()?;
    Ok(greedy_match(targets.len(), preds.len(), |t, p| t_roots[t].distance(p_roots[p]).to_f64_lossy(), false))
}

/// Pairs humans by descending OKS.
pub fn match_humans_2d<T: Scalar>(targets: &[Keypoints2D<T>], preds: &[Keypoints2D<T>], sigmas: &KeypointSigmas) -> Result<Matching, MetricError> {
    let table = oks_table(targets, preds, sigmas)?;
    Ok(greedy_match(targets.len(), preds.len(), |t, p| table[t][p].to_f64_lossy(), true))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpjpeOptions {
    pub root_joint: usize,
    /// Subtract the root joint of each set before comparing.
    pub root_align: bool,
}

impl Default for MpjpeOptions {
    fn default() -> Self {
        Self { root_joint: DEFAULT_ROOT_JOINT, root_align: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpjpeResult<T> {
    pub value_mm: T,
    /// `None` for images without a matched pair.
    pub per_image: Vec<Option<T>>,
    pub unmatched: usize,
}

/// Mean per-joint position error of one matched pair.
pub fn pair_mpjpe<T: Scalar>(target: &JointSet3D<T>, estimate: &JointSet3D<T>, opts: MpjpeOptions) -> Result<T, MetricError> {
    if target.joints.len() != estimate.joints.len() || target.joints.is_empty() {
        return Err(MetricError::Invalid(format!(
            "joint counts differ or are empty: {} vs {}",
            target.joints.len(),
            estimate.joints.len()
        )));
    }
    let (rt, re) = if opts.root_align {
        let get = |s: &JointSet3D<T>| {
            s.joints.get(opts.root_joint).copied().ok_or_else(|| MetricError::Invalid(format!("no root joint {}", opts.root_joint)))
        };
        (get(target)?, get(estimate)?)
    } else {
        (Vec3::zero(), Vec3::zero())
    };
    let errors: Vec<T> = target.joints.iter().zip(&estimate.joints).map(|(&a, &b)| (a - rt).distance(b - re)).collect();
    Ok(mean(&errors))
}

/// Matched humans per image, unmatched ones excluded and counted.
pub fn mpjpe<T: Scalar>(targets: &[Vec<JointSet3D<T>>], estimates: &[Vec<JointSet3D<T>>], opts: MpjpeOptions) -> Result<MpjpeResult<T>, MetricError> {
    if targets.len() != estimates.len() {
        return Err(MetricError::Invalid(format!("{} target images vs {} estimated", targets.len(), estimates.len())));
    }
    if targets.is_empty() {
        return Err(MetricError::NoImages);
    }
    let mut per_image = Vec::with_capacity(targets.len());
    let mut unmatched = 0;
    for (t, e) in targets.iter().zip(estimates) {
        let m = match_humans_3d(t, e, opts.root_joint)?;
        unmatched += m.unmatched_targets.len() + m.unmatched_predictions.len();
        if m.pairs.is_empty() {
            per_image.push(None);
            continue;
        }
        let errs = m.pairs.iter().map(|&(a, b)| pair_mpjpe(&t[a], &e[b], opts)).collect::<Result<Vec<_>, _>>()?;
        per_image.push(Some(mean(&errs)));
    }
    let scored: Vec<T> = per_image.iter().flatten().copied().collect();
    if scored.is_empty() {
        return Err(MetricError::NoMatches);
    }
    if unmatched > 0 {
        log::warn!("{unmatched} humans without a counterpart excluded from MPJPE");
    }
    Ok(MpjpeResult { value_mm: mean(&scored), per_image, unmatched })
}

/// Per-keypoint falloff σ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KeypointSigmas {
    Uniform(f64),
    PerKeypoint(Vec<f64>),
}

impl Default for KeypointSigmas {
    fn default() -> Self {
        KeypointSigmas::Uniform(DEFAULT_KEYPOINT_SIGMA)
    }
}

impl KeypointSigmas {
    fn get(&self, j: usize) -> Result<f64, MetricError> {
        match self {
            KeypointSigmas::Uniform(s) => Ok(*s),
            KeypointSigmas::PerKeypoint(v) => {
                v.get(j).copied().ok_or_else(|| MetricError::Invalid(format!("no sigma for keypoint {j}")))
            }
        }
    }
}

/// Object keypoint similarity: mean over the target's visible keypoints of
/// `exp(−d² / (2·scale·σ²))`. Zero when the target has no visible keypoint.
pub fn oks<T: Scalar>(target: &Keypoints2D<T>, pred: &Keypoints2D<T>, sigmas: &KeypointSigmas) -> Result<T, MetricError> {
    if target.points.len() != pred.points.len() || target.visible.len() != target.points.len() {
        return Err(MetricError::Invalid(format!(
            "keypoint counts differ: {} vs {}",
            target.points.len(),
            pred.points.len()
        )));
    }
    if !(target.scale > T::zero()) {
        return Err(MetricError::Invalid(format!("keypoint scale must be > 0, got {}", target.scale)));
    }
    let (mut sum, mut n) = (T::zero(), 0usize);
    for (j, (t, p)) in target.points.iter().zip(&pred.points).enumerate() {
        if !target.visible[j] {
            continue;
        }
        let sigma = T::of(sigmas.get(j)?);
        let d2 = (t[0] - p[0]).powi(2) + (t[1] - p[1]).powi(2);
        sum = sum + (-d2 / (T::of(2.0) * target.scale * sigma * sigma)).exp();
        n += 1;
    }
    Ok(if n == 0 { T::zero() } else { sum / T::of(n as f64) })
}

fn oks_table<T: Scalar>(targets: &[Keypoints2D<T>], preds: &[Keypoints2D<T>], sigmas: &KeypointSigmas) -> Result<Vec<Vec<T>>, MetricError> {
    targets.iter().map(|t| preds.iter().map(|p| oks(t, p, sigmas)).collect()).collect()
}

/// Single-threshold AP for one image: greedy descending-OKS matching, a pair with
/// `OKS >= threshold` is a true positive, and `AP = TP / max(#targets, #predictions)`.
pub fn ap_at_oks<T: Scalar>(targets: &[Keypoints2D<T>], preds: &[Keypoints2D<T>], threshold: T, sigmas: &KeypointSigmas) -> Result<T, MetricError> {
    match (targets.is_empty(), preds.is_empty()) {
        (true, true) => {
            log::warn!("AP of an image without targets or predictions is taken as 1");
            return Ok(T::one());
        }
        (true, false) | (false, true) => return Ok(T::zero()),
        _ => {}
    }
    let table = oks_table(targets, preds, sigmas)?;
    let m = greedy_match(targets.len(), preds.len(), |t, p| table[t][p].to_f64_lossy(), true);
    let tp = m.pairs.iter().filter(|&&(t, p)| table[t][p] >= threshold).count();
    Ok(T::of(tp as f64) / T::of(targets.len().max(preds.len()) as f64))
}

/// Mean of per-image AP.
pub fn ap_over_images<T: Scalar>(
    targets: &[Vec<Keypoints2D<T>>],
    preds: &[Vec<Keypoints2D<T>>],
    threshold: T,
    sigmas: &KeypointSigmas,
) -> Result<Aggregate<T>, MetricError> {
    if targets.len() != preds.len() {
        return Err(MetricError::Invalid(format!("{} target images vs {} predicted", targets.len(), preds.len())));
    }
    if targets.is_empty() {
        return Err(MetricError::NoImages);
    }
    let per_image = targets.iter().zip(preds).map(|(t, p)| ap_at_oks(t, p, threshold, sigmas)).collect::<Result<Vec<_>, _>>()?;
    Ok(Aggregate { value: mean(&per_image), per_image })
}

// ---------------------------------------------------------------------------------------
// Annotation documents and reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointsDocument {
    /// `[u, v, visibility]` per keypoint, visibility 0 or 1.
    pub points: Vec<[f64; 3]>,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct HumanAnnotation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joints3d_mm: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints2d: Option<KeypointsDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageAnnotation {
    #[serde(default)]
    pub id: String,
    pub reference: Vec<HumanAnnotation>,
    pub generated: Vec<HumanAnnotation>,
}

/// Evaluation input, schema `occond-eval/1`: per image, reference humans (the requested
/// conditioning) and humans recovered from the generated image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalDocument {
    pub version: String,
    pub images: Vec<ImageAnnotation>,
}

impl EvalDocument {
    pub fn from_json(text: &str) -> Result<Self, MetricError> {
        let doc: EvalDocument = serde_json::from_str(text).map_err(|e| schema("$", e.to_string()))?;
        if doc.version != EVAL_FORMAT_VERSION {
            return Err(schema("version", format!("{:?}, expected {EVAL_FORMAT_VERSION:?}", doc.version)));
        }
        Ok(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| MetricError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Face,
    Body,
    Mpjpe,
    Ap,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Face, Metric::Body, Metric::Mpjpe, Metric::Ap];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub oks_threshold: f64,
    pub sigmas: KeypointSigmas,
    pub mpjpe: MpjpeOptions,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            oks_threshold: DEFAULT_OKS_THRESHOLD,
            sigmas: KeypointSigmas::default(),
            mpjpe: MpjpeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ImageBreakdown {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_face: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_body: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mpjpe_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap_05: Option<f64>,
}

/// Aggregates are the means of the non-empty per-image entries. `ap_05` is AP at
/// `config.oks_threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub version: String,
    pub metrics: Vec<Metric>,
    pub s_face: Option<f64>,
    pub s_body: Option<f64>,
    pub mpjpe_mm: Option<f64>,
    pub ap_05: Option<f64>,
    pub unmatched_humans: usize,
    pub config: MetricConfig,
    pub per_image: Vec<ImageBreakdown>,
}

fn field<'a, V>(value: &'a Option<V>, path: impl FnOnce() -> String) -> Result<&'a V, MetricError> {
    value.as_ref().ok_or_else(|| schema(path(), "missing field"))
}

fn paired_humans(doc: &EvalDocument) -> Result<(), MetricError> {
    for (i, img) in doc.images.iter().enumerate() {
        if img.reference.len() != img.generated.len() {
            return Err(schema(
                format!("images[{i}].generated"),
                format!("{} humans, reference has {}", img.generated.len(), img.reference.len()),
            ));
        }
    }
    Ok(())
}

fn human_path(i: usize, side: &str, j: usize, name: &str) -> String {
    format!("images[{i}].{side}[{j}].{name}")
}

fn collect_face(doc: &EvalDocument) -> Result<Vec<Vec<(FaceEmbedding<f64>, FaceEmbedding<f64>)>>, MetricError> {
    paired_humans(doc)?;
    doc.images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            img.reference
                .iter()
                .zip(&img.generated)
                .enumerate()
                .map(|(j, (r, g))| {
                    let get = |h: &HumanAnnotation, side: &str| {
                        let path = human_path(i, side, j, "embedding");
                        let v = field(&h.embedding, || path.clone())?;
                        FaceEmbedding::new(v.clone()).map_err(|e| schema(path, e.to_string()))
                    };
                    Ok((get(r, "reference")?, get(g, "generated")?))
                })
                .collect()
        })
        .collect()
}

fn collect_body(doc: &EvalDocument) -> Result<Vec<Vec<(ShapeVector<f64>, ShapeVector<f64>)>>, MetricError> {
    paired_humans(doc)?;
    doc.images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            img.reference
                .iter()
                .zip(&img.generated)
                .enumerate()
                .map(|(j, (r, g))| {
                    let get = |h: &HumanAnnotation, side: &str| {
                        field(&h.betas, || human_path(i, side, j, "betas")).map(|b| ShapeVector(b.clone()))
                    };
                    Ok((get(r, "reference")?, get(g, "generated")?))
                })
                .collect()
        })
        .collect()
}

fn collect_joints(humans: &[HumanAnnotation], i: usize, side: &str) -> Result<Vec<JointSet3D<f64>>, MetricError> {
    humans
        .iter()
        .enumerate()
        .map(|(j, h)| {
            let joints = field(&h.joints3d_mm, || human_path(i, side, j, "joints3d_mm"))?;
            Ok(JointSet3D { joints: joints.iter().map(|&p| Vec3::from_f64(p)).collect(), human_id: h.id.clone() })
        })
        .collect()
}

fn collect_keypoints(humans: &[HumanAnnotation], i: usize, side: &str) -> Result<Vec<Keypoints2D<f64>>, MetricError> {
    humans
        .iter()
        .enumerate()
        .map(|(j, h)| {
            let path = human_path(i, side, j, "keypoints2d");
            let kp = field(&h.keypoints2d, || path.clone())?;
            let mut visible = Vec::with_capacity(kp.points.len());
            for (k, p) in kp.points.iter().enumerate() {
                visible.push(match p[2] {
                    v if v == 0.0 => false,
                    v if v == 1.0 => true,
                    v => return Err(schema(format!("{path}.points[{k}]"), format!("visibility must be 0 or 1, got {v}"))),
                });
            }
            if !(kp.scale > 0.0) {
                return Err(schema(format!("{path}.scale"), "must be > 0"));
            }
            Ok(Keypoints2D { points: kp.points.iter().map(|p| [p[0], p[1]]).collect(), visible, scale: kp.scale })
        })
        .collect()
}

/// Runs the requested metrics over an annotation document.
pub fn evaluate(doc: &EvalDocument, metrics: &[Metric], config: &MetricConfig) -> Result<MetricReport, MetricError> {
    if doc.images.is_empty() {
        return Err(MetricError::NoImages);
    }
    let mut metrics = metrics.to_vec();
    metrics.sort();
    metrics.dedup();
    let mut per_image: Vec<ImageBreakdown> =
        doc.images.iter().map(|img| ImageBreakdown { id: img.id.clone(), ..Default::default() }).collect();
    let mut report = MetricReport {
        version: EVAL_FORMAT_VERSION.to_string(),
        metrics: metrics.clone(),
        s_face: None,
        s_body: None,
        mpjpe_mm: None,
        ap_05: None,
        unmatched_humans: 0,
        config: config.clone(),
        per_image: Vec::new(),
    };

    for metric in &metrics {
        match metric {
            Metric::Face => {
                let agg = s_face(&collect_face(doc)?)?;
                report.s_face = Some(agg.value);
                for (b, v) in per_image.iter_mut().zip(agg.per_image) {
                    b.s_face = Some(v);
                }
            }
            Metric::Body => {
                let agg = s_body(&collect_body(doc)?)?;
                report.s_body = Some(agg.value);
                for (b, v) in per_image.iter_mut().zip(agg.per_image) {
                    b.s_body = Some(v);
                }
            }
            Metric::Mpjpe => {
                let mut targets = Vec::new();
                let mut estimates = Vec::new();
                for (i, img) in doc.images.iter().enumerate() {
                    targets.push(collect_joints(&img.reference, i, "reference")?);
                    estimates.push(collect_joints(&img.generated, i, "generated")?);
                }
                let res = mpjpe(&targets, &estimates, config.mpjpe)?;
                report.mpjpe_mm = Some(res.value_mm);
                report.unmatched_humans = res.unmatched;
                for (b, v) in per_image.iter_mut().zip(res.per_image) {
                    b.mpjpe_mm = v;
                }
            }
            Metric::Ap => {
                let mut targets = Vec::new();
                let mut preds = Vec::new();
                for (i, img) in doc.images.iter().enumerate() {
                    targets.push(collect_keypoints(&img.reference, i, "reference")?);
                    preds.push(collect_keypoints(&img.generated, i, "generated")?);
                }
                let agg = ap_over_images(&targets, &preds, config.oks_threshold, &config.sigmas)?;
                report.ap_05 = Some(agg.value);
                for (b, v) in per_image.iter_mut().zip(agg.per_image) {
                    b.ap_05 = Some(v);
                }
            }
        }
    }
    report.per_image = per_image;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(v: &[f64]) -> FaceEmbedding<f64> {
        let mut full = vec![0.0; FACE_EMBEDDING_DIM];
        full[..v.len()].copy_from_slice(v);
        FaceEmbedding::new(full).unwrap()
    }

    #[test]
    fn face_clamp_and_two_level_mean() {
        let same = (emb(&[1.0, 0.0]), emb(&[1.0, 0.0]));
        let anti = (emb(&[1.0, 0.0]), emb(&[-1.0, 0.0]));
        let agg = s_face(&[vec![same.clone(), anti], vec![same]]).unwrap();
        // image means 0.5 and 1.0; pooled would be 2/3
        assert_eq!(agg.per_image, vec![0.5, 1.0]);
        assert_eq!(agg.value, 0.75);
    }

    #[test]
    fn face_zero_embedding_names_pair() {
        let zero = FaceEmbedding::new(vec![0.0; FACE_EMBEDDING_DIM]).unwrap();
        match s_face(&[vec![(emb(&[1.0]), emb(&[1.0])), (emb(&[1.0]), zero)]]) {
            Err(MetricError::Pair { image: 0, pair: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn body_is_not_clamped() {
        let a = ShapeVector(vec![1.0, 0.0]);
        // cos 120° = -0.5
        let b = ShapeVector(vec![-0.5, 3f64.sqrt() / 2.0]);
        let agg = s_body(&[vec![(a, b)]]).unwrap();
        assert!((agg.value + 0.5).abs() < 1e-15);
    }

    #[test]
    fn mpjpe_hand_fixture() {
        let t = JointSet3D::new(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(100.0, 0.0, 0.0)]);
        let e = JointSet3D::new(vec![Vec3::new(10.0, 10.0, 10.0), Vec3::new(113.0, 14.0, 10.0)]);
        let r = mpjpe(&[vec![t.clone()]], &[vec![e]], MpjpeOptions::default()).unwrap();
        assert_eq!(r.value_mm, 2.5);
        assert_eq!(mpjpe(&[vec![t.clone()]], &[vec![t]], MpjpeOptions::default()).unwrap().value_mm, 0.0);
    }

    #[test]
    fn mpjpe_counts_unmatched() {
        let a = JointSet3D::new(vec![Vec3::new(0.0, 0.0, 0.0)]);
        let b = JointSet3D::new(vec![Vec3::new(5000.0, 0.0, 0.0)]);
        let r = mpjpe(&[vec![a.clone(), b]], &[vec![a]], MpjpeOptions::default()).unwrap();
        assert_eq!(r.unmatched, 1);
        assert_eq!(r.value_mm, 0.0);
    }

    fn kp(points: &[[f64; 2]], scale: f64) -> Keypoints2D<f64> {
        Keypoints2D { points: points.to_vec(), visible: vec![true; points.len()], scale }
    }

    #[test]
    fn ap_examples() {
        let s = KeypointSigmas::default();
        let t = kp(&[[10.0, 10.0], [20.0, 30.0]], 400.0);
        assert_eq!(ap_at_oks(&[t.clone()], &[t.clone()], 0.5, &s).unwrap(), 1.0);
        let t2 = kp(&[[200.0, 10.0], [220.0, 30.0]], 400.0);
        assert_eq!(ap_at_oks(&[t.clone(), t2], &[t.clone()], 0.5, &s).unwrap(), 0.5);
        assert_eq!(ap_at_oks::<f64>(&[], &[], 0.5, &s).unwrap(), 1.0);
        assert_eq!(ap_at_oks(&[t], &[], 0.5, &s).unwrap(), 0.0);
    }

    #[test]
    fn near_tie_goes_to_lower_index() {
        let t = JointSet3D::new(vec![Vec3::new(0.0, 0.0, 0.0)]);
        let p0 = JointSet3D::new(vec![Vec3::new(10.0, 0.0, 0.0)]);
        let p1 = JointSet3D::new(vec![Vec3::new(-10.0, 0.0, 0.0)]);
        let m = match_humans_3d(&[t], &[p0, p1], 0).unwrap();
        assert_eq!(m.pairs, vec![(0, 0)]);
        assert_eq!(m.unmatched_predictions, vec![1]);
    }

    #[test]
    fn missing_embedding_path() {
        let doc = EvalDocument {
            version: EVAL_FORMAT_VERSION.into(),
            images: vec![ImageAnnotation {
                id: "a".into(),
                reference: vec![HumanAnnotation { betas: Some(vec![1.0]), ..Default::default() }],
                generated: vec![HumanAnnotation { betas: Some(vec![1.0]), ..Default::default() }],
            }],
        };
        match evaluate(&doc, &[Metric::Face], &MetricConfig::default()) {
            Err(MetricError::Schema { path, .. }) => assert_eq!(path, "images[0].reference[0].embedding"),
            other => panic!("{other:?}"),
        }
        let r = evaluate(&doc, &[Metric::Body], &MetricConfig::default()).unwrap();
        assert_eq!(r.s_body, Some(1.0));
    }
}
