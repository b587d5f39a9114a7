//! `occond` command line: conditioning bundles, guidance math on PFM fields, shape blending,
//! metric evaluation and bundle previews.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use occond_core::bodymodel::{make_fixture_body, BodyError, BodyModel, ShapeVector};
use occond_core::guidance::{occ_cfg, Field, GuidanceError, GuidanceParams, DEFAULT_K_BASE, DEFAULT_K_OCC};
use occond_core::io::{self, IoError, PfmImage};
use occond_core::metrics::{
    evaluate, EvalDocument, KeypointSigmas, Metric, MetricConfig, MetricError, MpjpeOptions, DEFAULT_KEYPOINT_SIGMA,
    DEFAULT_OKS_THRESHOLD, DEFAULT_ROOT_JOINT,
};
use occond_core::occlusion::{EdgeMethod, RefineParams, DEFAULT_CANNY_HIGH, DEFAULT_CANNY_LOW};
use occond_core::raster::{
    render_bundle, BundleError, BundleParams, DEPTH_FILE, EDGES_FILE, MASKED_EDGES_FILE, MASK_FILE, NORMAL_FILE,
};
use occond_core::scene::{validate_scene, SceneDocument, SceneError, Violation};
use occond_core::shapectl::{blend_shapes, ShapeError};
use occond_core::Grid;

/// Caps rasterizer worker threads; 0 or unset picks automatically.
pub const THREADS_ENV: &str = "OCCOND_THREADS";
pub const FIXTURE_PREFIX: &str = "fixture:";

#[derive(Debug, Parser)]
#[command(name = "occond", version, about = "Occlusion-aware conditioning for multi-human generation")]
pub struct Cli {
    /// Print errors on stderr as a JSON object.
    #[arg(long, global = true)]
    pub json_errors: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a scene into a conditioning bundle.
    Render(RenderArgs),
    /// Apply occlusion-aware guidance to two PFM predictions.
    Occcfg(OcccfgArgs),
    /// Compute metrics from an annotation file.
    Eval(EvalArgs),
    /// Compose a side-by-side preview of a bundle.
    Preview(PreviewArgs),
    /// Body shape control.
    #[command(subcommand)]
    Shape(ShapeCommand),
    /// Write a procedurally generated body model.
    Fixture(FixtureArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EdgeMethodArg {
    Canny,
    Gradient,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Body model JSON; defaults to the scene's model_ref.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Output size as WxH; intrinsics are rescaled.
    #[arg(long, value_parser = parse_size)]
    pub size: Option<(usize, usize)>,
    /// Minimum occlusion component area in pixels [default: 50 scaled to the image area].
    #[arg(long)]
    pub area_min: Option<usize>,
    /// Mask dilation radius in pixels [default: 3 scaled to the image side].
    #[arg(long)]
    pub dilation: Option<u32>,
    #[arg(long, value_enum, default_value = "canny")]
    pub edge_method: EdgeMethodArg,
    /// Gradient threshold in meters per pixel.
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    #[arg(long, default_value_t = DEFAULT_CANNY_LOW)]
    pub canny_low: f64,
    #[arg(long, default_value_t = DEFAULT_CANNY_HIGH)]
    pub canny_high: f64,
    /// Overrides the scene camera's depth clip, meters.
    #[arg(long)]
    pub depth_clip: Option<f64>,
    /// Also write normal.png.
    #[arg(long)]
    pub normal_png: bool,
}

#[derive(Debug, Args)]
pub struct OcccfgArgs {
    #[arg(long)]
    pub uncond: PathBuf,
    #[arg(long)]
    pub cond: PathBuf,
    /// 8-bit grayscale PNG read as weights v/255.
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K_BASE)]
    pub k_base: f64,
    #[arg(long, default_value_t = DEFAULT_K_OCC)]
    pub k_occ: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Face,
    Body,
    Mpjpe,
    Ap,
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    /// Repeatable.
    #[arg(long, value_enum, default_values_t = [MetricArg::All])]
    pub metric: Vec<MetricArg>,
    /// OKS threshold for AP.
    #[arg(long, default_value_t = DEFAULT_OKS_THRESHOLD)]
    pub threshold: f64,
    /// Keypoint falloff σ for OKS.
    #[arg(long, default_value_t = DEFAULT_KEYPOINT_SIGMA)]
    pub sigma: f64,
    /// MPJPE without root alignment.
    #[arg(long)]
    pub absolute: bool,
    #[arg(long, default_value_t = DEFAULT_ROOT_JOINT)]
    pub root_joint: usize,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PreviewArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ShapeCommand {
    /// γ·a + (1 − γ)·b.
    Lerp {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        gamma: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long, default_value = "capsule-person")]
    pub preset: String,
    #[arg(long, default_value_t = 1)]
    pub detail: u32,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        return Err("size must be positive".into());
    }
    Ok((w, h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Validation,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Validation => 1,
            ErrorKind::Io => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::Validation, message: message.into(), path: None, violations: Vec::new() }
    }

    pub fn io(path: &Path, message: impl fmt::Display) -> Self {
        Self {
            kind: ErrorKind::Io,
            message: format!("{}: {message}", path.display()),
            path: Some(path.display().to_string()),
            violations: Vec::new(),
        }
    }

    pub fn at(mut self, path: impl Into<String>) -> Self {
        self.path = Some(path.into());
        self
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)?;
        for v in &self.violations {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for CliError {}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        let path = e.path().display().to_string();
        let kind = match e {
            IoError::Io { .. } => ErrorKind::Io,
            IoError::Format { .. } | IoError::Image { .. } => ErrorKind::Validation,
        };
        Self { kind, message: e.to_string(), path: Some(path), violations: Vec::new() }
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::Invalid(violations) => {
                Self { kind: ErrorKind::Validation, message: "invalid scene".into(), path: None, violations }
            }
            SceneError::Json(e) => CliError::validation(format!("scene document: {e}")),
            SceneError::Io { path, source } => CliError::io(Path::new(&path), source),
        }
    }
}

impl From<BodyError> for CliError {
    fn from(e: BodyError) -> Self {
        match e {
            BodyError::Io { path, source } => CliError::io(Path::new(&path), source),
            other => CliError::validation(format!("body model: {other}")),
        }
    }
}

impl From<BundleError> for CliError {
    fn from(e: BundleError) -> Self {
        match e {
            BundleError::Io(e) => e.into(),
            BundleError::Raster(occond_core::raster::RasterError::Body(e)) => e.into(),
            other => CliError::validation(other.to_string()),
        }
    }
}

impl From<GuidanceError> for CliError {
    fn from(e: GuidanceError) -> Self {
        CliError::validation(e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::Schema { path, message } => CliError::validation(format!("{path}: {message}")).at(path),
            MetricError::Io { path, message } => CliError::io(Path::new(&path), message),
            other => CliError::validation(other.to_string()),
        }
    }
}

impl From<ShapeError> for CliError {
    fn from(e: ShapeError) -> Self {
        CliError::validation(e.to_string())
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Worker threads from the environment; unset means 0.
pub fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::validation(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
    }
}

/// `fixture:<preset>:<detail>` or a path relative to the scene file.
pub fn resolve_model(model_ref: &str, scene_path: &Path) -> Result<BodyModel<f64>, CliError> {
    if let Some(rest) = model_ref.strip_prefix(FIXTURE_PREFIX) {
        let (preset, detail) = match rest.rsplit_once(':') {
            Some((p, d)) => {
                let d = d.parse().map_err(|_| CliError::validation(format!("bad fixture detail in {model_ref:?}")).at("model_ref"))?;
                (p, d)
            }
            None => (rest, 1),
        };
        return make_fixture_body(preset, detail).map_err(|e| CliError::from(e).at("model_ref"));
    }
    let base = scene_path.parent().unwrap_or(Path::new(""));
    Ok(BodyModel::load(base.join(model_ref))?)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Render(a) => cmd_render(&a),
        Command::Occcfg(a) => cmd_occcfg(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Preview(a) => cmd_preview(&a),
        Command::Shape(ShapeCommand::Lerp { a, b, gamma, out }) => cmd_shape_lerp(&a, &b, gamma, &out),
        Command::Fixture(a) => cmd_fixture(&a),
    }
}

pub fn cmd_render(args: &RenderArgs) -> Result<(), CliError> {
    let doc = SceneDocument::load(&args.scene)?;
    let mut spec = doc.to_spec::<f64>();
    if let Some((w, h)) = args.size {
        spec.camera = spec.camera.resized(w, h);
    }
    if let Some(clip) = args.depth_clip {
        spec.camera.depth_clip = clip;
    }
    let model = match &args.model {
        Some(p) => BodyModel::load(p)?,
        None => resolve_model(&spec.model_ref, &args.scene)?,
    };
    let scene = validate_scene(spec, &model)?;
    let (w, h) = (scene.camera.width, scene.camera.height);
    let defaults = RefineParams::for_image(w, h);
    let refine = RefineParams {
        area_min: args.area_min.unwrap_or(defaults.area_min),
        dilation_radius: args.dilation.unwrap_or(defaults.dilation_radius),
    };
    let edge = match args.edge_method {
        EdgeMethodArg::Canny => EdgeMethod::Canny { low: args.canny_low, high: args.canny_high },
        EdgeMethodArg::Gradient => EdgeMethod::Gradient { tau: args.tau },
    };
    let params = BundleParams { refine, edge, threads: threads_from_env()?, normal_png: args.normal_png };
    std::fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let manifest = render_bundle(&scene, &model, &args.out, params)?;
    log::info!(
        "{}x{} bundle in {}: {} covered, {} masked pixels",
        w,
        h,
        args.out.display(),
        manifest.pixels.covered,
        manifest.pixels.mask
    );
    Ok(())
}

fn read_field(path: &Path) -> Result<Field<f64>, CliError> {
    let img = io::read_pfm(path)?;
    Ok(Field::new(img.width, img.height, img.channels, img.data.iter().map(|&v| v as f64).collect())
        .map_err(|e| CliError::validation(e.to_string()).at(path.display().to_string()))?)
}

pub fn occcfg_comment(k_base: f64, k_occ: f64) -> String {
    format!("occcfg k_base={k_base} k_occ={k_occ}")
}

pub fn cmd_occcfg(args: &OcccfgArgs) -> Result<(), CliError> {
    let uncond = read_field(&args.uncond)?;
    let cond = read_field(&args.cond)?;
    let mask: Grid<f64> = io::read_weight_png(&args.mask)?;
    let out = occ_cfg(&uncond, &cond, &mask, GuidanceParams { k_base: args.k_base, k_occ: args.k_occ })?;
    let img = PfmImage {
        width: out.width(),
        height: out.height(),
        channels: out.channels(),
        data: out.as_slice().iter().map(|&v| v as f32).collect(),
        comments: vec![occcfg_comment(args.k_base, args.k_occ)],
    };
    Ok(io::write_pfm(&args.out, &img)?)
}

fn metrics_of(args: &[MetricArg]) -> Vec<Metric> {
    if args.contains(&MetricArg::All) {
        return Metric::ALL.to_vec();
    }
    args.iter()
        .map(|m| match m {
            MetricArg::Face => Metric::Face,
            MetricArg::Body => Metric::Body,
            MetricArg::Mpjpe => Metric::Mpjpe,
            MetricArg::Ap | MetricArg::All => Metric::Ap,
        })
        .collect()
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let doc = EvalDocument::from_json(&read_text(&args.annotations)?)?;
    let config = MetricConfig {
        oks_threshold: args.threshold,
        sigmas: KeypointSigmas::Uniform(args.sigma),
        mpjpe: MpjpeOptions { root_joint: args.root_joint, root_align: !args.absolute },
        ..MetricConfig::default()
    };
    let report = evaluate(&doc, &metrics_of(&args.metric), &config)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match &args.out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFile {
    pub betas: Vec<f64>,
}

fn read_shape(path: &Path) -> Result<ShapeVector<f64>, CliError> {
    let f: ShapeFile = serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::validation(format!("{}: {e}", path.display())).at(path.display().to_string()))?;
    Ok(ShapeVector(f.betas))
}

pub fn cmd_shape_lerp(a: &Path, b: &Path, gamma: f64, out: &Path) -> Result<(), CliError> {
    let blended = blend_shapes(&read_shape(a)?, &read_shape(b)?, gamma)?;
    let text = serde_json::to_string_pretty(&ShapeFile { betas: blended.0 }).expect("shape serializes") + "\n";
    write_text(out, &text)
}

pub fn cmd_fixture(args: &FixtureArgs) -> Result<(), CliError> {
    let model: BodyModel<f64> = make_fixture_body(&args.preset, args.detail)?;
    Ok(model.save(&args.out)?)
}

/// Overlay tint for masked pixels over a gray level `g`.
pub fn mask_tint(g: u8) -> [u8; 3] {
    [255, g / 2, g / 2]
}

/// Hit pixels scaled so the nearest is white and the farthest is dark gray; no hit is black.
pub fn depth_gray(depth: &[f32]) -> Vec<u8> {
    let hits = depth.iter().copied().filter(|d| d.is_finite());
    let (lo, hi) = hits.fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
    depth
        .iter()
        .map(|&d| {
            if !d.is_finite() {
                0
            } else if hi > lo {
                (55.0 + 200.0 * (hi - d) / (hi - lo)).round() as u8
            } else {
                255
            }
        })
        .collect()
}

pub fn cmd_preview(args: &PreviewArgs) -> Result<(), CliError> {
    let dir = &args.bundle;
    let depth = io::read_pfm(&dir.join(DEPTH_FILE))?;
    let normal = io::read_pfm(&dir.join(NORMAL_FILE))?;
    let mask = io::read_mask_png(&dir.join(MASK_FILE))?;
    let edges = io::read_mask_png(&dir.join(EDGES_FILE))?;
    let masked = io::read_mask_png(&dir.join(MASKED_EDGES_FILE))?;
    let (w, h) = (depth.width, depth.height);
    let sizes_ok = depth.channels == 1
        && normal.channels == 3
        && (normal.width, normal.height) == (w, h)
        && [&mask, &edges, &masked].iter().all(|m| (m.width(), m.height()) == (w, h));
    if !sizes_ok {
        return Err(CliError::validation(format!("{}: bundle buffers disagree in size or layout", dir.display())));
    }
    let gray = depth_gray(&depth.data);
    let mut rgb = vec![0u8; 4 * w * h * 3];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let g = gray[i];
            let n = &normal.data[i * 3..i * 3 + 3];
            let normal_px = if n.iter().all(|&v| v == 0.0) { [0; 3] } else { [0, 1, 2].map(|k| io::normal_byte(n[k] as f64)) };
            let overlay = if mask.as_slice()[i] { mask_tint(g) } else { [g; 3] };
            let edge_px = if masked.as_slice()[i] {
                [255, 0, 0]
            } else if edges.as_slice()[i] {
                [255; 3]
            } else {
                [0; 3]
            };
            for (panel, px) in [[g; 3], normal_px, overlay, edge_px].into_iter().enumerate() {
                let o = (r * 4 * w + panel * w + c) * 3;
                rgb[o..o + 3].copy_from_slice(&px);
            }
        }
    }
    Ok(io::write_bytes(&args.out, &io::encode_rgb_png(4 * w, h, rgb))?)
}
