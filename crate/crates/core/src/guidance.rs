//! Spatially varying classifier-free guidance and masked residual composition as plain
//! elementwise field math. No denoiser lives here; predictions are inputs.

use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::scalar::{lerp_exact, Scalar};

pub const DEFAULT_K_BASE: f64 = 3.0;
pub const DEFAULT_K_OCC: f64 = 5.0;
/// Default residual weight for every conditioning branch.
pub const DEFAULT_CONDITIONING_SCALE: f64 = 0.8;
pub const DEFAULT_TRACE_STEPS: usize = 30;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GuidanceError {
    #[error("{what}: expected {expected}, got {got}")]
    Dimension { what: String, expected: String, got: String },
    #[error("residual {index}: {message}")]
    Residual { index: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("non-finite field value at step {step}")]
    NonFinite { step: usize },
}

/// Height × width × channels, channel-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

/// Noise prediction.
pub type PredictionField<T> = Field<T>;
/// Block output that conditioning residuals are added to.
pub type FeatureField<T> = Field<T>;

impl<T: Scalar> Field<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self, GuidanceError> {
        if channels == 0 {
            return Err(GuidanceError::Invalid("field needs at least one channel".into()));
        }
        if data.len() != width * height * channels {
            return Err(GuidanceError::Dimension {
                what: "field data".into(),
                expected: format!("{} values", width * height * channels),
                got: format!("{}", data.len()),
            });
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: T) -> Self {
        Self::new(width, height, channels, vec![value; width * height * channels]).expect("consistent size")
    }

    pub fn from_fn(width: usize, height: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    data.push(f(r, c, ch));
                }
            }
        }
        Self { width, height, channels, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> T {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    /// Values of pixel `(row, col)` across channels.
    pub fn pixel(&self, row: usize, col: usize) -> &[T] {
        let start = (row * self.width + col) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn shape(&self) -> String {
        format!("{}x{}x{}", self.height, self.width, self.channels)
    }

    fn check_same(&self, other: &Self, what: &str) -> Result<(), GuidanceError> {
        if (self.width, self.height, self.channels) == (other.width, other.height, other.channels) {
            Ok(())
        } else {
            Err(GuidanceError::Dimension { what: what.into(), expected: self.shape(), got: other.shape() })
        }
    }

    fn check_mask(&self, mask: &Grid<T>, what: &str) -> Result<(), GuidanceError> {
        if (mask.width(), mask.height()) == (self.width, self.height) {
            Ok(())
        } else {
            Err(GuidanceError::Dimension {
                what: what.into(),
                expected: format!("{}x{}", self.height, self.width),
                got: format!("{}x{}", mask.height(), mask.width()),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidanceParams<T> {
    pub k_base: T,
    pub k_occ: T,
}

impl<T: Scalar> Default for GuidanceParams<T> {
    fn default() -> Self {
        Self { k_base: T::of(DEFAULT_K_BASE), k_occ: T::of(DEFAULT_K_OCC) }
    }
}

impl<T: Scalar> GuidanceParams<T> {
    pub fn uniform(k: T) -> Self {
        Self { k_base: k, k_occ: k }
    }
}

fn check_weights<T: Scalar>(mask: &Grid<T>) -> Result<(), String> {
    match mask.as_slice().iter().position(|&m| !(m >= T::zero() && m <= T::one())) {
        None => Ok(()),
        Some(i) => Err(format!("mask value {} at index {i} is outside [0, 1]", mask.as_slice()[i])),
    }
}

/// `uncond + k · (cond − uncond)` with a single scale.
pub fn uniform_cfg<T: Scalar>(uncond: &Field<T>, cond: &Field<T>, k: T) -> Result<Field<T>, GuidanceError> {
    uncond.check_same(cond, "conditional prediction")?;
    let data = uncond.data.iter().zip(&cond.data).map(|(&u, &c)| lerp_exact(u, c, k)).collect();
    Field::new(uncond.width, uncond.height, uncond.channels, data)
}

/// Occlusion-aware guidance: the guidance scale at each pixel is
/// `k_occ · M + k_base · (1 − M)`, broadcast over channels.
///
/// Where `M == 0` the result is bitwise the uniform `k_base` result, and a unit scale
/// returns `cond` exactly.
pub fn occ_cfg<T: Scalar>(
    uncond: &Field<T>,
    cond: &Field<T>,
    mask: &Grid<T>,
    params: GuidanceParams<T>,
) -> Result<Field<T>, GuidanceError> {
    uncond.check_same(cond, "conditional prediction")?;
    uncond.check_mask(mask, "guidance mask")?;
    check_weights(mask).map_err(GuidanceError::Invalid)?;
    let ch = uncond.channels;
    let mut data = Vec::with_capacity(uncond.data.len());
    for (p, &m) in mask.as_slice().iter().enumerate() {
        let k = params.k_occ * m + params.k_base * (T::one() - m);
        for i in p * ch..(p + 1) * ch {
            data.push(lerp_exact(uncond.data[i], cond.data[i], k));
        }
    }
    Field::new(uncond.width, uncond.height, ch, data)
}

/// One masked, scaled conditioning residual.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSpec<T> {
    pub field: Field<T>,
    /// Per-pixel weight in `[0, 1]`.
    pub mask: Grid<T>,
    pub scale: T,
}

/// `base + Σ_r scale_r · (mask_r ⊙ field_r)`, accumulated per element in list order.
pub fn compose_residuals<T: Scalar>(base: &Field<T>, residuals: &[ResidualSpec<T>]) -> Result<Field<T>, GuidanceError> {
    for (index, r) in residuals.iter().enumerate() {
        let err = |message: String| GuidanceError::Residual { index, message };
        base.check_same(&r.field, "residual field").map_err(|e| err(e.to_string()))?;
        base.check_mask(&r.mask, "residual mask").map_err(|e| err(e.to_string()))?;
        check_weights(&r.mask).map_err(err)?;
        if !r.field.is_finite() {
            return Err(err("non-finite residual field".into()));
        }
        if !r.scale.is_finite() {
            return Err(err("non-finite scale".into()));
        }
    }
    let ch = base.channels;
    let mut out = base.clone();
    for r in residuals {
        for (p, &m) in r.mask.as_slice().iter().enumerate() {
            for i in p * ch..(p + 1) * ch {
                out.data[i] = out.data[i] + r.scale * (m * r.field.data[i]);
            }
        }
    }
    Ok(out)
}

/// Source index for nearest-neighbor resampling: pixel centers mapped back, floored.
#[inline]
fn nearest_source(dst: usize, dst_len: usize, src_len: usize) -> usize {
    ((2 * dst + 1) * src_len / (2 * dst_len)).min(src_len - 1)
}

/// Nearest-neighbor resampling. Output values are a subset of input values.
pub fn resize_mask<V: Clone>(mask: &Grid<V>, width: usize, height: usize) -> Result<Grid<V>, GuidanceError> {
    if width == 0 || height == 0 || mask.is_empty() {
        return Err(GuidanceError::Invalid("resize needs non-empty source and target".into()));
    }
    Ok(Grid::from_fn(width, height, |r, c| {
        mask.get(nearest_source(r, height, mask.height()), nearest_source(c, width, mask.width())).clone()
    }))
}

/// Nearest-neighbor resampling of every channel.
pub fn resize_field<T: Scalar>(field: &Field<T>, width: usize, height: usize) -> Result<Field<T>, GuidanceError> {
    if width == 0 || height == 0 || field.data.is_empty() {
        return Err(GuidanceError::Invalid("resize needs non-empty source and target".into()));
    }
    Ok(Field::from_fn(width, height, field.channels, |r, c, ch| {
        field.get(nearest_source(r, height, field.height), nearest_source(c, width, field.width), ch)
    }))
}

/// Produces `(uncond, cond)` predictions for a step. Implementations must be pixelwise:
/// an output pixel may depend only on the same input pixel.
pub trait PixelwisePredictor<T> {
    fn predict(&self, step: usize, field: &Field<T>) -> (Field<T>, Field<T>);
}

impl<T, F> PixelwisePredictor<T> for F
where
    F: Fn(usize, &Field<T>) -> (Field<T>, Field<T>),
{
    fn predict(&self, step: usize, field: &Field<T>) -> (Field<T>, Field<T>) {
        self(step, field)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepStats<T> {
    pub step: usize,
    /// Mean |value| over pixels with mask > 0; absent when there are none.
    pub inside_mean_abs: Option<T>,
    /// Mean |value| over pixels with mask == 0; absent when there are none.
    pub outside_mean_abs: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceTrace<T> {
    pub stats: Vec<StepStats<T>>,
    pub final_field: Field<T>,
    /// Field after every step, when requested.
    pub trajectory: Vec<Field<T>>,
}

fn region_means<T: Scalar>(field: &Field<T>, mask: &Grid<T>) -> (Option<T>, Option<T>) {
    let ch = field.channels;
    let (mut inside, mut n_in, mut outside, mut n_out) = (T::zero(), 0usize, T::zero(), 0usize);
    for (p, &m) in mask.as_slice().iter().enumerate() {
        let s = field.data[p * ch..(p + 1) * ch].iter().fold(T::zero(), |a, v| a + v.abs());
        if m > T::zero() {
            inside = inside + s;
            n_in += ch;
        } else {
            outside = outside + s;
            n_out += ch;
        }
    }
    let mean = |sum: T, n: usize| (n > 0).then(|| sum / T::of(n as f64));
    (mean(inside, n_in), mean(outside, n_out))
}

/// Iterates `field ← occ_cfg(predictor(step, field))` for `steps` steps, recording
/// per-region mean absolute values after each step.
pub fn run_guidance_trace<T: Scalar>(
    predictor: &impl PixelwisePredictor<T>,
    init: Field<T>,
    steps: usize,
    mask: &Grid<T>,
    params: GuidanceParams<T>,
    record_trajectory: bool,
) -> Result<GuidanceTrace<T>, GuidanceError> {
    if steps == 0 {
        return Err(GuidanceError::Invalid("steps must be >= 1".into()));
    }
    init.check_mask(mask, "trace mask")?;
    let mut field = init;
    let mut stats = Vec::with_capacity(steps);
    let mut trajectory = Vec::new();
    for step in 0..steps {
        let (uncond, cond) = predictor.predict(step, &field);
        field = occ_cfg(&uncond, &cond, mask, params)?;
        if !field.is_finite() {
            return Err(GuidanceError::NonFinite { step });
        }
        let (inside_mean_abs, outside_mean_abs) = region_means(&field, mask);
        stats.push(StepStats { step, inside_mean_abs, outside_mean_abs });
        if record_trajectory {
            trajectory.push(field.clone());
        }
    }
    Ok(GuidanceTrace { stats, final_field: field, trajectory })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f1(values: &[f64]) -> Field<f64> {
        Field::new(values.len(), 1, 1, values.to_vec()).unwrap()
    }

    #[test]
    fn scalar_pixel_occluded() {
        let out = occ_cfg(&f1(&[0.0]), &f1(&[1.0]), &Grid::filled(1, 1, 1.0), GuidanceParams::default()).unwrap();
        assert_eq!(out.as_slice(), &[5.0]);
    }

    #[test]
    fn mask_off_is_base_cfg() {
        let u = f1(&[0.3, -1.2, 4.0]);
        let c = f1(&[0.7, 2.5, -1.0]);
        let out = occ_cfg(&u, &c, &Grid::filled(3, 1, 0.0), GuidanceParams::default()).unwrap();
        assert_eq!(out, uniform_cfg(&u, &c, 3.0).unwrap());
        assert_eq!(out.as_slice()[0], 0.3 + 3.0 * (0.7 - 0.3));
    }

    #[test]
    fn equal_predictions_pass_through() {
        let u = f1(&[0.1, 0.2]);
        let m = Grid::from_vec(2, 1, vec![0.0, 1.0]);
        assert_eq!(occ_cfg(&u, &u, &m, GuidanceParams { k_base: 7.0, k_occ: -3.0 }).unwrap(), u);
    }

    #[test]
    fn dimension_errors() {
        let u = f1(&[0.0, 1.0]);
        assert!(occ_cfg(&u, &f1(&[0.0]), &Grid::filled(2, 1, 0.0), GuidanceParams::default()).is_err());
        assert!(occ_cfg(&u, &u, &Grid::filled(3, 1, 0.0), GuidanceParams::default()).is_err());
        assert!(occ_cfg(&u, &u, &Grid::filled(2, 1, 1.5), GuidanceParams::default()).is_err());
        let r = ResidualSpec { field: f1(&[1.0]), mask: Grid::filled(1, 1, 1.0), scale: 1.0 };
        match compose_residuals(&u, &[r]) {
            Err(GuidanceError::Residual { index, .. }) => assert_eq!(index, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn compose_examples() {
        let base = f1(&[1.0, 2.0]);
        assert_eq!(compose_residuals(&base, &[]).unwrap(), base);
        let r = ResidualSpec { field: f1(&[0.5, -1.0]), mask: Grid::filled(2, 1, 1.0), scale: 1.0 };
        assert_eq!(compose_residuals(&base, &[r]).unwrap().as_slice(), &[1.5, 1.0]);
    }

    #[test]
    fn checkerboard_upsample() {
        let m = Grid::from_vec(2, 2, vec![true, false, false, true]);
        let up = resize_mask(&m, 4, 4).unwrap();
        let expected = Grid::from_fn(4, 4, |r, c| (r / 2 + c / 2) % 2 == 0);
        assert_eq!(up, expected);
        assert_eq!(resize_mask(&m, 2, 2).unwrap(), m);
    }

    #[test]
    fn trace_rejects_bad_input() {
        let p = |_: usize, f: &Field<f64>| (f.clone(), f.clone());
        let m = Grid::filled(1, 1, 0.0);
        assert!(run_guidance_trace(&p, f1(&[1.0]), 0, &m, GuidanceParams::default(), false).is_err());
        let blowup = |_: usize, f: &Field<f64>| (f1(&[0.0]), f1(&[f.as_slice()[0] * 1e200]));
        match run_guidance_trace(&blowup, f1(&[1.0]), 5, &m, GuidanceParams::default(), false) {
            Err(GuidanceError::NonFinite { step }) => assert_eq!(step, 1),
            other => panic!("{other:?}"),
        }
    }
}
