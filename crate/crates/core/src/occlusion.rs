//! Occlusion mask from per-pixel crossing counts, its refinement, and depth-edge maps.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::grid::{BinaryMap, Grid, SizeMismatch};
use crate::scalar::Scalar;

/// A pixel is occluded when its ray crosses more than this many surfaces.
pub const OCCLUSION_COUNT_THRESHOLD: u32 = 2;

/// Refinement defaults at the 1024×1024 reference resolution.
pub const REFERENCE_AREA_MIN: f64 = 50.0;
pub const REFERENCE_DILATION_RADIUS: f64 = 3.0;
pub const REFERENCE_PIXELS: f64 = 1024.0 * 1024.0;

pub const DEFAULT_CANNY_LOW: f64 = 5.0;
pub const DEFAULT_CANNY_HIGH: f64 = 15.0;
pub const CANNY_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OcclusionError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Size(#[from] SizeMismatch),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineParams {
    /// Components smaller than this many pixels are removed.
    pub area_min: usize,
    pub dilation_radius: u32,
}

impl RefineParams {
    pub const NONE: Self = Self { area_min: 0, dilation_radius: 0 };

    /// Reference defaults scaled to an image: area with pixel count, radius with its square root.
    pub fn for_image(width: usize, height: usize) -> Self {
        let ratio = (width * height) as f64 / REFERENCE_PIXELS;
        Self {
            area_min: (REFERENCE_AREA_MIN * ratio).round() as usize,
            dilation_radius: (REFERENCE_DILATION_RADIUS * ratio.sqrt()).round() as u32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionMask {
    pub mask: BinaryMap,
    pub params: RefineParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum EdgeMethod {
    Gradient { tau: f64 },
    Canny { low: f64, high: f64 },
}

impl Default for EdgeMethod {
    fn default() -> Self {
        EdgeMethod::Canny { low: DEFAULT_CANNY_LOW, high: DEFAULT_CANNY_HIGH }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap {
    pub edges: BinaryMap,
    pub method: EdgeMethod,
}

/// Raw mask: set where `count > 2`.
pub fn occlusion_mask(count: &Grid<u32>) -> OcclusionMask {
    OcclusionMask { mask: count.map(|&c| c > OCCLUSION_COUNT_THRESHOLD), params: RefineParams::NONE }
}

const NEIGHBORS_8: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Removes 8-connected components with fewer than `area_min` pixels.
pub fn filter_small_components(mask: &BinaryMap, area_min: usize) -> BinaryMap {
    if area_min <= 1 {
        return mask.clone();
    }
    let (w, h) = (mask.width(), mask.height());
    let mut out = mask.clone();
    let mut seen = vec![false; w * h];
    let mut component = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if seen[start] || !mask.as_slice()[start] {
            continue;
        }
        component.clear();
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            component.push(i);
            let (r, c) = ((i / w) as isize, (i % w) as isize);
            for (dr, dc) in NEIGHBORS_8 {
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                    continue;
                }
                let j = nr as usize * w + nc as usize;
                if !seen[j] && mask.as_slice()[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        if component.len() < area_min {
            for &i in &component {
                out.as_mut_slice()[i] = false;
            }
        }
    }
    out
}

/// Offsets `(dr, dc)` with `dr² + dc² <= radius²`.
pub fn disk_offsets(radius: u32) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dr in -r..=r {
        for dc in -r..=r {
            if dr * dr + dc * dc <= r * r {
                out.push((dr, dc));
            }
        }
    }
    out
}

/// Binary dilation by a Euclidean disk of `radius` pixels.
pub fn dilate(mask: &BinaryMap, radius: u32) -> BinaryMap {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width() as isize, mask.height() as isize);
    let offsets = disk_offsets(radius);
    let mut out = mask.clone();
    for r in 0..h {
        for c in 0..w {
            if !*mask.get(r as usize, c as usize) {
                continue;
            }
            for &(dr, dc) in &offsets {
                let (nr, nc) = (r + dr, c + dc);
                if nr >= 0 && nc >= 0 && nr < h && nc < w {
                    out.set(nr as usize, nc as usize, true);
                }
            }
        }
    }
    out
}

/// Small-component removal followed by dilation. This is the mask used downstream.
pub fn refine_mask(raw: &BinaryMap, params: RefineParams) -> OcclusionMask {
    let filtered = filter_small_components(raw, params.area_min);
    OcclusionMask { mask: dilate(&filtered, params.dilation_radius), params }
}

fn substitute_background<T: Scalar>(depth: &Grid<T>, depth_clip: T) -> Grid<T> {
    depth.map(|&d| if d.is_finite() { d } else { depth_clip })
}

/// Central difference with one-sided differences on the image border.
fn difference<T: Scalar>(before: Option<T>, here: T, after: Option<T>) -> T {
    match (before, after) {
        (Some(b), Some(a)) => (a - b) * T::of(0.5),
        (None, Some(a)) => a - here,
        (Some(b), None) => here - b,
        (None, None) => T::zero(),
    }
}

/// Edges where `|∂d/∂x| + |∂d/∂y| > tau`, evaluated on hit pixels only. Missing depth
/// reads as `depth_clip`, so silhouettes produce edges.
pub fn depth_edges<T: Scalar>(depth: &Grid<T>, tau: T, depth_clip: T) -> Result<EdgeMap, OcclusionError> {
    if !(tau > T::zero()) {
        return Err(OcclusionError::InvalidParameter(format!("tau must be > 0, got {tau}")));
    }
    let filled = substitute_background(depth, depth_clip);
    let (w, h) = (depth.width(), depth.height());
    let at = |r: usize, c: usize| *filled.get(r, c);
    let edges = Grid::from_fn(w, h, |r, c| {
        if !depth.get(r, c).is_finite() {
            return false;
        }
        let here = at(r, c);
        let gx = difference(c.checked_sub(1).map(|cc| at(r, cc)), here, (c + 1 < w).then(|| at(r, c + 1)));
        let gy = difference(r.checked_sub(1).map(|rr| at(rr, c)), here, (r + 1 < h).then(|| at(r + 1, c)));
        gx.abs() + gy.abs() > tau
    });
    Ok(EdgeMap { edges, method: EdgeMethod::Gradient { tau: tau.to_f64_lossy() } })
}

fn gaussian_kernel_5<T: Scalar>(sigma: f64) -> [T; 5] {
    let raw: Vec<f64> = (-2..=2).map(|x: i32| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = raw.iter().sum();
    [0, 1, 2, 3, 4].map(|i| T::of(raw[i] / sum))
}

fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

fn separable_blur<T: Scalar>(img: &Grid<T>, kernel: &[T; 5]) -> Grid<T> {
    let (w, h) = (img.width(), img.height());
    let horizontal = Grid::from_fn(w, h, |r, c| {
        (0..5).fold(T::zero(), |acc, k| acc + kernel[k] * *img.get(r, clamp_index(c as isize + k as isize - 2, w)))
    });
    Grid::from_fn(w, h, |r, c| {
        (0..5).fold(T::zero(), |acc, k| {
            acc + kernel[k] * *horizontal.get(clamp_index(r as isize + k as isize - 2, h), c)
        })
    })
}

/// Sobel gradients `(gx, gy)` with replicated borders. `gx` grows to the right, `gy` downward.
fn sobel<T: Scalar>(img: &Grid<T>) -> Grid<(T, T)> {
    let (w, h) = (img.width(), img.height());
    let two = T::of(2.0);
    Grid::from_fn(w, h, |r, c| {
        let p = |dr: isize, dc: isize| *img.get(clamp_index(r as isize + dr, h), clamp_index(c as isize + dc, w));
        let gx = (p(-1, 1) + two * p(0, 1) + p(1, 1)) - (p(-1, -1) + two * p(0, -1) + p(1, -1));
        let gy = (p(1, -1) + two * p(1, 0) + p(1, 1)) - (p(-1, -1) + two * p(-1, 0) + p(-1, 1));
        (gx, gy)
    })
}

/// Gradient magnitude kept only at local maxima across the edge. Of two equal neighbors
/// along the gradient the earlier one wins, so a sharp step stays one pixel wide.
fn non_maximum_suppression<T: Scalar>(grad: &Grid<(T, T)>) -> Grid<T> {
    let (w, h) = (grad.width(), grad.height());
    let mag = grad.map(|&(gx, gy)| (gx * gx + gy * gy).sqrt());
    let m = |r: isize, c: isize| {
        if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
            T::zero()
        } else {
            *mag.get(r as usize, c as usize)
        }
    };
    Grid::from_fn(w, h, |r, c| {
        let here = *mag.get(r, c);
        if here == T::zero() {
            return T::zero();
        }
        let (gx, gy) = *grad.get(r, c);
        let mut angle = gy.to_f64_lossy().atan2(gx.to_f64_lossy()).to_degrees();
        if angle < 0.0 {
            angle += 180.0;
        }
        let (dr, dc): (isize, isize) = if !(22.5..157.5).contains(&angle) {
            (0, 1)
        } else if angle < 67.5 {
            (1, 1)
        } else if angle < 112.5 {
            (1, 0)
        } else {
            (1, -1)
        };
        let (ri, ci) = (r as isize, c as isize);
        let before = m(ri - dr, ci - dc);
        let after = m(ri + dr, ci + dc);
        if here > before && here >= after {
            here
        } else {
            T::zero()
        }
    })
}

fn hysteresis<T: Scalar>(nms: &Grid<T>, low: T, high: T) -> BinaryMap {
    let (w, h) = (nms.width(), nms.height());
    let mut out = Grid::filled(w, h, false);
    let mut stack = Vec::new();
    for (i, &v) in nms.as_slice().iter().enumerate() {
        if v > high {
            out.as_mut_slice()[i] = true;
            stack.push(i);
        }
    }
    while let Some(i) = stack.pop() {
        let (r, c) = ((i / w) as isize, (i % w) as isize);
        for (dr, dc) in NEIGHBORS_8 {
            let (nr, nc) = (r + dr, c + dc);
            if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                continue;
            }
            let j = nr as usize * w + nc as usize;
            if !out.as_slice()[j] && nms.as_slice()[j] > low {
                out.as_mut_slice()[j] = true;
                stack.push(j);
            }
        }
    }
    out
}

/// Depth rescaled affinely to `[0, 255]` after replacing missing depth by `depth_clip`.
/// A constant buffer maps to all zeros.
pub fn depth_to_intensity<T: Scalar>(depth: &Grid<T>, depth_clip: T) -> Grid<T> {
    let filled = substitute_background(depth, depth_clip);
    let lo = filled.as_slice().iter().fold(T::infinity(), |m, &v| m.min(v));
    let hi = filled.as_slice().iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    if !(hi > lo) {
        return filled.map(|_| T::zero());
    }
    let scale = T::of(255.0) / (hi - lo);
    filled.map(|&v| (v - lo) * scale)
}

/// Canny edges on an intensity image: 5×5 Gaussian (σ = 1), Sobel, non-maximum
/// suppression, hysteresis with strict thresholds.
pub fn canny<T: Scalar>(intensity: &Grid<T>, low: T, high: T) -> Result<BinaryMap, OcclusionError> {
    if !(low > T::zero() && low <= high) {
        return Err(OcclusionError::InvalidParameter(format!("need 0 < low <= high, got {low}, {high}")));
    }
    if intensity.is_empty() {
        return Ok(Grid::filled(intensity.width(), intensity.height(), false));
    }
    let blurred = separable_blur(intensity, &gaussian_kernel_5(CANNY_SIGMA));
    let nms = non_maximum_suppression(&sobel(&blurred));
    Ok(hysteresis(&nms, low, high))
}

pub fn canny_edges<T: Scalar>(depth: &Grid<T>, low: T, high: T, depth_clip: T) -> Result<EdgeMap, OcclusionError> {
    let edges = canny(&depth_to_intensity(depth, depth_clip), low, high)?;
    Ok(EdgeMap { edges, method: EdgeMethod::Canny { low: low.to_f64_lossy(), high: high.to_f64_lossy() } })
}

pub fn edges_with<T: Scalar>(depth: &Grid<T>, method: EdgeMethod, depth_clip: T) -> Result<EdgeMap, OcclusionError> {
    match method {
        EdgeMethod::Gradient { tau } => depth_edges(depth, T::of(tau), depth_clip),
        EdgeMethod::Canny { low, high } => canny_edges(depth, T::of(low), T::of(high), depth_clip),
    }
}

/// Edge map restricted to the occlusion mask.
pub fn masked_edges(edges: &EdgeMap, mask: &OcclusionMask) -> Result<EdgeMap, OcclusionError> {
    edges.edges.same_size(&mask.mask)?;
    let data = edges.edges.as_slice().iter().zip(mask.mask.as_slice()).map(|(&e, &m)| e && m).collect();
    Ok(EdgeMap { edges: Grid::from_vec(edges.edges.width(), edges.edges.height(), data), method: edges.method })
}
