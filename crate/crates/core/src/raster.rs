//! Deterministic ray-cast renderer for the three conditioning buffers: nearest depth,
//! flat camera-space normal, and the number of triangle crossings along each pixel ray.
//!
//! Every pixel casts one ray from the camera center through the pixel center. A triangle
//! contributes when the ray meets it at `near < t <= depth_clip`, where `t` is camera-space
//! depth. Back faces count. Hits landing exactly on a shared edge or vertex count once,
//! for the lowest-index non-degenerate triangle touching that edge or vertex.

mod bundle;

use std::collections::HashMap;

use rayon::prelude::*;

use crate::bodymodel::{BodyError, BodyModel};
use crate::geom::Vec3;
use crate::grid::Grid;
use crate::scalar::Scalar;
use crate::scene::{Camera, CheckedScene};

pub use bundle::{
    render_bundle, sha256_hex, BundleError, BundleFile, BundleInputs, BundleManifest, BundleParams, ManifestParameters, PixelStats, BUNDLE_FILES,
    BUNDLE_FORMAT_VERSION, COUNT_FILE, DEPTH_FILE, EDGES_FILE, MANIFEST_FILE, MASKED_EDGES_FILE, MASK_FILE, NORMAL_FILE, NORMAL_PNG_FILE,
};

/// Side length in pixels of the screen tiles triangles are binned into.
pub const DEFAULT_TILE_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RasterOptions {
    /// Worker threads; 0 picks the rayon default, 1 runs on the calling thread.
    pub threads: usize,
    pub tile_size: usize,
}

impl Default for RasterOptions {
    fn default() -> Self {
        Self { threads: 0, tile_size: DEFAULT_TILE_SIZE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct RasterDiagnostics {
    pub triangles: usize,
    /// Zero-area triangles, skipped.
    pub degenerate_triangles: usize,
    /// Triangles crossing the near plane, tested against every pixel.
    pub near_plane_triangles: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterBuffers<T> {
    /// Nearest hit depth in meters, `+inf` where nothing was hit.
    pub depth: Grid<T>,
    /// Unit camera-space normal of the nearest hit, facing the camera; zero where no hit.
    pub normal: Grid<[T; 3]>,
    pub count: Grid<u32>,
    pub diagnostics: RasterDiagnostics,
}

impl<T: Scalar> RasterBuffers<T> {
    pub fn width(&self) -> usize {
        self.depth.width()
    }

    pub fn height(&self) -> usize {
        self.depth.height()
    }

    /// First broken buffer invariant, if any.
    pub fn invariant_violation(&self, near: T, depth_clip: T) -> Option<String> {
        let tol = T::of(1e-4);
        for (i, ((&d, &c), n)) in self
            .depth
            .as_slice()
            .iter()
            .zip(self.count.as_slice())
            .zip(self.normal.as_slice())
            .enumerate()
        {
            if d.is_finite() != (c >= 1) {
                return Some(format!("pixel {i}: depth {d} with count {c}"));
            }
            if d.is_finite() {
                if !(d > near && d <= depth_clip) {
                    return Some(format!("pixel {i}: depth {d} outside (near, clip]"));
                }
                let len = Vec3::from_array(*n).norm();
                if (len - T::one()).abs() > tol {
                    return Some(format!("pixel {i}: normal length {len}"));
                }
            } else if *n != [T::zero(); 3] {
                return Some(format!("pixel {i}: normal set without a hit"));
            }
        }
        None
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error(transparent)]
    Body(#[from] BodyError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Which edges and vertices of a triangle it owns for tie-breaking. Edge `k` is the edge
/// opposite vertex `k`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Ownership {
    edges: [bool; 3],
    vertices: [bool; 3],
}

/// Indexed triangle soup in world coordinates. Several meshes merge into one index space;
/// triangle indices follow insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleSoup<T> {
    vertices: Vec<Vec3<T>>,
    faces: Vec<[u32; 3]>,
    degenerate: Vec<bool>,
    ownership: Vec<Ownership>,
}

impl<T: Scalar> TriangleSoup<T> {
    pub fn new(vertices: Vec<Vec3<T>>, faces: Vec<[u32; 3]>) -> Self {
        assert!(
            faces.iter().flatten().all(|&i| (i as usize) < vertices.len()),
            "face index out of range"
        );
        let degenerate: Vec<bool> = faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| vertices[i as usize]);
                f[0] == f[1] || f[1] == f[2] || f[0] == f[2] || (b - a).cross(c - a).norm_squared() == T::zero()
            })
            .collect();

        let mut edge_owner: HashMap<(u32, u32), usize> = HashMap::new();
        let mut vertex_owner: HashMap<u32, usize> = HashMap::new();
        for (t, f) in faces.iter().enumerate() {
            if degenerate[t] {
                continue;
            }
            for k in 0..3 {
                let (a, b) = (f[(k + 1) % 3], f[(k + 2) % 3]);
                edge_owner.entry((a.min(b), a.max(b))).or_insert(t);
                vertex_owner.entry(f[k]).or_insert(t);
            }
        }
        let ownership = faces
            .iter()
            .enumerate()
            .map(|(t, f)| {
                let mut o = Ownership::default();
                if !degenerate[t] {
                    for k in 0..3 {
                        let (a, b) = (f[(k + 1) % 3], f[(k + 2) % 3]);
                        o.edges[k] = edge_owner[&(a.min(b), a.max(b))] == t;
                        o.vertices[k] = vertex_owner[&f[k]] == t;
                    }
                }
                o
            })
            .collect();
        Self { vertices, faces, degenerate, ownership }
    }

    /// Concatenates meshes, offsetting face indices.
    pub fn merge<'a>(meshes: impl IntoIterator<Item = (&'a [Vec3<T>], &'a [[u32; 3]])>) -> Self {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for (v, f) in meshes {
            let base = vertices.len() as u32;
            vertices.extend_from_slice(v);
            faces.extend(f.iter().map(|t| t.map(|i| i + base)));
        }
        Self::new(vertices, faces)
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn triangle_count(&self) -> usize {
        self.faces.len()
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }

    fn to_camera(&self, camera: &Camera<T>) -> Vec<Vec3<T>> {
        self.vertices.iter().map(|&v| camera.extrinsic.apply(v)).collect()
    }
}

/// Poses every human of a validated scene and merges them into one soup, in scene order.
pub fn build_scene_soup<T: Scalar>(scene: &CheckedScene<T>, model: &BodyModel<T>) -> Result<TriangleSoup<T>, BodyError> {
    let meshes = scene
        .humans
        .iter()
        .map(|h| model.posed(&h.beta, &h.pose))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TriangleSoup::merge(meshes.iter().map(|m| (m.vertices.as_slice(), m.faces.as_slice()))))
}

/// Per-ray constants of the watertight ray/triangle test (Woop, Benthin, Wald 2013).
struct ShearedRay<T> {
    axes: [usize; 3],
    shear: [T; 3],
}

impl<T: Scalar> ShearedRay<T> {
    fn new(dir: Vec3<T>) -> Self {
        let a = [dir.x.abs(), dir.y.abs(), dir.z.abs()];
        let kz = if a[0] > a[1] { if a[0] > a[2] { 0 } else { 2 } } else if a[1] > a[2] { 1 } else { 2 };
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if dir[kz] < T::zero() {
            std::mem::swap(&mut kx, &mut ky);
        }
        Self { axes: [kx, ky, kz], shear: [dir[kx] / dir[kz], dir[ky] / dir[kz], T::one() / dir[kz]] }
    }

    /// Ray origin is the camera center, i.e. the camera-space origin.
    #[inline]
    fn hit(&self, tri: [Vec3<T>; 3], own: Ownership) -> Option<T> {
        let [kx, ky, kz] = self.axes;
        let [sx, sy, sz] = self.shear;
        let p = tri.map(|v| (v[kx] - sx * v[kz], v[ky] - sy * v[kz], sz * v[kz]));
        let (ax, ay, az) = p[0];
        let (bx, by, bz) = p[1];
        let (cx, cy, cz) = p[2];
        let u = cx * by - cy * bx;
        let v = ax * cy - ay * cx;
        let w = bx * ay - by * ax;
        let zero = T::zero();
        if (u < zero || v < zero || w < zero) && (u > zero || v > zero || w > zero) {
            return None;
        }
        let det = u + v + w;
        if det == zero {
            return None;
        }
        let zeros = [u == zero, v == zero, w == zero];
        match zeros.iter().filter(|&&z| z).count() {
            0 => {}
            1 => {
                let k = zeros.iter().position(|&z| z).expect("one zero");
                if !own.edges[k] {
                    return None;
                }
            }
            _ => {
                let k = zeros.iter().position(|&z| !z).expect("one nonzero");
                if !own.vertices[k] {
                    return None;
                }
            }
        }
        Some((u * az + v * bz + w * cz) / det)
    }
}

#[derive(Debug, Clone, Copy)]
struct PixelSample<T> {
    count: u32,
    nearest: Option<(T, u32)>,
}

#[inline]
fn sample_pixel<T: Scalar>(
    cam_vertices: &[Vec3<T>],
    soup: &TriangleSoup<T>,
    ray: &ShearedRay<T>,
    candidates: impl Iterator<Item = u32>,
    near: T,
    clip: T,
) -> PixelSample<T> {
    let mut count = 0u32;
    let mut nearest: Option<(T, u32)> = None;
    for idx in candidates {
        let i = idx as usize;
        if soup.degenerate[i] {
            continue;
        }
        let tri = soup.faces[i].map(|k| cam_vertices[k as usize]);
        let Some(t) = ray.hit(tri, soup.ownership[i]) else { continue };
        if !(t > near && t <= clip) {
            continue;
        }
        count += 1;
        let closer = match nearest {
            None => true,
            Some((bt, bi)) => t < bt || (t == bt && idx < bi),
        };
        if closer {
            nearest = Some((t, idx));
        }
    }
    PixelSample { count, nearest }
}

/// Unit normal of the triangle, oriented against `dir`.
fn facing_normal<T: Scalar>(tri: [Vec3<T>; 3], dir: Vec3<T>) -> [T; 3] {
    let n = (tri[1] - tri[0]).cross(tri[2] - tri[0]);
    let n = n.normalized().unwrap_or_else(Vec3::zero);
    let n = if n.dot(dir) > T::zero() { -n } else { n };
    n.to_array()
}

/// Number of counted triangle crossings along the ray through pixel `(row, col)`,
/// testing every triangle.
pub fn ray_face_count<T: Scalar>(soup: &TriangleSoup<T>, camera: &Camera<T>, row: usize, col: usize) -> u32 {
    let cam_vertices = soup.to_camera(camera);
    let ray = ShearedRay::new(camera.pixel_ray(row, col));
    sample_pixel(&cam_vertices, soup, &ray, 0..soup.faces.len() as u32, camera.near, camera.depth_clip).count
}

/// Full-image render that tests every triangle at every pixel.
pub fn rasterize_brute_force<T: Scalar>(soup: &TriangleSoup<T>, camera: &Camera<T>) -> RasterBuffers<T> {
    let cam_vertices = soup.to_camera(camera);
    let all: Vec<u32> = (0..soup.faces.len() as u32).collect();
    let rows: Vec<_> = (0..camera.height)
        .map(|row| render_row(soup, &cam_vertices, camera, row, |_| (&all[..], &[][..])))
        .collect();
    assemble(camera, rows, diagnostics(soup, 0))
}

struct TileBins {
    size: usize,
    cols: usize,
    bins: Vec<Vec<u32>>,
    global: Vec<u32>,
}

impl TileBins {
    fn build<T: Scalar>(soup: &TriangleSoup<T>, cam_vertices: &[Vec3<T>], camera: &Camera<T>, size: usize) -> Self {
        let size = size.max(1);
        let cols = camera.width.div_ceil(size);
        let rows = camera.height.div_ceil(size);
        let mut bins = vec![Vec::new(); cols * rows];
        let mut global = Vec::new();
        let half = T::of(0.5);
        let (w, h) = (camera.width as i64, camera.height as i64);

        for (idx, face) in soup.faces.iter().enumerate() {
            if soup.degenerate[idx] {
                continue;
            }
            let tri = face.map(|k| cam_vertices[k as usize]);
            let zmin = tri.iter().fold(T::infinity(), |m, v| m.min(v.z));
            let zmax = tri.iter().fold(T::neg_infinity(), |m, v| m.max(v.z));
            if zmax <= camera.near || zmin > camera.depth_clip {
                continue;
            }
            if zmin <= camera.near {
                global.push(idx as u32);
                continue;
            }
            let (mut umin, mut umax, mut vmin, mut vmax) = (T::infinity(), T::neg_infinity(), T::infinity(), T::neg_infinity());
            for p in tri {
                let u = camera.fx * p.x / p.z + camera.cx;
                let v = camera.fy * p.y / p.z + camera.cy;
                umin = umin.min(u);
                umax = umax.max(u);
                vmin = vmin.min(v);
                vmax = vmax.max(v);
            }
            // pixel centers inside the box, widened by one pixel against rounding
            let to_i = |x: T| x.to_f64_lossy();
            let c0 = ((to_i(umin - half)).ceil() as i64 - 1).max(0);
            let c1 = ((to_i(umax - half)).floor() as i64 + 1).min(w - 1);
            let r0 = ((to_i(vmin - half)).ceil() as i64 - 1).max(0);
            let r1 = ((to_i(vmax - half)).floor() as i64 + 1).min(h - 1);
            if c0 > c1 || r0 > r1 {
                continue;
            }
            let s = size as i64;
            for tr in (r0 / s)..=(r1 / s) {
                for tc in (c0 / s)..=(c1 / s) {
                    bins[tr as usize * cols + tc as usize].push(idx as u32);
                }
            }
        }
        Self { size, cols, bins, global }
    }

    fn candidates(&self, row: usize, col: usize) -> (&[u32], &[u32]) {
        (&self.bins[(row / self.size) * self.cols + col / self.size], &self.global)
    }
}

type RowSamples<T> = Vec<(u32, T, [T; 3])>;

fn render_row<'a, T: Scalar>(
    soup: &TriangleSoup<T>,
    cam_vertices: &[Vec3<T>],
    camera: &Camera<T>,
    row: usize,
    candidates: impl Fn(usize) -> (&'a [u32], &'a [u32]),
) -> RowSamples<T> {
    (0..camera.width)
        .map(|col| {
            let dir = camera.pixel_ray(row, col);
            let ray = ShearedRay::new(dir);
            let (a, b) = candidates(col);
            let s = sample_pixel(cam_vertices, soup, &ray, a.iter().chain(b).copied(), camera.near, camera.depth_clip);
            match s.nearest {
                Some((t, idx)) => {
                    let tri = soup.faces[idx as usize].map(|k| cam_vertices[k as usize]);
                    (s.count, t, facing_normal(tri, dir))
                }
                None => (s.count, T::infinity(), [T::zero(); 3]),
            }
        })
        .collect()
}

fn assemble<T: Scalar>(camera: &Camera<T>, rows: Vec<RowSamples<T>>, diagnostics: RasterDiagnostics) -> RasterBuffers<T> {
    let n = camera.width * camera.height;
    let (mut count, mut depth, mut normal) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (c, d, nrm) in rows.into_iter().flatten() {
        count.push(c);
        depth.push(d);
        normal.push(nrm);
    }
    RasterBuffers {
        depth: Grid::from_vec(camera.width, camera.height, depth),
        normal: Grid::from_vec(camera.width, camera.height, normal),
        count: Grid::from_vec(camera.width, camera.height, count),
        diagnostics,
    }
}

fn diagnostics<T: Scalar>(soup: &TriangleSoup<T>, near_plane_triangles: usize) -> RasterDiagnostics {
    RasterDiagnostics {
        triangles: soup.triangle_count(),
        degenerate_triangles: soup.degenerate_count(),
        near_plane_triangles,
    }
}

/// Tile-binned render of a soup. Output is bitwise identical for any thread count.
pub fn rasterize_soup<T: Scalar>(
    soup: &TriangleSoup<T>,
    camera: &Camera<T>,
    options: RasterOptions,
) -> Result<RasterBuffers<T>, RasterError> {
    let cam_vertices = soup.to_camera(camera);
    let bins = TileBins::build(soup, &cam_vertices, camera, options.tile_size);
    let row_job = |row: usize| render_row(soup, &cam_vertices, camera, row, |col| bins.candidates(row, col));

    let rows: Vec<RowSamples<T>> = if options.threads == 1 {
        (0..camera.height).map(row_job).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.threads)
            .build()
            .map_err(|e| RasterError::ThreadPool(e.to_string()))?;
        pool.install(|| (0..camera.height).into_par_iter().map(row_job).collect())
    };
    let diag = diagnostics(soup, bins.global.len());
    if diag.degenerate_triangles > 0 {
        log::warn!("skipped {} degenerate triangles", diag.degenerate_triangles);
    }
    Ok(assemble(camera, rows, diag))
}

pub fn rasterize_with<T: Scalar>(
    scene: &CheckedScene<T>,
    model: &BodyModel<T>,
    options: RasterOptions,
) -> Result<RasterBuffers<T>, RasterError> {
    let soup = build_scene_soup(scene, model)?;
    rasterize_soup(&soup, &scene.camera, options)
}

pub fn rasterize<T: Scalar>(scene: &CheckedScene<T>, model: &BodyModel<T>) -> Result<RasterBuffers<T>, RasterError> {
    rasterize_with(scene, model, RasterOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Extrinsic, DEFAULT_DEPTH_CLIP, DEFAULT_NEAR};

    fn cam(width: usize, height: usize) -> Camera<f64> {
        Camera {
            fx: 10.0,
            fy: 10.0,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
            extrinsic: Extrinsic::identity(),
            near: DEFAULT_NEAR,
            depth_clip: DEFAULT_DEPTH_CLIP,
        }
    }

    /// Axis-aligned square at depth `z` split into two triangles along a diagonal.
    fn quad(z: f64, half: f64) -> (Vec<Vec3<f64>>, Vec<[u32; 3]>) {
        (
            vec![
                Vec3::new(-half, -half, z),
                Vec3::new(half, -half, z),
                Vec3::new(half, half, z),
                Vec3::new(-half, half, z),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
    }

    #[test]
    fn empty_pixel() {
        let soup = TriangleSoup::new(vec![], vec![]);
        let b = rasterize_soup(&soup, &cam(4, 4), RasterOptions::default()).unwrap();
        assert!(b.count.as_slice().iter().all(|&c| c == 0));
        assert!(b.depth.as_slice().iter().all(|d| d.is_infinite()));
        assert!(b.normal.as_slice().iter().all(|n| *n == [0.0; 3]));
    }

    #[test]
    fn single_facing_triangle() {
        // covers the center pixel; ray hits the plane z = 2 at depth 2
        let soup = TriangleSoup::new(
            vec![Vec3::new(-1.0, -1.0, 2.0), Vec3::new(1.0, -1.0, 2.0), Vec3::new(0.0, 1.0, 2.0)],
            vec![[0, 1, 2]],
        );
        let c = cam(4, 4);
        let b = rasterize_soup(&soup, &c, RasterOptions::default()).unwrap();
        assert_eq!(*b.count.get(2, 2), 1);
        assert_eq!(*b.depth.get(2, 2), 2.0);
        assert_eq!(*b.normal.get(2, 2), [0.0, 0.0, -1.0]);
        assert_eq!(b.invariant_violation(c.near, c.depth_clip), None);
    }

    #[test]
    fn shared_diagonal_counts_once() {
        // 2x2 image, quad's diagonal passes exactly through pixel centers (±0.05, ±0.05)
        let (v, f) = quad(1.0, 1.0);
        let soup = TriangleSoup::new(v, f);
        let c = cam(2, 2);
        for row in 0..2 {
            for col in 0..2 {
                assert_eq!(ray_face_count(&soup, &c, row, col), 1, "pixel {row},{col}");
            }
        }
    }

    /// Closed axis-aligned box `[-half, half]² × [z0, z1]`, outward winding.
    fn slab(z0: f64, z1: f64, half: f64) -> (Vec<Vec3<f64>>, Vec<[u32; 3]>) {
        let mut v = Vec::new();
        for &z in &[z0, z1] {
            for &(x, y) in &[(-half, -half), (half, -half), (half, half), (-half, half)] {
                v.push(Vec3::new(x, y, z));
            }
        }
        let quads = [[0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4], [1, 2, 6, 5], [2, 3, 7, 6], [3, 0, 4, 7]];
        let f = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
        (v, f)
    }

    #[test]
    fn stacked_slabs_count_six() {
        let slabs: Vec<_> = [1.0, 2.0, 3.0].iter().map(|&z| slab(z, z + 0.1, 5.0)).collect();
        let soup = TriangleSoup::merge(slabs.iter().map(|(v, f)| (v.as_slice(), f.as_slice())));
        let c = cam(3, 3);
        // ray (0, -0.1, 1) misses every face diagonal
        assert_eq!(ray_face_count(&soup, &c, 0, 1), 6);
        let b = rasterize_soup(&soup, &c, RasterOptions::default()).unwrap();
        assert_eq!(*b.count.get(0, 1), 6);
        assert_eq!(*b.depth.get(0, 1), 1.0);
    }

    #[test]
    fn clip_and_near_exclude_hits() {
        let quads: Vec<_> = [0.005, 1.0, 5.0, 6.0].iter().map(|&z| quad(z, 100.0)).collect();
        let soup = TriangleSoup::merge(quads.iter().map(|(v, f)| (v.as_slice(), f.as_slice())));
        let c = cam(3, 3);
        // z=0.005 is inside near, z=5 is exactly the clip (kept), z=6 is beyond
        assert_eq!(ray_face_count(&soup, &c, 0, 1), 2);
        let b = rasterize_soup(&soup, &c, RasterOptions::default()).unwrap();
        assert_eq!(*b.depth.get(0, 1), 1.0);
    }

    #[test]
    fn degenerate_triangles_are_skipped() {
        let soup = TriangleSoup::new(
            vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0), Vec3::new(2.0, 0.0, 1.0)],
            vec![[0, 1, 2], [0, 0, 1]],
        );
        let b = rasterize_soup(&soup, &cam(4, 4), RasterOptions::default()).unwrap();
        assert_eq!(b.diagnostics.degenerate_triangles, 2);
        assert!(b.count.as_slice().iter().all(|&c| c == 0));
    }

    #[test]
    fn near_plane_crossing_triangle_is_still_found() {
        // triangle from behind the camera to far in front, covering the whole view
        let soup = TriangleSoup::new(
            vec![Vec3::new(-50.0, -50.0, -1.0), Vec3::new(50.0, -50.0, -1.0), Vec3::new(0.0, 50.0, 3.0)],
            vec![[0, 1, 2]],
        );
        let c = cam(8, 8);
        let fast = rasterize_soup(&soup, &c, RasterOptions::default()).unwrap();
        let slow = rasterize_brute_force(&soup, &c);
        assert_eq!(fast.diagnostics.near_plane_triangles, 1);
        assert_eq!(fast.count, slow.count);
        assert_eq!(fast.depth, slow.depth);
    }
}
