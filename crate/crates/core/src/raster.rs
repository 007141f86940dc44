//! Deterministic software rasterizer.
//!
//! Triangles are culled when back-facing, covered pixels are decided at
//! pixel centers with a top-left fill rule, and the nearest surface wins the
//! depth test (ties keep the lower face index). Work is split into bands of
//! rows; each band is owned by one task and visits triangles in index order,
//! so the output does not depend on the number of threads.

use alloc::vec;
use alloc::vec::Vec;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::geometry::TriMesh;
use crate::image::{ImagePlane, Mask};
use crate::math::Vec3;

/// `face_id` value for uncovered pixels.
pub const NO_FACE: u32 = u32::MAX;

const BAND_ROWS: usize = 16;

/// Per-pixel rasterization record.
#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    pub width: usize,
    pub height: usize,
    /// Camera-space depth, `f64::INFINITY` where uncovered.
    pub depth: Vec<f64>,
    pub face_id: Vec<u32>,
    /// Perspective-correct barycentrics in the face's own vertex order.
    pub barycentrics: Vec<[f64; 3]>,
}

impl GBuffer {
    fn empty(width: usize, height: usize) -> Self {
        GBuffer {
            width,
            height,
            depth: vec![f64::INFINITY; width * height],
            face_id: vec![NO_FACE; width * height],
            barycentrics: vec![[0.0; 3]; width * height],
        }
    }

    #[inline]
    pub fn covered(&self, x: usize, y: usize) -> bool {
        self.face_id[y * self.width + x] != NO_FACE
    }

    pub fn mask(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.face_id.iter().map(|&f| f != NO_FACE).collect(),
        }
    }
}

/// A projected, front-facing triangle ready for scan conversion.
#[derive(Clone, Copy)]
struct Setup {
    face: u32,
    /// Screen vertices reordered to positive signed area.
    p: [(f64, f64); 3],
    inv_depth: [f64; 3],
    /// `order[i]` = original vertex slot of reordered vertex `i`.
    order: [usize; 3],
    area: f64,
    rows: (usize, usize),
    cols: (usize, usize),
}

#[inline]
fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

/// Top-left ownership for an edge of a positively oriented triangle in
/// y-down pixel coordinates.
#[inline]
fn owns_edge(a: (f64, f64), b: (f64, f64)) -> bool {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}

#[inline]
fn inside(w: f64, a: (f64, f64), b: (f64, f64)) -> bool {
    w > 0.0 || (w == 0.0 && owns_edge(a, b))
}

fn setup_triangles(mesh: &TriMesh, cam: &Camera) -> Vec<Setup> {
    let (w, h) = (cam.intrinsics.width, cam.intrinsics.height);
    let projected: Vec<Option<((f64, f64), f64)>> = mesh
        .positions
        .iter()
        .map(|&p| cam.project(p).map(|xy| (xy, cam.depth(p))))
        .collect();
    let mut out = Vec::with_capacity(mesh.faces.len());
    for (f, face) in mesh.faces.iter().enumerate() {
        let (Some(a), Some(b), Some(c)) = (
            projected[face[0] as usize],
            projected[face[1] as usize],
            projected[face[2] as usize],
        ) else {
            continue;
        };
        let area = edge(a.0, b.0, c.0);
        // Front faces (CCW in world) appear with negative area in y-down pixels.
        if !(area < 0.0) {
            continue;
        }
        let verts = [a, c, b];
        let order = [0, 2, 1];
        let p = verts.map(|v| v.0);
        let min_x = p[0].0.min(p[1].0).min(p[2].0);
        let max_x = p[0].0.max(p[1].0).max(p[2].0);
        let min_y = p[0].1.min(p[1].1).min(p[2].1);
        let max_y = p[0].1.max(p[1].1).max(p[2].1);
        let Some(cols) = pixel_span(min_x, max_x, w) else {
            continue;
        };
        let Some(rows) = pixel_span(min_y, max_y, h) else {
            continue;
        };
        out.push(Setup {
            face: f as u32,
            p,
            inv_depth: verts.map(|v| 1.0 / v.1),
            order,
            area: -area,
            rows,
            cols,
        });
    }
    out
}

/// Inclusive range of pixel indices whose centers fall in `[lo, hi]`.
fn pixel_span(lo: f64, hi: f64, n: usize) -> Option<(usize, usize)> {
    let first = libm::ceil(lo - 0.5).max(0.0);
    let last = libm::floor(hi - 0.5).min(n as f64 - 1.0);
    if first > last {
        None
    } else {
        Some((first as usize, last as usize))
    }
}

fn raster_band(
    setups: &[Setup],
    bin: &[u32],
    width: usize,
    row0: usize,
    depth: &mut [f64],
    face_id: &mut [u32],
    bary: &mut [[f64; 3]],
) {
    let rows = depth.len() / width;
    for &si in bin {
        let s = &setups[si as usize];
        let y_lo = s.rows.0.max(row0);
        let y_hi = s.rows.1.min(row0 + rows - 1);
        for y in y_lo..=y_hi {
            let py = y as f64 + 0.5;
            for x in s.cols.0..=s.cols.1 {
                let px = (x as f64 + 0.5, py);
                let w0 = edge(s.p[1], s.p[2], px);
                let w1 = edge(s.p[2], s.p[0], px);
                let w2 = edge(s.p[0], s.p[1], px);
                if !(inside(w0, s.p[1], s.p[2])
                    && inside(w1, s.p[2], s.p[0])
                    && inside(w2, s.p[0], s.p[1]))
                {
                    continue;
                }
                let l = [w0 / s.area, w1 / s.area, w2 / s.area];
                let q = [l[0] * s.inv_depth[0], l[1] * s.inv_depth[1], l[2] * s.inv_depth[2]];
                let inv = q[0] + q[1] + q[2];
                let d = 1.0 / inv;
                let i = (y - row0) * width + x;
                if d < depth[i] {
                    depth[i] = d;
                    face_id[i] = s.face;
                    let mut b = [0.0; 3];
                    for k in 0..3 {
                        b[s.order[k]] = q[k] / inv;
                    }
                    bary[i] = b;
                }
            }
        }
    }
}

/// Rasterizes `mesh` through `camera` into a `size`×`size` buffer; the
/// camera's intrinsics are rescaled to `size` when they differ.
pub fn rasterize(mesh: &TriMesh, camera: &Camera, size: usize) -> Result<GBuffer> {
    if mesh.faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let cam = if camera.intrinsics.width == size && camera.intrinsics.height == size {
        *camera
    } else {
        camera.resized(size)
    };
    let (w, h) = (size, size);
    let setups = setup_triangles(mesh, &cam);
    let band_count = h.div_ceil(BAND_ROWS).max(1);
    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); band_count];
    for (i, s) in setups.iter().enumerate() {
        for bin in &mut bins[s.rows.0 / BAND_ROWS..=s.rows.1 / BAND_ROWS] {
            bin.push(i as u32);
        }
    }

    let mut g = GBuffer::empty(w, h);
    let chunk = BAND_ROWS * w;
    if w == 0 {
        return Ok(g);
    }

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        g.depth
            .par_chunks_mut(chunk)
            .zip(g.face_id.par_chunks_mut(chunk))
            .zip(g.barycentrics.par_chunks_mut(chunk))
            .enumerate()
            .for_each(|(band, ((d, f), b))| {
                raster_band(&setups, &bins[band], w, band * BAND_ROWS, d, f, b)
            });
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (band, ((d, f), b)) in g
            .depth
            .chunks_mut(chunk)
            .zip(g.face_id.chunks_mut(chunk))
            .zip(g.barycentrics.chunks_mut(chunk))
            .enumerate()
        {
            raster_band(&setups, &bins[band], w, band * BAND_ROWS, d, f, b);
        }
    }
    Ok(g)
}

/// `u8 = round(255 (n + 1) / 2)`, rounding half away from zero.
#[inline]
pub fn encode_normal(n: Vec3) -> [u8; 3] {
    let enc = |c: f64| libm::round(255.0 * (c + 1.0) / 2.0).clamp(0.0, 255.0) as u8;
    [enc(n.x), enc(n.y), enc(n.z)]
}

/// Inverse of [`encode_normal`] before re-normalization.
#[inline]
pub fn decode_normal_raw(rgb: [u8; 3]) -> Vec3 {
    let dec = |u: u8| 2.0 * u as f64 / 255.0 - 1.0;
    Vec3::new(dec(rgb[0]), dec(rgb[1]), dec(rgb[2]))
}

/// Decodes and re-normalizes; `None` for the zero vector.
#[inline]
pub fn decode_normal(rgb: [u8; 3]) -> Option<Vec3> {
    decode_normal_raw(rgb).try_normalize()
}

#[inline]
pub fn encode_color(c: [f64; 3]) -> [u8; 3] {
    let enc = |v: f64| libm::round(255.0 * v).clamp(0.0, 255.0) as u8;
    [enc(c[0]), enc(c[1]), enc(c[2])]
}

/// Color used for meshes without vertex colors.
pub const DEFAULT_GRAY: f64 = 0.8;

fn require_normals(mesh: &TriMesh) -> Result<&[Vec3]> {
    mesh.normals
        .as_deref()
        .ok_or_else(|| Error::InvalidMesh("mesh has no vertex normals".into()))
}

/// Interpolated, re-normalized world normal at a covered pixel.
#[inline]
pub(crate) fn interpolated_normal(mesh: &TriMesh, normals: &[Vec3], face: u32, b: [f64; 3]) -> Vec3 {
    let f = mesh.faces[face as usize];
    let n = normals[f[0] as usize] * b[0] + normals[f[1] as usize] * b[1] + normals[f[2] as usize] * b[2];
    n.try_normalize()
        .or_else(|| mesh.face_cross(face as usize).try_normalize())
        .unwrap_or(Vec3::Z)
}

/// Camera-space normal map from an existing G-buffer.
pub fn normal_tile_from(mesh: &TriMesh, camera: &Camera, g: &GBuffer) -> Result<ImagePlane> {
    let normals = require_normals(mesh)?;
    let mut img = ImagePlane::new(g.width, g.height, 4);
    for i in 0..g.width * g.height {
        let f = g.face_id[i];
        if f == NO_FACE {
            continue;
        }
        let n = interpolated_normal(mesh, normals, f, g.barycentrics[i]);
        let enc = encode_normal(camera.rotation.mul_vec(n));
        img.data[i * 4..i * 4 + 4].copy_from_slice(&[enc[0], enc[1], enc[2], 255]);
    }
    Ok(img)
}

/// Vertex-color image from an existing G-buffer.
pub fn color_tile_from(mesh: &TriMesh, g: &GBuffer) -> ImagePlane {
    let mut img = ImagePlane::new(g.width, g.height, 4);
    for i in 0..g.width * g.height {
        let f = g.face_id[i];
        if f == NO_FACE {
            continue;
        }
        let c = match &mesh.colors {
            Some(colors) => {
                let b = g.barycentrics[i];
                let face = mesh.faces[f as usize];
                let mut c = [0.0; 3];
                for (k, &v) in face.iter().enumerate() {
                    for ch in 0..3 {
                        c[ch] += b[k] * colors[v as usize][ch];
                    }
                }
                c
            }
            None => [DEFAULT_GRAY; 3],
        };
        let enc = encode_color(c);
        img.data[i * 4..i * 4 + 4].copy_from_slice(&[enc[0], enc[1], enc[2], 255]);
    }
    img
}

/// Camera-space normal map; background is `(0, 0, 0, 0)`.
pub fn render_normal_tile(mesh: &TriMesh, camera: &Camera, size: usize) -> Result<ImagePlane> {
    require_normals(mesh)?;
    let g = rasterize(mesh, camera, size)?;
    normal_tile_from(mesh, &camera.resized(size), &g)
}

/// Vertex colors (light gray when absent); background is `(0, 0, 0, 0)`.
pub fn render_color_tile(mesh: &TriMesh, camera: &Camera, size: usize) -> Result<ImagePlane> {
    let g = rasterize(mesh, camera, size)?;
    Ok(color_tile_from(mesh, &g))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexVisibility {
    pub visible: bool,
    /// Buffer depth minus vertex depth at the vertex's pixel, when that
    /// pixel is inside the frame and covered.
    pub depth_margin: Option<f64>,
    /// Continuous pixel position, when the vertex projects.
    pub pixel: Option<(f64, f64)>,
}

/// Depth tolerance relative to the mesh's bounding-box diagonal.
pub const VISIBILITY_EPSILON: f64 = 1e-3;

/// A vertex is visible when its pixel is covered, it is no deeper than the
/// buffer plus a small tolerance, and its normal faces the camera.
pub fn vertex_visibility(mesh: &TriMesh, camera: &Camera, g: &GBuffer) -> Result<Vec<VertexVisibility>> {
    if g.width != camera.intrinsics.width || g.height != camera.intrinsics.height {
        return Err(Error::BufferMismatch {
            expected_width: camera.intrinsics.width,
            expected_height: camera.intrinsics.height,
            actual_width: g.width,
            actual_height: g.height,
        });
    }
    let normals = require_normals(mesh)?;
    let eps = VISIBILITY_EPSILON * mesh.aabb().map(|b| b.diagonal()).unwrap_or(1.0);
    Ok(mesh
        .positions
        .iter()
        .zip(normals)
        .map(|(&p, &n)| {
            let Some((x, y)) = camera.project(p) else {
                return VertexVisibility {
                    visible: false,
                    depth_margin: None,
                    pixel: None,
                };
            };
            let (fx, fy) = (libm::floor(x), libm::floor(y));
            let in_frame = fx >= 0.0 && fy >= 0.0 && fx < g.width as f64 && fy < g.height as f64;
            let margin = if in_frame {
                let i = fy as usize * g.width + fx as usize;
                (g.face_id[i] != NO_FACE).then(|| g.depth[i] - camera.depth(p))
            } else {
                None
            };
            let front = n.dot(camera.view_dir(p)) < 0.0;
            VertexVisibility {
                visible: front && margin.is_some_and(|m| m >= -eps),
                depth_margin: margin,
                pixel: Some((x, y)),
            }
        })
        .collect())
}
