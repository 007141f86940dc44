//! Normal-map driven mesh refinement.
//!
//! Each step renders the current mesh from every rig camera, then moves the
//! vertices:
//!
//! * a normal term pulls every face toward the plane implied by the target
//!   normals (area-weighted face-plane projection, so a mesh whose normals
//!   already match the targets does not move);
//! * a silhouette term shrinks vertices that project outside any target
//!   mask and grows rim vertices next to target pixels the render misses;
//! * one pass of uniform Laplacian smoothing regularizes the result.
//!
//! The mesh is re-meshed to the target edge length every
//! `remesh_interval` steps.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::bundle::{BundleImage, NormalFrame};
use crate::camera::{build_rig, Camera};
use crate::error::{Error, Result};
use crate::geometry::{
    compute_vertex_normals, laplacian_smooth, make_icosphere, normalize_to_cube, remesh, TriMesh,
};
use crate::image::{DistanceField, Mask};
use crate::math::Vec3;
use crate::raster::{decode_normal, interpolated_normal, rasterize, vertex_visibility, GBuffer, NO_FACE};

/// Positions are kept inside this cube during refinement.
pub const POSITION_LIMIT: f64 = 1.05;
/// Pixel radius of the band used by the silhouette terms.
const SILHOUETTE_BAND: usize = 2;
/// Cap on one step's displacement of a single vertex.
const MAX_DISPLACEMENT: f64 = 0.05;
/// Pixels a vertex may sit outside the target silhouette before it is pulled in.
const SILHOUETTE_TOLERANCE: f64 = 0.5;
/// A vertex counts as a rim vertex when `|n · view| <` this.
const RIM_COSINE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub enum InitMesh {
    /// Icosphere of radius 0.85.
    Sphere { subdivisions: u32 },
    /// An externally supplied coarse mesh; it is normalized and re-meshed
    /// before refinement.
    Coarse(TriMesh),
}

impl Default for InitMesh {
    fn default() -> Self {
        InitMesh::Sphere { subdivisions: 4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconConfig {
    pub steps: u32,
    /// Relaxation factor of the face-plane projection, in [0, 1].
    pub normal_step_size: f64,
    /// Projection sweeps per step against the step's fixed targets.
    pub normal_iterations: u32,
    /// Distance a silhouette-violating vertex moves per step.
    pub silhouette_step_size: f64,
    pub laplacian_weight: f64,
    pub remesh_interval: u32,
    pub target_edge_length: f64,
    pub init: InitMesh,
    /// A trace checkpoint is recorded every this many steps.
    pub trace_interval: u32,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            steps: 50,
            normal_step_size: 0.5,
            normal_iterations: 30,
            silhouette_step_size: 0.02,
            laplacian_weight: 0.3,
            remesh_interval: 10,
            target_edge_length: 0.02,
            init: InitMesh::default(),
            trace_interval: 10,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(0.0..=1.0).contains(&self.normal_step_size) {
            return bad("normal_step_size must be in [0, 1]");
        }
        if !(self.silhouette_step_size >= 0.0 && self.silhouette_step_size.is_finite()) {
            return bad("silhouette_step_size must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.laplacian_weight) {
            return bad("laplacian_weight must be in [0, 1]");
        }
        if !(self.target_edge_length > 0.0 && self.target_edge_length.is_finite()) {
            return bad("target_edge_length must be positive");
        }
        if self.trace_interval == 0 {
            return bad("trace_interval must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Checkpoint {
    pub step: u32,
    /// Mean angle between rendered and target normals over pixels covered
    /// in both, in degrees.
    pub mean_residual_deg: f64,
    pub silhouette_iou: Vec<f64>,
    pub vertex_count: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RefineTrace {
    pub checkpoints: Vec<Checkpoint>,
}

/// Target silhouette and world-space normals of one view.
#[derive(Debug, Clone)]
pub struct ViewTarget {
    pub camera: Camera,
    pub mask: Mask,
    /// Signed pixel distance to the target silhouette.
    pub distance: DistanceField,
    /// World-space target normal per pixel, `None` in the background.
    pub normals: Vec<Option<Vec3>>,
}

impl ViewTarget {
    #[inline]
    fn normal_at(&self, x: usize, y: usize) -> Option<Vec3> {
        self.normals[y * self.mask.width + x]
    }
}

/// Decodes a bundle into per-view targets for the given cameras.
pub fn view_targets(bundle: &BundleImage, cameras: &[Camera]) -> Result<Vec<ViewTarget>> {
    bundle.validate()?;
    if cameras.len() != bundle.view_count() {
        return Err(Error::RigMismatch {
            rig: cameras.len(),
            bundle: bundle.view_count(),
        });
    }
    let s = bundle.tile_size();
    let mut out = Vec::with_capacity(cameras.len());
    for (k, cam) in cameras.iter().enumerate() {
        let camera = cam.resized(s);
        let mask = bundle.masks[k].clone();
        if !mask.any() {
            return Err(Error::AllBackground(format!("view {k} has no foreground")));
        }
        let tile = &bundle.normal_tiles[k];
        let normals = (0..s * s)
            .map(|i| {
                let (x, y) = (i % s, i / s);
                if !mask.get(x, y) {
                    return None;
                }
                let n = decode_normal(tile.rgb(x, y))?;
                Some(match bundle.meta.normal_frame {
                    NormalFrame::Camera => camera.to_world_normal(n),
                    NormalFrame::World => n,
                })
            })
            .collect();
        out.push(ViewTarget {
            distance: DistanceField::from_mask(&mask),
            camera,
            mask,
            normals,
        });
    }
    Ok(out)
}

/// Builds the starting mesh; the result has vertex normals.
pub fn init_mesh(config: &ReconConfig) -> Result<TriMesh> {
    match &config.init {
        InitMesh::Sphere { subdivisions } => make_icosphere(*subdivisions, 0.85),
        InitMesh::Coarse(mesh) => {
            let (normalized, _) = normalize_to_cube(mesh)?;
            let m = remesh(&normalized, config.target_edge_length)?;
            compute_vertex_normals(&m)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub mesh: TriMesh,
    /// Mean vertex displacement of this step, before smoothing.
    pub mean_displacement: f64,
}

/// One refinement step against a decoded bundle.
pub fn refine_step(mesh: &TriMesh, bundle: &BundleImage, cameras: &[Camera], config: &ReconConfig) -> Result<StepOutcome> {
    config.validate()?;
    let targets = view_targets(bundle, cameras)?;
    refine_step_with(mesh, &targets, config)
}

/// One refinement step against pre-decoded targets.
pub fn refine_step_with(mesh: &TriMesh, targets: &[ViewTarget], config: &ReconConfig) -> Result<StepOutcome> {
    let mesh = if mesh.normals.is_some() {
        mesh.clone()
    } else {
        compute_vertex_normals(mesh)?
    };
    let normals = mesh.normals.as_deref().unwrap_or(&[]);
    let nv = mesh.vertex_count();

    let mut target_sum = vec![Vec3::ZERO; nv];
    let mut seen = vec![false; nv];
    // Silhouette corrections as world-space displacements, per vertex.
    let mut shrink = vec![Vec3::ZERO; nv];
    let mut grow = vec![Vec3::ZERO; nv];

    for t in targets {
        let s = t.mask.width;
        let g = rasterize(&mesh, &t.camera, s)?;
        let vis = vertex_visibility(&mesh, &t.camera, &g)?;
        let rendered = g.mask();
        let mut missing = Mask::new(s, s);
        let near_render = rendered.dilate(SILHOUETTE_BAND);
        for i in 0..s * s {
            missing.data[i] = t.mask.data[i] && !rendered.data[i] && near_render.data[i];
        }
        // Reach at least one edge length so rim vertices can see the gap.
        let origin_pixel = t.camera.position.norm() / t.camera.intrinsics.focal;
        let reach = libm::ceil(config.target_edge_length / origin_pixel) as usize;
        let grow_zone = missing.dilate(reach.max(SILHOUETTE_BAND));

        for v in 0..nv {
            let Some((px, py)) = vis[v].pixel else { continue };
            let p = mesh.positions[v];
            let pixel_size = t.camera.depth(p) / t.camera.intrinsics.focal;
            let sd = t.distance.sample(px, py);
            let toward_boundary = |amount: f64| {
                // Move the projection along the distance gradient, lifted
                // into the camera's image plane.
                let gx = t.distance.sample(px + 1.0, py) - t.distance.sample(px - 1.0, py);
                let gy = t.distance.sample(px, py + 1.0) - t.distance.sample(px, py - 1.0);
                let len = libm::sqrt(gx * gx + gy * gy);
                if len < 1e-12 {
                    return Vec3::ZERO;
                }
                let (right, up) = (t.camera.rotation.rows[0], t.camera.rotation.rows[1]);
                (right * (gx / len) - up * (gy / len)) * (amount * pixel_size)
            };
            if sd > SILHOUETTE_TOLERANCE {
                shrink[v] += toward_boundary(-sd);
            }
            let (fx, fy) = (libm::floor(px), libm::floor(py));
            if fx < 0.0 || fy < 0.0 || fx >= s as f64 || fy >= s as f64 {
                continue;
            }
            let (x, y) = (fx as usize, fy as usize);
            let facing = normals[v].dot(t.camera.view_dir(p));
            if sd < 0.0 && grow_zone.get(x, y) && libm::fabs(facing) < RIM_COSINE {
                grow[v] += toward_boundary(-sd);
            }
            if vis[v].visible {
                if let Some(n) = t.normal_at(x, y) {
                    target_sum[v] += n * (-facing);
                    seen[v] = true;
                }
            }
        }
    }

    if !seen.iter().any(|&s| s) {
        return Err(Error::NoVisibleVertices);
    }
    let vertex_target: Vec<Option<Vec3>> = target_sum
        .iter()
        .zip(&seen)
        .map(|(&t, &s)| if s { t.try_normalize() } else { None })
        .collect();

    // Face targets: normalized mean of the vertex targets, when at least
    // two corners have one.
    let face_target: Vec<Option<Vec3>> = mesh
        .faces
        .iter()
        .map(|face| {
            let mut sum = Vec3::ZERO;
            let mut count = 0;
            for &v in face {
                if let Some(t) = vertex_target[v as usize] {
                    sum += t;
                    count += 1;
                }
            }
            if count < 2 {
                None
            } else {
                sum.try_normalize()
            }
        })
        .collect();

    let mut positions: Vec<Vec3> = (0..nv)
        .map(|v| {
            let sil = if shrink[v] != Vec3::ZERO { shrink[v] } else { grow[v] };
            let len = sil.norm();
            if len > 0.0 {
                mesh.positions[v] + sil * (len.min(config.silhouette_step_size) / len)
            } else {
                mesh.positions[v]
            }
        })
        .collect();

    // Face-plane projection, iterated against the fixed targets.
    let mut pull = vec![Vec3::ZERO; nv];
    let mut weight = vec![0.0; nv];
    for _ in 0..config.normal_iterations {
        pull.fill(Vec3::ZERO);
        weight.fill(0.0);
        for (face, tf) in mesh.faces.iter().zip(&face_target) {
            let Some(tf) = *tf else { continue };
            let [a, b, c] = face.map(|v| positions[v as usize]);
            let centroid = (a + b + c) * (1.0 / 3.0);
            let area = 0.5 * (b - a).cross(c - a).norm();
            for &v in face {
                let v = v as usize;
                pull[v] += tf * (area * tf.dot(centroid - positions[v]));
                weight[v] += area;
            }
        }
        for v in 0..nv {
            if weight[v] > 0.0 {
                positions[v] += pull[v] * (config.normal_step_size / weight[v]);
            }
        }
    }

    let mut moved = 0.0;
    for (p, &old) in positions.iter_mut().zip(&mesh.positions) {
        let mut d = *p - old;
        let len = d.norm();
        if len > MAX_DISPLACEMENT {
            d = d * (MAX_DISPLACEMENT / len);
        }
        moved += d.norm();
        let q = old + d;
        let lim = POSITION_LIMIT;
        *p = Vec3::new(q.x.clamp(-lim, lim), q.y.clamp(-lim, lim), q.z.clamp(-lim, lim));
    }

    let mut next = TriMesh {
        positions,
        faces: mesh.faces.clone(),
        normals: None,
        colors: mesh.colors.clone(),
    };
    if config.laplacian_weight > 0.0 {
        next = laplacian_smooth(&next, config.laplacian_weight, 1)?;
    }
    Ok(StepOutcome {
        mesh: compute_vertex_normals(&next)?,
        mean_displacement: moved / nv as f64,
    })
}

/// Normal residual and per-view silhouette IoU of `mesh` against the targets.
pub fn measure(mesh: &TriMesh, targets: &[ViewTarget]) -> Result<(f64, Vec<f64>)> {
    let mesh = if mesh.normals.is_some() {
        mesh.clone()
    } else {
        compute_vertex_normals(mesh)?
    };
    let normals = mesh.normals.as_deref().unwrap_or(&[]);
    let mut angle_sum = 0.0;
    let mut count = 0usize;
    let mut ious = Vec::with_capacity(targets.len());
    for t in targets {
        let s = t.mask.width;
        let g: GBuffer = rasterize(&mesh, &t.camera, s)?;
        let (mut inter, mut union) = (0usize, 0usize);
        for i in 0..s * s {
            let r = g.face_id[i] != NO_FACE;
            let m = t.mask.data[i];
            inter += (r && m) as usize;
            union += (r || m) as usize;
            if r {
                if let Some(tn) = t.normals[i] {
                    let n = interpolated_normal(&mesh, normals, g.face_id[i], g.barycentrics[i]);
                    let c = n.dot(tn.try_normalize().unwrap_or(tn)).clamp(-1.0, 1.0);
                    angle_sum += libm::acos(c);
                    count += 1;
                }
            }
        }
        ious.push(if union == 0 { 1.0 } else { inter as f64 / union as f64 });
    }
    let residual = if count == 0 {
        180.0
    } else {
        angle_sum / count as f64 * (180.0 / core::f64::consts::PI)
    };
    Ok((residual, ious))
}

/// Full reconstruction: initialize, refine `config.steps` times, and return
/// the final mesh (with vertex normals) plus a trace.
pub fn reconstruct(bundle: &BundleImage, config: &ReconConfig) -> Result<(TriMesh, RefineTrace)> {
    config.validate()?;
    let rig = bundle.meta.rig.clone().with_image_size(bundle.tile_size() as u32);
    let cameras = build_rig(&rig)?;
    let targets = view_targets(bundle, &cameras)?;
    let mut mesh = init_mesh(config)?;
    let mut trace = RefineTrace::default();
    let record = |mesh: &TriMesh, step: u32, trace: &mut RefineTrace| -> Result<()> {
        let (mean_residual_deg, silhouette_iou) = measure(mesh, &targets)?;
        trace.checkpoints.push(Checkpoint {
            step,
            mean_residual_deg,
            silhouette_iou,
            vertex_count: mesh.vertex_count(),
        });
        Ok(())
    };
    for step in 0..config.steps {
        if step > 0 && config.remesh_interval > 0 && step % config.remesh_interval == 0 {
            mesh = compute_vertex_normals(&remesh(&mesh, config.target_edge_length)?)?;
        }
        if step % config.trace_interval == 0 {
            record(&mesh, step, &mut trace)?;
        }
        mesh = refine_step_with(&mesh, &targets, config)?.mesh;
    }
    record(&mesh, config.steps, &mut trace)?;
    Ok((mesh, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::render_bundle;
    use crate::camera::CameraRigSpec;
    use crate::shapes::make_ellipsoid;

    fn small_rig() -> CameraRigSpec {
        CameraRigSpec::default().with_image_size(128)
    }

    #[test]
    fn own_render_is_near_fixed_point() {
        let rig = CameraRigSpec::default();
        let mesh = init_mesh(&ReconConfig::default()).unwrap();
        let bundle = render_bundle(&mesh, &rig).unwrap();
        let cams = build_rig(&rig).unwrap();
        let out = refine_step(&mesh, &bundle, &cams, &ReconConfig::default()).unwrap();
        assert!(out.mean_displacement < 1e-3, "{}", out.mean_displacement);
    }

    #[test]
    fn empty_view_is_rejected() {
        let mesh = make_icosphere(2, 0.8).unwrap();
        let mut bundle = render_bundle(&mesh, &small_rig()).unwrap();
        bundle.masks[1] = Mask::new(128, 128);
        assert!(matches!(reconstruct(&bundle, &ReconConfig::default()), Err(Error::AllBackground(_))));
    }

    #[test]
    fn refinement_reduces_residual() {
        let gt = make_ellipsoid(Vec3::new(0.95, 0.7, 0.55), 3).unwrap();
        let bundle = render_bundle(&gt, &small_rig()).unwrap();
        let cfg = ReconConfig {
            steps: 20,
            target_edge_length: 0.06,
            init: InitMesh::Sphere { subdivisions: 3 },
            ..ReconConfig::default()
        };
        let (mesh, trace) = reconstruct(&bundle, &cfg).unwrap();
        let first = trace.checkpoints.first().unwrap();
        let last = trace.checkpoints.last().unwrap();
        assert_eq!(last.step, 20);
        assert!(last.mean_residual_deg < first.mean_residual_deg);
        assert!(mesh.positions.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn zero_step_sizes_leave_mesh_unchanged() {
        let mesh = make_icosphere(2, 0.8).unwrap();
        let bundle = render_bundle(&make_ellipsoid(Vec3::new(0.9, 0.6, 0.5), 3).unwrap(), &small_rig()).unwrap();
        let cams = build_rig(&small_rig()).unwrap();
        let cfg = ReconConfig {
            normal_step_size: 0.0,
            silhouette_step_size: 0.0,
            laplacian_weight: 0.0,
            ..ReconConfig::default()
        };
        let out = refine_step(&mesh, &bundle, &cams, &cfg).unwrap();
        assert_eq!(out.mesh.positions, mesh.positions);
    }

    #[test]
    fn one_step_lowers_residual() {
        let gt = make_ellipsoid(Vec3::new(1.0, 0.7, 0.55), 3).unwrap();
        let bundle = render_bundle(&gt, &small_rig()).unwrap();
        let targets = view_targets(&bundle, &build_rig(&small_rig()).unwrap()).unwrap();
        let mesh = init_mesh(&ReconConfig::default()).unwrap();
        let before = measure(&mesh, &targets).unwrap().0;
        let after = refine_step_with(&mesh, &targets, &ReconConfig::default()).unwrap().mesh;
        assert!(measure(&after, &targets).unwrap().0 < before);
    }

    #[test]
    fn sphere_init_radius() {
        let b = init_mesh(&ReconConfig::default()).unwrap().aabb().unwrap();
        assert!(b.contained_in(-0.85 - 1e-6, 0.85 + 1e-6));
        assert!((b.max.x - 0.85).abs() < 0.01);
    }

    #[test]
    fn invalid_config() {
        let cfg = ReconConfig {
            normal_step_size: 1.5,
            ..ReconConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
