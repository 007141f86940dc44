//! Projects the bundle's RGB views onto a mesh as per-vertex colors.

use alloc::vec;
use alloc::vec::Vec;

use crate::bundle::BundleImage;
use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::geometry::topology::Adjacency;
use crate::geometry::{compute_vertex_normals, subdivide_to_edge_length, Rgb, TriMesh};
use crate::image::{ImagePlane, Mask};
use crate::raster::{rasterize, vertex_visibility, DEFAULT_GRAY};

/// Maximum rounds of color diffusion into uncolored vertices.
const DIFFUSION_ROUNDS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct TextureConfig {
    /// Exponent on the view cosine; larger favors head-on views.
    pub cosine_power: f64,
    /// Vertices whose total weight is below this get `fallback_color`.
    pub min_weight: f64,
    pub fallback_color: Rgb,
    /// Split edges longer than this before projecting.
    pub pre_subdivide_to_edge_length: Option<f64>,
}

impl Default for TextureConfig {
    fn default() -> Self {
        TextureConfig {
            cosine_power: 4.0,
            min_weight: 1e-3,
            fallback_color: [DEFAULT_GRAY; 3],
            pre_subdivide_to_edge_length: Some(0.01),
        }
    }
}

impl TextureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cosine_power > 0.0 && self.cosine_power.is_finite()) {
            return Err(Error::InvalidParameter("cosine_power must be positive".into()));
        }
        if !(self.min_weight >= 0.0 && self.min_weight.is_finite()) {
            return Err(Error::InvalidParameter("min_weight must be non-negative".into()));
        }
        if self.fallback_color.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidParameter("fallback_color must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Mask-weighted bilinear sample at continuous pixel coordinates, clamped
/// at the tile border. Returns the color and the mask coverage in [0, 1].
fn sample(tile: &ImagePlane, mask: &Mask, x: f64, y: f64) -> ([f64; 3], f64) {
    let (u, v) = (x - 0.5, y - 0.5);
    let (x0, y0) = (libm::floor(u), libm::floor(v));
    let (fx, fy) = (u - x0, v - y0);
    let clamp = |i: f64, n: usize| (i.max(0.0) as usize).min(n - 1);
    let mut color = [0.0; 3];
    let mut coverage = 0.0;
    for (dy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
        for (dx, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
            let (px, py) = (clamp(x0 + dx, tile.width), clamp(y0 + dy, tile.height));
            if !mask.get(px, py) {
                continue;
            }
            let w = wx * wy;
            let rgb = tile.rgb(px, py);
            for c in 0..3 {
                color[c] += w * rgb[c] as f64 / 255.0;
            }
            coverage += w;
        }
    }
    if coverage > 0.0 {
        for c in &mut color {
            *c /= coverage;
        }
    }
    (color, coverage)
}

fn check_views(bundle: &BundleImage, cameras: &[Camera]) -> Result<()> {
    bundle.validate()?;
    if cameras.len() != bundle.view_count() {
        return Err(Error::RigMismatch {
            rig: cameras.len(),
            bundle: bundle.view_count(),
        });
    }
    Ok(())
}

/// Per-view, per-vertex projection weights `visible · cos^p · coverage`.
/// The mesh must carry vertex normals.
pub fn view_weights(mesh: &TriMesh, bundle: &BundleImage, cameras: &[Camera], config: &TextureConfig) -> Result<Vec<Vec<f64>>> {
    Ok(view_samples(mesh, bundle, cameras, config)?
        .into_iter()
        .map(|v| v.into_iter().map(|(w, _)| w).collect())
        .collect())
}

fn view_samples(
    mesh: &TriMesh,
    bundle: &BundleImage,
    cameras: &[Camera],
    config: &TextureConfig,
) -> Result<Vec<Vec<(f64, [f64; 3])>>> {
    check_views(bundle, cameras)?;
    config.validate()?;
    let normals = mesh
        .normals
        .as_deref()
        .ok_or_else(|| Error::InvalidMesh("mesh has no vertex normals".into()))?;
    let s = bundle.tile_size();
    let mut out = Vec::with_capacity(cameras.len());
    for (k, cam) in cameras.iter().enumerate() {
        let cam = cam.resized(s);
        let g = rasterize(mesh, &cam, s)?;
        let vis = vertex_visibility(mesh, &cam, &g)?;
        let per_vertex = vis
            .iter()
            .enumerate()
            .map(|(v, vv)| {
                let (true, Some((px, py))) = (vv.visible, vv.pixel) else {
                    return (0.0, [0.0; 3]);
                };
                let p = mesh.positions[v];
                let cos = (-normals[v].dot(cam.view_dir(p))).max(0.0);
                let (color, coverage) = sample(&bundle.rgb_tiles[k], &bundle.masks[k], px, py);
                (libm::pow(cos, config.cosine_power) * coverage, color)
            })
            .collect();
        out.push(per_vertex);
    }
    Ok(out)
}

/// Colors every vertex from the views that see it. Views are accumulated
/// in azimuth order, so permuting the views does not change the result.
pub fn project_colors(mesh: &TriMesh, bundle: &BundleImage, cameras: &[Camera], config: &TextureConfig) -> Result<TriMesh> {
    check_views(bundle, cameras)?;
    config.validate()?;
    if bundle.meta.rig.azimuths_deg.len() != cameras.len() {
        return Err(Error::RigMismatch {
            rig: cameras.len(),
            bundle: bundle.meta.rig.azimuths_deg.len(),
        });
    }
    let mesh = match config.pre_subdivide_to_edge_length {
        Some(len) => subdivide_to_edge_length(mesh, len)?,
        None => mesh.clone(),
    };
    let mut mesh = compute_vertex_normals(&mesh)?;
    let samples = view_samples(&mesh, bundle, cameras, config)?;
    let order = bundle.meta.rig.azimuth_order();

    let nv = mesh.vertex_count();
    let mut colors = vec![config.fallback_color; nv];
    let mut colored = vec![false; nv];
    for v in 0..nv {
        let mut total = 0.0;
        let mut acc = [0.0; 3];
        for &k in &order {
            let (w, c) = samples[k][v];
            if w > 0.0 {
                total += w;
                for ch in 0..3 {
                    acc[ch] += w * c[ch];
                }
            }
        }
        if total >= config.min_weight && total > 0.0 {
            colors[v] = acc.map(|a| (a / total).clamp(0.0, 1.0));
            colored[v] = true;
        }
    }

    let adj = Adjacency::build(nv, &mesh.faces);
    for _ in 0..DIFFUSION_ROUNDS {
        let mut updates = Vec::new();
        for v in (0..nv).filter(|&v| !colored[v]) {
            let mut acc = [0.0; 3];
            let mut n = 0usize;
            for &u in adj.neighbors(v) {
                if colored[u as usize] {
                    for ch in 0..3 {
                        acc[ch] += colors[u as usize][ch];
                    }
                    n += 1;
                }
            }
            if n > 0 {
                updates.push((v, acc.map(|a| a / n as f64)));
            }
        }
        if updates.is_empty() {
            break;
        }
        for (v, c) in updates {
            colors[v] = c;
            colored[v] = true;
        }
    }
    mesh.colors = Some(colors);
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::render_bundle;
    use crate::camera::{build_rig, CameraRigSpec};
    use crate::geometry::make_icosphere;
    use crate::math::Vec3;

    fn rig(azimuths: &[f64]) -> CameraRigSpec {
        CameraRigSpec {
            azimuths_deg: azimuths.to_vec(),
            ..CameraRigSpec::default().with_image_size(128)
        }
    }

    fn cfg() -> TextureConfig {
        TextureConfig {
            pre_subdivide_to_edge_length: None,
            ..TextureConfig::default()
        }
    }

    #[test]
    fn consistent_red_views() {
        let spec = rig(&[0.0, 90.0, 180.0, 270.0]);
        let mesh = make_icosphere(3, 0.8).unwrap().with_uniform_color([1.0, 0.0, 0.0]);
        let bundle = render_bundle(&mesh, &spec).unwrap();
        let out = project_colors(&mesh, &bundle, &build_rig(&spec).unwrap(), &cfg()).unwrap();
        for c in out.colors.unwrap() {
            assert!((c[0] - 1.0).abs() <= 2.0 / 255.0 && c[1] <= 2.0 / 255.0 && c[2] <= 2.0 / 255.0, "{c:?}");
        }
    }

    #[test]
    fn occluded_vertex_gets_zero_weight() {
        let spec = rig(&[0.0, 180.0]);
        let cams = build_rig(&spec).unwrap();
        // Small sphere behind a large quad facing the front camera.
        let sphere = make_icosphere(2, 0.3).unwrap();
        let mut positions = sphere.positions.clone();
        let mut faces = sphere.faces.clone();
        let base = positions.len() as u32;
        for (x, y) in [(-0.9, -0.9), (0.9, -0.9), (0.9, 0.9), (-0.9, 0.9)] {
            positions.push(Vec3::new(x, y, 0.8));
        }
        faces.push([base, base + 1, base + 2]);
        faces.push([base, base + 2, base + 3]);
        let mesh = compute_vertex_normals(&TriMesh::new(positions, faces).unwrap()).unwrap();
        let bundle = render_bundle(&mesh, &spec).unwrap();
        let w = view_weights(&mesh, &bundle, &cams, &cfg()).unwrap();
        let pole = |sign: f64| {
            (0..sphere.positions.len())
                .max_by(|&a, &b| (sphere.positions[a].z * sign).total_cmp(&(sphere.positions[b].z * sign)))
                .unwrap()
        };
        // Hidden from the front camera, seen from the back one.
        assert_eq!(w[0][pole(1.0)], 0.0);
        assert!(w[1][pole(-1.0)] > 0.0);
    }

    #[test]
    fn two_view_disagreement() {
        let spec = rig(&[0.0, 180.0]);
        let cams = build_rig(&spec).unwrap();
        let mesh = make_icosphere(3, 0.8).unwrap();
        let mut bundle = render_bundle(&mesh, &spec).unwrap();
        for (k, rgb) in [(0usize, [255u8, 0, 0]), (1, [0, 0, 255])] {
            let tile = &mut bundle.rgb_tiles[k];
            for px in tile.data.chunks_exact_mut(4) {
                if px[3] > 0 {
                    px[..3].copy_from_slice(&rgb);
                }
            }
        }
        let out = project_colors(&mesh, &bundle, &cams, &cfg()).unwrap();
        let colors = out.colors.unwrap();
        let pole = |dir: Vec3| {
            (0..out.positions.len())
                .max_by(|&a, &b| out.positions[a].dot(dir).total_cmp(&out.positions[b].dot(dir)))
                .unwrap()
        };
        let front = colors[pole(Vec3::Z)];
        let back = colors[pole(-Vec3::Z)];
        assert!(front[0] > 0.99 && front[2] < 0.01, "{front:?}");
        assert!(back[2] > 0.99 && back[0] < 0.01, "{back:?}");
        // On the equator at +X both views are grazing; the result is a blend.
        let side = colors[pole(Vec3::X)];
        assert!(side[0] > 0.05 && side[2] > 0.05 && (side[0] + side[2] - 1.0).abs() < 0.05, "{side:?}");
    }

    #[test]
    fn view_permutation_is_bitwise_stable() {
        let spec = rig(&[0.0, 90.0, 180.0, 270.0]);
        let mesh = make_icosphere(3, 0.8).unwrap();
        let mut colored = mesh.clone();
        colored.colors = Some(mesh.positions.iter().map(|p| [(p.x + 1.0) / 2.0, (p.y + 1.0) / 2.0, (p.z + 1.0) / 2.0]).collect());
        let bundle = render_bundle(&colored, &spec).unwrap();
        let a = project_colors(&mesh, &bundle, &build_rig(&spec).unwrap(), &cfg()).unwrap();

        let perm = [2usize, 0, 3, 1];
        let pspec = CameraRigSpec {
            azimuths_deg: perm.iter().map(|&i| spec.azimuths_deg[i]).collect(),
            ..spec.clone()
        };
        let mut pb = bundle.clone();
        pb.meta.rig = pspec.clone();
        pb.rgb_tiles = perm.iter().map(|&i| bundle.rgb_tiles[i].clone()).collect();
        pb.normal_tiles = perm.iter().map(|&i| bundle.normal_tiles[i].clone()).collect();
        pb.masks = perm.iter().map(|&i| bundle.masks[i].clone()).collect();
        let b = project_colors(&mesh, &pb, &build_rig(&pspec).unwrap(), &cfg()).unwrap();
        assert_eq!(a.colors, b.colors);
    }

    #[test]
    fn large_power_stays_finite() {
        let spec = rig(&[0.0]);
        let mesh = make_icosphere(2, 0.8).unwrap();
        let bundle = render_bundle(&mesh, &spec).unwrap();
        let config = TextureConfig {
            cosine_power: 64.0,
            ..cfg()
        };
        let out = project_colors(&mesh, &bundle, &build_rig(&spec).unwrap(), &config).unwrap();
        for c in out.colors.unwrap() {
            assert!(c.iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn rig_mismatch() {
        let spec = rig(&[0.0, 90.0]);
        let mesh = make_icosphere(1, 0.8).unwrap();
        let bundle = render_bundle(&mesh, &spec).unwrap();
        let cams = build_rig(&rig(&[0.0])).unwrap();
        assert!(matches!(project_colors(&mesh, &bundle, &cams, &cfg()), Err(Error::RigMismatch { .. })));
    }
}
