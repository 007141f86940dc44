//! The tiled bundle image: one row of RGB views over one row of matching
//! normal maps, views ordered as in the rig.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::camera::{build_rig, CameraRigSpec};
use crate::error::{Error, Result};
use crate::geometry::{compute_vertex_normals, TriMesh};
use crate::image::{ImagePlane, Mask};
use crate::raster::{color_tile_from, normal_tile_from, rasterize};

pub const LAYOUT_VERSION: u32 = 1;

/// Encoded-magnitude threshold separating foreground normals from the
/// black background when no alpha channel is available.
pub const NORMAL_MASK_THRESHOLD: f64 = 0.5;

/// Background used when flattening RGB tiles to three channels.
pub const RGB_BACKGROUND: [u8; 3] = [255, 255, 255];
/// Background used when flattening normal tiles to three channels.
pub const NORMAL_BACKGROUND: [u8; 3] = [0, 0, 0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum NormalFrame {
    #[default]
    Camera,
    World,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BundleMeta {
    pub layout_version: u32,
    pub caption: String,
    pub seed: u64,
    pub rig: CameraRigSpec,
    pub normal_frame: NormalFrame,
}

impl Default for BundleMeta {
    fn default() -> Self {
        BundleMeta {
            layout_version: LAYOUT_VERSION,
            caption: String::new(),
            seed: 0,
            rig: CameraRigSpec::default(),
            normal_frame: NormalFrame::Camera,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleImage {
    pub rgb_tiles: Vec<ImagePlane>,
    pub normal_tiles: Vec<ImagePlane>,
    pub masks: Vec<Mask>,
    pub meta: BundleMeta,
}

impl BundleImage {
    pub fn view_count(&self) -> usize {
        self.rgb_tiles.len()
    }

    pub fn tile_size(&self) -> usize {
        self.rgb_tiles.first().map_or(0, |t| t.width)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rgb_tiles.len();
        if n == 0 || self.normal_tiles.len() != n || self.masks.len() != n {
            return Err(Error::TileSizeMismatch(format!(
                "{} rgb, {} normal, {} mask tiles",
                n,
                self.normal_tiles.len(),
                self.masks.len()
            )));
        }
        let s = self.rgb_tiles[0].width;
        let square = |w: usize, h: usize| w == s && h == s;
        for t in self.rgb_tiles.iter().chain(&self.normal_tiles) {
            if !square(t.width, t.height) {
                return Err(Error::TileSizeMismatch(format!(
                    "tile {}x{} in a bundle of {s}x{s} tiles",
                    t.width, t.height
                )));
            }
        }
        if let Some(m) = self.masks.iter().find(|m| !square(m.width, m.height)) {
            return Err(Error::TileSizeMismatch(format!(
                "mask {}x{} in a bundle of {s}x{s} tiles",
                m.width, m.height
            )));
        }
        Ok(())
    }
}

/// Lays the tiles out as a `(views·S) × (2·S)` RGBA image.
pub fn compose(bundle: &BundleImage) -> Result<ImagePlane> {
    bundle.validate()?;
    let s = bundle.tile_size();
    let n = bundle.view_count();
    let mut out = ImagePlane::new(n * s, 2 * s, 4);
    for (k, (rgb, normal)) in bundle.rgb_tiles.iter().zip(&bundle.normal_tiles).enumerate() {
        out.blit(&rgb.to_rgba(), k * s, 0);
        out.blit(&normal.to_rgba(), k * s, s);
    }
    Ok(out)
}

/// Three-channel form for backends that do not carry alpha: RGB tiles over
/// white, normal tiles over black.
pub fn compose_flat_rgb(bundle: &BundleImage) -> Result<ImagePlane> {
    bundle.validate()?;
    let s = bundle.tile_size();
    let n = bundle.view_count();
    let mut out = ImagePlane::new(n * s, 2 * s, 3);
    for (k, (rgb, normal)) in bundle.rgb_tiles.iter().zip(&bundle.normal_tiles).enumerate() {
        out.blit(&rgb.composite_over(RGB_BACKGROUND), k * s, 0);
        out.blit(&normal.composite_over(NORMAL_BACKGROUND), k * s, s);
    }
    Ok(out)
}

/// Foreground test for an alpha-less normal pixel: magnitude of the encoded
/// vector on the `[0, 1]` scale, before decoding or re-normalization.
#[inline]
pub fn normal_pixel_is_foreground(rgb: [u8; 3]) -> bool {
    let m2: f64 = rgb.iter().map(|&u| (u as f64 / 255.0) * (u as f64 / 255.0)).sum();
    m2 >= NORMAL_MASK_THRESHOLD * NORMAL_MASK_THRESHOLD
}

/// Splits a composed image back into tiles. Masks come from the normal
/// tiles' alpha when present, otherwise from [`normal_pixel_is_foreground`].
pub fn decompose(flat: &ImagePlane, meta: &BundleMeta) -> Result<BundleImage> {
    let views = meta.rig.azimuths_deg.len().max(1);
    let bad = || Error::BadAspect {
        width: flat.width,
        height: flat.height,
    };
    if flat.height == 0 || flat.height % 2 != 0 {
        return Err(bad());
    }
    let s = flat.height / 2;
    if flat.width != views * s {
        return Err(bad());
    }
    let mut rgb_tiles = Vec::with_capacity(views);
    let mut normal_tiles = Vec::with_capacity(views);
    let mut masks = Vec::with_capacity(views);
    for k in 0..views {
        let mut rgb = flat.crop(k * s, 0, s, s);
        let mut normal = flat.crop(k * s, s, s, s);
        let mask = if flat.channels == 4 {
            normal.alpha_mask()
        } else {
            let mut m = Mask::new(s, s);
            for y in 0..s {
                for x in 0..s {
                    m.set(x, y, normal_pixel_is_foreground(normal.rgb(x, y)));
                }
            }
            rgb = with_mask_alpha(&rgb, &m);
            normal = with_mask_alpha(&normal, &m);
            m
        };
        rgb_tiles.push(rgb);
        normal_tiles.push(normal);
        masks.push(mask);
    }
    if !masks.iter().any(Mask::any) {
        return Err(Error::AllBackground(String::new()));
    }
    Ok(BundleImage {
        rgb_tiles,
        normal_tiles,
        masks,
        meta: meta.clone(),
    })
}

fn with_mask_alpha(img: &ImagePlane, mask: &Mask) -> ImagePlane {
    let mut out = img.to_rgba();
    for (px, &m) in out.data.chunks_exact_mut(4).zip(&mask.data) {
        px[3] = if m { 255 } else { 0 };
    }
    out
}

/// Renders one color and one normal tile per rig camera. The mesh must
/// already sit inside the normalized cube.
pub fn render_bundle(mesh: &TriMesh, spec: &CameraRigSpec) -> Result<BundleImage> {
    let bbox = mesh.aabb().ok_or(Error::EmptyMesh)?;
    if !bbox.contained_in(-1.01, 1.01) {
        return Err(Error::OutsideNormalizedCube);
    }
    let owned;
    let mesh = if mesh.normals.is_some() {
        mesh
    } else {
        owned = compute_vertex_normals(mesh)?;
        &owned
    };
    let cameras = build_rig(spec)?;
    let size = spec.image_size as usize;
    let mut bundle = BundleImage {
        rgb_tiles: Vec::with_capacity(cameras.len()),
        normal_tiles: Vec::with_capacity(cameras.len()),
        masks: Vec::with_capacity(cameras.len()),
        meta: BundleMeta {
            rig: spec.clone(),
            ..BundleMeta::default()
        },
    };
    for cam in &cameras {
        let g = rasterize(mesh, cam, size)?;
        bundle.rgb_tiles.push(color_tile_from(mesh, &g));
        bundle.normal_tiles.push(normal_tile_from(mesh, cam, &g)?);
        bundle.masks.push(g.mask());
    }
    Ok(bundle)
}

/// Replaces the front RGB view with `image`, letterboxed into the tile:
/// aspect-preserving nearest-neighbor resize, centered, padded with
/// transparent black.
pub fn replace_front_rgb(bundle: &BundleImage, image: &ImagePlane) -> Result<BundleImage> {
    bundle.validate()?;
    if image.width == 0 || image.height == 0 {
        return Err(Error::ImageMismatch("empty input image".into()));
    }
    let s = bundle.tile_size();
    let front = bundle.meta.rig.front_view().min(bundle.view_count() - 1);
    let tile = if image.width == s && image.height == s {
        image.to_rgba()
    } else {
        letterbox(image, s)
    };
    let mut out = bundle.clone();
    out.rgb_tiles[front] = tile;
    Ok(out)
}

fn letterbox(image: &ImagePlane, s: usize) -> ImagePlane {
    let scale = (s as f64 / image.width as f64).min(s as f64 / image.height as f64);
    let nw = (libm::round(image.width as f64 * scale) as usize).clamp(1, s);
    let nh = (libm::round(image.height as f64 * scale) as usize).clamp(1, s);
    let (ox, oy) = ((s - nw) / 2, (s - nh) / 2);
    let src = image.to_rgba();
    let mut out = ImagePlane::new(s, s, 4);
    for y in 0..nh {
        let sy = ((libm::floor((y as f64 + 0.5) / scale)) as usize).min(image.height - 1);
        for x in 0..nw {
            let sx = ((libm::floor((x as f64 + 0.5) / scale)) as usize).min(image.width - 1);
            out.pixel_mut(ox + x, oy + y).copy_from_slice(src.pixel(sx, sy));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_icosphere;
    use crate::raster::decode_normal_raw;

    fn sphere_bundle(size: u32) -> BundleImage {
        let m = make_icosphere(3, 0.9).unwrap();
        render_bundle(&m, &CameraRigSpec::default().with_image_size(size)).unwrap()
    }

    #[test]
    fn composed_size_and_layout() {
        let b = sphere_bundle(32);
        let flat = compose(&b).unwrap();
        assert_eq!((flat.width, flat.height), (128, 64));
        assert_eq!(flat.crop(64, 0, 32, 32), b.rgb_tiles[2]);
        assert_eq!(b.meta.rig.azimuths_deg[2], 180.0);
        assert_eq!(flat.crop(64, 32, 32, 32), b.normal_tiles[2]);
    }

    #[test]
    fn compose_decompose_round_trip() {
        let b = sphere_bundle(32);
        let back = decompose(&compose(&b).unwrap(), &b.meta).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn default_size_is_2048_by_1024() {
        let b = sphere_bundle(512);
        let flat = compose(&b).unwrap();
        assert_eq!((flat.width, flat.height), (2048, 1024));
    }

    #[test]
    fn sphere_discs_have_equal_area() {
        let b = sphere_bundle(128);
        let areas: Vec<usize> = b.masks.iter().map(Mask::count).collect();
        let max = *areas.iter().max().unwrap() as f64;
        let min = *areas.iter().min().unwrap() as f64;
        assert!((max - min) / max < 0.02, "{areas:?}");
    }

    #[test]
    fn masks_from_normals_match_alpha() {
        let b = sphere_bundle(128);
        let rgb_only = compose_flat_rgb(&b).unwrap();
        let d = decompose(&rgb_only, &b.meta).unwrap();
        for (m, truth) in d.masks.iter().zip(&b.masks) {
            let bad = m.disagreement(truth) as f64 / truth.count() as f64;
            assert!(bad < 0.01, "{bad}");
        }
    }

    #[test]
    fn rendered_normals_decode_to_unit() {
        let b = sphere_bundle(64);
        for (t, m) in b.normal_tiles.iter().zip(&b.masks) {
            for y in 0..64 {
                for x in 0..64 {
                    if m.get(x, y) {
                        let n = decode_normal_raw(t.rgb(x, y)).norm();
                        assert!((n - 1.0).abs() < 0.05);
                    }
                }
            }
        }
    }

    #[test]
    fn bad_aspect_and_background_rejected() {
        let meta = BundleMeta::default();
        let img = ImagePlane::new(513, 256, 4);
        assert!(matches!(decompose(&img, &meta), Err(Error::BadAspect { .. })));
        let blank = ImagePlane::new(512, 256, 4);
        assert!(matches!(decompose(&blank, &meta), Err(Error::AllBackground(_))));
    }

    #[test]
    fn unnormalized_mesh_rejected() {
        let m = make_icosphere(1, 1.0).unwrap().map_positions(|p| p * 2.0 + crate::Vec3::splat(2.0));
        assert_eq!(
            render_bundle(&m, &CameraRigSpec::default().with_image_size(16)),
            Err(Error::OutsideNormalizedCube)
        );
    }

    #[test]
    fn replacing_front_with_itself_is_identity() {
        let b = sphere_bundle(32);
        let same = replace_front_rgb(&b, &b.rgb_tiles[0]).unwrap();
        assert_eq!(same, b);
    }

    #[test]
    fn smaller_image_is_upscaled_and_centered() {
        let b = sphere_bundle(64);
        let mut small = ImagePlane::new(32, 16, 3);
        for y in 0..16 {
            for x in 0..32 {
                small.pixel_mut(x, y).copy_from_slice(&[x as u8, y as u8, 7]);
            }
        }
        let out = replace_front_rgb(&b, &small).unwrap();
        let t = &out.rgb_tiles[0];
        // 2x upscale to 64x32, rows 16..48.
        assert_eq!(t.pixel(0, 15), &[0, 0, 0, 0]);
        assert_eq!(t.pixel(0, 16), &[0, 0, 7, 255]);
        assert_eq!(t.pixel(1, 17), &[0, 0, 7, 255]);
        assert_eq!(t.pixel(2, 18), &[1, 1, 7, 255]);
        assert_eq!(t.pixel(63, 47), &[31, 15, 7, 255]);
        assert_eq!(t.pixel(63, 48), &[0, 0, 0, 0]);
        for k in 1..4 {
            assert_eq!(out.rgb_tiles[k], b.rgb_tiles[k]);
        }
        assert_eq!(out.normal_tiles, b.normal_tiles);
        assert_eq!(out.masks, b.masks);
        assert_eq!(out.meta, b.meta);
    }
}
