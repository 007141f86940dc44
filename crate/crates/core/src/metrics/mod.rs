//! Geometric and image evaluation: surface sampling, Chamfer distance,
//! F-score, PSNR and SSIM.
//!
//! The Chamfer variant is the sum of the two directed means of unsquared
//! Euclidean nearest-neighbor distances.

mod image;
mod kdtree;

use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use self::image::{psnr, ssim, SSIM_SIGMA, SSIM_WINDOW};
pub use kdtree::KdTree;

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::geometry::{normalize_to_cube, TriMesh};
use crate::image::ImagePlane;
use crate::math::Vec3;
use crate::raster::render_color_tile;

pub const CHAMFER_VARIANT: &str = "sum-of-means-L2";

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsConfig {
    pub sample_count: usize,
    pub fs_threshold: f64,
    pub sampling_seed: u64,
    pub psnr_cap: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            sample_count: 16384,
            fs_threshold: 0.1,
            sampling_seed: 0,
            psnr_cap: 99.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ViewScores {
    pub mean: f64,
    pub per_view: Vec<f64>,
}

impl ViewScores {
    fn from_values(per_view: Vec<f64>) -> Self {
        let mean = per_view.iter().sum::<f64>() / per_view.len().max(1) as f64;
        ViewScores { mean, per_view }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub cd: f64,
    pub fs: f64,
    pub psnr: Option<ViewScores>,
    pub ssim: Option<ViewScores>,
    pub config: MetricsConfig,
    pub variant: String,
    pub generated: String,
    pub ground_truth: String,
}

#[inline]
fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `n` points drawn uniformly by area from the mesh surface.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    if mesh.faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::ZeroArea);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let r = unit_f64(&mut rng) * total;
        let f = cumulative
            .partition_point(|&c| c <= r)
            .min(mesh.faces.len() - 1);
        let (u1, u2) = (unit_f64(&mut rng), unit_f64(&mut rng));
        let s = libm::sqrt(u1);
        let [a, b, c] = mesh.triangle(f);
        out.push(a * (1.0 - s) + b * (s * (1.0 - u2)) + c * (s * u2));
    }
    Ok(out)
}

/// Distance from every point of `from` to its nearest point in `to`.
pub fn directed_distances(from: &[Vec3], to: &[Vec3]) -> Result<Vec<f64>> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let tree = KdTree::build(to);
    let query = |q: &Vec3| tree.nearest_distance(*q).expect("tree is non-empty");
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        Ok(from.par_iter().map(query).collect())
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok(from.iter().map(query).collect())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fscore_from(ab: &[f64], ba: &[f64], tau: f64) -> f64 {
    let precision = ab.iter().filter(|&&d| d <= tau).count() as f64 / ab.len() as f64;
    let recall = ba.iter().filter(|&&d| d <= tau).count() as f64 / ba.len() as f64;
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    Ok(mean(&directed_distances(a, b)?) + mean(&directed_distances(b, a)?))
}

/// Harmonic mean of precision (`a` near `b`) and recall (`b` near `a`).
pub fn fscore(a: &[Vec3], b: &[Vec3], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    Ok(fscore_from(&directed_distances(a, b)?, &directed_distances(b, a)?, tau))
}

/// Both metrics from one pair of nearest-neighbor sweeps.
pub fn chamfer_and_fscore(a: &[Vec3], b: &[Vec3], tau: f64) -> Result<(f64, f64)> {
    check_tau(tau)?;
    let ab = directed_distances(a, b)?;
    let ba = directed_distances(b, a)?;
    Ok((mean(&ab) + mean(&ba), fscore_from(&ab, &ba, tau)))
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(alloc::format!("F-score threshold {tau} must be positive")))
    }
}

/// Reference views to compare renders against.
#[derive(Debug, Clone)]
pub struct ReferenceViews {
    pub images: Vec<ImagePlane>,
    pub cameras: Vec<Camera>,
}

/// Normalizes both meshes into the unit cube, then compares sampled surfaces
/// and, when reference views are supplied, renders of `generated` against
/// them (both composited over white).
pub fn evaluate_pair(
    generated: &TriMesh,
    ground_truth: &TriMesh,
    views: Option<&ReferenceViews>,
    config: &MetricsConfig,
) -> Result<MetricsReport> {
    if config.sample_count == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    let (gen, _) = normalize_to_cube(generated)?;
    let (gt, _) = normalize_to_cube(ground_truth)?;
    let a = sample_surface(&gen, config.sample_count, config.sampling_seed)?;
    let b = sample_surface(&gt, config.sample_count, config.sampling_seed)?;
    let (cd, fs) = chamfer_and_fscore(&a, &b, config.fs_threshold)?;

    let (psnr_scores, ssim_scores) = match views {
        Some(v) => {
            if v.images.len() != v.cameras.len() {
                return Err(Error::RigMismatch {
                    rig: v.cameras.len(),
                    bundle: v.images.len(),
                });
            }
            let mut p = Vec::with_capacity(v.images.len());
            let mut s = Vec::with_capacity(v.images.len());
            for (img, cam) in v.images.iter().zip(&v.cameras) {
                let render = render_color_tile(&gen, cam, img.width)?;
                let ours = render.composite_over([255, 255, 255]);
                let theirs = img.composite_over([255, 255, 255]);
                p.push(psnr(&ours, &theirs, config.psnr_cap)?);
                s.push(ssim(&ours, &theirs)?);
            }
            (
                Some(ViewScores::from_values(p)),
                Some(ViewScores::from_values(s)),
            )
        }
        None => (None, None),
    };

    Ok(MetricsReport {
        cd,
        fs,
        psnr: psnr_scores,
        ssim: ssim_scores,
        config: config.clone(),
        variant: CHAMFER_VARIANT.into(),
        generated: String::new(),
        ground_truth: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_icosphere;
    use alloc::vec;

    #[test]
    fn single_triangle_samples_stay_in_plane() {
        let m = TriMesh::new(
            vec![Vec3::new(0.0, 0.0, 2.0), Vec3::new(1.0, 0.0, 2.0), Vec3::new(0.0, 1.0, 2.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let pts = sample_surface(&m, 1000, 3).unwrap();
        assert!(pts.iter().all(|p| (p.z - 2.0).abs() < 1e-9 && p.x + p.y <= 1.0 + 1e-12));
    }

    #[test]
    fn area_weighting_within_three_sigma() {
        // Two disjoint triangles with areas 1 and 3.
        let s3 = libm::sqrt(3.0);
        let m = TriMesh::new(
            vec![
                Vec3::ZERO,
                Vec3::new(2.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(5.0, 0.0, 0.0),
                Vec3::new(5.0 + 2.0 * s3, 0.0, 0.0),
                Vec3::new(5.0, s3, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        assert!((m.face_area(1) / m.face_area(0) - 3.0).abs() < 1e-12);
        let n = 16384;
        let pts = sample_surface(&m, n, 11).unwrap();
        let first = pts.iter().filter(|p| p.x < 2.5).count() as f64;
        let sigma = libm::sqrt(n as f64 * 0.25 * 0.75);
        assert!((first - 0.25 * n as f64).abs() < 3.0 * sigma, "{first}");
    }

    #[test]
    fn zero_area_errors() {
        let m = TriMesh::new(vec![Vec3::ZERO, Vec3::X, Vec3::X * 2.0], vec![[0, 1, 2]]).unwrap();
        assert_eq!(sample_surface(&m, 10, 0), Err(Error::ZeroArea));
    }

    #[test]
    fn chamfer_and_fscore_simple_cases() {
        let a = [Vec3::ZERO];
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        assert_eq!(chamfer(&a, &[Vec3::X]).unwrap(), 2.0);
        assert_eq!(fscore(&a, &a, 0.1).unwrap(), 1.0);
        assert_eq!(fscore(&a, &[Vec3::X * 0.2], 0.1).unwrap(), 0.0);
        assert_eq!(chamfer(&[], &a), Err(Error::EmptyPointSet));
    }

    #[test]
    fn mesh_against_itself() {
        let m = make_icosphere(2, 0.7).unwrap();
        let cfg = MetricsConfig {
            sample_count: 2000,
            ..Default::default()
        };
        let r = evaluate_pair(&m, &m, None, &cfg).unwrap();
        assert_eq!(r.cd, 0.0);
        assert_eq!(r.fs, 1.0);
        assert_eq!(r.variant, "sum-of-means-L2");
    }
}
