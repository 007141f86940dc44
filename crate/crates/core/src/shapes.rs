//! Procedural genus-0 shapes built by radially re-projecting an icosphere.
//! Used as ground-truth fixtures and demo inputs.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geometry::{compute_vertex_normals, make_icosphere, TriMesh};
use crate::math::Vec3;

/// Axis-aligned ellipsoid with the given semi-axes.
pub fn make_ellipsoid(radii: Vec3, subdivisions: u32) -> Result<TriMesh> {
    let base = make_icosphere(subdivisions, 1.0)?;
    compute_vertex_normals(&base.map_positions(|d| Vec3::new(d.x * radii.x, d.y * radii.y, d.z * radii.z)))
}

/// Superellipsoid `Σ |p_i / h_i|^e = 1`; `exponent` around 6–10 gives a
/// box with rounded edges.
pub fn make_rounded_box(half_extents: Vec3, exponent: f64, subdivisions: u32) -> Result<TriMesh> {
    let base = make_icosphere(subdivisions, 1.0)?;
    let h = half_extents;
    compute_vertex_normals(&base.map_positions(|d| {
        let s = libm::pow(libm::fabs(d.x / h.x), exponent)
            + libm::pow(libm::fabs(d.y / h.y), exponent)
            + libm::pow(libm::fabs(d.z / h.z), exponent);
        d * libm::pow(s, -1.0 / exponent)
    }))
}

/// Star-shaped blob: unit sphere with a seeded sum of low-frequency bumps.
pub fn make_blob(seed: u64, subdivisions: u32) -> Result<TriMesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let mut lobes = [(Vec3::ZERO, 0.0, 0.0, 0.0); 5];
    for lobe in &mut lobes {
        let z = 2.0 * uniform() - 1.0;
        let phi = 2.0 * core::f64::consts::PI * uniform();
        let r = libm::sqrt(1.0 - z * z);
        let axis = Vec3::new(r * libm::cos(phi), z, r * libm::sin(phi));
        let freq = 1.0 + 2.0 * uniform();
        let phase = 2.0 * core::f64::consts::PI * uniform();
        let amp = 0.06 + 0.06 * uniform();
        *lobe = (axis, freq, phase, amp);
    }
    let base = make_icosphere(subdivisions, 1.0)?;
    compute_vertex_normals(&base.map_positions(|d| {
        let r: f64 = 1.0
            + lobes
                .iter()
                .map(|&(axis, f, ph, a)| a * libm::sin(f * core::f64::consts::PI * d.dot(axis) + ph))
                .sum::<f64>();
        d * r
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::topology::{euler_characteristic, is_closed_manifold};

    #[test]
    fn shapes_are_closed_spheres() {
        for m in [
            make_ellipsoid(Vec3::new(1.0, 0.7, 0.5), 3).unwrap(),
            make_rounded_box(Vec3::new(1.0, 0.6, 0.7), 6.0, 3).unwrap(),
            make_blob(3, 3).unwrap(),
        ] {
            assert_eq!(euler_characteristic(&m), 2);
            assert!(is_closed_manifold(&m));
            assert!(m.positions.iter().all(|p| p.is_finite()));
        }
    }

    #[test]
    fn ellipsoid_extent() {
        let b = make_ellipsoid(Vec3::new(1.0, 0.7, 0.5), 3).unwrap().aabb().unwrap();
        assert!((b.max.x - 1.0).abs() < 1e-12 && (b.max.y - 0.7).abs() < 1e-12);
    }
}
