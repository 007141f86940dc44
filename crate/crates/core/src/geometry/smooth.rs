use super::mesh::TriMesh;
use super::topology::Adjacency;
use crate::error::{Error, Result};
use crate::math::Vec3;

/// Uniform-weight Laplacian smoothing: each iteration moves every vertex
/// toward the centroid of its 1-ring by `weight`.
pub fn laplacian_smooth(mesh: &TriMesh, weight: f64, iterations: u32) -> Result<TriMesh> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::InvalidParameter(alloc::format!(
            "smoothing weight {weight} outside [0, 1]"
        )));
    }
    if iterations == 0 {
        return Err(Error::InvalidParameter("iterations must be positive".into()));
    }
    let adj = Adjacency::build(mesh.positions.len(), &mesh.faces);
    if let Some(v) = (0..adj.vertex_count()).find(|&v| adj.neighbors(v).is_empty()) {
        return Err(Error::IsolatedVertex(v));
    }
    let mut out = mesh.clone();
    let mut next = out.positions.clone();
    for _ in 0..iterations {
        for (v, slot) in next.iter_mut().enumerate() {
            *slot = smoothed(&out.positions, &adj, v, weight);
        }
        core::mem::swap(&mut out.positions, &mut next);
    }
    Ok(out)
}

#[inline]
pub(crate) fn smoothed(pos: &[Vec3], adj: &Adjacency, v: usize, weight: f64) -> Vec3 {
    let ring = adj.neighbors(v);
    let mut c = Vec3::ZERO;
    for &u in ring {
        c += pos[u as usize];
    }
    let c = c / ring.len() as f64;
    pos[v] + (c - pos[v]) * weight
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_icosphere;
    use alloc::vec;
    use alloc::vec::Vec;
    use rand_chacha::rand_core::{RngCore, SeedableRng};

    #[test]
    fn zero_weight_is_identity() {
        let m = make_icosphere(2, 1.0).unwrap();
        let s = laplacian_smooth(&m, 0.0, 3).unwrap();
        assert_eq!(m.positions, s.positions);
    }

    #[test]
    fn tetrahedron_moves_to_opposite_centroid() {
        let s = 1.0 / libm::sqrt(3.0);
        let pos = vec![
            Vec3::new(s, s, s),
            Vec3::new(s, -s, -s),
            Vec3::new(-s, s, -s),
            Vec3::new(-s, -s, s),
        ];
        let m = TriMesh::new(pos.clone(), vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]).unwrap();
        let out = laplacian_smooth(&m, 1.0, 1).unwrap();
        for i in 0..4 {
            let others: Vec3 = (0..4).filter(|&j| j != i).fold(Vec3::ZERO, |a, j| a + pos[j]) / 3.0;
            assert!(out.positions[i].distance(others) < 1e-12);
        }
    }

    fn radial_std(m: &TriMesh) -> f64 {
        let r: Vec<f64> = m.positions.iter().map(|p| p.norm()).collect();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        libm::sqrt(r.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / r.len() as f64)
    }

    #[test]
    fn noisy_sphere_gets_smoother() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut gauss = || {
            // Box-Muller
            let u1 = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
            let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
        };
        let base = make_icosphere(3, 1.0).unwrap();
        let noisy = base.map_positions(|p| p * (1.0 + 0.05 * gauss()));
        let smooth = laplacian_smooth(&noisy, 0.5, 10).unwrap();
        assert!(radial_std(&smooth) < radial_std(&noisy));
        assert!(smooth.positions.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn isolated_vertex_errors() {
        let m = TriMesh::new(
            vec![Vec3::ZERO, Vec3::X, Vec3::Y, Vec3::Z],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert_eq!(laplacian_smooth(&m, 0.5, 1), Err(Error::IsolatedVertex(3)));
    }
}
