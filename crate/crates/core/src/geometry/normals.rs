use alloc::vec;

use super::mesh::TriMesh;
use crate::error::{Error, Result};
use crate::math::Vec3;

/// Area-weighted vertex normals. Vertices with no incident face (or whose
/// incident faces cancel out) get `+Z`.
pub fn compute_vertex_normals(mesh: &TriMesh) -> Result<TriMesh> {
    if mesh.faces.is_empty() || mesh.positions.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut acc = vec![Vec3::ZERO; mesh.positions.len()];
    for (f, face) in mesh.faces.iter().enumerate() {
        let n = mesh.face_cross(f);
        for &v in face {
            acc[v as usize] += n;
        }
    }
    let normals = acc
        .into_iter()
        .map(|n| n.try_normalize().unwrap_or(Vec3::Z))
        .collect();
    Ok(TriMesh {
        normals: Some(normals),
        ..mesh.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_icosphere;
    use alloc::vec::Vec;

    #[test]
    fn sphere_normals_are_radial() {
        let m = compute_vertex_normals(&make_icosphere(3, 1.0).unwrap()).unwrap();
        let cos2 = libm::cos(2.0_f64.to_radians());
        for (p, n) in m.positions.iter().zip(m.normals.as_ref().unwrap()) {
            assert!(n.dot(*p / p.norm()) > cos2);
        }
    }

    #[test]
    fn flat_triangle_faces_plus_z() {
        let m = TriMesh::new(vec![Vec3::ZERO, Vec3::X, Vec3::Y], vec![[0, 1, 2]]).unwrap();
        let m = compute_vertex_normals(&m).unwrap();
        assert!(m.normals.unwrap().iter().all(|&n| n == Vec3::Z));
    }

    /// Cube whose quads are all split along the diagonal joining the
    /// even-parity corners, so every corner sees the same triangle area on
    /// each of its three faces.
    fn symmetric_cube() -> TriMesh {
        let pos: Vec<Vec3> = (0..8)
            .map(|i| {
                Vec3::new(
                    if i & 1 == 0 { -1.0 } else { 1.0 },
                    if i & 2 == 0 { -1.0 } else { 1.0 },
                    if i & 4 == 0 { -1.0 } else { 1.0 },
                )
            })
            .collect();
        // Quads listed CCW from outside.
        let quads = [
            [0, 2, 3, 1], // -z
            [4, 5, 7, 6], // +z
            [0, 1, 5, 4], // -y
            [2, 6, 7, 3], // +y
            [0, 4, 6, 2], // -x
            [1, 3, 7, 5], // +x
        ];
        let parity = |v: u32| (v.count_ones() % 2) == 0;
        let mut faces = Vec::new();
        for q in quads {
            // Split along the diagonal whose endpoints are even-parity.
            if parity(q[0]) {
                faces.push([q[0], q[1], q[2]]);
                faces.push([q[0], q[2], q[3]]);
            } else {
                faces.push([q[1], q[2], q[3]]);
                faces.push([q[1], q[3], q[0]]);
            }
        }
        TriMesh::new(pos, faces).unwrap()
    }

    #[test]
    fn cube_corner_normals_are_diagonal() {
        let cube = symmetric_cube();
        let m = compute_vertex_normals(&cube).unwrap();
        for (p, n) in m.positions.iter().zip(m.normals.unwrap()) {
            let expect = *p / libm::sqrt(3.0);
            assert!(n.distance(expect) < 1e-12, "{p:?} -> {n:?}");
        }
    }

    #[test]
    fn isolated_vertex_gets_plus_z() {
        let m = TriMesh::new(
            vec![Vec3::ZERO, Vec3::X, Vec3::Y, Vec3::new(5.0, 5.0, 5.0)],
            vec![[0, 2, 1]],
        )
        .unwrap();
        let n = compute_vertex_normals(&m).unwrap().normals.unwrap();
        assert_eq!(n[0], -Vec3::Z);
        assert_eq!(n[3], Vec3::Z);
    }

    #[test]
    fn empty_mesh_errors() {
        assert_eq!(compute_vertex_normals(&TriMesh::default()), Err(Error::EmptyMesh));
    }
}
