use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::mesh::TriMesh;
use crate::error::{Error, Result};
use crate::math::Vec3;

pub const MAX_ICOSPHERE_SUBDIVISIONS: u32 = 7;

/// Subdivided icosahedron with every vertex at distance `radius` from the
/// origin. Has `10·4^s + 2` vertices and `20·4^s` faces.
pub fn make_icosphere(subdivisions: u32, radius: f64) -> Result<TriMesh> {
    if subdivisions > MAX_ICOSPHERE_SUBDIVISIONS {
        return Err(Error::SubdivisionLimit {
            requested: subdivisions,
            max: MAX_ICOSPHERE_SUBDIVISIONS,
        });
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!(
            "icosphere radius must be positive, got {radius}"
        )));
    }

    let t = (1.0 + libm::sqrt(5.0)) / 2.0;
    let mut dirs: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| unit(Vec3::new(x, y, z)))
    .collect();

    let mut faces: Vec<[u32; 3]> = alloc::vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoints: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(&mut dirs, &mut midpoints, a, b);
            let bc = midpoint(&mut dirs, &mut midpoints, b, c);
            let ca = midpoint(&mut dirs, &mut midpoints, c, a);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }

    let positions = dirs.iter().map(|&d| d * radius).collect();
    TriMesh::new(positions, faces)
}

fn unit(v: Vec3) -> Vec3 {
    v / v.norm()
}

fn midpoint(dirs: &mut Vec<Vec3>, cache: &mut BTreeMap<(u32, u32), u32>, a: u32, b: u32) -> u32 {
    let key = if a < b { (a, b) } else { (b, a) };
    *cache.entry(key).or_insert_with(|| {
        dirs.push(unit(dirs[a as usize] + dirs[b as usize]));
        (dirs.len() - 1) as u32
    })
}
