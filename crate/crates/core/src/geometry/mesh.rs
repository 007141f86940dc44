use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Linear RGB triple in `[0, 1]`.
pub type Rgb = [f64; 3];

/// Indexed triangle mesh. Faces wind counter-clockwise when seen from outside.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub positions: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub normals: Option<Vec<Vec3>>,
    pub colors: Option<Vec<Rgb>>,
}

impl TriMesh {
    /// Builds a mesh and checks index bounds and face degeneracy.
    pub fn new(positions: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = TriMesh {
            positions,
            faces,
            normals: None,
            colors: None,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        for (fi, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&i| i as usize >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references a vertex beyond {n}"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} repeats a vertex")));
            }
        }
        if let Some(normals) = &self.normals {
            if normals.len() != n {
                return Err(Error::InvalidMesh(format!(
                    "{} normals for {n} vertices",
                    normals.len()
                )));
            }
            if let Some(i) = normals.iter().position(|m| (m.norm() - 1.0).abs() > 1e-4) {
                return Err(Error::InvalidMesh(format!("normal {i} is not unit length")));
            }
        }
        if let Some(colors) = &self.colors {
            if colors.len() != n {
                return Err(Error::InvalidMesh(format!(
                    "{} colors for {n} vertices",
                    colors.len()
                )));
            }
        }
        Ok(())
    }

    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(&self.positions)
    }

    #[inline]
    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.positions[a as usize],
            self.positions[b as usize],
            self.positions[c as usize],
        ]
    }

    /// Twice the area-weighted face normal (unnormalized cross product).
    #[inline]
    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(c - a)
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Same geometry with every vertex mapped through `map`.
    pub fn map_positions(&self, mut map: impl FnMut(Vec3) -> Vec3) -> TriMesh {
        TriMesh {
            positions: self.positions.iter().map(|&p| map(p)).collect(),
            ..self.clone()
        }
    }

    pub fn with_uniform_color(mut self, color: Rgb) -> TriMesh {
        self.colors = Some(alloc::vec![color; self.positions.len()]);
        self
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn from_points(points: &[Vec3]) -> Option<Aabb> {
        let first = *points.first()?;
        let (min, max) = points
            .iter()
            .fold((first, first), |(lo, hi), &p| (lo.min(p), hi.max(p)));
        Some(Aabb { min, max })
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn contained_in(&self, lo: f64, hi: f64) -> bool {
        self.min.x >= lo
            && self.min.y >= lo
            && self.min.z >= lo
            && self.max.x <= hi
            && self.max.y <= hi
            && self.max.z <= hi
    }
}

/// Similarity transform `p' = (p - center) * scale` produced by
/// [`normalize_to_cube`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CubeTransform {
    pub center: Vec3,
    pub scale: f64,
}

impl CubeTransform {
    pub fn apply(&self, p: Vec3) -> Vec3 {
        (p - self.center) * self.scale
    }

    pub fn invert(&self, p: Vec3) -> Vec3 {
        p / self.scale + self.center
    }
}

/// Centers the bounding box on the origin and scales uniformly so the longest
/// axis spans exactly `[-1, 1]`.
pub fn normalize_to_cube(mesh: &TriMesh) -> Result<(TriMesh, CubeTransform)> {
    let bbox = mesh.aabb().ok_or(Error::EmptyMesh)?;
    let extent = bbox.extent().max_component();
    if !(extent > 0.0) || !extent.is_finite() {
        return Err(Error::DegenerateMesh);
    }
    let transform = CubeTransform {
        center: bbox.center(),
        scale: 2.0 / extent,
    };
    let mut out = mesh.map_positions(|p| transform.apply(p));
    // Pin the dominant axis to exactly ±1 so the result is idempotent.
    let axis = longest_axis(bbox.extent());
    for (p, q) in out.positions.iter_mut().zip(&mesh.positions) {
        let v = match axis {
            0 => &mut p.x,
            1 => &mut p.y,
            _ => &mut p.z,
        };
        if q[axis] == bbox.min[axis] {
            *v = -1.0;
        } else if q[axis] == bbox.max[axis] {
            *v = 1.0;
        }
    }
    Ok((out, transform))
}

fn longest_axis(e: Vec3) -> usize {
    if e.x >= e.y && e.x >= e.z {
        0
    } else if e.y >= e.z {
        1
    } else {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn box_points(ext: Vec3) -> TriMesh {
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push(Vec3::new(
                if i & 1 == 0 { 0.0 } else { ext.x },
                if i & 2 == 0 { 0.0 } else { ext.y },
                if i & 4 == 0 { 0.0 } else { ext.z },
            ));
        }
        TriMesh::new(pts, vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn cube_maps_onto_unit_cube() {
        let (m, _) = normalize_to_cube(&box_points(Vec3::splat(2.0))).unwrap();
        let b = m.aabb().unwrap();
        assert_eq!(b.min, Vec3::splat(-1.0));
        assert_eq!(b.max, Vec3::splat(1.0));
    }

    #[test]
    fn anisotropic_box_scales_uniformly() {
        let (m, t) = normalize_to_cube(&box_points(Vec3::new(4.0, 2.0, 1.0))).unwrap();
        let b = m.aabb().unwrap();
        assert_eq!(t.scale, 0.5);
        assert_eq!(b.min, Vec3::new(-1.0, -0.5, -0.25));
        assert_eq!(b.max, Vec3::new(1.0, 0.5, 0.25));
    }

    #[test]
    fn single_point_is_degenerate() {
        let m = TriMesh::new(vec![Vec3::new(1.0, 2.0, 3.0)], vec![]).unwrap();
        assert_eq!(normalize_to_cube(&m), Err(Error::DegenerateMesh));
        assert_eq!(
            normalize_to_cube(&TriMesh::default()),
            Err(Error::EmptyMesh)
        );
    }

    #[test]
    fn transform_round_trips() {
        let src = box_points(Vec3::new(3.0, 1.0, 2.0)).map_positions(|p| p + Vec3::splat(7.0));
        let (m, t) = normalize_to_cube(&src).unwrap();
        for (a, b) in src.positions.iter().zip(&m.positions) {
            assert!(t.invert(*b).distance(*a) < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_faces() {
        let pts = vec![Vec3::ZERO, Vec3::X, Vec3::Y];
        assert!(TriMesh::new(pts.clone(), vec![[0, 1, 3]]).is_err());
        assert!(TriMesh::new(pts, vec![[0, 1, 1]]).is_err());
    }
}
