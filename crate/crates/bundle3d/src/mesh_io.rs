//! Mesh import/export: Wavefront OBJ and binary glTF (.glb).

use std::fmt::Write as _;
use std::path::Path;

use bundle3d_core::geometry::{compute_vertex_normals, TriMesh};
use bundle3d_core::Vec3;
use serde_json::json;

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Glb,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("obj") => Ok(MeshFormat::Obj),
            Some("glb") => Ok(MeshFormat::Glb),
            _ => Err(Error::format(path, "unsupported mesh extension (expected .obj or .glb)")),
        }
    }
}

/// Loads an OBJ or GLB mesh, chosen by extension. All objects/primitives
/// are merged; polygons are fan-triangulated. Missing or unusable normals
/// are recomputed.
pub fn load_mesh(path: &Path) -> Result<TriMesh> {
    let mesh = match MeshFormat::from_path(path)? {
        MeshFormat::Obj => load_obj(path)?,
        MeshFormat::Glb => load_glb(path)?,
    };
    finish(mesh, path)
}

pub fn save_mesh(mesh: &TriMesh, path: &Path, format: MeshFormat) -> Result<()> {
    let bytes = match format {
        MeshFormat::Obj => obj_bytes(mesh).into_bytes(),
        MeshFormat::Glb => glb_bytes(mesh),
    };
    fsutil::write_atomic(path, &bytes)
}

fn finish(mut mesh: TriMesh, path: &Path) -> Result<TriMesh> {
    if let Some(n) = &mesh.normals {
        let fixed: Option<Vec<Vec3>> = n.iter().map(|v| v.try_normalize()).collect();
        mesh.normals = fixed.filter(|f| f.len() == mesh.positions.len());
    }
    if let Some(c) = &mesh.colors {
        if c.len() != mesh.positions.len() {
            mesh.colors = None;
        }
    }
    mesh.validate().map_err(|e| Error::format(path, e))?;
    if mesh.faces.is_empty() {
        return Err(Error::format(path, "mesh has no triangles"));
    }
    if mesh.normals.is_none() {
        mesh = compute_vertex_normals(&mesh)?;
    }
    Ok(mesh)
}

fn load_obj(path: &Path) -> Result<TriMesh> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let opts = tobj::LoadOptions {
        triangulate: true,
        single_index: true,
        ..Default::default()
    };
    // Materials are ignored.
    let (models, _materials) = tobj::load_obj(path, &opts).map_err(|e| Error::format(path, e))?;
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    let mut normals = Vec::new();
    let mut colors = Vec::new();
    let (mut all_normals, mut all_colors) = (true, true);
    for model in &models {
        let m = &model.mesh;
        let base = positions.len() as u32;
        let n = m.positions.len() / 3;
        positions.extend(m.positions.chunks_exact(3).map(|p| Vec3::new(p[0], p[1], p[2])));
        if m.normals.len() == 3 * n {
            normals.extend(m.normals.chunks_exact(3).map(|p| Vec3::new(p[0], p[1], p[2])));
        } else {
            all_normals = false;
        }
        if m.vertex_color.len() == 3 * n {
            colors.extend(m.vertex_color.chunks_exact(3).map(|c| [c[0], c[1], c[2]]));
        } else {
            all_colors = false;
        }
        faces.extend(m.indices.chunks_exact(3).map(|f| [base + f[0], base + f[1], base + f[2]]));
    }
    Ok(TriMesh {
        positions,
        faces,
        normals: all_normals.then_some(normals),
        colors: all_colors.then_some(colors),
    })
}

fn obj_bytes(mesh: &TriMesh) -> String {
    let mut s = String::new();
    for (i, p) in mesh.positions.iter().enumerate() {
        let _ = write!(s, "v {:?} {:?} {:?}", p.x, p.y, p.z);
        if let Some(c) = &mesh.colors {
            let _ = write!(s, " {:?} {:?} {:?}", c[i][0], c[i][1], c[i][2]);
        }
        s.push('\n');
    }
    if let Some(normals) = &mesh.normals {
        for n in normals {
            let _ = writeln!(s, "vn {:?} {:?} {:?}", n.x, n.y, n.z);
        }
    }
    for f in &mesh.faces {
        let [a, b, c] = f.map(|i| i + 1);
        if mesh.normals.is_some() {
            let _ = writeln!(s, "f {a}//{a} {b}//{b} {c}//{c}");
        } else {
            let _ = writeln!(s, "f {a} {b} {c}");
        }
    }
    s
}

fn load_glb(path: &Path) -> Result<TriMesh> {
    let bytes = fsutil::read(path)?;
    let gltf = gltf::Gltf::from_slice(&bytes).map_err(|e| Error::format(path, e))?;
    let blob = gltf.blob.as_deref();
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    let mut normals = Vec::new();
    let mut colors = Vec::new();
    let (mut all_normals, mut all_colors) = (true, true);
    for mesh in gltf.meshes() {
        for prim in mesh.primitives() {
            if prim.mode() != gltf::mesh::Mode::Triangles {
                return Err(Error::format(path, format!("unsupported primitive mode {:?}", prim.mode())));
            }
            let reader = prim.reader(|buffer| match buffer.source() {
                gltf::buffer::Source::Bin => blob,
                gltf::buffer::Source::Uri(_) => None,
            });
            let base = positions.len() as u32;
            let pos: Vec<Vec3> = reader
                .read_positions()
                .ok_or_else(|| Error::format(path, "primitive without POSITION"))?
                .map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64))
                .collect();
            let n = pos.len();
            positions.extend(pos);
            match reader.read_normals() {
                Some(it) => normals.extend(it.map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64))),
                None => all_normals = false,
            }
            match reader.read_colors(0) {
                Some(it) => colors.extend(it.into_rgb_f32().map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])),
                None => all_colors = false,
            }
            match reader.read_indices() {
                Some(idx) => {
                    let idx: Vec<u32> = idx.into_u32().collect();
                    if idx.len() % 3 != 0 {
                        return Err(Error::format(path, "index count is not a multiple of 3"));
                    }
                    faces.extend(idx.chunks_exact(3).map(|f| [base + f[0], base + f[1], base + f[2]]));
                }
                None => {
                    faces.extend((0..n as u32 / 3).map(|t| [base + 3 * t, base + 3 * t + 1, base + 3 * t + 2]));
                }
            }
        }
    }
    Ok(TriMesh {
        positions,
        faces,
        normals: all_normals.then_some(normals),
        colors: all_colors.then_some(colors),
    })
}

fn push_f32s(bin: &mut Vec<u8>, values: impl Iterator<Item = f64>) -> (usize, usize) {
    let start = bin.len();
    for v in values {
        bin.extend_from_slice(&(v as f32).to_le_bytes());
    }
    (start, bin.len() - start)
}

/// Binary glTF 2.0 with POSITION, NORMAL (when present), COLOR_0 (when
/// present) and u32 indices, all in one buffer.
fn glb_bytes(mesh: &TriMesh) -> Vec<u8> {
    let mut bin = Vec::new();
    let mut views = Vec::new();
    let mut accessors = Vec::new();
    let mut attributes = serde_json::Map::new();
    let count = mesh.positions.len();

    let (off, len) = push_f32s(&mut bin, mesh.positions.iter().flat_map(|p| p.to_array()));
    let (mut lo, mut hi) = ([f32::INFINITY; 3], [f32::NEG_INFINITY; 3]);
    for p in &mesh.positions {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k] as f32);
            hi[k] = hi[k].max(p[k] as f32);
        }
    }
    views.push(json!({"buffer": 0, "byteOffset": off, "byteLength": len, "target": 34962}));
    accessors.push(json!({"bufferView": 0, "componentType": 5126, "count": count, "type": "VEC3", "min": lo, "max": hi}));
    attributes.insert("POSITION".into(), json!(0));

    let mut add_vec3 = |name: &str, values: Vec<f64>, bin: &mut Vec<u8>| {
        let (off, len) = push_f32s(bin, values.into_iter());
        views.push(json!({"buffer": 0, "byteOffset": off, "byteLength": len, "target": 34962}));
        accessors.push(json!({"bufferView": views.len() - 1, "componentType": 5126, "count": count, "type": "VEC3"}));
        attributes.insert(name.into(), json!(accessors.len() - 1));
    };
    if let Some(n) = &mesh.normals {
        add_vec3("NORMAL", n.iter().flat_map(|v| v.to_array()).collect(), &mut bin);
    }
    if let Some(c) = &mesh.colors {
        add_vec3("COLOR_0", c.iter().flat_map(|c| c.map(|x| x.clamp(0.0, 1.0))).collect(), &mut bin);
    }

    let off = bin.len();
    for f in &mesh.faces {
        for i in f {
            bin.extend_from_slice(&i.to_le_bytes());
        }
    }
    views.push(json!({"buffer": 0, "byteOffset": off, "byteLength": bin.len() - off, "target": 34963}));
    accessors.push(json!({"bufferView": views.len() - 1, "componentType": 5125, "count": mesh.faces.len() * 3, "type": "SCALAR"}));
    let indices = accessors.len() - 1;
    while bin.len() % 4 != 0 {
        bin.push(0);
    }

    let doc = json!({
        "asset": {"version": "2.0", "generator": "bundle3d"},
        "scene": 0,
        "scenes": [{"nodes": [0]}],
        "nodes": [{"mesh": 0}],
        "meshes": [{"primitives": [{"attributes": attributes, "indices": indices, "mode": 4}]}],
        "buffers": [{"byteLength": bin.len()}],
        "bufferViews": views,
        "accessors": accessors,
    });
    let mut json_chunk = serde_json::to_vec(&doc).expect("JSON serialization");
    while json_chunk.len() % 4 != 0 {
        json_chunk.push(b' ');
    }

    let total = 12 + 8 + json_chunk.len() + 8 + bin.len();
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(b"glTF");
    out.extend_from_slice(&2u32.to_le_bytes());
    out.extend_from_slice(&(total as u32).to_le_bytes());
    out.extend_from_slice(&(json_chunk.len() as u32).to_le_bytes());
    out.extend_from_slice(b"JSON");
    out.extend_from_slice(&json_chunk);
    out.extend_from_slice(&(bin.len() as u32).to_le_bytes());
    out.extend_from_slice(b"BIN\0");
    out.extend_from_slice(&bin);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use bundle3d_core::geometry::make_icosphere;

    /// Largest corner displacement between corresponding triangles; OBJ
    /// import may renumber vertices, so indices are not compared directly.
    fn max_delta(a: &TriMesh, b: &TriMesh) -> f64 {
        assert_eq!(a.faces.len(), b.faces.len());
        (0..a.faces.len())
            .flat_map(|f| a.triangle(f).into_iter().zip(b.triangle(f)))
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn cube_quads_are_fan_triangulated() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube.obj");
        let obj = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n\
                   f 1 4 3 2\nf 5 6 7 8\nf 1 2 6 5\nf 2 3 7 6\nf 3 4 8 7\nf 4 1 5 8\n";
        std::fs::write(&p, obj).unwrap();
        let m = load_mesh(&p).unwrap();
        assert_eq!((m.positions.len(), m.faces.len()), (8, 12));
    }

    #[test]
    fn round_trips_preserve_geometry() {
        let dir = tempfile::tempdir().unwrap();
        let m = make_icosphere(2, 1.0).unwrap();
        let colored = m.clone().with_uniform_color([0.25, 0.5, 1.0]);
        for (name, format) in [("a.obj", MeshFormat::Obj), ("a.glb", MeshFormat::Glb)] {
            let p = dir.path().join(name);
            save_mesh(&colored, &p, format).unwrap();
            let back = load_mesh(&p).unwrap();
            assert_eq!(back.vertex_count(), m.vertex_count(), "{name}");
            assert!(max_delta(&back, &m) < 1e-5, "{name}");
            let c = back.colors.expect(name);
            assert!(c.iter().all(|c| (c[0] - 0.25).abs() < 1e-6 && (c[2] - 1.0).abs() < 1e-6));
        }
    }

    #[test]
    fn glb_without_colors_has_none() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("plain.glb");
        save_mesh(&make_icosphere(1, 1.0).unwrap(), &p, MeshFormat::Glb).unwrap();
        assert!(load_mesh(&p).unwrap().colors.is_none());
    }

    #[test]
    fn errors() {
        assert!(matches!(load_mesh(Path::new("/nonexistent/mesh.obj")), Err(Error::MissingFile(_))));
        assert!(matches!(load_mesh(Path::new("/nonexistent/mesh.glb")), Err(Error::MissingFile(_))));
        assert!(MeshFormat::from_path(Path::new("x.stl")).is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.glb");
        std::fs::write(&p, b"definitely not gltf").unwrap();
        assert!(matches!(load_mesh(&p), Err(Error::Format { .. })));
    }
}
