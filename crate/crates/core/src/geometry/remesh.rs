//! Incremental isotropic remeshing: split long edges, collapse short ones,
//! flip toward valence 6, then relax tangentially.
//!
//! Works on a flat face list plus per-vertex incident-face lists. Collapses
//! check the link condition, so genus and component count never change.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::mesh::TriMesh;
use super::normals::compute_vertex_normals;
use super::topology::edge_face_counts;
use crate::error::{Error, Result};
use crate::math::Vec3;

const OUTER_ITERATIONS: usize = 5;
const MAX_SPLIT_PASSES: usize = 16;

/// Remeshes toward uniform edges of `target_edge_length`. Vertex colors are
/// dropped; normals are recomputed when the input carried them.
pub fn remesh(mesh: &TriMesh, target_edge_length: f64) -> Result<TriMesh> {
    check_target(target_edge_length)?;
    let mut work = Work::new(mesh)?;
    let high = target_edge_length * 4.0 / 3.0;
    let low = target_edge_length * 4.0 / 5.0;
    for _ in 0..OUTER_ITERATIONS {
        work.split_long_edges(high);
        work.collapse_short_edges(low, high);
        work.equalize_valences();
        work.relax_tangentially();
    }
    work.finish(mesh.normals.is_some())
}

/// Splits edges at their midpoints until none is longer than
/// `max_edge_length`. The surface itself does not move.
pub fn subdivide_to_edge_length(mesh: &TriMesh, max_edge_length: f64) -> Result<TriMesh> {
    check_target(max_edge_length)?;
    let mut work = Work::new(mesh)?;
    let mut colors = mesh.colors.clone();
    work.split_long_edges_tracking(max_edge_length, colors.as_mut());
    let mut out = work.finish(mesh.normals.is_some())?;
    if let Some(mut c) = colors {
        // Split never deletes vertices, so indices are stable.
        c.truncate(out.positions.len());
        out.colors = Some(c);
    }
    Ok(out)
}

fn check_target(len: f64) -> Result<()> {
    if len > 0.0 && len.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "target edge length must be positive, got {len}"
        )))
    }
}

struct Work {
    pos: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    face_alive: Vec<bool>,
    vert_alive: Vec<bool>,
    vfaces: Vec<Vec<u32>>,
}

impl Work {
    fn new(mesh: &TriMesh) -> Result<Self> {
        if mesh.faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        mesh.validate()?;
        for (&(a, b), &count) in &edge_face_counts(&mesh.faces) {
            if count > 2 {
                return Err(Error::NonManifold(format!(
                    "edge ({a}, {b}) is shared by {count} faces"
                )));
            }
        }
        let mut directed: Vec<(u32, u32)> = mesh
            .faces
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .collect();
        directed.sort_unstable();
        if let Some(w) = directed.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::NonManifold(format!(
                "edge ({}, {}) has inconsistent orientation",
                w[0].0, w[0].1
            )));
        }
        let mut vfaces = vec![Vec::new(); mesh.positions.len()];
        for (f, face) in mesh.faces.iter().enumerate() {
            for &v in face {
                vfaces[v as usize].push(f as u32);
            }
        }
        Ok(Work {
            pos: mesh.positions.clone(),
            faces: mesh.faces.clone(),
            face_alive: vec![true; mesh.faces.len()],
            vert_alive: vec![true; mesh.positions.len()],
            vfaces,
        })
    }

    fn edge_faces(&self, a: u32, b: u32) -> ([u32; 2], usize) {
        let mut out = [u32::MAX; 2];
        let mut n = 0;
        for &f in &self.vfaces[a as usize] {
            if self.faces[f as usize].contains(&b) {
                if n < 2 {
                    out[n] = f;
                }
                n += 1;
            }
        }
        (out, n)
    }

    fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut n: Vec<u32> = self.vfaces[v as usize]
            .iter()
            .flat_map(|&f| self.faces[f as usize])
            .filter(|&u| u != v)
            .collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    fn is_boundary(&self, v: u32) -> bool {
        self.neighbors(v)
            .into_iter()
            .any(|u| self.edge_faces(v, u).1 == 1)
    }

    fn live_edges(&self) -> Vec<(u32, u32)> {
        let mut e: Vec<(u32, u32)> = self
            .faces
            .iter()
            .zip(&self.face_alive)
            .filter(|(_, &alive)| alive)
            .flat_map(|(&[a, b, c], _)| [(a, b), (b, c), (c, a)])
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    fn len(&self, a: u32, b: u32) -> f64 {
        self.pos[a as usize].distance(self.pos[b as usize])
    }

    fn face_cross(&self, face: [u32; 3]) -> Vec3 {
        let [a, b, c] = face.map(|v| self.pos[v as usize]);
        (b - a).cross(c - a)
    }

    fn split_long_edges(&mut self, high: f64) {
        self.split_long_edges_tracking(high, None);
    }

    fn split_long_edges_tracking(&mut self, high: f64, mut colors: Option<&mut Vec<[f64; 3]>>) {
        for _ in 0..MAX_SPLIT_PASSES {
            let mut long: Vec<(f64, u32, u32)> = self
                .live_edges()
                .into_iter()
                .map(|(a, b)| (self.len(a, b), a, b))
                .filter(|&(l, _, _)| l > high)
                .collect();
            if long.is_empty() {
                break;
            }
            long.sort_unstable_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
            for (_, a, b) in long {
                // Earlier splits in this pass may have consumed the edge.
                if self.edge_faces(a, b).1 == 0 {
                    continue;
                }
                self.split(a, b);
                if let Some(c) = colors.as_deref_mut() {
                    let (ca, cb) = (c[a as usize], c[b as usize]);
                    c.push([0.5 * (ca[0] + cb[0]), 0.5 * (ca[1] + cb[1]), 0.5 * (ca[2] + cb[2])]);
                }
            }
        }
    }

    fn split(&mut self, a: u32, b: u32) {
        let (fs, n) = self.edge_faces(a, b);
        let m = self.pos.len() as u32;
        self.pos.push((self.pos[a as usize] + self.pos[b as usize]) * 0.5);
        self.vert_alive.push(true);
        self.vfaces.push(Vec::new());
        for &f in &fs[..n.min(2)] {
            let face = self.faces[f as usize];
            let i = (0..3)
                .find(|&i| {
                    let (p, q) = (face[i], face[(i + 1) % 3]);
                    (p == a && q == b) || (p == b && q == a)
                })
                .expect("edge belongs to face");
            let (p, q, r) = (face[i], face[(i + 1) % 3], face[(i + 2) % 3]);
            let nf = self.faces.len() as u32;
            self.faces[f as usize] = [p, m, r];
            self.faces.push([m, q, r]);
            self.face_alive.push(true);
            self.vfaces[q as usize].retain(|&g| g != f);
            self.vfaces[q as usize].push(nf);
            self.vfaces[r as usize].push(nf);
            self.vfaces[m as usize].push(f);
            self.vfaces[m as usize].push(nf);
        }
    }

    fn collapse_short_edges(&mut self, low: f64, high: f64) {
        let mut short: Vec<(f64, u32, u32)> = self
            .live_edges()
            .into_iter()
            .map(|(a, b)| (self.len(a, b), a, b))
            .filter(|&(l, _, _)| l < low)
            .collect();
        short.sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        for (_, a, b) in short {
            if !self.vert_alive[a as usize] || !self.vert_alive[b as usize] {
                continue;
            }
            if self.len(a, b) >= low {
                continue;
            }
            self.try_collapse(a, b, high);
        }
    }

    fn try_collapse(&mut self, a: u32, b: u32, high: f64) -> bool {
        let (fs, n) = self.edge_faces(a, b);
        if n != 2 {
            return false;
        }
        let na = self.neighbors(a);
        let nb = self.neighbors(b);
        if na.len() <= 3 || nb.len() <= 3 {
            return false;
        }
        if self.is_boundary(a) || self.is_boundary(b) {
            return false;
        }
        let opposite = |f: u32| {
            self.faces[f as usize]
                .into_iter()
                .find(|&v| v != a && v != b)
                .expect("triangle has a third vertex")
        };
        let (c, d) = (opposite(fs[0]), opposite(fs[1]));
        // Link condition: the only common neighbors are the two opposite vertices.
        let common = na.iter().filter(|v| nb.binary_search(v).is_ok()).count();
        if common != 2 || c == d {
            return false;
        }
        let target = (self.pos[a as usize] + self.pos[b as usize]) * 0.5;
        if na
            .iter()
            .chain(&nb)
            .any(|&u| u != a && u != b && self.pos[u as usize].distance(target) > high)
        {
            return false;
        }
        // Reject collapses that fold a surviving face over.
        for &v in &[a, b] {
            for &f in &self.vfaces[v as usize] {
                if f == fs[0] || f == fs[1] {
                    continue;
                }
                let face = self.faces[f as usize];
                let before = self.face_cross(face);
                let moved = face.map(|u| if u == a || u == b { u32::MAX } else { u });
                let [p, q, r] = moved.map(|u| {
                    if u == u32::MAX {
                        target
                    } else {
                        self.pos[u as usize]
                    }
                });
                let after = (q - p).cross(r - p);
                let denom = before.norm() * after.norm();
                if denom <= 0.0 || before.dot(after) < 0.2 * denom {
                    return false;
                }
            }
        }

        self.pos[a as usize] = target;
        for &f in &fs {
            self.face_alive[f as usize] = false;
            for v in self.faces[f as usize] {
                self.vfaces[v as usize].retain(|&g| g != f);
            }
        }
        let moved = core::mem::take(&mut self.vfaces[b as usize]);
        for f in moved {
            for v in self.faces[f as usize].iter_mut() {
                if *v == b {
                    *v = a;
                }
            }
            self.vfaces[a as usize].push(f);
        }
        self.vert_alive[b as usize] = false;
        true
    }

    fn equalize_valences(&mut self) {
        let mut valence: Vec<i64> = (0..self.pos.len() as u32)
            .map(|v| self.neighbors(v).len() as i64)
            .collect();
        let boundary: Vec<bool> = (0..self.pos.len() as u32)
            .map(|v| self.vert_alive[v as usize] && self.is_boundary(v))
            .collect();
        for (a, b) in self.live_edges() {
            let (fs, n) = self.edge_faces(a, b);
            if n != 2 {
                continue;
            }
            let f1 = self.faces[fs[0] as usize];
            let i = (0..3).find(|&i| f1[i] == a || f1[i] == b).unwrap();
            // Orient so that f1 = (p, q, c) with p→q along the shared edge.
            let (p, q) = if f1[(i + 1) % 3] == a || f1[(i + 1) % 3] == b {
                (f1[i], f1[(i + 1) % 3])
            } else {
                (f1[(i + 2) % 3], f1[i])
            };
            let c = f1.into_iter().find(|&v| v != p && v != q).unwrap();
            let d = self.faces[fs[1] as usize]
                .into_iter()
                .find(|&v| v != p && v != q)
                .unwrap();
            if c == d || [p, q, c, d].iter().any(|&v| boundary[v as usize]) {
                continue;
            }
            if valence[p as usize] <= 3 || valence[q as usize] <= 3 {
                continue;
            }
            if self.edge_faces(c, d).1 != 0 {
                continue;
            }
            let dev = |v: i64| (v - 6) * (v - 6);
            let before = dev(valence[p as usize])
                + dev(valence[q as usize])
                + dev(valence[c as usize])
                + dev(valence[d as usize]);
            let after = dev(valence[p as usize] - 1)
                + dev(valence[q as usize] - 1)
                + dev(valence[c as usize] + 1)
                + dev(valence[d as usize] + 1);
            if after >= before {
                continue;
            }
            let g1 = [p, d, c];
            let g2 = [d, q, c];
            let old = self.face_cross([p, q, c]) + self.face_cross([q, p, d]);
            let n1 = self.face_cross(g1);
            let n2 = self.face_cross(g2);
            if n1.dot(old) <= 0.0 || n2.dot(old) <= 0.0 || n1.dot(n2) <= 0.0 {
                continue;
            }
            let (h1, h2) = (fs[0], fs[1]);
            self.faces[h1 as usize] = g1;
            self.faces[h2 as usize] = g2;
            self.vfaces[p as usize].retain(|&g| g != h2);
            self.vfaces[q as usize].retain(|&g| g != h1);
            self.vfaces[c as usize].push(h2);
            self.vfaces[d as usize].push(h1);
            valence[p as usize] -= 1;
            valence[q as usize] -= 1;
            valence[c as usize] += 1;
            valence[d as usize] += 1;
        }
    }

    fn relax_tangentially(&mut self) {
        let mut next = self.pos.clone();
        for v in 0..self.pos.len() as u32 {
            if !self.vert_alive[v as usize] || self.is_boundary(v) {
                continue;
            }
            let ring = self.neighbors(v);
            if ring.is_empty() {
                continue;
            }
            let centroid = ring
                .iter()
                .fold(Vec3::ZERO, |acc, &u| acc + self.pos[u as usize])
                / ring.len() as f64;
            let normal = self.vfaces[v as usize]
                .iter()
                .fold(Vec3::ZERO, |acc, &f| acc + self.face_cross(self.faces[f as usize]));
            let Some(n) = normal.try_normalize() else {
                continue;
            };
            let p = self.pos[v as usize];
            let delta = centroid - p;
            next[v as usize] = p + (delta - n * delta.dot(n));
        }
        self.pos = next;
    }

    fn finish(self, with_normals: bool) -> Result<TriMesh> {
        let mut remap = vec![u32::MAX; self.pos.len()];
        let mut positions = Vec::new();
        for (v, p) in self.pos.iter().enumerate() {
            if self.vert_alive[v] {
                remap[v] = positions.len() as u32;
                positions.push(*p);
            }
        }
        let faces = self
            .faces
            .iter()
            .zip(&self.face_alive)
            .filter(|(_, &alive)| alive)
            .map(|(f, _)| f.map(|v| remap[v as usize]))
            .collect();
        let mesh = TriMesh::new(positions, faces)?;
        if with_normals {
            compute_vertex_normals(&mesh)
        } else {
            Ok(mesh)
        }
    }
}
