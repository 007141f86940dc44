//! Connectivity queries: vertex adjacency, edge sets, components.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::mesh::TriMesh;

/// Compressed vertex adjacency: `neighbors(v)` is sorted and unique.
#[derive(Debug, Clone)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Adjacency {
    pub fn build(vertex_count: usize, faces: &[[u32; 3]]) -> Self {
        let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(faces.len() * 6);
        for &[a, b, c] in faces {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                pairs.push((u, v));
                pairs.push((v, u));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut offsets = vec![0usize; vertex_count + 1];
        for &(u, _) in &pairs {
            offsets[u as usize + 1] += 1;
        }
        for i in 0..vertex_count {
            offsets[i + 1] += offsets[i];
        }
        Adjacency {
            offsets,
            targets: pairs.into_iter().map(|(_, v)| v).collect(),
        }
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// Undirected edges `(lo, hi)` mapped to the number of faces using them.
pub fn edge_face_counts(faces: &[[u32; 3]]) -> BTreeMap<(u32, u32), u32> {
    let mut map = BTreeMap::new();
    for &[a, b, c] in faces {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            *map.entry((u.min(v), u.max(v))).or_insert(0) += 1;
        }
    }
    map
}

pub fn edge_count(mesh: &TriMesh) -> usize {
    edge_face_counts(&mesh.faces).len()
}

/// `V - E + F`, counting only vertices referenced by some face.
pub fn euler_characteristic(mesh: &TriMesh) -> i64 {
    let mut used = vec![false; mesh.positions.len()];
    for f in &mesh.faces {
        for &v in f {
            used[v as usize] = true;
        }
    }
    let v = used.iter().filter(|&&u| u).count() as i64;
    v - edge_count(mesh) as i64 + mesh.faces.len() as i64
}

/// Every edge shared by exactly two faces with opposite orientation.
pub fn is_closed_manifold(mesh: &TriMesh) -> bool {
    let mut directed: Vec<(u32, u32)> = mesh
        .faces
        .iter()
        .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
        .collect();
    directed.sort_unstable();
    if directed.windows(2).any(|w| w[0] == w[1]) {
        return false;
    }
    directed
        .iter()
        .all(|&(u, v)| directed.binary_search(&(v, u)).is_ok())
}

/// Number of connected components among vertices referenced by faces.
pub fn connected_components(mesh: &TriMesh) -> usize {
    let n = mesh.positions.len();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    let mut used = vec![false; n];
    for &[a, b, c] in &mesh.faces {
        used[a as usize] = true;
        used[b as usize] = true;
        used[c as usize] = true;
        for (u, v) in [(a, b), (b, c)] {
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru != rv {
                parent[ru.max(rv) as usize] = ru.min(rv);
            }
        }
    }
    (0..n as u32)
        .filter(|&v| used[v as usize] && find(&mut parent, v) == v)
        .count()
}

/// Lengths of every undirected edge, in ascending `(lo, hi)` order.
pub fn edge_lengths(mesh: &TriMesh) -> Vec<f64> {
    edge_face_counts(&mesh.faces)
        .keys()
        .map(|&(a, b)| mesh.positions[a as usize].distance(mesh.positions[b as usize]))
        .collect()
}

pub fn median_edge_length(mesh: &TriMesh) -> Option<f64> {
    let mut l = edge_lengths(mesh);
    if l.is_empty() {
        return None;
    }
    l.sort_unstable_by(f64::total_cmp);
    Some(l[l.len() / 2])
}

pub fn mean_edge_length(mesh: &TriMesh) -> Option<f64> {
    let l = edge_lengths(mesh);
    if l.is_empty() {
        None
    } else {
        Some(l.iter().sum::<f64>() / l.len() as f64)
    }
}
