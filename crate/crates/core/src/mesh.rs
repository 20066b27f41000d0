//! Indexed triangle meshes: topology checks, smoothing, and PLY/OBJ exchange.

use crate::Vec3;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum MeshIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: unsupported or malformed PLY ({detail})")]
    BadPly { path: String, detail: String },
}

/// Indexed triangle mesh, vertex coordinates in mm.
#[derive(Debug, Clone, Default)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        Self {
            vertices,
            triangles,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn face_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (a, b, c) = (
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        );
        (b - a).cross(&(c - a)).norm() * 0.5
    }

    pub fn face_normal(&self, t: usize) -> Option<Vec3> {
        let [a, b, c] = self.triangles[t];
        let (a, b, c) = (
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        );
        (b - a).cross(&(c - a)).normalized()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.face_area(t)).sum()
    }

    /// Signed volume via the divergence theorem; positive for outward-wound
    /// closed surfaces.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                let (a, b, c) = (
                    self.vertices[a as usize],
                    self.vertices[b as usize],
                    self.vertices[c as usize],
                );
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Count of triangles per undirected edge.
    pub fn edge_face_counts(&self) -> HashMap<(u32, u32), u32> {
        let mut counts = HashMap::with_capacity(self.triangles.len() * 3 / 2);
        for &[a, b, c] in &self.triangles {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                let key = (u.min(v), u.max(v));
                *counts.entry(key).or_insert(0u32) += 1;
            }
        }
        counts
    }

    /// True when every edge is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        !self.is_empty() && self.edge_face_counts().values().all(|&c| c == 2)
    }

    /// V - E + F over the whole mesh.
    pub fn euler_characteristic(&self) -> i64 {
        let e = self.edge_face_counts().len() as i64;
        self.vertices.len() as i64 - e + self.triangles.len() as i64
    }

    /// Vertex adjacency lists (sorted, deduplicated).
    pub fn vertex_adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for &[a, b, c] in &self.triangles {
            adj[a as usize].extend([b, c]);
            adj[b as usize].extend([a, c]);
            adj[c as usize].extend([a, b]);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    /// Triangle indices incident to each vertex.
    pub fn vertex_faces(&self) -> Vec<Vec<u32>> {
        let mut vf = vec![Vec::new(); self.vertices.len()];
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            vf[a as usize].push(t as u32);
            vf[b as usize].push(t as u32);
            vf[c as usize].push(t as u32);
        }
        vf
    }

    /// Number of vertex-connected components.
    pub fn connected_components(&self) -> usize {
        let adj = self.vertex_adjacency();
        let mut seen = vec![false; self.vertices.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.vertices.len() {
            if seen[start] || adj[start].is_empty() {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &n in &adj[v] {
                    if !seen[n as usize] {
                        seen[n as usize] = true;
                        stack.push(n as usize);
                    }
                }
            }
        }
        count
    }

    /// Uniform-umbrella Laplacian smoothing: each vertex moves `lambda` of
    /// the way toward the mean of its neighbors, `iterations` times.
    pub fn laplacian_smooth(&mut self, iterations: usize, lambda: f64) {
        let adj = self.vertex_adjacency();
        for _ in 0..iterations {
            let mut next = self.vertices.clone();
            for (v, neighbors) in adj.iter().enumerate() {
                if neighbors.is_empty() {
                    continue;
                }
                let mut mean = Vec3::zeros();
                for &n in neighbors {
                    mean += self.vertices[n as usize];
                }
                let mean = mean / neighbors.len() as f64;
                next[v] = self.vertices[v] + (mean - self.vertices[v]) * lambda;
            }
            self.vertices = next;
        }
    }

    /// Drop triangles with area below `eps` and repeated-vertex triangles.
    pub fn drop_degenerate_triangles(&mut self, eps: f64) {
        let vertices = std::mem::take(&mut self.vertices);
        self.triangles.retain(|&[a, b, c]| {
            if a == b || b == c || a == c {
                return false;
            }
            let (pa, pb, pc) = (
                vertices[a as usize],
                vertices[b as usize],
                vertices[c as usize],
            );
            (pb - pa).cross(&(pc - pa)).norm() * 0.5 > eps
        });
        self.vertices = vertices;
    }

    /// Append another mesh (indices re-based).
    pub fn append(&mut self, other: &TriMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles.extend(
            other
                .triangles
                .iter()
                .map(|&[a, b, c]| [a + base, b + base, c + base]),
        );
    }

    pub fn transformed(&self, pose: &crate::Pose) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| pose.apply(v)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        let mut lo = first;
        let mut hi = first;
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        Some((lo, hi))
    }
}

fn io_err(path: &Path, source: std::io::Error) -> MeshIoError {
    MeshIoError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Binary little-endian PLY: float32 vertices (mm), uint32 triangle indices.
pub fn write_ply(path: &Path, mesh: &TriMesh) -> Result<(), MeshIoError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let mut run = || -> std::io::Result<()> {
        write!(
            w,
            "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
             property float x\nproperty float y\nproperty float z\n\
             element face {}\nproperty list uchar uint vertex_indices\nend_header\n",
            mesh.vertices.len(),
            mesh.triangles.len()
        )?;
        for v in &mesh.vertices {
            for i in 0..3 {
                w.write_all(&(v[i] as f32).to_le_bytes())?;
            }
        }
        for t in &mesh.triangles {
            w.write_all(&[3u8])?;
            for &i in t {
                w.write_all(&i.to_le_bytes())?;
            }
        }
        w.flush()
    };
    run().map_err(|e| io_err(path, e))
}

/// Read the PLY subset produced by [`write_ply`].
pub fn read_ply(path: &Path) -> Result<TriMesh, MeshIoError> {
    let bad = |detail: &str| MeshIoError::BadPly {
        path: path.display().to_string(),
        detail: detail.to_string(),
    };
    let mut reader = BufReader::new(File::open(path).map_err(|e| io_err(path, e))?);
    let mut header = String::new();
    let (mut nv, mut nf) = (None, None);
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).map_err(|e| io_err(path, e))? == 0 {
            return Err(bad("missing end_header"));
        }
        header.push_str(&line);
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("element vertex ") {
            nv = rest.parse::<usize>().ok();
        } else if let Some(rest) = line.strip_prefix("element face ") {
            nf = rest.parse::<usize>().ok();
        } else if line == "end_header" {
            break;
        }
    }
    if !header.contains("format binary_little_endian 1.0") {
        return Err(bad("expected binary_little_endian"));
    }
    let nv = nv.ok_or_else(|| bad("no vertex element"))?;
    let nf = nf.ok_or_else(|| bad("no face element"))?;
    let mut vertices = Vec::with_capacity(nv);
    let mut buf4 = [0u8; 4];
    for _ in 0..nv {
        let mut v = Vec3::zeros();
        for i in 0..3 {
            reader.read_exact(&mut buf4).map_err(|e| io_err(path, e))?;
            v[i] = f32::from_le_bytes(buf4) as f64;
        }
        vertices.push(v);
    }
    let mut triangles = Vec::with_capacity(nf);
    let mut count = [0u8; 1];
    for _ in 0..nf {
        reader.read_exact(&mut count).map_err(|e| io_err(path, e))?;
        if count[0] != 3 {
            return Err(bad("non-triangle face"));
        }
        let mut t = [0u32; 3];
        for idx in &mut t {
            reader.read_exact(&mut buf4).map_err(|e| io_err(path, e))?;
            *idx = u32::from_le_bytes(buf4);
        }
        if t.iter().any(|&i| i as usize >= nv) {
            return Err(bad("face index out of range"));
        }
        triangles.push(t);
    }
    Ok(TriMesh::new(vertices, triangles))
}

/// ASCII OBJ export (1-based indices).
pub fn write_obj(path: &Path, mesh: &TriMesh) -> Result<(), MeshIoError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
    let mut run = || -> std::io::Result<()> {
        for v in &mesh.vertices {
            writeln!(w, "v {} {} {}", v[0], v[1], v[2])?;
        }
        for t in &mesh.triangles {
            writeln!(w, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        w.flush()
    };
    run().map_err(|e| io_err(path, e))
}

/// Unit tetrahedron used by several tests.
pub fn tetrahedron() -> TriMesh {
    TriMesh::new(
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ],
        vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
    )
}
