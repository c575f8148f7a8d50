//! Triangle meshes: validated vertex/face storage with derived edge and
//! incidence structure, ASCII OFF/PLY I/O and synthetic test meshes.

mod io;
mod sphere;

pub use io::{parse_mesh, write_ply, MeshFormat};
pub use sphere::make_sphere_mesh;

use crate::{Error, Result};

/// What to do with zero-area or vertex-repeating faces during validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegeneratePolicy {
    /// Fail validation on the first degenerate face.
    Reject,
    /// Drop degenerate faces and report them.
    Drop,
}

/// Per-mesh cleanup log produced by validation.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    /// Original indices of faces dropped as degenerate.
    pub dropped_faces: Vec<usize>,
    /// Original indices of vertices removed because no face referenced them.
    pub removed_vertices: Vec<usize>,
    /// For each kept vertex, its index in the input vertex list.
    pub vertex_origin: Vec<usize>,
}

/// An immutable, validated triangle mesh.
///
/// Construction guarantees: all face indices are in range, no face repeats a
/// vertex, no face has zero area, every vertex is referenced by at least one
/// face, no edge is shared by more than two faces, and all edge lengths are
/// positive.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    /// Unique undirected edges (a < b) with lengths, sorted by (a, b).
    edges: Vec<(usize, usize, f64)>,
    /// Number of faces incident to each edge (parallel to `edges`).
    edge_face_count: Vec<u8>,
    /// CSR-style vertex → incident faces.
    vertex_face_ptr: Vec<usize>,
    vertex_face_idx: Vec<usize>,
}

impl TriMesh {
    pub fn new(
        vertices: Vec<[f64; 3]>,
        faces: Vec<[usize; 3]>,
        policy: DegeneratePolicy,
    ) -> Result<(TriMesh, ValidationReport)> {
        let n_in = vertices.len();
        for (f, face) in faces.iter().enumerate() {
            for &v in face {
                if v >= n_in {
                    return Err(Error::Validation(format!(
                        "face {f} references vertex {v}, but only {n_in} vertices exist"
                    )));
                }
            }
        }

        let mut report = ValidationReport::default();
        let mut kept_faces = Vec::with_capacity(faces.len());
        for (f, face) in faces.iter().enumerate() {
            let degenerate = face[0] == face[1]
                || face[1] == face[2]
                || face[0] == face[2]
                || triangle_area(&vertices, face) == 0.0;
            if degenerate {
                match policy {
                    DegeneratePolicy::Reject => {
                        return Err(Error::DegenerateFace {
                            face: f,
                            msg: "repeated vertex or zero area".into(),
                        })
                    }
                    DegeneratePolicy::Drop => report.dropped_faces.push(f),
                }
            } else {
                kept_faces.push(*face);
            }
        }
        if kept_faces.is_empty() {
            return Err(Error::Validation("mesh has no non-degenerate faces".into()));
        }

        // Remove isolated vertices and remap.
        let mut referenced = vec![false; n_in];
        for face in &kept_faces {
            for &v in face {
                referenced[v] = true;
            }
        }
        let mut old_to_new = vec![usize::MAX; n_in];
        let mut kept_vertices = Vec::new();
        for (v, &used) in referenced.iter().enumerate() {
            if used {
                old_to_new[v] = kept_vertices.len();
                report.vertex_origin.push(v);
                kept_vertices.push(vertices[v]);
            } else {
                report.removed_vertices.push(v);
            }
        }
        for face in &mut kept_faces {
            for v in face.iter_mut() {
                *v = old_to_new[*v];
            }
        }

        // Edge extraction with face counts; detects non-manifold edges.
        let mut edge_pairs: Vec<(usize, usize)> = Vec::with_capacity(kept_faces.len() * 3);
        for face in &kept_faces {
            for (a, b) in [(face[0], face[1]), (face[1], face[2]), (face[2], face[0])] {
                edge_pairs.push((a.min(b), a.max(b)));
            }
        }
        edge_pairs.sort_unstable();
        let mut edges = Vec::new();
        let mut edge_face_count = Vec::new();
        let mut k = 0;
        while k < edge_pairs.len() {
            let (a, b) = edge_pairs[k];
            let mut count = 0u8;
            while k < edge_pairs.len() && edge_pairs[k] == (a, b) {
                count = count.saturating_add(1);
                k += 1;
            }
            if count > 2 {
                return Err(Error::Validation(format!(
                    "edge ({a}, {b}) is shared by {count} faces (non-manifold)"
                )));
            }
            let len = dist(&kept_vertices[a], &kept_vertices[b]);
            if !(len > 0.0) {
                return Err(Error::Validation(format!("edge ({a}, {b}) has zero length")));
            }
            edges.push((a, b, len));
            edge_face_count.push(count);
        }

        // Vertex → incident face lists.
        let n = kept_vertices.len();
        let mut vertex_face_ptr = vec![0usize; n + 1];
        for face in &kept_faces {
            for &v in face {
                vertex_face_ptr[v + 1] += 1;
            }
        }
        for i in 0..n {
            vertex_face_ptr[i + 1] += vertex_face_ptr[i];
        }
        let mut cursor = vertex_face_ptr.clone();
        let mut vertex_face_idx = vec![0usize; vertex_face_ptr[n]];
        for (f, face) in kept_faces.iter().enumerate() {
            for &v in face {
                vertex_face_idx[cursor[v]] = f;
                cursor[v] += 1;
            }
        }

        Ok((
            TriMesh {
                vertices: kept_vertices,
                faces: kept_faces,
                edges,
                edge_face_count,
                vertex_face_ptr,
                vertex_face_idx,
            },
            report,
        ))
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex(&self, i: usize) -> [f64; 3] {
        self.vertices[i]
    }

    /// Unique undirected edges (a < b, sorted) with Euclidean lengths.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Faces incident to vertex `v`.
    pub fn faces_of_vertex(&self, v: usize) -> &[usize] {
        &self.vertex_face_idx[self.vertex_face_ptr[v]..self.vertex_face_ptr[v + 1]]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        triangle_area(&self.vertices, &self.faces[f])
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.edge_face_count.iter().filter(|&&c| c == 1).count()
    }

    pub fn stats(&self) -> MeshStats {
        let mut degree = vec![0usize; self.n_vertices()];
        for &(a, b, _) in &self.edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let min_triangle_area = (0..self.n_faces())
            .map(|f| self.face_area(f))
            .fold(f64::INFINITY, f64::min);
        MeshStats {
            n_vertices: self.n_vertices(),
            n_faces: self.n_faces(),
            n_edges: self.edges.len(),
            max_vertex_degree: degree.into_iter().max().unwrap_or(0),
            boundary_edge_count: self.boundary_edge_count(),
            min_triangle_area,
        }
    }
}

/// Summary counts recomputed from the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshStats {
    pub n_vertices: usize,
    pub n_faces: usize,
    pub n_edges: usize,
    pub max_vertex_degree: usize,
    pub boundary_edge_count: usize,
    pub min_triangle_area: f64,
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

pub(crate) fn triangle_area(vertices: &[[f64; 3]], face: &[usize; 3]) -> f64 {
    let a = vertices[face[0]];
    let b = vertices[face[1]];
    let c = vertices[face[2]];
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let cx = u[1] * v[2] - u[2] * v[1];
    let cy = u[2] * v[0] - u[0] * v[2];
    let cz = u[0] * v[1] - u[1] * v[0];
    0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
}

/// Regular tetrahedron, handy in tests.
pub fn make_tetrahedron() -> TriMesh {
    let s = 1.0 / (3.0f64).sqrt();
    let vertices = vec![
        [s, s, s],
        [s, -s, -s],
        [-s, s, -s],
        [-s, -s, s],
    ];
    let faces = vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]];
    TriMesh::new(vertices, faces, DegeneratePolicy::Reject).unwrap().0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tetrahedron_counts() {
        let m = make_tetrahedron();
        let s = m.stats();
        assert_eq!(s.n_vertices, 4);
        assert_eq!(s.n_faces, 4);
        assert_eq!(s.n_edges, 6);
        assert_eq!(s.max_vertex_degree, 3);
        assert_eq!(s.boundary_edge_count, 0);
    }

    #[test]
    fn single_triangle_has_three_boundary_edges() {
        let (m, _) = TriMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
            DegeneratePolicy::Reject,
        )
        .unwrap();
        assert_eq!(m.stats().boundary_edge_count, 3);
    }

    #[test]
    fn degenerate_face_rejected_or_dropped() {
        let verts = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [2.0, 0.0, 0.0]];
        let faces = vec![[0, 1, 2], [0, 1, 3]]; // second face is collinear
        assert!(TriMesh::new(verts.clone(), faces.clone(), DegeneratePolicy::Reject).is_err());
        let (m, report) = TriMesh::new(verts, faces, DegeneratePolicy::Drop).unwrap();
        assert_eq!(report.dropped_faces, vec![1]);
        assert_eq!(m.n_faces(), 1);
        // vertex 3 became isolated and was removed
        assert_eq!(report.removed_vertices, vec![3]);
        assert_eq!(m.n_vertices(), 3);
    }

    #[test]
    fn non_manifold_edge_is_flagged() {
        let verts = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, -1.0, 0.0],
        ];
        // Three faces all sharing edge (0, 1).
        let faces = vec![[0, 1, 2], [0, 1, 3], [0, 1, 4]];
        let err = TriMesh::new(verts, faces, DegeneratePolicy::Reject);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn isolated_vertex_remap_is_reported() {
        let verts = vec![[5.0, 5.0, 5.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let faces = vec![[1, 2, 3]];
        let (m, report) = TriMesh::new(verts, faces, DegeneratePolicy::Reject).unwrap();
        assert_eq!(m.n_vertices(), 3);
        assert_eq!(report.removed_vertices, vec![0]);
        assert_eq!(report.vertex_origin, vec![1, 2, 3]);
        assert_eq!(m.vertex(0), [0.0, 0.0, 0.0]);
    }
}
