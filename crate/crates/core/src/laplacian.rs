//! Discrete biharmonic operator assembly on triangle meshes and plain graphs.
//!
//! For a mesh: `D` holds the lumped vertex masses (one third of the incident
//! triangle area), `A` the cotangent edge weights, `V` the row sums of `A`,
//! and the biharmonic operator is `M = (V − A)ᵀ D⁻¹ (V − A)` — symmetric,
//! positive semi-definite, with `M·1 = 0`. For a generic graph, `D = I` and
//! `A` is the 0/1 adjacency, so `M = (V − A)²` is the squared graph
//! Laplacian.

use crate::mesh::TriMesh;
use crate::numerics::{DenseMat, SparseRect, SparseSym};
use crate::{Error, Result};

/// Mass, adjacency and weight-sum pieces of the operator.
#[derive(Debug, Clone)]
pub struct LaplacianParts {
    /// Lumped mass per vertex (area units); strictly positive on valid meshes.
    pub d_diag: Vec<f64>,
    /// Cotangent (or graph) adjacency weights.
    pub a: SparseSym,
    /// Row sums of `a`, in row storage order.
    pub v_diag: Vec<f64>,
}

impl LaplacianParts {
    pub fn from_mesh(mesh: &TriMesh) -> Result<LaplacianParts> {
        let a = cotan_adjacency(mesh)?;
        let d_diag = lumped_mass(mesh);
        let v_diag = row_sums(&a);
        Ok(LaplacianParts { d_diag, a, v_diag })
    }

    /// Graph mode: unit masses, adjacency as given.
    pub fn from_graph(adjacency: SparseSym) -> LaplacianParts {
        let n = adjacency.dim();
        let v_diag = row_sums(&adjacency);
        LaplacianParts { d_diag: vec![1.0; n], a: adjacency, v_diag }
    }
}

fn row_sums(a: &SparseSym) -> Vec<f64> {
    (0..a.dim())
        .map(|i| {
            let (_, vals) = a.row(i);
            vals.iter().sum()
        })
        .collect()
}

/// Cotangent adjacency weights: each interior edge gets the half-sum of the
/// two opposite-angle cotangents, each boundary edge half of its single one.
/// Negative weights from obtuse triangles are kept as-is.
pub fn cotan_adjacency(mesh: &TriMesh) -> Result<SparseSym> {
    let n = mesh.n_vertices();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(mesh.n_faces() * 6);
    for (f, face) in mesh.faces().iter().enumerate() {
        for corner in 0..3 {
            let apex = face[corner];
            let i = face[(corner + 1) % 3];
            let j = face[(corner + 2) % 3];
            let p = mesh.vertex(apex);
            let pi = mesh.vertex(i);
            let pj = mesh.vertex(j);
            let u = [pi[0] - p[0], pi[1] - p[1], pi[2] - p[2]];
            let v = [pj[0] - p[0], pj[1] - p[1], pj[2] - p[2]];
            let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
            let cx = u[1] * v[2] - u[2] * v[1];
            let cy = u[2] * v[0] - u[0] * v[2];
            let cz = u[0] * v[1] - u[1] * v[0];
            let cross = (cx * cx + cy * cy + cz * cz).sqrt();
            let half_cot = 0.5 * dot / cross;
            if !half_cot.is_finite() {
                return Err(Error::DegenerateFace {
                    face: f,
                    msg: "cotangent weight is not finite".into(),
                });
            }
            triplets.push((i, j, half_cot));
            triplets.push((j, i, half_cot));
        }
    }
    Ok(SparseSym::from_triplets(n, &triplets))
}

/// Lumped mass: one third of the total area of the triangles incident on each
/// vertex.
pub fn lumped_mass(mesh: &TriMesh) -> Vec<f64> {
    let mut mass = vec![0.0; mesh.n_vertices()];
    for (f, face) in mesh.faces().iter().enumerate() {
        let third = mesh.face_area(f) / 3.0;
        for &v in face {
            mass[v] += third;
        }
    }
    mass
}

/// The assembled biharmonic operator plus landmark-partition block views.
#[derive(Debug, Clone)]
pub struct BiharmonicOp {
    m: SparseSym,
}

/// Index views of `M` under a (landmark, interior) vertex partition.
///
/// Row/column order: `uu` and `ub` rows follow ascending interior vertex
/// order; `ub` and `bb` columns follow the landmark order given to
/// [`BiharmonicOp::blocks`]. Each stored value of `M` is copied into at most
/// one block.
#[derive(Debug)]
pub struct OperatorBlocks {
    /// Interior-interior block, (n−l)×(n−l).
    pub m_uu: SparseSym,
    /// Interior-landmark block, (n−l)×l, column-compressed.
    pub m_ub: SparseRect,
    /// Landmark-landmark block, dense l×l (small).
    pub m_bb: DenseMat,
    /// Ascending global indices of the interior vertices.
    pub interior: Vec<usize>,
}

impl BiharmonicOp {
    /// Assembles `M = (V − A)ᵀ D⁻¹ (V − A)` as a sparse product over the rows
    /// of `L = V − A`. The transpose is a no-op since `L` is symmetric; the
    /// pattern reaches 2-ring neighborhoods.
    pub fn assemble(parts: &LaplacianParts) -> Result<BiharmonicOp> {
        let n = parts.a.dim();
        if let Some(v) = parts.d_diag.iter().position(|&m| m <= 0.0) {
            return Err(Error::ZeroMass { vertex: v });
        }
        assert_eq!(parts.d_diag.len(), n);
        assert_eq!(parts.v_diag.len(), n);

        // Row k of L contributes the outer product L[k,:]ᵀ L[k,:] / D[k].
        // Triplets are emitted symmetrically from a single product so the
        // assembled values are bit-symmetric.
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        let mut row_cols: Vec<usize> = Vec::new();
        let mut row_vals: Vec<f64> = Vec::new();
        for k in 0..n {
            row_cols.clear();
            row_vals.clear();
            let (cols, vals) = parts.a.row(k);
            let mut saw_diag = false;
            for (&c, &v) in cols.iter().zip(vals) {
                if c == k {
                    row_cols.push(c);
                    row_vals.push(parts.v_diag[k] - v);
                    saw_diag = true;
                } else {
                    row_cols.push(c);
                    row_vals.push(-v);
                }
            }
            if !saw_diag {
                row_cols.push(k);
                row_vals.push(parts.v_diag[k]);
            }
            let inv_d = 1.0 / parts.d_diag[k];
            for (ai, &i) in row_cols.iter().enumerate() {
                let li = row_vals[ai];
                if li == 0.0 {
                    continue;
                }
                for (aj, &j) in row_cols.iter().enumerate().skip(ai) {
                    let lj = row_vals[aj];
                    if lj == 0.0 {
                        continue;
                    }
                    let value = li * lj * inv_d;
                    triplets.push((i, j, value));
                    if i != j {
                        triplets.push((j, i, value));
                    }
                }
            }
        }
        Ok(BiharmonicOp { m: SparseSym::from_triplets(n, &triplets) })
    }

    pub fn matrix(&self) -> &SparseSym {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    /// Splits `M` into the landmark-partition blocks. `landmarks` gives the
    /// column order of `m_ub`/`m_bb`; interior vertices keep ascending order.
    pub fn blocks(&self, landmarks: &[usize]) -> OperatorBlocks {
        let n = self.dim();
        let l = landmarks.len();

        #[derive(Clone, Copy)]
        enum Role {
            Landmark(usize),
            Interior(usize),
        }
        let mut role = vec![Role::Interior(usize::MAX); n];
        for (t, &b) in landmarks.iter().enumerate() {
            assert!(b < n, "landmark {b} out of range");
            role[b] = Role::Landmark(t);
        }
        let mut interior = Vec::with_capacity(n - l);
        for (v, r) in role.iter_mut().enumerate() {
            if let Role::Interior(slot) = r {
                *slot = interior.len();
                interior.push(v);
            }
        }
        assert_eq!(interior.len(), n - l, "landmark indices must be distinct");

        // m_uu rows in ascending interior order; within a row the CSR column
        // order of M is ascending, and interior positions are monotone in the
        // global index, so the block rows stay sorted.
        let mut uu_row_ptr = Vec::with_capacity(n - l + 1);
        uu_row_ptr.push(0);
        let mut uu_cols = Vec::new();
        let mut uu_vals = Vec::new();
        for &g in &interior {
            let (cols, vals) = self.m.row(g);
            for (&c, &v) in cols.iter().zip(vals) {
                if let Role::Interior(u) = role[c] {
                    uu_cols.push(u);
                    uu_vals.push(v);
                }
            }
            uu_row_ptr.push(uu_cols.len());
        }
        let m_uu = SparseSym::from_csr(n - l, uu_row_ptr, uu_cols, uu_vals);

        // Column t of m_ub is the interior part of M's row landmarks[t]
        // (symmetry gives M[u, b] = M[b, u] bit-exactly).
        let mut ub_columns: Vec<Vec<(usize, f64)>> = Vec::with_capacity(l);
        let mut m_bb = DenseMat::zeros(l, l);
        for (t, &b) in landmarks.iter().enumerate() {
            let (cols, vals) = self.m.row(b);
            let mut column = Vec::new();
            for (&c, &v) in cols.iter().zip(vals) {
                match role[c] {
                    Role::Interior(u) => column.push((u, v)),
                    Role::Landmark(s) => m_bb[(s, t)] = v,
                }
            }
            ub_columns.push(column);
        }
        let m_ub = SparseRect::from_columns(n - l, ub_columns);

        OperatorBlocks { m_uu, m_ub, m_bb, interior }
    }
}

/// Biharmonic operator of a triangle mesh.
pub fn biharmonic_operator(parts: &LaplacianParts) -> Result<BiharmonicOp> {
    BiharmonicOp::assemble(parts)
}

/// Biharmonic operator of a plain graph: `M = (V − A)²` with `D = I`.
/// The adjacency must be symmetric 0/1 without self-loops.
pub fn graph_biharmonic(adjacency: &SparseSym) -> Result<BiharmonicOp> {
    for i in 0..adjacency.dim() {
        let (cols, vals) = adjacency.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            if c == i {
                return Err(Error::Validation(format!("self-loop at vertex {i}")));
            }
            if v != 0.0 && v != 1.0 {
                return Err(Error::Validation(format!(
                    "adjacency entry ({i}, {c}) = {v} is not 0/1"
                )));
            }
        }
    }
    BiharmonicOp::assemble(&LaplacianParts::from_graph(adjacency.clone()))
}
