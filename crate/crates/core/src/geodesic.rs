//! Single-source shortest-path distance oracle over the mesh edge graph.
//!
//! One row of the distance matrix is computed on demand with Dijkstra's
//! algorithm; the full matrix is never materialized. Path lengths are
//! accumulated in double-double arithmetic and rounded once at the end, so a
//! path traversed from either endpoint rounds to the same f64 — distance
//! rows are symmetric bit-for-bit, which downstream code relies on when it
//! reuses landmark rows as matrix columns.

use crate::exec::{self, ExecMode};
use crate::mesh::TriMesh;
use crate::numerics::SparseSym;
use crate::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Distance oracle over a weighted undirected graph (CSR adjacency).
#[derive(Debug, Clone)]
pub struct DistanceOracle {
    n: usize,
    adj_ptr: Vec<usize>,
    adj_idx: Vec<usize>,
    adj_w: Vec<f64>,
}

impl DistanceOracle {
    /// Edge graph of a mesh, weighted by Euclidean edge length.
    pub fn from_mesh(mesh: &TriMesh) -> DistanceOracle {
        let n = mesh.n_vertices();
        let mut degree = vec![0usize; n];
        for &(a, b, _) in mesh.edges() {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut adj_ptr = vec![0usize; n + 1];
        for i in 0..n {
            adj_ptr[i + 1] = adj_ptr[i] + degree[i];
        }
        let mut cursor = adj_ptr.clone();
        let mut adj_idx = vec![0usize; adj_ptr[n]];
        let mut adj_w = vec![0.0; adj_ptr[n]];
        for &(a, b, len) in mesh.edges() {
            adj_idx[cursor[a]] = b;
            adj_w[cursor[a]] = len;
            cursor[a] += 1;
            adj_idx[cursor[b]] = a;
            adj_w[cursor[b]] = len;
            cursor[b] += 1;
        }
        DistanceOracle { n, adj_ptr, adj_idx, adj_w }
    }

    /// Graph oracle: stored values are the edge weights (1 for a 0/1
    /// adjacency). Weights must be positive.
    pub fn from_graph(adjacency: &SparseSym) -> Result<DistanceOracle> {
        let n = adjacency.dim();
        let mut adj_ptr = vec![0usize; n + 1];
        let mut adj_idx = Vec::with_capacity(adjacency.nnz());
        let mut adj_w = Vec::with_capacity(adjacency.nnz());
        for i in 0..n {
            let (cols, vals) = adjacency.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if c == i {
                    continue;
                }
                if !(v > 0.0) {
                    return Err(Error::Validation(format!(
                        "edge ({i}, {c}) has non-positive weight {v}"
                    )));
                }
                adj_idx.push(c);
                adj_w.push(v);
            }
            adj_ptr[i + 1] = adj_idx.len();
        }
        Ok(DistanceOracle { n, adj_ptr, adj_idx, adj_w })
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    /// One exact shortest-path row; unreachable vertices read +infinity.
    pub fn distance_row(&self, source: usize) -> Vec<f64> {
        assert!(source < self.n, "source {source} out of range");
        let mut hi = vec![f64::INFINITY; self.n];
        let mut lo = vec![0.0f64; self.n];
        let mut settled = vec![false; self.n];
        let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
        hi[source] = 0.0;
        heap.push(HeapEntry { hi: 0.0, lo: 0.0, vertex: source });

        while let Some(HeapEntry { hi: dh, lo: dl, vertex: u }) = heap.pop() {
            if settled[u] {
                continue;
            }
            settled[u] = true;
            for k in self.adj_ptr[u]..self.adj_ptr[u + 1] {
                let v = self.adj_idx[k];
                if settled[v] {
                    continue;
                }
                let (ch, cl) = dd_add(dh, dl, self.adj_w[k]);
                if ch < hi[v] || (ch == hi[v] && cl < lo[v]) {
                    hi[v] = ch;
                    lo[v] = cl;
                    heap.push(HeapEntry { hi: ch, lo: cl, vertex: v });
                }
            }
        }
        // hi carries the correctly rounded f64 of the accumulated length.
        hi
    }

    /// Stacked distance rows for a set of sources, computed independently
    /// (and in parallel when the mode allows).
    pub fn distance_submatrix(&self, rows: &[usize], mode: ExecMode) -> Vec<Vec<f64>> {
        exec::map_indexed(mode, rows.len(), |k| self.distance_row(rows[k]))
    }
}

/// Max-heap entry ordered so the smallest distance pops first; ties break on
/// the vertex index to keep traversal order deterministic.
struct HeapEntry {
    hi: f64,
    lo: f64,
    vertex: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .hi
            .total_cmp(&self.hi)
            .then_with(|| other.lo.total_cmp(&self.lo))
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

/// (hi, lo) + w with an error-free transformation, renormalized so that
/// |lo| ≤ ½ulp(hi). Keeping ~106 bits along the path makes the final
/// rounding independent of summation order for any realistic path length.
#[inline]
fn dd_add(hi: f64, lo: f64, w: f64) -> (f64, f64) {
    // two_sum(hi, w)
    let s = hi + w;
    let bb = s - hi;
    let err = (hi - (s - bb)) + (w - bb);
    let lo2 = lo + err;
    // quick renormalization
    let out_hi = s + lo2;
    let out_lo = lo2 - (out_hi - s);
    (out_hi, out_lo)
}
