//! Landmark selection, the biharmonic interpolation operator, column-wise
//! thresholding, and the factored distance-matrix approximations.
//!
//! The central object is the factorization `K̂ = P W Pᵀ`, where `W` holds the
//! exact landmark-to-landmark distances and `P` interpolates from the
//! landmarks to every vertex. `P` carries an exact identity block at the
//! landmark rows, so `K̂` reproduces `W` bit-for-bit on landmark pairs. A
//! Nyström factorization (`C W† Cᵀ`) and the smoothed interpolation operator
//! used by fast-MDS-style pipelines are provided as baselines.

use crate::exec::{self, ExecMode};
use crate::geodesic::DistanceOracle;
use crate::laplacian::BiharmonicOp;
use crate::numerics::{lu_solve, pseudo_inverse, solve_spd, DenseMat, Rhs, SolveConfig, SparseRect};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// How the first landmark is chosen; the rest follow deterministically by
/// farthest-point selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstLandmark {
    Index(usize),
    Seeded(u64),
}

/// Ordered landmark vertices with their exact distance rows and the running
/// distance-to-nearest-landmark vector.
#[derive(Debug, Clone)]
pub struct LandmarkSet {
    indices: Vec<usize>,
    rows: Vec<Vec<f64>>,
    min_dist: Vec<f64>,
}

impl LandmarkSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn n_vertices(&self) -> usize {
        self.min_dist.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Distance row of the t-th landmark.
    pub fn row(&self, t: usize) -> &[f64] {
        &self.rows[t]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn min_dist(&self) -> &[f64] {
        &self.min_dist
    }

    /// Landmark-to-landmark distance block `W` (optionally squared
    /// elementwise for classical-scaling use).
    pub fn landmark_distance_matrix(&self, squared: bool) -> DenseMat {
        let l = self.len();
        DenseMat::from_fn(l, l, |i, j| {
            let d = self.rows[i][self.indices[j]];
            if squared {
                d * d
            } else {
                d
            }
        })
    }
}

/// Farthest-point landmark selection. Each new landmark maximizes the
/// minimum distance to the current set (ties go to the lowest vertex index);
/// exactly `l` oracle rows are computed and kept.
pub fn select_landmarks(
    oracle: &DistanceOracle,
    l: usize,
    first: FirstLandmark,
) -> Result<LandmarkSet> {
    let n = oracle.n_vertices();
    assert!(l >= 1 && l <= n, "need 1 <= l <= n (l = {l}, n = {n})");

    let first_index = match first {
        FirstLandmark::Index(i) => {
            assert!(i < n, "first landmark {i} out of range");
            i
        }
        FirstLandmark::Seeded(seed) => ChaCha8Rng::seed_from_u64(seed).random_range(0..n),
    };

    let mut selected = vec![false; n];
    let mut indices = Vec::with_capacity(l);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(l);

    let first_row = oracle.distance_row(first_index);
    let mut min_dist = first_row.clone();
    selected[first_index] = true;
    indices.push(first_index);
    rows.push(first_row);

    for _ in 1..l {
        let mut best = usize::MAX;
        let mut best_dist = f64::NEG_INFINITY;
        for (j, (&d, &taken)) in min_dist.iter().zip(&selected).enumerate() {
            if !taken && d > best_dist {
                best = j;
                best_dist = d;
            }
        }
        if best_dist.is_infinite() {
            return Err(Error::Disconnected(
                "farthest-point selection reached an unreachable vertex".into(),
            ));
        }
        let row = oracle.distance_row(best);
        for (m, &r) in min_dist.iter_mut().zip(&row) {
            if r < *m {
                *m = r;
            }
        }
        selected[best] = true;
        indices.push(best);
        rows.push(row);
    }

    Ok(LandmarkSet { indices, rows, min_dist })
}

#[derive(Debug, Clone, Copy)]
enum Role {
    Landmark(usize),
    Interior(usize),
}

#[derive(Debug, Clone)]
enum InterpStorage {
    /// (n−l)×l column-major.
    Dense(DenseMat),
    /// (n−l)×l with at most `per_column` stored entries per column; a CSR
    /// mirror is kept for row access and row-parallel products.
    Sparse {
        csc: SparseRect,
        per_column: usize,
        csr_row_ptr: Vec<usize>,
        csr_col_idx: Vec<usize>,
        csr_values: Vec<f64>,
    },
}

/// The n×l interpolation operator with an implicit identity block at the
/// landmark rows: row `landmarks[t]` is exactly the t-th standard basis row
/// and is never stored or thresholded.
#[derive(Debug, Clone)]
pub struct InterpOperator {
    n: usize,
    landmarks: Vec<usize>,
    interior: Vec<usize>,
    role: Vec<Role>,
    storage: InterpStorage,
}

impl InterpOperator {
    fn new(n: usize, landmarks: Vec<usize>, interior: Vec<usize>, storage: InterpStorage) -> Self {
        let mut role = vec![Role::Interior(usize::MAX); n];
        for (t, &b) in landmarks.iter().enumerate() {
            role[b] = Role::Landmark(t);
        }
        for (u, &g) in interior.iter().enumerate() {
            role[g] = Role::Interior(u);
        }
        InterpOperator { n, landmarks, interior, role, storage }
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn n_landmarks(&self) -> usize {
        self.landmarks.len()
    }

    pub fn landmarks(&self) -> &[usize] {
        &self.landmarks
    }

    /// Ascending global indices of the non-landmark rows.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, InterpStorage::Sparse { .. })
    }

    /// Stored entries of the interior block (the identity block is implicit).
    pub fn interior_nnz(&self) -> usize {
        match &self.storage {
            InterpStorage::Dense(m) => m.nrows() * m.ncols(),
            InterpStorage::Sparse { csc, .. } => csc.nnz(),
        }
    }

    /// Column budget of the sparse form, if any.
    pub fn per_column_budget(&self) -> Option<usize> {
        match &self.storage {
            InterpStorage::Dense(_) => None,
            InterpStorage::Sparse { per_column, .. } => Some(*per_column),
        }
    }

    pub fn interior_dense(&self) -> Option<&DenseMat> {
        match &self.storage {
            InterpStorage::Dense(m) => Some(m),
            InterpStorage::Sparse { .. } => None,
        }
    }

    pub fn interior_sparse(&self) -> Option<&SparseRect> {
        match &self.storage {
            InterpStorage::Sparse { csc, .. } => Some(csc),
            InterpStorage::Dense(_) => None,
        }
    }

    /// Writes row `g` of the full operator into `out` (length l).
    pub fn copy_row(&self, g: usize, out: &mut [f64]) {
        let l = self.landmarks.len();
        assert_eq!(out.len(), l);
        match self.role[g] {
            Role::Landmark(t) => {
                out.fill(0.0);
                out[t] = 1.0;
            }
            Role::Interior(u) => match &self.storage {
                InterpStorage::Dense(m) => {
                    for (t, o) in out.iter_mut().enumerate() {
                        *o = m[(u, t)];
                    }
                }
                InterpStorage::Sparse { csr_row_ptr, csr_col_idx, csr_values, .. } => {
                    out.fill(0.0);
                    for k in csr_row_ptr[u]..csr_row_ptr[u + 1] {
                        out[csr_col_idx[k]] = csr_values[k];
                    }
                }
            },
        }
    }

    /// y = P z (length n from length l).
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.landmarks.len());
        let mut out = vec![0.0; self.n];
        for (t, &b) in self.landmarks.iter().enumerate() {
            out[b] = z[t];
        }
        match &self.storage {
            InterpStorage::Dense(m) => {
                let mut interior_out = vec![0.0; self.interior.len()];
                m.mul_vec(z, &mut interior_out);
                for (u, &g) in self.interior.iter().enumerate() {
                    out[g] = interior_out[u];
                }
            }
            InterpStorage::Sparse { csr_row_ptr, csr_col_idx, csr_values, .. } => {
                for (u, &g) in self.interior.iter().enumerate() {
                    let mut acc = 0.0;
                    for k in csr_row_ptr[u]..csr_row_ptr[u + 1] {
                        acc += csr_values[k] * z[csr_col_idx[k]];
                    }
                    out[g] = acc;
                }
            }
        }
        out
    }

    /// y = Pᵀ x (length l from length n).
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let l = self.landmarks.len();
        let mut out = vec![0.0; l];
        let interior_x: Vec<f64> = self.interior.iter().map(|&g| x[g]).collect();
        match &self.storage {
            InterpStorage::Dense(m) => m.tr_mul_vec(&interior_x, &mut out),
            InterpStorage::Sparse { csc, .. } => csc.tr_mul_vec(&interior_x, &mut out),
        }
        for (t, &b) in self.landmarks.iter().enumerate() {
            out[t] += x[b];
        }
        out
    }

    /// Materializes the full n×l operator (tests and small baselines only).
    pub fn to_dense_full(&self) -> DenseMat {
        let l = self.landmarks.len();
        let mut out = DenseMat::zeros(self.n, l);
        let mut row = vec![0.0; l];
        for g in 0..self.n {
            self.copy_row(g, &mut row);
            for (t, &v) in row.iter().enumerate() {
                out[(g, t)] = v;
            }
        }
        out
    }
}

/// Solves `M_uu P_u = −M_ub` for the dense interpolation operator.
pub fn interpolation_operator(
    op: &BiharmonicOp,
    landmarks: &LandmarkSet,
    cfg: &SolveConfig,
    mode: ExecMode,
) -> Result<InterpOperator> {
    let n = op.dim();
    assert_eq!(n, landmarks.n_vertices(), "operator and landmarks disagree on n");
    let blocks = op.blocks(landmarks.indices());
    let rhs = blocks.m_ub.negated();
    let p_u = solve_spd(&blocks.m_uu, Rhs::Sparse(&rhs), cfg, mode)?;
    Ok(InterpOperator::new(
        n,
        landmarks.indices().to_vec(),
        blocks.interior,
        InterpStorage::Dense(p_u),
    ))
}

/// Column budget from the average-row budget: `p = ⌈(n−l)·p_row / l⌉`,
/// clamped to the column height.
pub fn column_budget(n: usize, l: usize, p_row: usize) -> usize {
    if n == l {
        return 0;
    }
    let p = ((n - l) * p_row).div_ceil(l);
    p.clamp(1, n - l)
}

/// Keeps the `p` largest-magnitude entries of each column of the dense
/// interior block (ties break to the lowest row index), leaving the kept
/// values untouched. The identity block is not part of the interior and is
/// never thresholded.
pub fn sparsify_operator(p: &InterpOperator, p_row: usize, mode: ExecMode) -> InterpOperator {
    let dense = p
        .interior_dense()
        .expect("sparsify_operator expects the dense operator");
    let n = p.n_vertices();
    let l = p.n_landmarks();
    let rows = n - l;
    let budget = column_budget(n, l, p_row);
    assert!(n == l || (1..=rows).contains(&budget));

    let columns: Vec<Vec<(usize, f64)>> = exec::map_indexed(mode, l, |t| {
        let col = dense.col(t);
        let mut entries: Vec<(usize, f64)> = col.iter().copied().enumerate().collect();
        if budget < rows {
            // Order: larger magnitude first, then lower row index. The
            // comparator is a total order, so the selection is unique.
            let by_magnitude = |a: &(usize, f64), b: &(usize, f64)| {
                b.1.abs()
                    .partial_cmp(&a.1.abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.0.cmp(&b.0))
            };
            entries.select_nth_unstable_by(budget - 1, by_magnitude);
            entries.truncate(budget);
        }
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_unstable_by_key(|&(r, _)| r);
        entries
    });

    let csc = SparseRect::from_columns(rows, columns);
    let (csr_row_ptr, csr_col_idx, csr_values) = csc_to_csr(&csc);
    InterpOperator::new(
        n,
        p.landmarks.clone(),
        p.interior.clone(),
        InterpStorage::Sparse { csc, per_column: budget, csr_row_ptr, csr_col_idx, csr_values },
    )
}

fn csc_to_csr(csc: &SparseRect) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let nrows = csc.nrows();
    let mut row_ptr = vec![0usize; nrows + 1];
    for &r in csc.row_indices() {
        row_ptr[r + 1] += 1;
    }
    for i in 0..nrows {
        row_ptr[i + 1] += row_ptr[i];
    }
    let mut cursor = row_ptr.clone();
    let mut col_idx = vec![0usize; csc.nnz()];
    let mut values = vec![0.0; csc.nnz()];
    for j in 0..csc.ncols() {
        let (rows, vals) = csc.col(j);
        for (&r, &v) in rows.iter().zip(vals) {
            col_idx[cursor[r]] = j;
            values[cursor[r]] = v;
            cursor[r] += 1;
        }
    }
    (row_ptr, col_idx, values)
}

/// Factored approximation `K̂ = P W Pᵀ`; `squared` marks whether `W` holds
/// squared distances (the classical-scaling convention).
#[derive(Debug, Clone)]
pub struct BhaApprox {
    p: InterpOperator,
    w: DenseMat,
    squared: bool,
}

impl BhaApprox {
    pub fn operator(&self) -> &InterpOperator {
        &self.p
    }

    pub fn w(&self) -> &DenseMat {
        &self.w
    }

    pub fn squared(&self) -> bool {
        self.squared
    }

    pub fn from_parts(p: InterpOperator, w: DenseMat, squared: bool) -> Self {
        assert_eq!(p.n_landmarks(), w.nrows());
        assert_eq!(w.nrows(), w.ncols());
        BhaApprox { p, w, squared }
    }

    /// Replaces `W` with its elementwise square (no-op when already squared).
    pub fn into_squared(self) -> BhaApprox {
        if self.squared {
            return self;
        }
        let l = self.w.nrows();
        let w2 = DenseMat::from_fn(l, l, |i, j| self.w[(i, j)] * self.w[(i, j)]);
        BhaApprox { p: self.p, w: w2, squared: true }
    }

    /// Column sums of `K̂` (exactly `P W Pᵀ 1`), used by stress estimators.
    pub fn column_sums(&self) -> Vec<f64> {
        let ones = vec![1.0; self.p.n_vertices()];
        let y = self.p.apply_transpose(&ones);
        let mut wy = vec![0.0; y.len()];
        self.w.mul_vec(&y, &mut wy);
        self.p.apply(&wy)
    }
}

/// The factored approximation: `K̂_BHA = P W Pᵀ`.
pub fn bha(p: InterpOperator, landmarks: &LandmarkSet, squared: bool) -> BhaApprox {
    assert_eq!(p.n_landmarks(), landmarks.len());
    let w = landmarks.landmark_distance_matrix(squared);
    BhaApprox { p, w, squared }
}

/// Nyström factorization `K̂ = C W† Cᵀ` over the same landmark columns.
#[derive(Debug, Clone)]
pub struct NystromApprox {
    c: DenseMat,
    w_pinv: DenseMat,
    /// σ_min/σ_max of `W`; the pseudoinverse cutoff is surfaced rather than
    /// hidden so near-singular landmark blocks remain observable.
    conditioning: f64,
    rcond: f64,
}

impl NystromApprox {
    pub fn columns(&self) -> &DenseMat {
        &self.c
    }

    pub fn w_pinv(&self) -> &DenseMat {
        &self.w_pinv
    }

    pub fn conditioning(&self) -> f64 {
        self.conditioning
    }

    pub fn rcond(&self) -> f64 {
        self.rcond
    }
}

/// Builds the Nyström approximation from the landmark distance rows (the
/// columns of `K` at the landmarks are their transposes, already computed
/// during selection).
pub fn nystrom(landmarks: &LandmarkSet, rcond: f64) -> Result<NystromApprox> {
    let n = landmarks.n_vertices();
    let l = landmarks.len();
    let w = landmarks.landmark_distance_matrix(false);
    let (w_pinv, conditioning) = pseudo_inverse(&w, rcond)?;
    let c = DenseMat::from_fn(n, l, |j, t| landmarks.row(t)[j]);
    Ok(NystromApprox { c, w_pinv, conditioning, rcond })
}

/// Smoothing parameter for the fast-MDS style operator transform.
#[derive(Debug, Clone, Copy)]
pub struct FmdsConfig {
    pub mu: f64,
}

impl Default for FmdsConfig {
    fn default() -> Self {
        FmdsConfig { mu: 50.0 }
    }
}

/// Transforms the exact interpolation operator into its smoothed variant
/// `H = P (M_bb + μ I + M_bu P_u)⁻¹ μ`, an n×l dense matrix used only for
/// baseline comparison.
pub fn fmds_operator(p: &InterpOperator, op: &BiharmonicOp, cfg: &FmdsConfig) -> Result<DenseMat> {
    assert!(cfg.mu > 0.0, "smoothing parameter must be positive");
    let p_u = p
        .interior_dense()
        .expect("fmds_operator expects the dense operator");
    let l = p.n_landmarks();
    let n = p.n_vertices();
    let blocks = op.blocks(p.landmarks());

    // S = M_bb + μI + M_bu P_u, with M_bu = M_ubᵀ read column-wise.
    let mut s = blocks.m_bb.clone();
    for t in 0..l {
        s[(t, t)] += cfg.mu;
    }
    for srow in 0..l {
        let (rows, vals) = blocks.m_ub.col(srow);
        for t in 0..l {
            let col = p_u.col(t);
            let mut acc = 0.0;
            for (&u, &v) in rows.iter().zip(vals) {
                acc += v * col[u];
            }
            s[(srow, t)] += acc;
        }
    }

    let mut mu_i = DenseMat::zeros(l, l);
    for t in 0..l {
        mu_i[(t, t)] = cfg.mu;
    }
    let g = lu_solve(&s, &mu_i)?;

    let mut h = DenseMat::zeros(n, l);
    let interior_block = p_u.matmul(&g);
    for (t, &b) in p.landmarks().iter().enumerate() {
        for j in 0..l {
            h[(b, j)] = g[(t, j)];
        }
    }
    for (u, &gv) in p.interior().iter().enumerate() {
        for j in 0..l {
            h[(gv, j)] = interior_block[(u, j)];
        }
    }
    Ok(h)
}

/// A factored symmetric kernel approximation that can serve entries and rows
/// without densifying.
pub trait LowRankKernel: Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, i: usize, j: usize) -> f64;
    fn evaluate_row(&self, i: usize, out: &mut [f64]);
}

impl LowRankKernel for BhaApprox {
    fn dim(&self) -> usize {
        self.p.n_vertices()
    }

    fn evaluate(&self, i: usize, j: usize) -> f64 {
        let l = self.p.n_landmarks();
        let mut pi = vec![0.0; l];
        let mut pj = vec![0.0; l];
        self.p.copy_row(i, &mut pi);
        self.p.copy_row(j, &mut pj);
        let mut wpj = vec![0.0; l];
        self.w.mul_vec(&pj, &mut wpj);
        pi.iter().zip(&wpj).map(|(a, b)| a * b).sum()
    }

    fn evaluate_row(&self, i: usize, out: &mut [f64]) {
        let l = self.p.n_landmarks();
        let mut pi = vec![0.0; l];
        self.p.copy_row(i, &mut pi);
        let mut wpi = vec![0.0; l];
        self.w.mul_vec(&pi, &mut wpi);
        out.copy_from_slice(&self.p.apply(&wpi));
    }
}

impl LowRankKernel for NystromApprox {
    fn dim(&self) -> usize {
        self.c.nrows()
    }

    fn evaluate(&self, i: usize, j: usize) -> f64 {
        let ci = self.c.row_copy(i);
        let cj = self.c.row_copy(j);
        let mut wcj = vec![0.0; cj.len()];
        self.w_pinv.mul_vec(&cj, &mut wcj);
        ci.iter().zip(&wcj).map(|(a, b)| a * b).sum()
    }

    fn evaluate_row(&self, i: usize, out: &mut [f64]) {
        let ci = self.c.row_copy(i);
        let mut wci = vec![0.0; ci.len()];
        self.w_pinv.mul_vec(&ci, &mut wci);
        self.c.mul_vec(&wci, out);
    }
}

/// Evaluates the requested rows of a factored approximation, each by two
/// small products; rows are independent and run in parallel when allowed.
pub fn evaluate_rows<K: LowRankKernel>(kernel: &K, rows: &[usize], mode: ExecMode) -> Vec<Vec<f64>> {
    let n = kernel.dim();
    exec::map_indexed(mode, rows.len(), |k| {
        let mut out = vec![0.0; n];
        kernel.evaluate_row(rows[k], &mut out);
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesic::DistanceOracle;
    use crate::laplacian::{biharmonic_operator, LaplacianParts};
    use crate::mesh::make_sphere_mesh;
    use crate::numerics::SparseSym;
    use proptest::prelude::*;

    fn path_oracle(n: usize) -> DistanceOracle {
        let mut trips = Vec::new();
        for i in 0..n - 1 {
            trips.push((i, i + 1, 1.0));
            trips.push((i + 1, i, 1.0));
        }
        DistanceOracle::from_graph(&SparseSym::from_triplets(n, &trips)).unwrap()
    }

    fn sphere_setup(s: u32, l: usize) -> (DistanceOracle, BiharmonicOp, LandmarkSet) {
        let mesh = make_sphere_mesh(s);
        let oracle = DistanceOracle::from_mesh(&mesh);
        let parts = LaplacianParts::from_mesh(&mesh).unwrap();
        let op = biharmonic_operator(&parts).unwrap();
        let lm = select_landmarks(&oracle, l, FirstLandmark::Index(0)).unwrap();
        (oracle, op, lm)
    }

    #[test]
    fn farthest_point_on_path_matches_brute_force() {
        let oracle = path_oracle(5);
        let lm = select_landmarks(&oracle, 3, FirstLandmark::Index(0)).unwrap();
        assert_eq!(lm.indices(), &[0, 4, 2]);

        // Brute-force argmax-min over all rows.
        let all: Vec<Vec<f64>> = (0..5).map(|i| oracle.distance_row(i)).collect();
        let mut chosen = vec![0usize];
        for _ in 1..3 {
            let mut best = usize::MAX;
            let mut best_d = f64::NEG_INFINITY;
            for j in 0..5 {
                if chosen.contains(&j) {
                    continue;
                }
                let d = chosen.iter().map(|&c| all[c][j]).fold(f64::INFINITY, f64::min);
                if d > best_d {
                    best_d = d;
                    best = j;
                }
            }
            chosen.push(best);
        }
        assert_eq!(lm.indices(), &chosen[..]);
    }

    #[test]
    fn all_and_single_landmark_edge_cases() {
        let oracle = path_oracle(4);
        let all = select_landmarks(&oracle, 4, FirstLandmark::Index(1)).unwrap();
        let mut sorted = all.indices().to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);

        let one = select_landmarks(&oracle, 1, FirstLandmark::Index(2)).unwrap();
        assert_eq!(one.indices(), &[2]);
        assert_eq!(one.min_dist(), oracle.distance_row(2).as_slice());
    }

    #[test]
    fn min_dist_invariant_holds() {
        let (oracle, _, lm) = sphere_setup(1, 6);
        let n = oracle.n_vertices();
        for j in 0..n {
            let expect = (0..lm.len()).map(|t| lm.row(t)[j]).fold(f64::INFINITY, f64::min);
            assert_eq!(lm.min_dist()[j], expect);
        }
    }

    #[test]
    fn disconnected_graph_fails_selection() {
        let adj = SparseSym::from_triplets(4, &[(0, 1, 1.0), (1, 0, 1.0), (2, 3, 1.0), (3, 2, 1.0)]);
        let oracle = DistanceOracle::from_graph(&adj).unwrap();
        match select_landmarks(&oracle, 2, FirstLandmark::Index(0)) {
            Err(Error::Disconnected(_)) => {}
            other => panic!("expected Disconnected, got {other:?}"),
        }
    }

    #[test]
    fn seeded_first_landmark_is_reproducible() {
        let oracle = path_oracle(9);
        let a = select_landmarks(&oracle, 4, FirstLandmark::Seeded(7)).unwrap();
        let b = select_landmarks(&oracle, 4, FirstLandmark::Seeded(7)).unwrap();
        assert_eq!(a.indices(), b.indices());
    }

    #[test]
    fn full_landmark_set_gives_identity_operator() {
        let (_, op, lm) = sphere_setup(0, 12);
        let p = interpolation_operator(&op, &lm, &SolveConfig::default(), ExecMode::default()).unwrap();
        let full = p.to_dense_full();
        // P is the identity under the landmark permutation.
        for g in 0..12 {
            for t in 0..12 {
                let expect = if lm.indices()[t] == g { 1.0 } else { 0.0 };
                assert_eq!(full[(g, t)], expect);
            }
        }
    }

    #[test]
    fn dense_rows_sum_to_one() {
        let (_, op, lm) = sphere_setup(2, 12);
        let p = interpolation_operator(&op, &lm, &SolveConfig::default(), ExecMode::default()).unwrap();
        let l = lm.len();
        let mut row = vec![0.0; l];
        for g in 0..p.n_vertices() {
            p.copy_row(g, &mut row);
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-6, "row {g} sums to {sum}");
        }
    }

    #[test]
    fn interior_block_matches_dense_inverse_oracle() {
        let (_, op, lm) = sphere_setup(2, 12);
        let p = interpolation_operator(&op, &lm, &SolveConfig::default(), ExecMode::default()).unwrap();
        let blocks = op.blocks(lm.indices());
        // Oracle: dense Gaussian-elimination solve of M_uu X = -M_ub.
        let muu = blocks.m_uu.to_dense();
        let mub = blocks.m_ub.to_dense();
        let neg = DenseMat::from_fn(mub.nrows(), mub.ncols(), |i, j| -mub[(i, j)]);
        let x = dense_solve(&muu, &neg);
        let got = p.interior_dense().unwrap();
        let diff = got.sub(&x).frobenius_norm();
        assert!(diff <= 1e-6 * x.frobenius_norm().max(1.0), "diff {diff:.3e}");
    }

    /// Gaussian elimination with partial pivoting (test oracle).
    fn dense_solve(a: &DenseMat, b: &DenseMat) -> DenseMat {
        let n = a.nrows();
        let k = b.ncols();
        let mut m = a.clone();
        let mut x = b.clone();
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if m[(r, col)].abs() > m[(piv, col)].abs() {
                    piv = r;
                }
            }
            if piv != col {
                for j in 0..n {
                    let t = m[(col, j)];
                    m[(col, j)] = m[(piv, j)];
                    m[(piv, j)] = t;
                }
                for j in 0..k {
                    let t = x[(col, j)];
                    x[(col, j)] = x[(piv, j)];
                    x[(piv, j)] = t;
                }
            }
            let d = m[(col, col)];
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = m[(r, col)] / d;
                if f == 0.0 {
                    continue;
                }
                for j in col..n {
                    m[(r, j)] -= f * m[(col, j)];
                }
                for j in 0..k {
                    x[(r, j)] -= f * x[(col, j)];
                }
            }
        }
        DenseMat::from_fn(n, k, |i, j| x[(i, j)] / m[(i, i)])
    }

    #[test]
    fn column_budget_formula() {
        assert_eq!(column_budget(100, 20, 10), 40);
        assert_eq!(column_budget(10, 10, 5), 0);
        // ceiling, not floor
        assert_eq!(column_budget(101, 20, 10), 41);
    }

    #[test]
    fn keep_all_thresholding_is_identity() {
        let (_, op, lm) = sphere_setup(1, 8);
        let p = interpolation_operator(&op, &lm, &SolveConfig::default(), ExecMode::default()).unwrap();
        let n = p.n_vertices();
        let l = p.n_landmarks();
        let sparse = sparsify_operator(&p, n - l, ExecMode::default());
        let mut a = vec![0.0; l];
        let mut b = vec![0.0; l];
        for g in 0..n {
            p.copy_row(g, &mut a);
            sparse.copy_row(g, &mut b);
            assert_eq!(a, b, "row {g}");
        }
    }

    #[test]
    fn thresholding_keeps_largest_magnitudes() {
        let dense = DenseMat::from_fn(4, 2, |i, j| {
            let col0 = [0.5, -0.4, 0.05, 0.05];
            let col1 = [0.1, 0.1, 0.1, 0.2];
            if j == 0 {
                col0[i]
            } else {
                col1[i]
            }
        });
        let p = InterpOperator::new(6, vec![4, 5], vec![0, 1, 2, 3], InterpStorage::Dense(dense));
        let sparse = sparsify_operator(&p, 1, ExecMode::Sequential);
        assert_eq!(sparse.per_column_budget(), Some(2));
        let csc = sparse.interior_sparse().unwrap();
        let (rows0, vals0) = csc.col(0);
        assert_eq!(rows0, &[0, 1]);
        assert_eq!(vals0, &[0.5, -0.4]);
        // Ties in column 1 (three 0.1 entries competing for one slot after
        // 0.2): lowest row index wins.
        let (rows1, vals1) = csc.col(1);
        assert_eq!(rows1, &[0, 3]);
        assert_eq!(vals1, &[0.1, 0.2]);
    }

    #[test]
    fn landmark_pairs_reproduce_w_bitwise() {
        let (_, op, lm) = sphere_setup(1, 8);
        let p = interpolation_operator(&op, &lm, &SolveConfig::default(), ExecMode::default()).unwrap();
        let approx = bha(p, &lm, false);
        let w = approx.w();
        for (i, &bi) in lm.indices().iter().enumerate() {
            for (j, &bj) in lm.indices().iter().enumerate() {
                assert_eq!(approx.evaluate(bi, bj), w[(i, j)]);
            }
        }
        // Sparse form: identity rows are never thresholded.
        let (_, op, lm) = sphere_setup(1, 8);
        let p = interpolation_operator(&op, &lm, &SolveConfig::default(), ExecMode::default()).unwrap();
        let sp = sparsify_operator(&p, 3, ExecMode::default());
        let approx = bha(sp, &lm, false);
        for (i, &bi) in lm.indices().iter().enumerate() {
            for (j, &bj) in lm.indices().iter().enumerate() {
                assert_eq!(approx.evaluate(bi, bj), approx.w()[(i, j)]);
            }
        }
    }

    #[test]
    fn full_landmarks_reproduce_k_exactly() {
        let oracle = path_oracle(6);
        let adj_op = {
            let mut trips = Vec::new();
            for i in 0..5 {
                trips.push((i, i + 1, 1.0));
                trips.push((i + 1, i, 1.0));
            }
            crate::laplacian::graph_biharmonic(&SparseSym::from_triplets(6, &trips)).unwrap()
        };
        let lm = select_landmarks(&oracle, 6, FirstLandmark::Index(0)).unwrap();
        let p = interpolation_operator(&adj_op, &lm, &SolveConfig::default(), ExecMode::default()).unwrap();
        let approx = bha(p, &lm, false);
        for i in 0..6 {
            let mut row = vec![0.0; 6];
            approx.evaluate_row(i, &mut row);
            let exact = oracle.distance_row(i);
            for j in 0..6 {
                assert!((row[j] - exact[j]).abs() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn evaluate_rows_matches_densified_product() {
        let (_, op, lm) = sphere_setup(2, 10);
        let p = interpolation_operator(&op, &lm, &SolveConfig::default(), ExecMode::default()).unwrap();
        let approx = bha(p, &lm, false);
        let n = approx.dim();
        let full = approx.operator().to_dense_full();
        let dense_k = full.matmul(&approx.w().matmul(&full.transpose()));
        let rows: Vec<usize> = vec![0, 5, 77, 161];
        let got = evaluate_rows(&approx, &rows, ExecMode::default());
        for (k, &i) in rows.iter().enumerate() {
            for j in 0..n {
                assert!(
                    (got[k][j] - dense_k[(i, j)]).abs() <= 1e-10,
                    "row {i}, col {j}: {} vs {}",
                    got[k][j],
                    dense_k[(i, j)]
                );
            }
        }
    }

    #[test]
    fn nystrom_zero_w_gives_zero_approx() {
        // Single landmark: W = [0], pinv = 0, K̂ = 0.
        let oracle = path_oracle(4);
        let lm = select_landmarks(&oracle, 1, FirstLandmark::Index(0)).unwrap();
        let ny = nystrom(&lm, 1e-12).unwrap();
        let mut row = vec![0.0; 4];
        ny.evaluate_row(2, &mut row);
        assert!(row.iter().all(|&v| v == 0.0));
        assert_eq!(ny.conditioning(), 0.0);
    }

    #[test]
    fn nystrom_full_landmarks_reproduce_k() {
        let oracle = path_oracle(5);
        let lm = select_landmarks(&oracle, 5, FirstLandmark::Index(0)).unwrap();
        let ny = nystrom(&lm, 1e-12).unwrap();
        for i in 0..5 {
            let exact = oracle.distance_row(i);
            let mut row = vec![0.0; 5];
            ny.evaluate_row(i, &mut row);
            for j in 0..5 {
                assert!((row[j] - exact[j]).abs() <= 1e-9, "({i},{j}): {} vs {}", row[j], exact[j]);
            }
        }
    }

    #[test]
    fn nystrom_matches_dense_pinv_oracle() {
        let (_, _, lm) = sphere_setup(2, 30);
        let ny = nystrom(&lm, 1e-12).unwrap();
        let n = lm.n_vertices();

        // Oracle: pinv via an independent Jacobi eigendecomposition of W.
        let w = lm.landmark_distance_matrix(false);
        let (vals, vecs) = jacobi_eig(&w);
        let smax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let l = lm.len();
        let mut pinv = DenseMat::zeros(l, l);
        for t in 0..l {
            if vals[t].abs() <= 1e-12 * smax {
                continue;
            }
            let inv = 1.0 / vals[t];
            for i in 0..l {
                for j in 0..l {
                    pinv[(i, j)] += vecs[(i, t)] * inv * vecs[(j, t)];
                }
            }
        }
        let c = DenseMat::from_fn(n, l, |j, t| lm.row(t)[j]);
        let oracle_k = c.matmul(&pinv.matmul(&c.transpose()));

        let rows: Vec<usize> = (0..n).step_by(17).collect();
        let got = evaluate_rows(&ny, &rows, ExecMode::default());
        let scale = oracle_k.max_abs();
        for (k, &i) in rows.iter().enumerate() {
            for j in 0..n {
                assert!(
                    (got[k][j] - oracle_k[(i, j)]).abs() <= 1e-8 * scale,
                    "({i},{j}): {} vs {}",
                    got[k][j],
                    oracle_k[(i, j)]
                );
            }
        }
    }

    /// Cyclic Jacobi eigendecomposition (test oracle, independent of faer).
    fn jacobi_eig(s: &DenseMat) -> (Vec<f64>, DenseMat) {
        let n = s.nrows();
        let mut a = s.clone();
        let mut v = DenseMat::identity(n);
        for _sweep in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            if off.sqrt() <= 1e-14 * s.frobenius_norm().max(1e-300) {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let sn = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - sn * akq;
                        a[(k, q)] = sn * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - sn * aqk;
                        a[(q, k)] = sn * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - sn * vkq;
                        v[(k, q)] = sn * vkp + c * vkq;
                    }
                }
            }
        }
        let vals: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        (vals, v)
    }

    #[test]
    fn fmds_large_mu_approaches_p() {
        let (_, op, lm) = sphere_setup(1, 8);
        let p = interpolation_operator(&op, &lm, &SolveConfig::default(), ExecMode::default()).unwrap();
        let h = fmds_operator(&p, &op, &FmdsConfig { mu: 1e12 }).unwrap();
        let full = p.to_dense_full();
        let rel = h.sub(&full).frobenius_norm() / full.frobenius_norm();
        assert!(rel <= 1e-4, "relative gap {rel:.3e}");
    }

    #[test]
    fn fmds_full_landmarks_collapse_to_shifted_inverse() {
        // l = n: P = I (under permutation), M_bu is empty, so
        // H = (M + μI)⁻¹ μ under the landmark permutation.
        let mut trips = Vec::new();
        for i in 0..4 {
            trips.push((i, (i + 1) % 5, 1.0));
            trips.push(((i + 1) % 5, i, 1.0));
        }
        let adj = SparseSym::from_triplets(5, &trips);
        let op = crate::laplacian::graph_biharmonic(&adj).unwrap();
        let oracle = DistanceOracle::from_graph(&adj).unwrap();
        let lm = select_landmarks(&oracle, 5, FirstLandmark::Index(0)).unwrap();
        let p = interpolation_operator(&op, &lm, &SolveConfig::default(), ExecMode::default()).unwrap();
        let mu = 3.0;
        let h = fmds_operator(&p, &op, &FmdsConfig { mu }).unwrap();

        let n = 5;
        let md = op.matrix().to_dense();
        let shifted = DenseMat::from_fn(n, n, |i, j| md[(i, j)] + if i == j { mu } else { 0.0 });
        let mut mu_i = DenseMat::zeros(n, n);
        for i in 0..n {
            mu_i[(i, i)] = mu;
        }
        let expect_perm = dense_solve(&shifted, &mu_i);
        // h rows are global, columns follow landmark order t -> vertex b_t.
        for g in 0..n {
            for (t, &bt) in lm.indices().iter().enumerate() {
                assert!(
                    (h[(g, t)] - expect_perm[(g, bt)]).abs() <= 1e-8,
                    "H[{g},{t}] vs oracle"
                );
            }
        }
    }

    #[test]
    fn fmds_matches_dense_oracle_on_icosphere() {
        let (_, op, lm) = sphere_setup(2, 12);
        let p = interpolation_operator(&op, &lm, &SolveConfig::default(), ExecMode::default()).unwrap();
        let h = fmds_operator(&p, &op, &FmdsConfig { mu: 50.0 }).unwrap();

        // Dense oracle for (M_bb + μI + M_bu P_u)⁻¹ μ, then P·G.
        let blocks = op.blocks(lm.indices());
        let l = lm.len();
        let pu = p.interior_dense().unwrap();
        let mbu = blocks.m_ub.to_dense().transpose();
        let mut s = blocks.m_bb.clone();
        let coupling = mbu.matmul(pu);
        for i in 0..l {
            for j in 0..l {
                s[(i, j)] += coupling[(i, j)];
            }
            s[(i, i)] += 50.0;
        }
        let mut mu_i = DenseMat::zeros(l, l);
        for i in 0..l {
            mu_i[(i, i)] = 50.0;
        }
        let g = dense_solve(&s, &mu_i);
        let oracle_h = p.to_dense_full().matmul(&g);
        let rel = h.sub(&oracle_h).frobenius_norm() / oracle_h.frobenius_norm();
        assert!(rel <= 1e-8, "relative gap {rel:.3e}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        // Factored evaluation is symmetric by construction.
        #[test]
        fn bha_evaluation_is_symmetric(seed in 0u64..50, sparse in proptest::bool::ANY) {
            let (_, op, lm) = sphere_setup(1, 7);
            let p = interpolation_operator(&op, &lm, &SolveConfig::default(), ExecMode::default()).unwrap();
            let p = if sparse { sparsify_operator(&p, 4, ExecMode::default()) } else { p };
            let approx = bha(p, &lm, false);
            let n = approx.dim();
            let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(13);
            let mut next = move || { state ^= state << 13; state ^= state >> 7; state ^= state << 17; (state >> 7) as usize };
            for _ in 0..12 {
                let i = next() % n;
                let j = next() % n;
                let a = approx.evaluate(i, j);
                let b = approx.evaluate(j, i);
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }

        // Per-column sparsity budget is honored for any p_row.
        #[test]
        fn sparsity_budget_holds(p_row in 1usize..30) {
            let (_, op, lm) = sphere_setup(1, 6);
            let p = interpolation_operator(&op, &lm, &SolveConfig::default(), ExecMode::default()).unwrap();
            let sp = sparsify_operator(&p, p_row, ExecMode::default());
            let budget = column_budget(sp.n_vertices(), sp.n_landmarks(), p_row);
            let csc = sp.interior_sparse().unwrap();
            for t in 0..sp.n_landmarks() {
                prop_assert!(csc.col(t).0.len() <= budget);
            }
        }
    }
}
