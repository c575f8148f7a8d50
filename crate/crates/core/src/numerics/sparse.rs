//! Compressed sparse storage: symmetric CSR for square operators, CSC for
//! rectangular blocks that are built and consumed column by column.

/// Symmetric sparse matrix in compressed sparse row form. Both triangles are
/// stored; assembly guarantees that entry (i, j) exists iff (j, i) does and
/// that the two values are bit-identical.
#[derive(Debug, Clone)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSym {
    /// Assembles from (row, col, value) triplets: duplicates are summed in
    /// insertion order and exact zeros are dropped afterwards.
    ///
    /// Callers are responsible for emitting structurally symmetric triplets
    /// with bit-equal values on both sides; this is checked in debug builds
    /// and exposed through [`SparseSym::pattern_is_symmetric`].
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        // Stable sort keeps insertion order within a (row, col) group, so
        // duplicate summation is deterministic and symmetric emitters stay
        // bit-symmetric after accumulation.
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));

        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();

        let mut k = 0;
        while k < order.len() {
            let (r, c, _) = triplets[order[k]];
            assert!(r < n && c < n, "triplet ({r}, {c}) out of range for n = {n}");
            let mut sum = 0.0;
            while k < order.len() {
                let (rr, cc, v) = triplets[order[k]];
                if rr != r || cc != c {
                    break;
                }
                sum += v;
                k += 1;
            }
            if sum != 0.0 {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(sum);
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }

        let out = Self { n, row_ptr, col_idx, values };
        debug_assert!(out.pattern_is_symmetric(), "assembled pattern is not symmetric");
        out
    }

    /// Builds directly from CSR parts. Column indices must be strictly
    /// increasing within each row.
    pub fn from_csr(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(row_ptr.len(), n + 1);
        assert_eq!(*row_ptr.last().unwrap(), col_idx.len());
        assert_eq!(col_idx.len(), values.len());
        debug_assert!((0..n).all(|i| col_idx[row_ptr[i]..row_ptr[i + 1]].windows(2).all(|w| w[0] < w[1])));
        Self { n, row_ptr, col_idx, values }
    }

    /// Identity matrix, mostly for tests.
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// Value at (i, j); absent entries read as zero.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                acc += v * x[c];
            }
            y[i] = acc;
        }
    }

    /// Adds `shift` to every diagonal entry, inserting missing diagonal slots.
    pub fn shifted_diagonal(&self, shift: f64) -> SparseSym {
        let mut triplets = Vec::with_capacity(self.nnz() + self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                triplets.push((i, c, v));
            }
            triplets.push((i, i, shift));
        }
        SparseSym::from_triplets(self.n, &triplets)
    }

    /// True when entry (i, j) is stored iff (j, i) is.
    pub fn pattern_is_symmetric(&self) -> bool {
        for i in 0..self.n {
            let (cols, _) = self.row(i);
            for &j in cols {
                let (jcols, _) = self.row(j);
                if jcols.binary_search(&i).is_err() {
                    return false;
                }
            }
        }
        true
    }

    /// Largest |A[i][j] - A[j][i]| over stored entries.
    pub fn max_value_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Dense copy for small-scale oracle comparisons.
    pub fn to_dense(&self) -> super::dense::DenseMat {
        let mut out = super::dense::DenseMat::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out[(i, c)] = v;
            }
        }
        out
    }

    pub(crate) fn to_faer(&self) -> faer::sparse::SparseColMat<usize, f64> {
        let mut trips = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                // Symmetric storage: CSR rows double as CSC columns.
                trips.push(faer::sparse::Triplet::new(c, i, v));
            }
        }
        faer::sparse::SparseColMat::try_new_from_triplets(self.n, self.n, &trips)
            .expect("valid triplets")
    }
}

/// Rectangular sparse matrix in compressed sparse column form.
#[derive(Debug, Clone)]
pub struct SparseRect {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRect {
    pub fn from_csc(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        assert_eq!(col_ptr.len(), ncols + 1);
        assert_eq!(*col_ptr.last().unwrap(), row_idx.len());
        assert_eq!(row_idx.len(), values.len());
        debug_assert!(
            (0..ncols).all(|j| row_idx[col_ptr[j]..col_ptr[j + 1]].windows(2).all(|w| w[0] < w[1])),
            "row indices must be strictly increasing within a column"
        );
        debug_assert!(row_idx.iter().all(|&r| r < nrows));
        Self { nrows, ncols, col_ptr, row_idx, values }
    }

    /// Builds from per-column entry lists; each list must be sorted by row.
    pub fn from_columns(nrows: usize, columns: Vec<Vec<(usize, f64)>>) -> Self {
        let ncols = columns.len();
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        col_ptr.push(0);
        let nnz: usize = columns.iter().map(Vec::len).sum();
        let mut row_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        for col in &columns {
            for &(r, v) in col {
                row_idx.push(r);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        Self::from_csc(nrows, ncols, col_ptr, row_idx, values)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let span = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[span.clone()], &self.values[span])
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_indices(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (rows, vals) = self.col(j);
        match rows.binary_search(&i) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Returns a copy with every value negated (same pattern).
    pub fn negated(&self) -> SparseRect {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = -*v;
        }
        out
    }

    /// y = A x  (x has ncols entries, y has nrows)
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        y.fill(0.0);
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let (rows, vals) = self.col(j);
            for (&r, &v) in rows.iter().zip(vals) {
                y[r] += v * xj;
            }
        }
    }

    /// y = Aᵀ x  (x has nrows entries, y has ncols)
    pub fn tr_mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for j in 0..self.ncols {
            let (rows, vals) = self.col(j);
            let mut acc = 0.0;
            for (&r, &v) in rows.iter().zip(vals) {
                acc += v * x[r];
            }
            y[j] = acc;
        }
    }

    pub fn to_dense(&self) -> super::dense::DenseMat {
        let mut out = super::dense::DenseMat::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            let (rows, vals) = self.col(j);
            for (&r, &v) in rows.iter().zip(vals) {
                out[(r, j)] = v;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicate_triplets_are_summed() {
        let a = SparseSym::from_triplets(2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, 3.0), (0, 0, 5.0)]);
        assert_eq!(a.get(0, 1), 3.0);
        assert_eq!(a.get(1, 0), 3.0);
        assert_eq!(a.get(0, 0), 5.0);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn exact_zeros_are_dropped() {
        let a = SparseSym::from_triplets(2, &[(0, 1, 1.0), (0, 1, -1.0), (1, 0, 1.0), (1, 0, -1.0)]);
        assert_eq!(a.nnz(), 0);
    }

    #[test]
    fn matvec_small() {
        let a = SparseSym::from_triplets(3, &[(0, 0, 2.0), (1, 1, 2.0), (2, 2, 2.0), (0, 2, 1.0), (2, 0, 1.0)]);
        let mut y = vec![0.0; 3];
        a.mul_vec(&[1.0, 2.0, 3.0], &mut y);
        assert_eq!(y, vec![5.0, 4.0, 7.0]);
    }

    #[test]
    fn rect_transpose_matvec() {
        // [[1, 0], [2, 3], [0, 4]]
        let r = SparseRect::from_columns(3, vec![vec![(0, 1.0), (1, 2.0)], vec![(1, 3.0), (2, 4.0)]]);
        let mut y = vec![0.0; 3];
        r.mul_vec(&[1.0, 1.0], &mut y);
        assert_eq!(y, vec![1.0, 5.0, 4.0]);
        let mut z = vec![0.0; 2];
        r.tr_mul_vec(&[1.0, 1.0, 1.0], &mut z);
        assert_eq!(z, vec![3.0, 7.0]);
    }

    proptest! {
        // Symmetrically emitted triplets must always yield a structurally
        // symmetric pattern, whatever the duplication/cancellation structure.
        #[test]
        fn assembly_pattern_is_symmetric(entries in prop::collection::vec((0usize..12, 0usize..12, -3i32..=3), 0..60)) {
            let mut trips = Vec::new();
            for (i, j, v) in entries {
                let v = v as f64;
                trips.push((i, j, v));
                if i != j {
                    trips.push((j, i, v));
                }
            }
            let a = SparseSym::from_triplets(12, &trips);
            prop_assert!(a.pattern_is_symmetric());
            prop_assert_eq!(a.max_value_asymmetry(), 0.0);
        }
    }
}
