//! Column-major dense matrices plus the small dense factorizations the
//! pipeline needs (symmetric eigendecomposition, thin QR, SVD pseudoinverse,
//! LU solve). The factorizations are delegated to faer; the types stay ours.

use crate::{Error, Result};
use faer::linalg::solvers::{PartialPivLu, Qr, SelfAdjointEigen, Solve, Svd};
use faer::Side;

/// Dense column-major matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMat {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, data: vec![0.0; nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds from a row-major slice (convenient for literals in tests).
    pub fn from_row_major(nrows: usize, ncols: usize, rows: &[f64]) -> Self {
        assert_eq!(rows.len(), nrows * ncols);
        Self::from_fn(nrows, ncols, |i, j| rows[i * ncols + j])
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row_copy(&self, i: usize) -> Vec<f64> {
        (0..self.ncols).map(|j| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> DenseMat {
        DenseMat::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// self * other, naive triple loop; fine at the l×l and n×l scales used here.
    pub fn matmul(&self, other: &DenseMat) -> DenseMat {
        assert_eq!(self.ncols, other.nrows, "matmul shape mismatch");
        let mut out = DenseMat::zeros(self.nrows, other.ncols);
        for j in 0..other.ncols {
            let oc = other.col(j);
            let out_col = out.col_mut(j);
            for (k, &okj) in oc.iter().enumerate() {
                if okj == 0.0 {
                    continue;
                }
                let sc = self.col(k);
                for i in 0..sc.len() {
                    out_col[i] += sc[i] * okj;
                }
            }
        }
        out
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        y.fill(0.0);
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for (i, &v) in self.col(j).iter().enumerate() {
                y[i] += v * xj;
            }
        }
    }

    /// y = Aᵀ x
    pub fn tr_mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for j in 0..self.ncols {
            let col = self.col(j);
            let mut acc = 0.0;
            for (i, &v) in col.iter().enumerate() {
                acc += v * x[i];
            }
            y[j] = acc;
        }
    }

    pub fn sub(&self, other: &DenseMat) -> DenseMat {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }

    pub(crate) fn to_faer(&self) -> faer::Mat<f64> {
        faer::Mat::from_fn(self.nrows, self.ncols, |i, j| self[(i, j)])
    }

    pub(crate) fn from_faer(m: faer::MatRef<'_, f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl std::ops::Index<(usize, usize)> for DenseMat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &self.data[j * self.nrows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &mut self.data[j * self.nrows + i]
    }
}

/// Relative symmetry tolerance for [`dense_eig_sym`].
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending,
/// eigenvectors as the matching columns.
pub fn dense_eig_sym(s: &DenseMat) -> Result<(Vec<f64>, DenseMat)> {
    if s.nrows() != s.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let mut deviation = 0.0f64;
    for j in 0..s.ncols() {
        for i in (j + 1)..s.nrows() {
            deviation = deviation.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    let tol = SYMMETRY_TOL * s.frobenius_norm();
    if deviation > tol {
        return Err(Error::NonSymmetric { deviation, tol });
    }

    let eig = SelfAdjointEigen::new(s.to_faer().as_ref(), Side::Lower)
        .map_err(|e| Error::SingularOperator(format!("symmetric eigendecomposition failed: {e:?}")))?;
    let n = s.nrows();
    // faer returns eigenvalues in ascending order.
    let mut values: Vec<f64> = (0..n).map(|i| eig.S()[i]).collect();
    let mut vectors = DenseMat::zeros(n, n);
    for j in 0..n {
        let src = n - 1 - j;
        for i in 0..n {
            vectors[(i, j)] = eig.U()[(i, src)];
        }
    }
    values.reverse();
    Ok((values, vectors))
}

/// Thin QR factorization of an n×l matrix with n ≥ l: Q is n×l with
/// orthonormal columns, R is l×l upper triangular. Rank deficiency is
/// permitted; R may carry zero diagonal entries.
pub fn thin_qr(a: &DenseMat) -> (DenseMat, DenseMat) {
    assert!(a.nrows() >= a.ncols(), "thin QR expects nrows >= ncols");
    let qr = Qr::new(a.to_faer().as_ref());
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    (DenseMat::from_faer(q.as_ref()), DenseMat::from_faer(r))
}

/// Moore-Penrose pseudoinverse through an SVD with relative singular-value
/// cutoff `rcond`; also reports the conditioning σ_min/σ_max of the input
/// (0 when the matrix is all zero).
pub fn pseudo_inverse(a: &DenseMat, rcond: f64) -> Result<(DenseMat, f64)> {
    let svd = Svd::new(a.to_faer().as_ref())
        .map_err(|e| Error::SingularOperator(format!("SVD failed: {e:?}")))?;
    let k = a.nrows().min(a.ncols());
    let smax = if k > 0 { svd.S()[0] } else { 0.0 };
    let smin = if k > 0 { svd.S()[k - 1] } else { 0.0 };
    let cutoff = rcond * smax;

    // pinv = V Σ⁺ Uᵀ
    let mut out = DenseMat::zeros(a.ncols(), a.nrows());
    for t in 0..k {
        let s = svd.S()[t];
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let inv = 1.0 / s;
        for j in 0..a.nrows() {
            let u_jt = svd.U()[(j, t)];
            if u_jt == 0.0 {
                continue;
            }
            let w = inv * u_jt;
            for i in 0..a.ncols() {
                out[(i, j)] += svd.V()[(i, t)] * w;
            }
        }
    }
    let conditioning = if smax > 0.0 { smin / smax } else { 0.0 };
    Ok((out, conditioning))
}

/// Solves the square (possibly nonsymmetric) system A X = B with partially
/// pivoted LU.
pub fn lu_solve(a: &DenseMat, b: &DenseMat) -> Result<DenseMat> {
    assert_eq!(a.nrows(), a.ncols());
    assert_eq!(a.nrows(), b.nrows());
    let lu = PartialPivLu::new(a.to_faer().as_ref());
    let x = lu.solve(b.to_faer().as_ref());
    let out = DenseMat::from_faer(x.as_ref());
    if !out.all_finite() {
        return Err(Error::SingularOperator("LU solve produced non-finite values".into()));
    }
    // Reject solves that silently lost the right-hand side to a (near-)singular
    // pivot: check the residual against a roundoff-scale bound.
    let residual = a.matmul(&out).sub(b).frobenius_norm();
    let scale = a.frobenius_norm() * out.frobenius_norm() + b.frobenius_norm();
    if residual > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::SingularOperator(format!(
            "LU solve residual {residual:.3e} too large (scale {scale:.3e})"
        )));
    }
    Ok(out)
}
