//! Classical scaling: the exact dense path, the thin-QR path over a factored
//! approximation, and the matrix-free Lanczos path, plus the stress and
//! relative-error metrics.
//!
//! All three paths eigendecompose (a restriction of) `B = −½ J E J`, where
//! `E` holds squared distances and `J = I − (1/n)·1·1ᵀ` centers. The
//! embedding is `Z = V_m Λ_m^{1/2}`; embeddings are unique only up to an
//! orthogonal transform, so tests compare pairwise distances, never raw
//! coordinates.

use crate::approx::{evaluate_rows, BhaApprox, LowRankKernel};
use crate::exec::{self, ExecMode};
use crate::numerics::{dense_eig_sym, lanczos_topk, thin_qr, DenseMat};
use crate::Result;

/// Which pipeline produced an embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdsMethod {
    Exact,
    QrPath,
    LanczosPath,
}

/// An m-dimensional classical-scaling embedding.
#[derive(Debug, Clone)]
pub struct Embedding {
    /// n×m coordinates, columns mean-centered.
    pub coords: DenseMat,
    /// Top-m eigenvalues of −½JEJ (descending). Negative entries are
    /// reported as-is; their coordinate columns are zeroed.
    pub eigenvalues: Vec<f64>,
    /// Positions (into `eigenvalues`) whose columns were zeroed because the
    /// eigenvalue was negative.
    pub zeroed_negative: Vec<usize>,
    pub method: MdsMethod,
}

impl Embedding {
    fn from_eigenpairs(
        basis: &DenseMat,
        eigenvalues: Vec<f64>,
        method: MdsMethod,
    ) -> Embedding {
        let n = basis.nrows();
        let m = eigenvalues.len();
        let mut coords = DenseMat::zeros(n, m);
        let mut zeroed = Vec::new();
        for (j, &lambda) in eigenvalues.iter().enumerate() {
            if lambda > 0.0 {
                let scale = lambda.sqrt();
                let src = basis.col(j);
                let dst = coords.col_mut(j);
                for i in 0..n {
                    dst[i] = src[i] * scale;
                }
            } else {
                zeroed.push(j);
            }
        }
        Embedding { coords, eigenvalues, zeroed_negative: zeroed, method }
    }

    pub fn n_points(&self) -> usize {
        self.coords.nrows()
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    /// Pairwise Euclidean distance matrix of the embedded points.
    pub fn pairwise_distances(&self) -> DenseMat {
        let n = self.n_points();
        let m = self.dim();
        DenseMat::from_fn(n, n, |i, j| {
            let mut acc = 0.0;
            for c in 0..m {
                let d = self.coords[(i, c)] - self.coords[(j, c)];
                acc += d * d;
            }
            acc.sqrt()
        })
    }
}

/// Centers a squared-distance matrix into `B[i][j] = −½(E_ij − μ_i − μ_j + μ)`.
/// The expression is evaluated symmetrically, so a bit-symmetric `E` yields a
/// bit-symmetric `B`.
fn double_center(e: &DenseMat) -> DenseMat {
    let n = e.nrows();
    let row_means: Vec<f64> = (0..n).map(|i| e.row_copy(i).iter().sum::<f64>() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    DenseMat::from_fn(n, n, |i, j| -0.5 * ((e[(i, j)] + grand) - (row_means[i] + row_means[j])))
}

/// Exact classical scaling of a dense squared-distance matrix.
pub fn mds_exact(e: &DenseMat, m: usize) -> Result<Embedding> {
    let n = e.nrows();
    assert_eq!(n, e.ncols(), "squared-distance matrix must be square");
    assert!(m >= 1 && m <= n);
    let b = double_center(e);
    let (vals, vecs) = dense_eig_sym(&b)?;
    let basis = DenseMat::from_fn(n, m, |i, j| vecs[(i, j)]);
    Ok(Embedding::from_eigenpairs(&basis, vals[..m].to_vec(), MdsMethod::Exact))
}

/// QR-path classical scaling over a factored approximation of the squared
/// distances: QR = JP, eigendecompose −½ R W Rᵀ, then Z = Q Ṽ_m Λ_m^{1/2}.
/// Memory is O(n·l) for the centered operator and Q.
pub fn bmds(approx: &BhaApprox, m: usize) -> Result<Embedding> {
    assert!(approx.squared(), "classical scaling needs squared distances in W");
    let p = approx.operator();
    let n = p.n_vertices();
    let l = p.n_landmarks();
    assert!(m >= 1 && m <= l, "embedding dimension m = {m} exceeds l = {l}");

    // JP, built column by column without materializing J.
    let mut jp = DenseMat::zeros(n, l);
    let mut unit = vec![0.0; l];
    for t in 0..l {
        unit.fill(0.0);
        unit[t] = 1.0;
        let col = p.apply(&unit);
        let mean = col.iter().sum::<f64>() / n as f64;
        let dst = jp.col_mut(t);
        for i in 0..n {
            dst[i] = col[i] - mean;
        }
    }

    let (q, r) = thin_qr(&jp);
    let rw = r.matmul(approx.w());
    let rwrt = rw.matmul(&r.transpose());
    let small = DenseMat::from_fn(l, l, |i, j| -0.25 * (rwrt[(i, j)] + rwrt[(j, i)]));
    let (vals, vecs) = dense_eig_sym(&small)?;
    let v_m = DenseMat::from_fn(l, m, |i, j| vecs[(i, j)]);
    let basis = q.matmul(&v_m);
    Ok(Embedding::from_eigenpairs(&basis, vals[..m].to_vec(), MdsMethod::QrPath))
}

/// Convergence knobs for the Lanczos MDS path.
#[derive(Debug, Clone, Copy)]
pub struct SbmdsConfig {
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for SbmdsConfig {
    fn default() -> Self {
        SbmdsConfig { tol: 1e-10, max_restarts: 200, seed: 0 }
    }
}

/// Lanczos-path classical scaling: the operator v ↦ −½·J P W Pᵀ J v is
/// applied in five cheap stages (center, Pᵀ, W, P, center+scale), so peak
/// extra memory beyond the factorization is the Lanczos basis itself.
pub fn sbmds(approx: &BhaApprox, m: usize, cfg: &SbmdsConfig) -> Result<Embedding> {
    assert!(approx.squared(), "classical scaling needs squared distances in W");
    let p = approx.operator();
    let w = approx.w();
    let n = p.n_vertices();
    assert!(m >= 1 && m < n);

    let apply = |x: &[f64], y: &mut [f64]| {
        let mean_in = x.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = x.iter().map(|v| v - mean_in).collect();
        let pt = p.apply_transpose(&centered);
        let mut wpt = vec![0.0; pt.len()];
        w.mul_vec(&pt, &mut wpt);
        let full = p.apply(&wpt);
        let mean_out = full.iter().sum::<f64>() / n as f64;
        for (yi, &fi) in y.iter_mut().zip(&full) {
            *yi = -0.5 * (fi - mean_out);
        }
    };

    let (vals, vecs) = lanczos_topk(apply, n, m, cfg.tol, cfg.max_restarts, cfg.seed)?;
    Ok(Embedding::from_eigenpairs(&vecs, vals, MdsMethod::LanczosPath))
}

/// Sources of squared distances for [`stress`].
pub enum StressSource<'a> {
    /// Full dense squared-distance matrix.
    Dense(&'a DenseMat),
    /// The factored approximation itself (must carry squared distances).
    Approx(&'a BhaApprox),
    /// A row subset of a squared-distance matrix: the scaled estimator
    /// n/|rows| · Σ_{i∈rows} ‖row_i(ZZᵀ + ½JEJ)‖² with column means
    /// estimated from the same sample.
    SampledRows { indices: &'a [usize], rows: &'a [Vec<f64>], n: usize },
    /// A row subset served by the factored approximation (column means are
    /// exact, from the factorization).
    ApproxSampled { approx: &'a BhaApprox, indices: &'a [usize] },
}

/// Squared-Frobenius stress ‖ZZᵀ + ½JEJ‖_F² of an embedding against squared
/// distances, or its scaled row-sample estimate.
pub fn stress(coords: &DenseMat, source: StressSource<'_>, mode: ExecMode) -> f64 {
    match source {
        StressSource::Dense(e) => {
            let n = e.nrows();
            let all: Vec<usize> = (0..n).collect();
            let rows: Vec<Vec<f64>> = (0..n).map(|i| e.row_copy(i)).collect();
            stress_rows(coords, &all, |i, out| out.copy_from_slice(&rows[i]), n, None, mode)
        }
        StressSource::SampledRows { indices, rows, n } => {
            assert_eq!(indices.len(), rows.len());
            let lookup: std::collections::HashMap<usize, usize> =
                indices.iter().enumerate().map(|(k, &i)| (i, k)).collect();
            stress_rows(coords, indices, |i, out| out.copy_from_slice(&rows[lookup[&i]]), n, None, mode)
        }
        StressSource::Approx(approx) => {
            assert!(approx.squared());
            let n = approx.dim();
            let all: Vec<usize> = (0..n).collect();
            let col_means: Vec<f64> = approx.column_sums().iter().map(|s| s / n as f64).collect();
            stress_rows(
                coords,
                &all,
                |i, out| approx.evaluate_row(i, out),
                n,
                Some(&col_means),
                mode,
            )
        }
        StressSource::ApproxSampled { approx, indices } => {
            assert!(approx.squared());
            let n = approx.dim();
            let col_means: Vec<f64> = approx.column_sums().iter().map(|s| s / n as f64).collect();
            stress_rows(
                coords,
                indices,
                |i, out| approx.evaluate_row(i, out),
                n,
                Some(&col_means),
                mode,
            )
        }
    }
}

/// Shared stress kernel. `col_means`, when absent, is estimated from the
/// sampled rows (exact when all rows are sampled). Row contributions are
/// accumulated in index order for determinism.
fn stress_rows<F>(
    coords: &DenseMat,
    indices: &[usize],
    row_e: F,
    n: usize,
    col_means: Option<&[f64]>,
    mode: ExecMode,
) -> f64
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    assert_eq!(coords.nrows(), n);
    if indices.is_empty() {
        return 0.0;
    }
    let m = coords.ncols();

    let owned_means: Vec<f64>;
    let col_means = match col_means {
        Some(c) => c,
        None => {
            let mut sums = vec![0.0; n];
            let mut row = vec![0.0; n];
            for &i in indices {
                row_e(i, &mut row);
                for (s, &v) in sums.iter_mut().zip(&row) {
                    *s += v;
                }
            }
            owned_means = sums.iter().map(|s| s / indices.len() as f64).collect();
            &owned_means
        }
    };
    let grand = col_means.iter().sum::<f64>() / n as f64;

    let partials = exec::map_indexed(mode, indices.len(), |k| {
        let i = indices[k];
        let mut row = vec![0.0; n];
        row_e(i, &mut row);
        let row_mean = row.iter().sum::<f64>() / n as f64;
        // w = Z·zᵢ gives the i-th row of ZZᵀ.
        let zi: Vec<f64> = (0..m).map(|c| coords[(i, c)]).collect();
        let mut acc = 0.0;
        for j in 0..n {
            let mut zz = 0.0;
            for c in 0..m {
                zz += coords[(j, c)] * zi[c];
            }
            let centered = (row[j] + grand) - (row_mean + col_means[j]);
            let term = zz + 0.5 * centered;
            acc += term * term;
        }
        acc
    });
    let total: f64 = partials.iter().sum();
    total * n as f64 / indices.len() as f64
}

/// Relative approximation error ε = Σ‖K̂_i − K_i‖² / Σ‖K_i‖² over the given
/// reference rows (exact when all rows are given). Row contributions are
/// accumulated in index order.
pub fn relative_error<K: LowRankKernel>(
    approx: &K,
    reference_rows: &[Vec<f64>],
    indices: &[usize],
    mode: ExecMode,
) -> f64 {
    assert_eq!(reference_rows.len(), indices.len());
    let approx_rows = evaluate_rows(approx, indices, mode);
    let mut num = 0.0;
    let mut den = 0.0;
    for (got, reference) in approx_rows.iter().zip(reference_rows) {
        for (&g, &r) in got.iter().zip(reference) {
            let d = g - r;
            num += d * d;
            den += r * r;
        }
    }
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}
