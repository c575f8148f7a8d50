//! Matrix-free symmetric Lanczos eigensolver with full reorthogonalization
//! and thick restarts.
//!
//! The operator is only touched through matrix-vector products, so the peak
//! footprint is the stored basis (a few dozen vectors of length n). Full
//! reorthogonalization keeps the basis orthonormal to machine precision,
//! which is cheap at the basis sizes used here and avoids the spurious
//! eigenvalue copies of the plain three-term recurrence. When the basis fills
//! up before the wanted Ritz pairs converge, the iteration restarts thick:
//! the current best Ritz vectors are kept and the recurrence continues from
//! the last residual direction.

use super::dense::{dense_eig_sym, DenseMat};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Top-k algebraic eigenpairs of a symmetric operator given by `apply`.
///
/// Eigenvalues come back in descending order; eigenvectors are the matching
/// orthonormal columns. Convergence is declared when every wanted pair has
/// residual ‖Av − λv‖₂ ≤ tol·|λ_max|, and `max_iters` caps the number of
/// restart cycles.
pub fn lanczos_topk<F>(
    apply: F,
    n: usize,
    k: usize,
    tol: f64,
    max_iters: usize,
    seed: u64,
) -> Result<(Vec<f64>, DenseMat)>
where
    F: Fn(&[f64], &mut [f64]),
{
    assert!(k >= 1 && k < n, "need 1 <= k < n (k = {k}, n = {n})");
    let basis_cap = (2 * k + 20).clamp(k + 2, n);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Basis vectors, stored column-wise.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(basis_cap);
    // Projected operator T = Vᵀ A V, kept dense; tridiagonal plus the
    // arrowhead rows introduced by thick restarts.
    let mut t = DenseMat::zeros(basis_cap, basis_cap);
    let mut locked = 0; // leading Ritz vectors kept across the last restart
    let mut residual_coupling: Vec<f64> = Vec::new(); // β·s for locked columns

    let mut v = random_unit(&mut rng, n);
    let mut work = vec![0.0; n];

    for _restart in 0..max_iters.max(1) {
        // Grow the basis until it hits the cap.
        let mut dim = basis.len();
        debug_assert_eq!(dim, locked);
        basis.push(v.clone());
        dim += 1;

        while dim < basis_cap {
            apply(&basis[dim - 1], &mut work);
            // Coupling against locked Ritz vectors (arrowhead column).
            if dim == locked + 1 {
                for (j, &c) in residual_coupling.iter().enumerate() {
                    t[(j, dim - 1)] = c;
                    t[(dim - 1, j)] = c;
                }
            }
            let alpha = dot(&basis[dim - 1], &work);
            t[(dim - 1, dim - 1)] = alpha;

            // Full reorthogonalization, two passes.
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &work);
                    axpy(&mut work, -c, b);
                }
            }
            let mut beta = norm(&work);
            if beta <= f64::EPSILON * alpha.abs().max(1.0) {
                // Invariant subspace: restart the recurrence from a fresh
                // random direction orthogonal to the basis.
                let mut fresh = random_unit(&mut rng, n);
                for _ in 0..2 {
                    for b in &basis {
                        let c = dot(b, &fresh);
                        axpy(&mut fresh, -c, b);
                    }
                }
                let nrm = norm(&fresh);
                if nrm <= f64::EPSILON {
                    break; // the whole space is spanned
                }
                scale(&mut fresh, 1.0 / nrm);
                work.copy_from_slice(&fresh);
                beta = 0.0;
            } else {
                scale(&mut work, 1.0 / beta);
            }
            if dim < basis_cap {
                t[(dim, dim - 1)] = beta;
                t[(dim - 1, dim)] = beta;
                basis.push(work.clone());
                dim += 1;
            }
        }

        // The growth loop never applies the operator to the newest basis
        // vector; measure its full coupling column here. That both completes
        // T = Vᵀ A V and yields the residual direction for the restart.
        apply(&basis[dim - 1], &mut work);
        let mut last_coupling = vec![0.0; dim];
        for (i, b) in basis.iter().enumerate() {
            last_coupling[i] = dot(b, &work);
        }
        for (j, &c) in last_coupling.iter().enumerate() {
            t[(j, dim - 1)] = c;
            t[(dim - 1, j)] = c;
        }
        let mut resid_vec = work.clone();
        for (j, b) in basis.iter().enumerate() {
            axpy(&mut resid_vec, -last_coupling[j], b);
        }
        // Second orthogonalization pass against rounding.
        for b in &basis {
            let c = dot(b, &resid_vec);
            axpy(&mut resid_vec, -c, b);
        }
        let beta_out = norm(&resid_vec);

        // Ritz extraction from the projected operator.
        let t_active = DenseMat::from_fn(dim, dim, |i, j| t[(i, j)]);
        let (theta, s) = dense_eig_sym(&t_active)?;
        let lambda_max = theta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let threshold = tol * lambda_max.max(f64::MIN_POSITIVE);

        let converged = (0..k).all(|i| (beta_out * s[(dim - 1, i)]).abs() <= threshold);
        if converged || dim >= n {
            let mut values = theta[..k].to_vec();
            let mut vectors = DenseMat::zeros(n, k);
            for i in 0..k {
                let col = vectors.col_mut(i);
                for (j, b) in basis.iter().enumerate() {
                    let w = s[(j, i)];
                    if w != 0.0 {
                        for (c, bv) in col.iter_mut().zip(b) {
                            *c += w * bv;
                        }
                    }
                }
            }
            // Guard against reordering introduced by restarts.
            sort_pairs_desc(&mut values, &mut vectors);
            return Ok((values, vectors));
        }

        // Thick restart: keep the best `keep` Ritz vectors plus the residual
        // direction, rebuild T as diag(θ) with the coupling row.
        let keep = (k + 3).min(dim - 1);
        if beta_out <= f64::EPSILON * lambda_max.max(1.0) {
            // The subspace is invariant but unconverged pairs remain; restart
            // from scratch with a new random vector.
            basis.clear();
            t = DenseMat::zeros(basis_cap, basis_cap);
            locked = 0;
            residual_coupling = Vec::new();
            v = random_unit(&mut rng, n);
            continue;
        }
        scale(&mut resid_vec, 1.0 / beta_out);

        let mut new_basis: Vec<Vec<f64>> = Vec::with_capacity(basis_cap);
        for i in 0..keep {
            let mut col = vec![0.0; n];
            for (j, b) in basis.iter().enumerate() {
                let w = s[(j, i)];
                if w != 0.0 {
                    axpy(&mut col, w, b);
                }
            }
            new_basis.push(col);
        }
        residual_coupling = (0..keep).map(|i| beta_out * s[(dim - 1, i)]).collect();
        t = DenseMat::zeros(basis_cap, basis_cap);
        for (i, &th) in theta[..keep].iter().enumerate() {
            t[(i, i)] = th;
        }
        basis = new_basis;
        locked = keep;
        v = resid_vec;
    }

    Err(Error::NonConvergence {
        method: "Lanczos",
        iters: max_iters,
        residual: f64::NAN,
    })
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nrm = norm(&v);
    scale(&mut v, 1.0 / nrm);
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale(v: &mut [f64], s: f64) {
    for x in v.iter_mut() {
        *x *= s;
    }
}

fn sort_pairs_desc(values: &mut [f64], vectors: &mut DenseMat) {
    let k = values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        return;
    }
    let old_vals = values.to_vec();
    let old_vecs = vectors.clone();
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = old_vals[src];
        vectors.col_mut(dst).copy_from_slice(old_vecs.col(src));
    }
}
