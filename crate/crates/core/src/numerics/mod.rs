//! Numeric kernels shared by the rest of the crate: compressed sparse
//! storage, SPD solves, a matrix-free Lanczos eigensolver and small dense
//! factorizations.

mod dense;
mod lanczos;
mod solve;
mod sparse;

pub use dense::{dense_eig_sym, lu_solve, pseudo_inverse, thin_qr, DenseMat, SYMMETRY_TOL};
pub use lanczos::lanczos_topk;
pub use solve::{solve_spd, Rhs, SolveConfig, SolveMethod};
pub use sparse::{SparseRect, SparseSym};
