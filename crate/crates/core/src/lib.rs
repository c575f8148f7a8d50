//! Approximates geodesic distance matrices of triangle meshes with a
//! low-rank, optionally sparse factorization `K ≈ P W Pᵀ`, and embeds the
//! result with classical multidimensional scaling without ever holding the
//! dense n×n matrix in memory.
//!
//! The pipeline:
//!
//! 1. assemble the discrete biharmonic operator of the mesh ([`laplacian`]),
//! 2. pick landmark vertices by farthest-point sampling and compute their
//!    exact distance rows ([`geodesic`], [`approx::select_landmarks`]),
//! 3. solve a sparse linear system for the interpolation operator `P`, and
//!    optionally threshold it column-wise ([`approx`]),
//! 4. embed with classical scaling, either through a thin QR of `JP` or a
//!    matrix-free Lanczos iteration ([`mds`]).
//!
//! Everything is deterministic for a fixed configuration: parallel code paths
//! only ever write disjoint, index-addressed outputs, so results do not
//! depend on thread count or scheduling.

pub mod approx;
pub mod error;
pub mod exec;
pub mod geodesic;
pub mod laplacian;
pub mod mds;
pub mod mesh;
pub mod numerics;

pub use error::Error;
pub use exec::ExecMode;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
