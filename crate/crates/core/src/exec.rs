//! Execution-mode plumbing for the data-parallel batch loops.
//!
//! Every parallel loop in this crate writes disjoint, index-addressed output
//! slots, so `Sequential` and `Parallel` produce bit-identical results; the
//! mode only changes wall time. With the `parallel` feature disabled,
//! `Parallel` silently degrades to the sequential loop.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How batch operations (distance rows, per-column solves, row evaluation)
/// schedule their work.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

/// Maps `f` over `0..len`, collecting results in index order.
pub(crate) fn map_indexed<T, F>(mode: ExecMode, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..len).map(f).collect(),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                (0..len).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..len).map(f).collect()
            }
        }
    }
}

/// Sizes the global thread pools. `threads == 0` keeps the default (all
/// available cores). Returns the effective degree of parallelism.
pub fn configure_threads(threads: usize) -> usize {
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            // Ignore the error: the global pool can only be built once per
            // process, which is fine for a CLI.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
            faer::set_global_parallelism(faer::Par::rayon(threads));
            threads
        } else {
            rayon::current_num_threads()
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_matches_between_modes() {
        let seq = map_indexed(ExecMode::Sequential, 100, |i| (i * i) as f64);
        let par = map_indexed(ExecMode::Parallel, 100, |i| (i * i) as f64);
        assert_eq!(seq, par);
    }

    #[test]
    fn default_mode_tracks_feature() {
        let expect = if cfg!(feature = "parallel") { ExecMode::Parallel } else { ExecMode::Sequential };
        assert_eq!(ExecMode::default(), expect);
    }
}
