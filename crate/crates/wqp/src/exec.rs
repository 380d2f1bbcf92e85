//! Execution strategy for embarrassingly parallel sweeps.
//!
//! Heavy routines (property verification over many sample points, table
//! sweeps) accept an [`Exec`] value selecting between a sequential loop and
//! a rayon-backed data-parallel loop.  Results are collected by index, so
//! both strategies produce bitwise-identical output for deterministic
//! work items.  When the crate is built without the `parallel` feature the
//! parallel variant silently degrades to the sequential loop.

/// Strategy used to evaluate an indexed batch of independent work items.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    /// Evaluate items in index order on the current thread.
    Sequential,
    /// Fan items out across the rayon thread pool (needs the `parallel`
    /// feature; otherwise behaves exactly like [`Exec::Sequential`]).
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Maps `f` over `0..n`, collecting results in index order.
///
/// The closure must be deterministic in its index argument; under that
/// assumption the output is independent of the chosen strategy.
pub fn map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Exec::Sequential => (0..n).map(f).collect(),
        Exec::Parallel => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..n).map(f).collect()
            }
        }
    }
}

/// Fallible variant of [`map_indexed`]: evaluates every item, then returns
/// the first error in index order (independent of execution strategy).
pub fn try_map_indexed<T, F>(exec: Exec, n: usize, f: F) -> crate::error::Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> crate::error::Result<T> + Sync + Send,
{
    map_indexed(exec, n, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_preserves_order() {
        let seq = map_indexed(Exec::Sequential, 100, |i| i * i);
        let par = map_indexed(Exec::Parallel, 100, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq[7], 49);
    }

    #[test]
    fn try_map_returns_first_error_by_index() {
        let out = try_map_indexed(Exec::Parallel, 10, |i| {
            if i >= 4 {
                Err(crate::error::WqpError::InvalidParameter(format!("item {i}")))
            } else {
                Ok(i)
            }
        });
        match out {
            Err(crate::error::WqpError::InvalidParameter(msg)) => assert_eq!(msg, "item 4"),
            other => panic!("unexpected result: {other:?}"),
        }
    }
}
