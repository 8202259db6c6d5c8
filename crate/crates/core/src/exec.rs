//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper produces results indexed by position, so the output never
//! depends on how work was scheduled. Without the `parallel` feature the
//! `Parallel` mode silently runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(i)` for `i in 0..len` and returns the results in index order.
pub fn map_indexed<T, F>(exec: Execution, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// Calls `f(i, &mut slice[i])` for every element.
pub fn for_each_indexed<T, F>(exec: Execution, slice: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        slice
            .par_iter_mut()
            .with_min_len(256)
            .enumerate()
            .for_each(|(i, v)| f(i, v));
        return;
    }
    let _ = exec;
    slice.iter_mut().enumerate().for_each(|(i, v)| f(i, v));
}
