//! Chunked replica execution.
//!
//! Work is always split into the same chunks, and chunk `i` always draws
//! from `stream(seed, i)`, so the sequential and rayon paths return
//! identical results in identical order.

use serde::{Deserialize, Serialize};

use crate::{stream, Rng};

/// How replicated work is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    /// Rayon pool; identical to `Sequential` without the `parallel` feature.
    #[default]
    Parallel,
}

/// Runs `job(chunk_index, rng)` for every chunk and collects results in chunk order.
pub fn map_chunks<T, F>(exec: Execution, seed: u64, n_chunks: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut Rng) -> T + Sync + Send,
{
    let run = |i: usize| {
        let mut rng = stream(seed, i as u64);
        job(i, &mut rng)
    };
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n_chunks).into_par_iter().map(run).collect()
        }
        _ => (0..n_chunks).map(run).collect(),
    }
}

/// Splits `n` items into `n_chunks` nearly equal counts (earlier chunks take the remainder).
pub fn chunk_sizes(n: usize, n_chunks: usize) -> Vec<usize> {
    let n_chunks = n_chunks.max(1);
    let base = n / n_chunks;
    let extra = n % n_chunks;
    (0..n_chunks).map(|i| base + usize::from(i < extra)).collect()
}
