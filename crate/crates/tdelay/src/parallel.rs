//! Deterministic batch-parallel execution.
//!
//! Work is cut into batches of [`BATCH_SIZE`] draws. Batch `b` always consumes
//! stream `(seed, b)` and results are returned in batch order, so the output is
//! bit-identical for any worker count.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

pub const BATCH_SIZE: usize = 4096;

/// Runs `f(stream, count)` for every batch and returns the results in batch order.
pub fn run_batches<T, F>(seed: u64, total: usize, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(RngStream, usize) -> Result<T> + Sync,
{
    let batches = total.div_ceil(BATCH_SIZE);
    let job = || {
        (0..batches)
            .into_par_iter()
            .map(|b| {
                let count = BATCH_SIZE.min(total - b * BATCH_SIZE);
                f(RngStream::new(seed, b as u64), count)
            })
            .collect::<Result<Vec<T>>>()
    };
    match workers {
        None => job(),
        Some(0) => Err(invalid("workers", "must be at least 1")),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Invariant(format!("thread pool: {e}")))?
            .install(job),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draw(seed: u64, total: usize, workers: Option<usize>) -> Vec<u64> {
        run_batches(seed, total, workers, |s, n| {
            let mut r = s.rng();
            Ok((0..n).map(|_| r.random::<u64>()).collect::<Vec<_>>())
        })
        .unwrap()
        .concat()
    }

    #[test]
    fn output_is_independent_of_worker_count() {
        let a = draw(3, 3 * BATCH_SIZE + 17, Some(1));
        let b = draw(3, 3 * BATCH_SIZE + 17, Some(4));
        assert_eq!(a.len(), 3 * BATCH_SIZE + 17);
        assert_eq!(a, b);
        assert_ne!(a, draw(4, 3 * BATCH_SIZE + 17, Some(2)));
    }

    #[test]
    fn empty_run() {
        assert!(draw(1, 0, None).is_empty());
        assert!(run_batches(1, 5, Some(0), |_, _| Ok(())).is_err());
    }
}
