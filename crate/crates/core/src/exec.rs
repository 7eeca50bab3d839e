//! Replicate fan-out.
//!
//! Results are collected by replicate index, and every replicate derives its
//! own RNG stream from its index, so the output is identical whether the work
//! runs serially or on a pool.

use rayon::prelude::*;

/// Maps `f` over replicate indices `0..replicates`.
///
/// `threads <= 1` runs on the calling thread; otherwise a pool of at most
/// `threads` workers is used.
pub fn map_replicates<T, F>(replicates: u64, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    let n = usize::try_from(replicates).expect("replicate count exceeds address space");
    if threads <= 1 {
        (0..n).map(|r| f(r as u64)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("failed to build worker pool");
        pool.install(|| (0..n).into_par_iter().map(|r| f(r as u64)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::derive_seed;

    #[test]
    fn parallel_matches_serial() {
        let job = |r: u64| derive_seed(99, r, "exec-test") % 1000;
        let serial = map_replicates(5000, 1, job);
        let parallel = map_replicates(5000, 4, job);
        assert_eq!(serial, parallel);
    }
}
