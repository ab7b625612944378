//! Block-parallel replicate driver with a fixed reduction order.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Replicates per block. Blocks are the unit of parallel work and are always
/// merged in index order, so results do not depend on scheduling.
pub const BLOCK_SIZE: u64 = 1024;

/// Environment variable limiting the worker count.
pub const THREADS_ENV: &str = "ARGMAXLAB_THREADS";

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or(0);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .thread_name(|i| format!("argmaxlab-{i}"))
            .build()
            .expect("thread pool")
    })
}

/// Runs `step` for replicates `0..n`, folding each block of [`BLOCK_SIZE`]
/// replicates into a fresh state from `init`, then merges the block states
/// left to right.
pub fn run_blocks<S, I, F, M>(n: u64, init: I, step: F, merge: M) -> Result<S>
where
    S: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, u64) -> Result<()> + Sync,
    M: Fn(&mut S, S),
{
    if n == 0 {
        return Err(Error::config("replicate count must be positive"));
    }
    let blocks = n.div_ceil(BLOCK_SIZE);
    let states: Vec<Result<S>> = pool().install(|| {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut state = init();
                let end = ((b + 1) * BLOCK_SIZE).min(n);
                for r in b * BLOCK_SIZE..end {
                    step(&mut state, r)?;
                }
                Ok(state)
            })
            .collect()
    });
    let mut iter = states.into_iter();
    let mut total = iter.next().expect("at least one block")?;
    for s in iter {
        merge(&mut total, s?);
    }
    Ok(total)
}

/// Maps every replicate index to a value, in parallel, preserving order.
pub fn map_replicates<T, F>(n: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    run_blocks(
        n,
        Vec::new,
        |v: &mut Vec<T>, r| {
            v.push(f(r)?);
            Ok(())
        },
        |a, mut b| a.append(&mut b),
    )
}
