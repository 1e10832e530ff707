//! Schedule-independent replica seeding.
//!
//! Every replica draws from its own ChaCha8 stream whose 256-bit seed is the
//! SHA-256 digest of `(label, base seed, replica index)`. Results therefore do
//! not depend on how replicas are distributed over worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

pub fn sub_seed(base: u64, label: &str, index: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"lonelywalks/replica/v1");
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    h.update(base.to_le_bytes());
    h.update(index.to_le_bytes());
    h.finalize().into()
}

pub fn replica_rng(base: u64, label: &str, index: u64) -> SimRng {
    SimRng::from_seed(sub_seed(base, label, index))
}

/// Run `replicas` independent jobs in parallel; output order is replica order.
pub fn run_replicas<T, F>(base: u64, label: &str, replicas: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut SimRng) -> T + Sync,
{
    (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut rng = replica_rng(base, label, i as u64);
            job(i, &mut rng)
        })
        .collect()
}

/// Fallible variant of [`run_replicas`]; the first error in replica order wins.
pub fn try_run_replicas<T, E, F>(base: u64, label: &str, replicas: usize, job: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize, &mut SimRng) -> Result<T, E> + Sync,
{
    run_replicas(base, label, replicas, job).into_iter().collect()
}

/// Replicas reduced in fixed chunks of this size; chunk partials are merged
/// in index order, so floating-point sums do not depend on scheduling.
pub const REDUCE_CHUNK: usize = 64;

/// Parallel fold over replicas with a deterministic reduction order.
pub fn try_fold_replicas<A, E, I, F, M>(
    base: u64,
    label: &str,
    replicas: usize,
    init: I,
    job: F,
    merge: M,
) -> Result<A, E>
where
    A: Send,
    E: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, usize, &mut SimRng) -> Result<(), E> + Sync,
    M: Fn(&mut A, A),
{
    let chunks = replicas.div_ceil(REDUCE_CHUNK);
    let partials: Vec<Result<A, E>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for i in c * REDUCE_CHUNK..((c + 1) * REDUCE_CHUNK).min(replicas) {
                let mut rng = replica_rng(base, label, i as u64);
                job(&mut acc, i, &mut rng)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = init();
    for p in partials {
        merge(&mut total, p?);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = replica_rng(7, "x", 0).random();
        let b: u64 = replica_rng(7, "x", 1).random();
        let c: u64 = replica_rng(7, "y", 0).random();
        let a2: u64 = replica_rng(7, "x", 0).random();
        assert_eq!(a, a2);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn independent_of_thread_count() {
        let job = |_: usize, rng: &mut SimRng| rng.random::<u64>();
        let wide = run_replicas(3, "t", 64, job);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let narrow = pool.install(|| run_replicas(3, "t", 64, job));
        assert_eq!(wide, narrow);
    }

    #[test]
    fn fold_is_schedule_independent() {
        let run = || {
            try_fold_replicas::<_, (), _, _, _>(
                5,
                "f",
                1000,
                || 0.0f64,
                |acc, _, rng| {
                    *acc += rng.random::<f64>() * 1e-3;
                    Ok(())
                },
                |a, b| *a += b,
            )
            .unwrap()
        };
        let wide = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        assert_eq!(wide.to_bits(), pool.install(run).to_bits());
    }
}
