//! Bounded worker pool for independent replicates. Replicate `r` always
//! draws from `rng.stream(r)`, and results are merged in replicate order, so
//! the merged output does not depend on the worker count.

use rayon::prelude::*;

use crate::error::{CliError, CliResult};

/// Environment variable that overrides `--workers`.
pub const WORKERS_ENV: &str = "CMJ_WORKERS";

pub fn resolve_workers(flag: Option<usize>) -> CliResult<usize> {
    let env = match std::env::var(WORKERS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|e| CliError::Config(format!("{WORKERS_ENV}='{v}': {e}")))?,
        ),
        Err(_) => None,
    };
    let n = env.or(flag).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if n == 0 {
        return Err(CliError::Config("worker count must be at least 1".into()));
    }
    Ok(n)
}

/// Runs `f(0..reps)` on `workers` threads. The first error in replicate
/// order wins.
pub fn replicates<T, F>(reps: u64, workers: usize, f: F) -> CliResult<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> CliResult<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Inconsistency(format!("worker pool: {e}")))?;
    let results: Vec<CliResult<T>> = pool.install(|| (0..reps).into_par_iter().map(&f).collect());
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use cmj_core::CounterRng;

    #[test]
    fn order_is_worker_independent() {
        let rng = CounterRng::new(9);
        let f = |r: u64| Ok(rng.stream(r).uniform(0, 0));
        let one = replicates(500, 1, f).unwrap();
        let eight = replicates(500, 8, f).unwrap();
        assert_eq!(one, eight);
    }

    #[test]
    fn first_error_in_order() {
        let f = |r: u64| if r % 7 == 3 { Err(CliError::Range(format!("{r}"))) } else { Ok(r) };
        let e = replicates(100, 4, f).unwrap_err();
        assert_eq!(e.to_string(), "range error: 3");
    }

    #[test]
    fn env_overrides_flag() {
        // Other tests may read the variable concurrently; any valid count
        // leaves their merged output unchanged.
        std::env::set_var(WORKERS_ENV, "3");
        let got = resolve_workers(Some(8));
        std::env::remove_var(WORKERS_ENV);
        assert_eq!(got.unwrap(), 3);
        assert!(resolve_workers(Some(0)).is_err());
    }
}
