//! Experiment configs, Monte Carlo checks, reports and the acceptance battery.

pub mod config;
pub mod mc;
pub mod report;
pub mod run;
pub mod suite;

use rayon::prelude::*;

use crate::error::Result;
use crate::rng::RngStream;

pub use config::{ExperimentConfig, GraphSource};
pub use mc::{Functional, McSettings};
pub use report::{Rule, StatReport};
pub use run::{execute, run, run_file, RunOutput};
pub use suite::{run_suite, CriterionOutcome, SuiteSettings};

/// Runs `f` once per replica on a worker pool. Replica `i` draws from stream
/// `child(i)` of `(seed, 0)`, so results do not depend on scheduling.
pub fn replicate<T, F>(samples: u64, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut RngStream) -> Result<T> + Sync,
{
    let root = RngStream::new(seed, 0);
    (0..samples)
        .into_par_iter()
        .map(|i| f(&mut root.child(i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replicate_is_ordered_and_reproducible() {
        let a = replicate(200, 11, |rng| Ok(rng.uniform())).unwrap();
        let b = replicate(200, 11, |rng| Ok(rng.uniform())).unwrap();
        assert_eq!(a, b);
        let c = replicate(200, 12, |rng| Ok(rng.uniform())).unwrap();
        assert_ne!(a, c);
    }
}
