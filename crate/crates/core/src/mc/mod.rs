//! Monte Carlo plumbing: streaming moments, delta-method estimators, the
//! replicate driver and reference distributions.

mod accumulator;
mod driver;
mod stats;

pub use accumulator::{z_score, Estimate, McAccumulator, Paired};
pub use driver::{map_replicates, run_blocks, BLOCK_SIZE, THREADS_ENV};
pub use stats::{
    arcsine_cdf, empirical_covariance, ks_critical_1pct, ks_statistic, standard_normal_cdf,
    KS_CRITICAL_1PCT,
};
