//! Benchmark inputs shared by the criterion targets.

use nisym::simulate::{replication_rng, sample_table, scenario2};
use nisym::{resolve_scenario, ObservedTable};

/// Deterministic tables drawn from the scenario 2 alternative at `p* = 0.6`.
pub fn sample_tables(n: u64, count: u32) -> Vec<ObservedTable> {
    let probs = resolve_scenario(&scenario2(n, 0.60, 1, 0))
        .expect("published scenario is feasible")
        .probabilities;
    (0..count)
        .map(|i| sample_table(&probs, n, &mut replication_rng(11, 0, i)))
        .collect()
}
