//! Fixtures shared by the benchmarks.

use graphcollide::graph::{self, GraphSpec};
use graphcollide::PartitionVector;

/// Graphs of increasing size used across benchmarks.
pub fn fixture_graphs() -> Vec<GraphSpec> {
    ["C4", "P5", "K3,2", "C6", "Petersen"]
        .iter()
        .map(|name| graph::resolve(name).expect("built-in graph"))
        .collect()
}

/// `n` particles on the first vertex.
pub fn stacked(r: usize, n: u32) -> PartitionVector {
    let mut counts = vec![0; r];
    counts[0] = n;
    PartitionVector::new(counts)
}
