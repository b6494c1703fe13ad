//! Expansion of a spec into graphs and cells, with hierarchical seeds.
//!
//! `master_seed -> graph seed (N, replica) -> cell seed (topology, mac,
//! lambda) -> run seed (run index)`, each step through
//! [`wormsim_core::seed::derive_seed`]. Any cell can be recomputed alone.

use serde::{Deserialize, Serialize};
use wormsim_core::seed::{derive_seed, tag};

use crate::spec::{mac_label, ExperimentSpec, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphKey {
    pub node_count: usize,
    pub replica: usize,
}

impl GraphKey {
    pub fn file_stem(&self) -> String {
        format!("N{}_r{}", self.node_count, self.replica)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphTask {
    pub key: GraphKey,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub graph: GraphKey,
    pub topology: Topology,
    pub mac: bool,
    pub lambda: f64,
    pub seed: u64,
}

impl Cell {
    /// Stable file name; lambda is keyed by its bit pattern.
    pub fn file_stem(&self) -> String {
        format!(
            "{}_{}_mac-{}_l{:016x}",
            self.graph.file_stem(),
            self.topology.label(),
            mac_label(self.mac),
            self.lambda.to_bits()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub graphs: Vec<GraphTask>,
    pub cells: Vec<Cell>,
}

pub fn graph_seed(master_seed: u64, key: GraphKey) -> u64 {
    derive_seed(
        master_seed,
        &[tag::GRAPH, key.node_count as u64, key.replica as u64],
    )
}

pub fn cell_seed(graph_seed: u64, topology: Topology, mac: bool, lambda: f64) -> u64 {
    derive_seed(
        graph_seed,
        &[tag::CELL, topology as u64, mac as u64, lambda.to_bits()],
    )
}

pub fn build_plan(spec: &ExperimentSpec) -> Plan {
    let mut graphs = Vec::new();
    let mut cells = Vec::new();
    let mut counts = spec.node_counts.clone();
    counts.sort_unstable();
    counts.dedup();
    for &n in &counts {
        for replica in 0..spec.graph_replicas {
            let key = GraphKey {
                node_count: n,
                replica,
            };
            let seed = graph_seed(spec.master_seed, key);
            graphs.push(GraphTask { key, seed });
            for mac in spec.mac.arms(spec.topology) {
                for lambda in spec.sorted_lambdas() {
                    cells.push(Cell {
                        graph: key,
                        topology: spec.topology,
                        mac,
                        lambda,
                        seed: cell_seed(seed, spec.topology, mac, lambda),
                    });
                }
            }
        }
    }
    Plan { graphs, cells }
}
