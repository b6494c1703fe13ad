//! Monte Carlo ensembles over a fixed graph.
//!
//! Seeding: the seed nodes come from the stream `(master, SEED_NODES)`;
//! run `k` uses seed node `k mod n_seed_nodes` and the stream
//! `(master, RUN, k)`. Runs are executed on the ambient rayon pool and
//! reduced in run-index order, so results do not depend on thread count.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::epidemic::{run_with, Epidemic, EpidemicParams, RunRecord};
use crate::error::{invalid, Error, Result};
use crate::graph::{Graph, NodeId};
use crate::seed::{derive_seed, rng_from_seed, tag};

/// Final fraction above which a run counts as an outbreak.
pub const OUTBREAK_CUTOFF: f64 = 0.01;

/// Cross-run aggregates of one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    /// Mean `I(t)/N`; finished runs contribute zeros.
    pub mean_i_curve: Vec<f64>,
    /// Mean `R(t)/N`; finished runs hold their final value.
    pub mean_r_curve: Vec<f64>,
    /// Mean final fraction over all runs.
    pub prevalence_mean: f64,
    /// Mean final fraction over runs above [`OUTBREAK_CUTOFF`]; equals
    /// `prevalence_mean` when no run qualifies.
    pub prevalence_conditional: f64,
    /// Standard error of `prevalence_mean`.
    pub std_error: f64,
    /// `(<s^2> - <s>^2) / <s>` over final sizes `s` counted in nodes.
    pub susceptibility: f64,
    pub outbreak_count: usize,
    pub run_count: usize,
    pub node_count: usize,
}

impl EnsembleStats {
    /// Aggregates records in the order given.
    pub fn from_records(records: &[RunRecord], node_count: usize) -> Self {
        assert!(!records.is_empty(), "cannot aggregate an empty ensemble");
        let n = node_count as f64;
        let runs = records.len() as f64;
        let len = records.iter().map(|r| r.series_i.len()).max().unwrap();

        let mut sum_i = vec![0u64; len];
        let mut sum_r = vec![0u64; len];
        for rec in records {
            for (t, &i) in rec.series_i.iter().enumerate() {
                sum_i[t] += i as u64;
            }
            for (t, slot) in sum_r.iter_mut().enumerate() {
                let r = rec.series_r.get(t).copied().unwrap_or(rec.final_recovered);
                *slot += r as u64;
            }
        }
        let mean_i_curve = sum_i.iter().map(|&s| s as f64 / runs / n).collect();
        let mean_r_curve = sum_r.iter().map(|&s| s as f64 / runs / n).collect();

        let mut sum_s = 0.0;
        let mut sum_s2 = 0.0;
        let mut sum_out = 0.0;
        let mut outbreak_count = 0;
        for rec in records {
            let s = rec.final_recovered as f64;
            sum_s += s;
            sum_s2 += s * s;
            if s / n > OUTBREAK_CUTOFF {
                sum_out += s / n;
                outbreak_count += 1;
            }
        }
        let mean_s = sum_s / runs;
        let var_s = (sum_s2 / runs - mean_s * mean_s).max(0.0);
        let prevalence_mean = mean_s / n;
        let prevalence_conditional = if outbreak_count > 0 {
            sum_out / outbreak_count as f64
        } else {
            prevalence_mean
        };
        let std_error = if records.len() > 1 {
            (var_s * runs / (runs - 1.0)).sqrt() / n / runs.sqrt()
        } else {
            0.0
        };
        Self {
            mean_i_curve,
            mean_r_curve,
            prevalence_mean,
            prevalence_conditional,
            std_error,
            susceptibility: var_s / mean_s,
            outbreak_count,
            run_count: records.len(),
            node_count,
        }
    }
}

/// How to populate one ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSettings {
    pub runs: usize,
    pub seed_nodes: usize,
    pub master_seed: u64,
}

impl EnsembleSettings {
    pub fn new(runs: usize, seed_nodes: usize, master_seed: u64) -> Self {
        Self {
            runs,
            seed_nodes,
            master_seed,
        }
    }
}

/// Distinct seed nodes drawn from the master seed's seed-node stream.
pub fn choose_seed_nodes(node_count: usize, count: usize, master_seed: u64) -> Result<Vec<NodeId>> {
    if count == 0 {
        return Err(invalid("seed_nodes", "must be at least 1"));
    }
    if count > node_count {
        return Err(Error::TooManySeedNodes {
            requested: count,
            available: node_count,
        });
    }
    let mut rng = rng_from_seed(derive_seed(master_seed, &[tag::SEED_NODES]));
    Ok(index::sample(&mut rng, node_count, count)
        .into_iter()
        .map(|v| v as NodeId)
        .collect())
}

/// Stream seed of run `run_index`.
pub fn run_seed(master_seed: u64, run_index: u64) -> u64 {
    derive_seed(master_seed, &[tag::RUN, run_index])
}

/// Executes every run of the ensemble and returns the records in run order.
pub fn ensemble_records(
    g: &Graph,
    p: &EpidemicParams,
    settings: &EnsembleSettings,
) -> Result<Vec<RunRecord>> {
    if settings.runs == 0 {
        return Err(invalid("runs", "must be at least 1"));
    }
    let seeds = choose_seed_nodes(g.node_count(), settings.seed_nodes, settings.master_seed)?;
    let records = (0..settings.runs)
        .into_par_iter()
        .map_init(
            || Epidemic::new(g, *p),
            |sim, k| {
                let seed_node = seeds[k % seeds.len()];
                let rng_seed = run_seed(settings.master_seed, k as u64);
                run_with(sim, seed_node, rng_seed, &mut rng_from_seed(rng_seed))
            },
        )
        .collect();
    Ok(records)
}

/// Runs an ensemble and aggregates it.
pub fn ensemble(
    g: &Graph,
    p: &EpidemicParams,
    n_runs: usize,
    n_seed_nodes: usize,
    master_seed: u64,
) -> Result<EnsembleStats> {
    let settings = EnsembleSettings::new(n_runs, n_seed_nodes, master_seed);
    run_ensemble(g, p, &settings)
}

pub fn run_ensemble(g: &Graph, p: &EpidemicParams, settings: &EnsembleSettings) -> Result<EnsembleStats> {
    let records = ensemble_records(g, p, settings)?;
    Ok(EnsembleStats::from_records(&records, g.node_count()))
}
