//! Execution of a plan: graph construction, cell ensembles and the
//! per-cell checkpoint files that make sweeps resumable.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use wormsim_core::seed::{derive_seed, rng_from_seed, tag};
use wormsim_core::{
    build_er_matched, compute_metrics, generate_rgg, run_ensemble, EnsembleSettings,
    EnsembleStats, EpidemicParams, Graph, GraphMetrics,
};

use crate::plan::{build_plan, Cell, GraphKey, GraphTask};
use crate::spec::{ExperimentSpec, Topology};

pub const CELLS_DIR: &str = "cells";
pub const GRAPHS_DIR: &str = "graphs";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub key: GraphKey,
    pub seed: u64,
    pub topology: Topology,
    pub metrics: GraphMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: Cell,
    pub graph_seed: u64,
    pub stats: EnsembleStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Results {
    pub spec: ExperimentSpec,
    pub graphs: Vec<GraphRecord>,
    pub cells: Vec<CellRecord>,
    pub warnings: Vec<String>,
    /// Cells computed by this invocation, as opposed to loaded checkpoints.
    pub computed_cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecOptions {
    pub workers: usize,
    pub force: bool,
    pub resume: bool,
    pub progress: bool,
}

impl Default for ExecOptions {
    fn default() -> Self {
        Self {
            workers: default_workers(),
            force: false,
            resume: false,
            progress: true,
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Builds the graph a task describes. ER-matched graphs take their mean
/// degree from the geometric graph generated with the same seed.
pub fn build_graph(spec: &ExperimentSpec, task: &GraphTask) -> Result<Graph> {
    let cfg = spec.network_config(task.key.node_count)?;
    let rgg = generate_rgg(&cfg, &mut rng_from_seed(task.seed));
    match spec.topology {
        Topology::Rgg => Ok(rgg),
        Topology::ErMatched => {
            let k = 2.0 * rgg.edge_count() as f64 / rgg.node_count() as f64;
            let k = k.clamp(f64::MIN_POSITIVE, (rgg.node_count() - 1) as f64);
            let mut rng = rng_from_seed(derive_seed(task.seed, &[tag::GRAPH]));
            Ok(build_er_matched(cfg.node_count(), k, &mut rng)?)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestHead {
    spec: ExperimentSpec,
}

/// Checks the output directory against the overwrite policy and creates it.
pub fn prepare_out_dir(spec: &ExperimentSpec, out: &Path, opts: &ExecOptions) -> Result<()> {
    if out.exists() && fs::read_dir(out)?.next().is_some() {
        if opts.force {
            fs::remove_dir_all(out).with_context(|| format!("clearing {}", out.display()))?;
        } else if opts.resume {
            let text = fs::read_to_string(out.join(MANIFEST))
                .with_context(|| format!("{} has no manifest to resume from", out.display()))?;
            let head: ManifestHead = serde_json::from_str(&text).context("parsing manifest")?;
            if head.spec != *spec {
                bail!("{} was produced by a different spec; use --force to start over", out.display());
            }
        } else {
            bail!(
                "output directory {} already exists; pass --force to overwrite or --resume to continue",
                out.display()
            );
        }
    }
    fs::create_dir_all(out.join(CELLS_DIR))?;
    fs::create_dir_all(out.join(GRAPHS_DIR))?;
    if !out.join(MANIFEST).exists() {
        crate::output::write_manifest(out, spec, &build_plan(spec), &[])?;
    }
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Option<T> {
    let text = fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

fn cell_path(out: &Path, cell: &Cell) -> PathBuf {
    out.join(CELLS_DIR).join(format!("{}.json", cell.file_stem()))
}

fn graph_path(out: &Path, key: &GraphKey) -> PathBuf {
    out.join(GRAPHS_DIR).join(format!("{}.json", key.file_stem()))
}

/// Runs every cell of the spec, skipping cells already checkpointed under
/// `out`. Each finished cell is written to disk before the next starts.
pub fn execute(spec: &ExperimentSpec, out: &Path, opts: &ExecOptions) -> Result<Results> {
    prepare_out_dir(spec, out, opts)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()?;
    let plan = build_plan(spec);
    let total = plan.cells.len();
    let mut graphs = Vec::new();
    let mut cells = Vec::new();
    let mut warnings = Vec::new();
    let mut computed = 0;
    let mut done = 0;

    for task in &plan.graphs {
        let my_cells: Vec<&Cell> = plan.cells.iter().filter(|c| c.graph == task.key).collect();
        let mut pending = Vec::new();
        for cell in &my_cells {
            match load_json::<CellRecord>(&cell_path(out, cell)) {
                Some(rec) if rec.cell == **cell => cells.push(rec),
                _ => pending.push(*cell),
            }
        }
        let stored: Option<GraphRecord> = load_json(&graph_path(out, &task.key))
            .filter(|g: &GraphRecord| g.seed == task.seed && g.topology == spec.topology);
        done += my_cells.len() - pending.len();
        if pending.is_empty() {
            if let Some(rec) = stored {
                note_disconnected(&rec, &mut warnings);
                graphs.push(rec);
                continue;
            }
        }

        let graph = build_graph(spec, task)
            .with_context(|| format!("building graph {}", task.key.file_stem()))?;
        let metrics = pool.install(|| compute_metrics(&graph));
        let rec = GraphRecord {
            key: task.key,
            seed: task.seed,
            topology: spec.topology,
            metrics,
        };
        note_disconnected(&rec, &mut warnings);
        write_atomic(&graph_path(out, &task.key), &serde_json::to_vec(&rec)?)?;
        graphs.push(rec);

        for cell in pending {
            let params = EpidemicParams::new(cell.lambda, spec.patching_rate, cell.mac)?;
            let settings = EnsembleSettings::new(spec.runs_per_point, spec.seed_nodes_per_point, cell.seed);
            let stats = pool.install(|| run_ensemble(&graph, &params, &settings))?;
            let rec = CellRecord {
                cell: *cell,
                graph_seed: task.seed,
                stats,
            };
            write_atomic(&cell_path(out, cell), &serde_json::to_vec(&rec)?)
                .with_context(|| format!("writing checkpoint for {}", cell.file_stem()))?;
            done += 1;
            computed += 1;
            if opts.progress {
                eprintln!(
                    "[{done}/{total}] N={} replica={} {} mac={} lambda={} prevalence={:.4}",
                    cell.graph.node_count,
                    cell.graph.replica,
                    cell.topology.label(),
                    crate::spec::mac_label(cell.mac),
                    cell.lambda,
                    rec.stats.prevalence_mean
                );
            }
            cells.push(rec);
        }
    }

    Ok(Results {
        spec: spec.clone(),
        graphs,
        cells,
        warnings,
        computed_cells: computed,
    })
}

fn note_disconnected(rec: &GraphRecord, warnings: &mut Vec<String>) {
    if !rec.metrics.connected {
        let msg = format!(
            "graph N={} replica={} is disconnected (giant component {:.4})",
            rec.key.node_count, rec.key.replica, rec.metrics.giant_component_fraction
        );
        eprintln!("warning: {msg}");
        warnings.push(msg);
    }
}
