//! Library behind the `wormsim` command line tool: spec parsing, plan
//! expansion, checkpointed execution and CSV output.

pub mod analyze;
pub mod exec;
pub mod output;
pub mod plan;
pub mod spec;

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use anyhow::Result;
use wormsim_core::compute_metrics;

use crate::exec::{build_graph, GraphRecord, Results};
use crate::output::metrics_csv;
use crate::plan::build_plan;
use crate::spec::ExperimentSpec;

/// Builds every graph of the spec and returns `metrics.csv` content. With
/// `histogram`, degree histograms follow as `N,graph_replica,degree,count`
/// rows. With `export`, edge lists and positions are written there.
pub fn graph_metrics(spec: &ExperimentSpec, histogram: bool, export: Option<&Path>) -> Result<String> {
    if let Some(dir) = export {
        fs::create_dir_all(dir)?;
    }
    let mut records = Vec::new();
    for task in build_plan(spec).graphs {
        let g = build_graph(spec, &task)?;
        if let Some(dir) = export {
            let stem = task.key.file_stem();
            g.write_edge_list(BufWriter::new(fs::File::create(dir.join(format!("{stem}.edges")))?))?;
            if g.positions().is_some() {
                g.write_positions(BufWriter::new(fs::File::create(dir.join(format!("{stem}.pos")))?))?;
            }
        }
        records.push(GraphRecord {
            key: task.key,
            seed: task.seed,
            topology: spec.topology,
            metrics: compute_metrics(&g),
        });
    }
    let results = Results {
        spec: spec.clone(),
        graphs: records,
        cells: Vec::new(),
        warnings: Vec::new(),
        computed_cells: 0,
    };
    let mut out = metrics_csv(&results);
    if histogram {
        out.push_str("\nN,graph_replica,degree,count\n");
        for g in &results.graphs {
            for (d, c) in &g.metrics.degree_histogram {
                writeln!(out, "{},{},{d},{c}", g.key.node_count, g.key.replica).unwrap();
            }
        }
    }
    Ok(out)
}
