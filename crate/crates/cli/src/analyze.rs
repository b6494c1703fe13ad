//! Re-analysis of a finished (or partial) output directory from its
//! checkpointed ensembles, without rerunning any simulation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use wormsim_core::scaling_collapse;

use crate::exec::{CellRecord, GraphRecord, Results, CELLS_DIR, GRAPHS_DIR, MANIFEST};
use crate::output::{curve_groups, fmt_sig6, thresholds_csv, CurveGroup};
use crate::spec::{mac_label, ExperimentSpec};

#[derive(Deserialize)]
struct ManifestHead {
    spec: ExperimentSpec,
}

fn read_dir_json<T: for<'de> Deserialize<'de>>(dir: &Path) -> Result<Vec<T>> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect()
}

/// Loads the spec and every stored graph and cell record under `dir`.
pub fn load_results(dir: &Path) -> Result<Results> {
    let text = fs::read_to_string(dir.join(MANIFEST))
        .with_context(|| format!("{} has no {MANIFEST}", dir.display()))?;
    let head: ManifestHead = serde_json::from_str(&text).context("parsing manifest")?;
    let graphs: Vec<GraphRecord> = read_dir_json(&dir.join(GRAPHS_DIR))?;
    let cells: Vec<CellRecord> = read_dir_json(&dir.join(CELLS_DIR))?;
    if cells.is_empty() {
        bail!("{} holds no finished cells", dir.display());
    }
    Ok(Results {
        spec: head.spec,
        graphs,
        cells,
        warnings: Vec::new(),
        computed_cells: 0,
    })
}

/// Collapse quality per (topology, MAC arm) across node counts.
pub fn collapse_report(groups: &[CurveGroup]) -> String {
    let mut by_arm: BTreeMap<(&str, bool), Vec<&CurveGroup>> = BTreeMap::new();
    for g in groups {
        by_arm.entry((g.topology.label(), g.mac)).or_default().push(g);
    }
    let mut out = String::new();
    for ((topo, mac), gs) in by_arm {
        let curves: Vec<_> = gs.iter().map(|g| g.curve.clone()).collect();
        let c = scaling_collapse(&curves);
        let sizes: Vec<String> = c.series.iter().map(|s| s.node_count.to_string()).collect();
        writeln!(
            out,
            "collapse {topo} mac={}: N=[{}] max_deviation={}",
            mac_label(mac),
            sizes.join(","),
            fmt_sig6(c.max_deviation)
        )
        .unwrap();
    }
    out
}

/// Rewrites `thresholds.csv` under `dir` and returns the collapse report.
pub fn analyze(dir: &Path) -> Result<(String, Vec<String>)> {
    let results = load_results(dir)?;
    let groups = curve_groups(&results);
    let (csv, warnings) = thresholds_csv(&results.spec.name, &groups);
    fs::write(dir.join("thresholds.csv"), csv)?;
    Ok((collapse_report(&groups), warnings))
}
