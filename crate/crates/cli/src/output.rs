//! CSV and manifest emission.
//!
//! Floats use six significant digits in fixed notation. Rows are sorted by
//! their primary key, so bodies are byte-identical for a fixed spec.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Result;
use serde_json::json;
use wormsim_core::analysis::{PrevalenceCurve, PrevalencePoint, TopologyKind};
use wormsim_core::{
    estimate_threshold, mean_field_threshold, GraphKind, ThresholdEstimate, ThresholdMethod,
};

use crate::exec::{Results, MANIFEST};
use crate::plan::Plan;
use crate::spec::{mac_label, ExperimentSpec, Topology};

pub const PREVALENCE_HEADER: &str = "name,N,topology,mac,lambda,graph_replica,prevalence_mean,prevalence_conditional,susceptibility,std_error,runs";
pub const TIMESERIES_HEADER: &str = "name,N,topology,mac,lambda,t,mean_i_frac,mean_r_frac";
pub const THRESHOLDS_HEADER: &str = "name,N,topology,mac,method,lambda_c,uncertainty,kappa_c,mean_degree,mean_field_lambda_c";
pub const METRICS_HEADER: &str = "name,N,topology,graph_replica,mean_degree,clustering,connected,giant_frac";

pub const CODE_VERSION: &str = concat!("wormsim ", env!("CARGO_PKG_VERSION"));

/// Six significant digits, fixed notation.
pub fn fmt_sig6(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.00000".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

/// One curve per (N, topology, MAC arm), averaged over graph replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveGroup {
    pub node_count: usize,
    pub topology: Topology,
    pub mac: bool,
    pub curve: PrevalenceCurve,
}

pub fn curve_groups(results: &Results) -> Vec<CurveGroup> {
    let mut by_key: BTreeMap<(usize, Topology, bool), BTreeMap<u64, Vec<PrevalencePoint>>> =
        BTreeMap::new();
    for rec in &results.cells {
        let c = &rec.cell;
        by_key
            .entry((c.graph.node_count, c.topology, c.mac))
            .or_default()
            .entry(c.lambda.to_bits())
            .or_default()
            .push(PrevalencePoint::from_stats(c.lambda, &rec.stats));
    }
    by_key
        .into_iter()
        .map(|((n, topology, mac), points)| {
            let degrees: Vec<f64> = results
                .graphs
                .iter()
                .filter(|g| g.key.node_count == n)
                .map(|g| g.metrics.mean_degree)
                .collect();
            let mean_degree = degrees.iter().sum::<f64>() / degrees.len().max(1) as f64;
            let mut pts: Vec<PrevalencePoint> = points.into_values().map(|v| average_points(&v)).collect();
            pts.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
            let kind = match topology {
                Topology::Rgg => GraphKind::Rgg,
                Topology::ErMatched => GraphKind::Er,
            };
            CurveGroup {
                node_count: n,
                topology,
                mac,
                curve: PrevalenceCurve {
                    points: pts,
                    topology: TopologyKind::of(kind, mac),
                    node_count: n,
                    network_config: match topology {
                        Topology::Rgg => results.spec.network_config(n).ok(),
                        Topology::ErMatched => None,
                    },
                    mean_degree,
                },
            }
        })
        .collect()
}

fn average_points(pts: &[PrevalencePoint]) -> PrevalencePoint {
    let k = pts.len() as f64;
    let mean = |f: fn(&PrevalencePoint) -> f64| pts.iter().map(f).sum::<f64>() / k;
    PrevalencePoint {
        lambda: pts[0].lambda,
        prevalence_mean: mean(|p| p.prevalence_mean),
        prevalence_conditional: mean(|p| p.prevalence_conditional),
        susceptibility: mean(|p| p.susceptibility),
        std_error: pts.iter().map(|p| p.std_error * p.std_error).sum::<f64>().sqrt() / k,
    }
}

pub fn prevalence_csv(results: &Results) -> String {
    let name = &results.spec.name;
    let mut rows: Vec<_> = results.cells.iter().collect();
    rows.sort_by(|a, b| {
        let (x, y) = (&a.cell, &b.cell);
        (x.graph.node_count, x.topology, x.mac)
            .cmp(&(y.graph.node_count, y.topology, y.mac))
            .then(x.lambda.total_cmp(&y.lambda))
            .then(x.graph.replica.cmp(&y.graph.replica))
    });
    let mut out = String::new();
    writeln!(out, "{PREVALENCE_HEADER}").unwrap();
    for r in rows {
        let (c, s) = (&r.cell, &r.stats);
        writeln!(
            out,
            "{name},{},{},{},{},{},{},{},{},{},{}",
            c.graph.node_count,
            c.topology.label(),
            mac_label(c.mac),
            fmt_sig6(c.lambda),
            c.graph.replica,
            fmt_sig6(s.prevalence_mean),
            fmt_sig6(s.prevalence_conditional),
            fmt_sig6(s.susceptibility),
            fmt_sig6(s.std_error),
            s.run_count
        )
        .unwrap();
    }
    out
}

/// Mean curves per (N, topology, mac, lambda), averaged over replicas.
pub fn timeseries_csv(results: &Results) -> String {
    let name = &results.spec.name;
    type Curves<'a> = Vec<(&'a [f64], &'a [f64])>;
    let mut groups: BTreeMap<(usize, Topology, bool, u64), Curves> = BTreeMap::new();
    for r in &results.cells {
        let c = &r.cell;
        groups
            .entry((c.graph.node_count, c.topology, c.mac, c.lambda.to_bits()))
            .or_default()
            .push((&r.stats.mean_i_curve, &r.stats.mean_r_curve));
    }
    let mut keys: Vec<_> = groups.keys().copied().collect();
    keys.sort_by(|a, b| {
        (a.0, a.1, a.2)
            .cmp(&(b.0, b.1, b.2))
            .then(f64::from_bits(a.3).total_cmp(&f64::from_bits(b.3)))
    });
    let mut out = String::new();
    writeln!(out, "{TIMESERIES_HEADER}").unwrap();
    for key in keys {
        let curves = &groups[&key];
        let len = curves.iter().map(|(i, _)| i.len()).max().unwrap_or(0);
        let k = curves.len() as f64;
        for t in 0..len {
            let i: f64 = curves.iter().map(|(i, _)| i.get(t).copied().unwrap_or(0.0)).sum::<f64>() / k;
            let r: f64 = curves
                .iter()
                .map(|(_, r)| r.get(t).or(r.last()).copied().unwrap_or(0.0))
                .sum::<f64>()
                / k;
            writeln!(
                out,
                "{name},{},{},{},{},{t},{},{}",
                key.0,
                key.1.label(),
                mac_label(key.2),
                fmt_sig6(f64::from_bits(key.3)),
                fmt_sig6(i),
                fmt_sig6(r)
            )
            .unwrap();
        }
    }
    out
}

pub const THRESHOLD_METHODS: [ThresholdMethod; 2] =
    [ThresholdMethod::SusceptibilityPeak, ThresholdMethod::CutoffCrossing];

/// Threshold estimates for every curve group; unbracketed regimes become
/// warnings instead of rows.
pub fn threshold_estimates(groups: &[CurveGroup]) -> (Vec<(&CurveGroup, ThresholdEstimate)>, Vec<String>) {
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for g in groups {
        for method in THRESHOLD_METHODS {
            match estimate_threshold(&g.curve, method) {
                Ok(est) => rows.push((g, est)),
                Err(e) => warnings.push(format!(
                    "no {} threshold for N={} {} mac={}: {e}",
                    method.label(),
                    g.node_count,
                    g.topology.label(),
                    mac_label(g.mac)
                )),
            }
        }
    }
    (rows, warnings)
}

pub fn thresholds_csv(name: &str, groups: &[CurveGroup]) -> (String, Vec<String>) {
    let (rows, warnings) = threshold_estimates(groups);
    let mut out = String::new();
    writeln!(out, "{THRESHOLDS_HEADER}").unwrap();
    for (g, est) in rows {
        writeln!(
            out,
            "{name},{},{},{},{},{},{},{},{},{}",
            g.node_count,
            g.topology.label(),
            mac_label(g.mac),
            est.method.label(),
            fmt_sig6(est.lambda_c),
            fmt_sig6(est.uncertainty),
            fmt_sig6(est.kappa_c),
            fmt_sig6(g.curve.mean_degree),
            fmt_sig6(mean_field_threshold(g.curve.mean_degree))
        )
        .unwrap();
    }
    (out, warnings)
}

pub fn metrics_csv(results: &Results) -> String {
    let name = &results.spec.name;
    let mut graphs: Vec<_> = results.graphs.iter().collect();
    graphs.sort_by_key(|g| g.key);
    let mut out = String::new();
    writeln!(out, "{METRICS_HEADER}").unwrap();
    for g in graphs {
        let m = &g.metrics;
        writeln!(
            out,
            "{name},{},{},{},{},{},{},{}",
            g.key.node_count,
            g.topology.label(),
            g.key.replica,
            fmt_sig6(m.mean_degree),
            fmt_sig6(m.clustering_coefficient),
            m.connected,
            fmt_sig6(m.giant_component_fraction)
        )
        .unwrap();
    }
    out
}

pub fn write_manifest(out: &Path, spec: &ExperimentSpec, plan: &Plan, warnings: &[String]) -> Result<()> {
    let graphs: Vec<_> = plan
        .graphs
        .iter()
        .map(|g| json!({"N": g.key.node_count, "graph_replica": g.key.replica, "graph_seed": g.seed}))
        .collect();
    let manifest = json!({
        "code_version": CODE_VERSION,
        "spec": spec,
        "master_seed": spec.master_seed,
        "transmission_range_m": spec.range(),
        "graphs": graphs,
        "cell_count": plan.cells.len(),
        "seed_scheme": "derive(master, GRAPH, N, replica) -> derive(graph, CELL, topology, mac, lambda_bits) -> derive(cell, RUN, run_index); seed nodes from derive(cell, SEED_NODES)",
        "warnings": warnings,
    });
    fs::write(out.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

/// Writes the four CSV files and the manifest. Returns warnings raised
/// while estimating thresholds.
pub fn emit(results: &Results, out: &Path) -> Result<Vec<String>> {
    anyhow::ensure!(!results.cells.is_empty(), "no results to emit");
    fs::create_dir_all(out)?;
    let groups = curve_groups(results);
    let (thresholds, mut warnings) = thresholds_csv(&results.spec.name, &groups);
    fs::write(out.join("prevalence.csv"), prevalence_csv(results))?;
    fs::write(out.join("timeseries.csv"), timeseries_csv(results))?;
    fs::write(out.join("thresholds.csv"), thresholds)?;
    fs::write(out.join("metrics.csv"), metrics_csv(results))?;
    let mut all = results.warnings.clone();
    all.append(&mut warnings);
    write_manifest(out, &results.spec, &crate::plan::build_plan(&results.spec), &all)?;
    Ok(all)
}
