//! Monte Carlo simulation of worm epidemics on WiFi ad hoc networks.
//!
//! Networks are random geometric graphs on a torus (or degree-matched
//! Erdős–Rényi baselines). A worm spreads by broadcast in discrete rounds;
//! with the MAC enabled, neighboring infected devices cannot transmit in the
//! same round. The [`analysis`] module turns ensembles of runs into
//! prevalence curves, threshold estimates and spreading-speed metrics.

pub mod analysis;
pub mod ensemble;
pub mod epidemic;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod seed;

pub use analysis::{
    estimate_threshold, growth_classification, mean_field_threshold, scaling_collapse,
    speed_metrics, sweep_prevalence, threshold_scan, Collapse, GrowthClass, GrowthFit,
    PrevalenceCurve, PrevalencePoint, SpeedMetrics, ThresholdEstimate, ThresholdMethod,
    TopologyKind,
};
pub use ensemble::{ensemble, run_ensemble, EnsembleSettings, EnsembleStats};
pub use epidemic::{mac_select, run, Counts, Epidemic, EpidemicParams, NodeState, RunRecord, Trajectory};
pub use error::{Error, Result};
pub use geometry::{
    mean_degree_prediction, place_nodes, predicted_mean_degree, toroidal_distance, transmission_range, NetworkConfig,
    PathlossParams, Position,
};
pub use graph::{build_er_matched, build_rgg, compute_metrics, generate_rgg, Graph, GraphKind, GraphMetrics, NodeId};
