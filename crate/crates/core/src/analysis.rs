//! Observables computed from ensembles: prevalence curves, epidemic
//! thresholds, the kappa rescaling and spreading-speed metrics.

use serde::{Deserialize, Serialize};

use crate::ensemble::{run_ensemble, EnsembleSettings, EnsembleStats, OUTBREAK_CUTOFF};
use crate::epidemic::EpidemicParams;
use crate::error::{Error, Result};
use crate::geometry::NetworkConfig;
use crate::graph::{Graph, GraphKind};
use crate::seed::{derive_seed, tag};

/// Which of the three compared dynamics a curve belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TopologyKind {
    /// SIR on the degree-matched random graph.
    Rg,
    /// SIR on the geometric graph, channel access ignored.
    Rgg,
    /// SIR on the geometric graph with listen-before-talk.
    RggMac,
}

impl TopologyKind {
    pub fn of(kind: GraphKind, mac: bool) -> Self {
        match (kind, mac) {
            (GraphKind::Er, _) => Self::Rg,
            (GraphKind::Rgg, false) => Self::Rgg,
            (GraphKind::Rgg, true) => Self::RggMac,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Rg => "RG",
            Self::Rgg => "RGG",
            Self::RggMac => "RGG+MAC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrevalencePoint {
    pub lambda: f64,
    pub prevalence_mean: f64,
    pub prevalence_conditional: f64,
    pub susceptibility: f64,
    pub std_error: f64,
}

impl PrevalencePoint {
    pub fn from_stats(lambda: f64, s: &EnsembleStats) -> Self {
        Self {
            lambda,
            prevalence_mean: s.prevalence_mean,
            prevalence_conditional: s.prevalence_conditional,
            susceptibility: s.susceptibility,
            std_error: s.std_error,
        }
    }
}

/// Prevalence against infection rate for one graph and dynamic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceCurve {
    /// Sorted by strictly increasing `lambda`.
    pub points: Vec<PrevalencePoint>,
    pub topology: TopologyKind,
    pub node_count: usize,
    /// Geometry of the underlying graph; `None` for random graphs.
    pub network_config: Option<NetworkConfig>,
    /// Measured mean degree of the graph the curve was computed on.
    pub mean_degree: f64,
}

impl PrevalenceCurve {
    /// Inserts points, keeping the grid sorted; a repeated `lambda` replaces
    /// the existing point.
    pub fn merge(&mut self, points: impl IntoIterator<Item = PrevalencePoint>) {
        for p in points {
            match self
                .points
                .binary_search_by(|q| q.lambda.total_cmp(&p.lambda))
            {
                Ok(i) => self.points[i] = p,
                Err(i) => self.points.insert(i, p),
            }
        }
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }
}

fn measured_mean_degree(g: &Graph) -> f64 {
    2.0 * g.edge_count() as f64 / g.node_count() as f64
}

/// Ensemble seed for the grid point at `lambda`, keyed by value so extra
/// grid points never perturb existing ones.
pub fn point_seed(master_seed: u64, lambda: f64) -> u64 {
    derive_seed(master_seed, &[tag::CELL, lambda.to_bits()])
}

/// One ensemble per grid value of the infection rate, all on the same graph.
pub fn sweep_prevalence(
    g: &Graph,
    lambdas: &[f64],
    patching_rate: f64,
    mac_enabled: bool,
    settings: &EnsembleSettings,
) -> Result<(PrevalenceCurve, Vec<EnsembleStats>)> {
    if lambdas.is_empty() {
        return Err(crate::error::invalid("lambda_grid", "must not be empty"));
    }
    if lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(crate::error::invalid(
            "lambda_grid",
            "must be strictly increasing",
        ));
    }
    let mut points = Vec::with_capacity(lambdas.len());
    let mut stats = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let p = EpidemicParams::new(lambda, patching_rate, mac_enabled)?;
        let s = EnsembleSettings {
            master_seed: point_seed(settings.master_seed, lambda),
            ..*settings
        };
        let st = run_ensemble(g, &p, &s)?;
        points.push(PrevalencePoint::from_stats(lambda, &st));
        stats.push(st);
    }
    let curve = PrevalenceCurve {
        points,
        topology: TopologyKind::of(g.kind(), mac_enabled),
        node_count: g.node_count(),
        network_config: g.config().copied(),
        mean_degree: measured_mean_degree(g),
    };
    Ok((curve, stats))
}

/// Geometric grid from `lo` to at least `hi` with consecutive ratio `ratio`.
pub fn geometric_grid(lo: f64, hi: f64, ratio: f64) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && ratio > 1.0);
    let steps = ((hi / lo).ln() / ratio.ln()).ceil() as i32;
    (0..=steps).map(|i| lo * ratio.powi(i)).collect()
}

/// Geometric midpoints of the intervals within two grid steps of `center`.
pub fn refinement_points(lambdas: &[f64], center: usize) -> Vec<f64> {
    let lo = center.saturating_sub(2);
    let hi = (center + 2).min(lambdas.len() - 1);
    (lo..hi)
        .map(|i| (lambdas[i] * lambdas[i + 1]).sqrt())
        .collect()
}

/// Grid factors around the mean-field threshold used for threshold scans.
pub const THRESHOLD_SCAN_LOW: f64 = 0.5;
pub const THRESHOLD_SCAN_HIGH: f64 = 3.0;
pub const THRESHOLD_SCAN_RATIO: f64 = 1.1;

/// Threshold scan: a geometric grid over `[0.5, 3] / <k>` with ratio 1.1,
/// then one refinement pass around the susceptibility peak.
pub fn threshold_scan(
    g: &Graph,
    patching_rate: f64,
    mac_enabled: bool,
    settings: &EnsembleSettings,
) -> Result<PrevalenceCurve> {
    let mf = mean_field_threshold(measured_mean_degree(g));
    let grid = geometric_grid(
        THRESHOLD_SCAN_LOW * mf,
        THRESHOLD_SCAN_HIGH * mf,
        THRESHOLD_SCAN_RATIO,
    );
    let (mut curve, _) = sweep_prevalence(g, &grid, patching_rate, mac_enabled, settings)?;
    let peak = argmax_earliest(curve.points.iter().map(|p| p.susceptibility));
    let extra = refinement_points(&curve.lambdas(), peak);
    let (more, _) = sweep_prevalence(g, &extra, patching_rate, mac_enabled, settings)?;
    curve.merge(more.points);
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThresholdMethod {
    SusceptibilityPeak,
    CutoffCrossing,
}

impl ThresholdMethod {
    pub fn label(&self) -> &'static str {
        match self {
            Self::SusceptibilityPeak => "susceptibility_peak",
            Self::CutoffCrossing => "cutoff_crossing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimate {
    pub lambda_c: f64,
    pub method: ThresholdMethod,
    /// Half the local grid spacing.
    pub uncertainty: f64,
    /// `lambda_c` times the measured mean degree.
    pub kappa_c: f64,
}

pub fn estimate_threshold(curve: &PrevalenceCurve, method: ThresholdMethod) -> Result<ThresholdEstimate> {
    let pts = &curve.points;
    let (lambda_c, uncertainty) = match method {
        ThresholdMethod::SusceptibilityPeak => {
            if pts.len() < 3 {
                return Err(Error::RegimeNotBracketed(
                    "need at least three grid points".into(),
                ));
            }
            let i = argmax_earliest(pts.iter().map(|p| p.susceptibility));
            if i == 0 || i == pts.len() - 1 {
                return Err(Error::RegimeNotBracketed(format!(
                    "susceptibility peaks at the grid edge (lambda = {})",
                    pts[i].lambda
                )));
            }
            let (a, b, c) = (&pts[i - 1], &pts[i], &pts[i + 1]);
            let x = parabola_vertex(
                (a.lambda, a.susceptibility),
                (b.lambda, b.susceptibility),
                (c.lambda, c.susceptibility),
            );
            let spacing = (b.lambda - a.lambda).max(c.lambda - b.lambda);
            (x, spacing / 2.0)
        }
        ThresholdMethod::CutoffCrossing => {
            let i = pts
                .iter()
                .position(|p| p.prevalence_mean > OUTBREAK_CUTOFF)
                .ok_or_else(|| {
                    Error::RegimeNotBracketed("prevalence never exceeds the cutoff".into())
                })?;
            if i == 0 {
                return Err(Error::RegimeNotBracketed(
                    "prevalence already above the cutoff at the first grid point".into(),
                ));
            }
            let (a, b) = (&pts[i - 1], &pts[i]);
            let t = (OUTBREAK_CUTOFF - a.prevalence_mean) / (b.prevalence_mean - a.prevalence_mean);
            let x = a.lambda + t.clamp(0.0, 1.0) * (b.lambda - a.lambda);
            (x, (b.lambda - a.lambda) / 2.0)
        }
    };
    Ok(ThresholdEstimate {
        lambda_c,
        method,
        uncertainty,
        kappa_c: lambda_c * curve.mean_degree,
    })
}

/// Abscissa of the vertex of the parabola through three points, clamped to
/// the outer two. Falls back to the middle point for degenerate fits.
fn parabola_vertex((x0, y0): (f64, f64), (x1, y1): (f64, f64), (x2, y2): (f64, f64)) -> f64 {
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curvature = (d12 - d01) / (x2 - x0);
    if curvature.is_nan() || curvature >= 0.0 {
        return x1;
    }
    // y = y1 + d01 (x - x1) + curvature (x - x0)(x - x1)
    let x = (x0 + x1) / 2.0 - d01 / (2.0 * curvature);
    x.clamp(x0, x2)
}

fn argmax_earliest(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Homogeneous-mixing threshold `1 / <k>`.
pub fn mean_field_threshold(mean_degree: f64) -> f64 {
    1.0 / mean_degree
}

/// Window of the collapse-quality score.
pub const KAPPA_WINDOW: (f64, f64) = (1.0, 2.5);
const COLLAPSE_GRID_POINTS: usize = 301;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseSeries {
    pub node_count: usize,
    pub mean_degree: f64,
    /// `(kappa, prevalence_mean)` pairs.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Collapse {
    /// Sorted by node count, then mean degree.
    pub series: Vec<CollapseSeries>,
    /// Largest vertical gap between any two interpolated series over
    /// [`KAPPA_WINDOW`].
    pub max_deviation: f64,
}

/// Rescales every curve to `kappa = lambda * <k>` and scores how well they
/// overlap.
pub fn scaling_collapse(curves: &[PrevalenceCurve]) -> Collapse {
    let mut series: Vec<CollapseSeries> = curves
        .iter()
        .map(|c| CollapseSeries {
            node_count: c.node_count,
            mean_degree: c.mean_degree,
            points: c
                .points
                .iter()
                .map(|p| (p.lambda * c.mean_degree, p.prevalence_mean))
                .collect(),
        })
        .collect();
    series.sort_by(|a, b| {
        a.node_count
            .cmp(&b.node_count)
            .then(a.mean_degree.total_cmp(&b.mean_degree))
    });

    let (lo, hi) = KAPPA_WINDOW;
    let mut max_deviation: f64 = 0.0;
    for k in 0..COLLAPSE_GRID_POINTS {
        let kappa = lo + (hi - lo) * k as f64 / (COLLAPSE_GRID_POINTS - 1) as f64;
        let values: Vec<f64> = series
            .iter()
            .filter_map(|s| interpolate(&s.points, kappa))
            .collect();
        if let (Some(min), Some(max)) = (
            values.iter().copied().reduce(f64::min),
            values.iter().copied().reduce(f64::max),
        ) {
            max_deviation = max_deviation.max(max - min);
        }
    }
    Collapse {
        series,
        max_deviation,
    }
}

/// Linear interpolation on sorted abscissae; `None` outside their range.
pub fn interpolate(points: &[(f64, f64)], x: f64) -> Option<f64> {
    let first = points.first()?;
    let last = points.last()?;
    if x < first.0 || x > last.0 {
        return None;
    }
    let i = points.partition_point(|p| p.0 < x);
    if i == 0 {
        return Some(first.1);
    }
    let (x0, y0) = points[i - 1];
    let (x1, y1) = points[i];
    Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
}

/// Peak position and early-growth profile of a mean infected curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedMetrics {
    pub t_max: usize,
    pub peak_height: f64,
    /// Mean `I(t)/N` for `t` in `0..=t_max`.
    pub growth_profile: Vec<f64>,
}

pub fn speed_metrics(stats: &EnsembleStats) -> SpeedMetrics {
    speed_metrics_of(&stats.mean_i_curve)
}

pub fn speed_metrics_of(mean_i_curve: &[f64]) -> SpeedMetrics {
    assert!(!mean_i_curve.is_empty(), "empty infected curve");
    let t_max = argmax_earliest(mean_i_curve.iter().copied());
    SpeedMetrics {
        t_max,
        peak_height: mean_i_curve[t_max],
        growth_profile: mean_i_curve[..=t_max].to_vec(),
    }
}

/// Fewest expected infected for a point to enter the growth fit.
pub const GROWTH_NOISE_FLOOR: f64 = 10.0;
pub const GROWTH_MIN_POINTS: usize = 5;
pub const GROWTH_R2_THRESHOLD: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthClass {
    ConsistentWithExponential,
    SlowerThanExponential,
}

/// Least-squares fit of `ln I(t)` against `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub class: GrowthClass,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
    pub first_t: usize,
}

/// Classifies early growth of a profile of infected fractions averaged over
/// `runs` runs.
///
/// A point enters the fit when the infected count summed over the ensemble,
/// `runs * N * I(t)/N`, reaches [`GROWTH_NOISE_FLOOR`]. For a single run
/// this is a floor of 10 infected nodes.
pub fn growth_classification(profile: &[f64], node_count: usize, runs: usize) -> Result<GrowthFit> {
    let scale = node_count as f64 * runs.max(1) as f64;
    let pts: Vec<(f64, f64)> = profile
        .iter()
        .enumerate()
        .filter(|(_, &f)| f * scale >= GROWTH_NOISE_FLOOR)
        .map(|(t, &f)| (t as f64, (f * node_count as f64).ln()))
        .collect();
    if pts.len() < GROWTH_MIN_POINTS {
        return Err(Error::InsufficientPoints {
            needed: GROWTH_MIN_POINTS,
            have: pts.len(),
        });
    }
    let (slope, intercept, r_squared) = linear_fit(&pts);
    let class = if r_squared >= GROWTH_R2_THRESHOLD && slope > 0.0 {
        GrowthClass::ConsistentWithExponential
    } else {
        GrowthClass::SlowerThanExponential
    };
    Ok(GrowthFit {
        class,
        slope,
        intercept,
        r_squared,
        points_used: pts.len(),
        first_t: pts[0].0 as usize,
    })
}

/// Ordinary least squares; returns `(slope, intercept, r_squared)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(points: &[(f64, f64, f64)], k: f64) -> PrevalenceCurve {
        PrevalenceCurve {
            points: points
                .iter()
                .map(|&(lambda, prev, chi)| PrevalencePoint {
                    lambda,
                    prevalence_mean: prev,
                    prevalence_conditional: prev,
                    susceptibility: chi,
                    std_error: 0.0,
                })
                .collect(),
            topology: TopologyKind::Rgg,
            node_count: 1000,
            network_config: None,
            mean_degree: k,
        }
    }

    #[test]
    fn mean_field_values() {
        assert!((mean_field_threshold(78.54) - 0.0127).abs() < 5e-5);
        assert_eq!(mean_field_threshold(1.0), 1.0);
        assert!((mean_field_threshold(31.42) - 0.0318).abs() < 5e-5);
    }

    #[test]
    fn subcritical_curve_has_no_threshold() {
        let c = curve(&[(0.01, 0.001, 1.0), (0.02, 0.001, 1.0), (0.03, 0.001, 1.0)], 10.0);
        assert!(matches!(
            estimate_threshold(&c, ThresholdMethod::CutoffCrossing),
            Err(Error::RegimeNotBracketed(_))
        ));
        assert!(matches!(
            estimate_threshold(&c, ThresholdMethod::SusceptibilityPeak),
            Err(Error::RegimeNotBracketed(_))
        ));
    }

    #[test]
    fn susceptibility_peak_symmetric() {
        let c = curve(
            &[(0.01, 0.0, 1.0), (0.02, 0.1, 3.0), (0.03, 0.5, 1.0)],
            50.0,
        );
        let t = estimate_threshold(&c, ThresholdMethod::SusceptibilityPeak).unwrap();
        assert!((t.lambda_c - 0.02).abs() < 1e-12);
        assert!((t.uncertainty - 0.005).abs() < 1e-12);
        assert!((t.kappa_c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn parabola_vertex_recovers_quadratic() {
        // y = -(x - 0.7)^2 on an uneven grid
        let f = |x: f64| -(x - 0.7f64).powi(2);
        let x = parabola_vertex((0.2, f(0.2)), (0.5, f(0.5)), (1.3, f(1.3)));
        assert!((x - 0.7).abs() < 1e-12);
    }

    #[test]
    fn cutoff_crossing_interpolates() {
        let c = curve(
            &[(0.01, 0.0, 0.0), (0.02, 0.005, 0.0), (0.03, 0.015, 0.0), (0.04, 0.4, 0.0)],
            10.0,
        );
        let t = estimate_threshold(&c, ThresholdMethod::CutoffCrossing).unwrap();
        assert!((t.lambda_c - 0.025).abs() < 1e-12);
    }

    #[test]
    fn merge_keeps_order() {
        let mut c = curve(&[(0.01, 0.0, 0.0), (0.03, 0.0, 0.0)], 1.0);
        let extra = curve(&[(0.02, 0.1, 0.0), (0.03, 0.2, 0.0)], 1.0);
        c.merge(extra.points);
        assert_eq!(c.lambdas(), vec![0.01, 0.02, 0.03]);
        assert_eq!(c.points[2].prevalence_mean, 0.2);
    }

    #[test]
    fn grids() {
        let g = geometric_grid(1.0, 2.0, 1.1);
        assert_eq!(g.len(), 9);
        assert!(*g.last().unwrap() >= 2.0);
        let r = refinement_points(&g, 4);
        assert_eq!(r.len(), 4);
        assert!((r[0] - (g[2] * g[3]).sqrt()).abs() < 1e-12);
        assert_eq!(refinement_points(&g, 0).len(), 2);
    }

    #[test]
    fn identical_curves_collapse_perfectly() {
        let pts: Vec<_> = (0..30)
            .map(|i| {
                let l = 0.005 + 0.001 * i as f64;
                (l, (l * 80.0 - 1.2).clamp(0.0, 1.0), 0.0)
            })
            .collect();
        let c = curve(&pts, 80.0);
        let col = scaling_collapse(&[c.clone(), c]);
        assert_eq!(col.max_deviation, 0.0);
        assert_eq!(col.series.len(), 2);
    }

    #[test]
    fn interpolation() {
        let p = [(0.0, 0.0), (1.0, 2.0), (3.0, 0.0)];
        assert_eq!(interpolate(&p, 0.5), Some(1.0));
        assert_eq!(interpolate(&p, 2.0), Some(1.0));
        assert_eq!(interpolate(&p, 0.0), Some(0.0));
        assert_eq!(interpolate(&p, 3.0), Some(0.0));
        assert_eq!(interpolate(&p, 3.5), None);
    }

    #[test]
    fn speed_peak() {
        let m = speed_metrics_of(&[0.0001, 0.5, 0.3]);
        assert_eq!(m.t_max, 1);
        assert_eq!(m.peak_height, 0.5);
        assert_eq!(m.growth_profile, vec![0.0001, 0.5]);
        // ties go to the earliest step
        assert_eq!(speed_metrics_of(&[0.1, 0.2, 0.2, 0.1]).t_max, 1);
    }

    #[test]
    fn growth_exponential_vs_quadratic() {
        let n = 1_000_000usize;
        let exp: Vec<f64> = (0..12).map(|t| 2f64.powi(t) / n as f64).collect();
        let fit = growth_classification(&exp, n, 1).unwrap();
        assert_eq!(fit.class, GrowthClass::ConsistentWithExponential);
        assert!((fit.slope - 2f64.ln()).abs() < 1e-9);

        let quad: Vec<f64> = (0..30).map(|t| (t * t) as f64 / n as f64).collect();
        let fit = growth_classification(&quad, n, 1).unwrap();
        assert_eq!(fit.class, GrowthClass::SlowerThanExponential);
        // t = 4..=29 pass the floor of 10; R^2 frozen from an independent fit
        assert_eq!((fit.first_t, fit.points_used), (4, 26));
        assert!((fit.r_squared - 0.9372350653017785).abs() < 1e-12);
    }

    #[test]
    fn growth_needs_enough_points() {
        let p = [0.0, 0.5, 0.6];
        assert!(matches!(
            growth_classification(&p, 100, 1),
            Err(Error::InsufficientPoints { needed: 5, have: 2 })
        ));
        // the floor counts infected over the whole ensemble
        let p = [0.001, 0.007, 0.05, 0.3, 0.6];
        assert!(growth_classification(&p, 1000, 1).is_err());
        assert_eq!(growth_classification(&p, 1000, 10).unwrap().points_used, 5);
    }
}
