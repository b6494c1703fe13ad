//! Experiment specification files.
//!
//! A spec is a flat TOML document whose keys are exactly the fields of
//! [`ExperimentSpec`]; unknown keys are rejected.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use wormsim_core::geometry::{transmission_range, PathlossParams};
use wormsim_core::NetworkConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Topology {
    #[serde(rename = "RGG")]
    Rgg,
    #[serde(rename = "ER-matched")]
    ErMatched,
}

impl Topology {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Rgg => "RGG",
            Self::ErMatched => "ER-matched",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "RGG" => Some(Self::Rgg),
            "ER-matched" => Some(Self::ErMatched),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MacSetting {
    On,
    Off,
    Both,
}

impl MacSetting {
    /// MAC arms to run for a topology. Random graphs have no geometry, so
    /// they only ever run with the MAC off.
    pub fn arms(&self, topology: Topology) -> Vec<bool> {
        match (topology, self) {
            (Topology::ErMatched, _) => vec![false],
            (_, Self::On) => vec![true],
            (_, Self::Off) => vec![false],
            (_, Self::Both) => vec![false, true],
        }
    }
}

pub fn mac_label(on: bool) -> &'static str {
    if on {
        "on"
    } else {
        "off"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub topology: Topology,
    pub node_counts: Vec<usize>,
    #[serde(default = "default_side_length")]
    pub side_length: f64,
    /// Radio range in meters. Exactly one of this and `pathloss` is set.
    #[serde(default)]
    pub transmission_range: Option<f64>,
    #[serde(default)]
    pub pathloss: Option<PathlossParams>,
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_patching_rate")]
    pub patching_rate: f64,
    #[serde(default = "default_mac")]
    pub mac: MacSetting,
    #[serde(default = "default_runs")]
    pub runs_per_point: usize,
    #[serde(default = "default_seed_nodes")]
    pub seed_nodes_per_point: usize,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    #[serde(default = "default_replicas")]
    pub graph_replicas: usize,
}

fn default_side_length() -> f64 {
    1000.0
}
fn default_patching_rate() -> f64 {
    1.0
}
fn default_mac() -> MacSetting {
    MacSetting::Both
}
fn default_runs() -> usize {
    500
}
fn default_seed_nodes() -> usize {
    5
}
fn default_master_seed() -> u64 {
    1
}
fn default_replicas() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpecError {
    Io(String),
    Parse(String),
    Validation { field: String, reason: String },
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io(m) => write!(f, "cannot read spec: {m}"),
            Self::Parse(m) => write!(f, "spec parse error: {m}"),
            Self::Validation { field, reason } => write!(f, "invalid `{field}`: {reason}"),
        }
    }
}

impl std::error::Error for SpecError {}

fn bad(field: &str, reason: impl Into<String>) -> SpecError {
    SpecError::Validation {
        field: field.to_string(),
        reason: reason.into(),
    }
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|e| SpecError::Io(format!("{}: {e}", path.display())))?;
    parse_spec(&text)
}

pub fn parse_spec(text: &str) -> Result<ExperimentSpec, SpecError> {
    let spec: ExperimentSpec = toml::from_str(text).map_err(|e| SpecError::Parse(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.name.is_empty() || self.name.contains([',', '"', '\n', '/']) {
            return Err(bad("name", "must be non-empty without commas, quotes, slashes or newlines"));
        }
        if self.node_counts.is_empty() {
            return Err(bad("node_counts", "must not be empty"));
        }
        if self.node_counts.contains(&0) {
            return Err(bad("node_counts", "every node count must be at least 1"));
        }
        if self.lambda_grid.is_empty() {
            return Err(bad("lambda_grid", "must not be empty"));
        }
        for &l in &self.lambda_grid {
            if !(0.0..=1.0).contains(&l) {
                return Err(bad("lambda_grid", format!("infection_rate out of [0,1]: {l}")));
            }
        }
        let mut sorted = self.lambda_grid.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() != self.lambda_grid.len() {
            return Err(bad("lambda_grid", "contains duplicate values"));
        }
        if !(self.patching_rate > 0.0 && self.patching_rate <= 1.0) {
            return Err(bad(
                "patching_rate",
                format!("patching_rate out of (0,1]: {}", self.patching_rate),
            ));
        }
        if self.runs_per_point == 0 {
            return Err(bad("runs_per_point", "must be at least 1"));
        }
        if self.seed_nodes_per_point == 0 {
            return Err(bad("seed_nodes_per_point", "must be at least 1"));
        }
        if self.graph_replicas == 0 {
            return Err(bad("graph_replicas", "must be at least 1"));
        }
        if self.topology == Topology::ErMatched && self.mac == MacSetting::On {
            return Err(bad("mac", "the MAC needs node positions; ER-matched graphs support mac = off only"));
        }
        match (&self.transmission_range, &self.pathloss) {
            (Some(_), Some(_)) => {
                return Err(bad(
                    "transmission_range",
                    "give either transmission_range or pathloss, not both",
                ))
            }
            (None, None) => {
                return Err(bad(
                    "transmission_range",
                    "missing; give transmission_range or pathloss",
                ))
            }
            (None, Some(p)) => p.validate().map_err(|e| bad("pathloss", e.to_string()))?,
            (Some(_), None) => {}
        }
        for &n in &self.node_counts {
            self.network_config(n)
                .map_err(|e| bad("transmission_range", e.to_string()))?;
            if self.seed_nodes_per_point > n {
                return Err(bad(
                    "seed_nodes_per_point",
                    format!("{} exceeds node count {n}", self.seed_nodes_per_point),
                ));
            }
            if self.topology == Topology::ErMatched && n < 2 {
                return Err(bad("node_counts", "ER-matched graphs need at least 2 nodes"));
            }
        }
        Ok(())
    }

    pub fn range(&self) -> f64 {
        match (&self.transmission_range, &self.pathloss) {
            (Some(r), _) => *r,
            (None, Some(p)) => transmission_range(p),
            (None, None) => f64::NAN,
        }
    }

    pub fn network_config(&self, node_count: usize) -> wormsim_core::Result<NetworkConfig> {
        NetworkConfig::new(node_count, self.side_length, self.range(), true)
    }

    /// Grid values in increasing order.
    pub fn sorted_lambdas(&self) -> Vec<f64> {
        let mut l = self.lambda_grid.clone();
        l.sort_by(f64::total_cmp);
        l
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "demo"
topology = "RGG"
node_counts = [4000]
transmission_range = 50.0
lambda_grid = [0.05, 0.1]
"#;

    #[test]
    fn minimal_spec_gets_defaults() {
        let s = parse_spec(MINIMAL).unwrap();
        assert_eq!(s.patching_rate, 1.0);
        assert_eq!(s.mac, MacSetting::Both);
        assert_eq!(s.runs_per_point, 500);
        assert_eq!(s.seed_nodes_per_point, 5);
        assert_eq!(s.graph_replicas, 1);
        assert_eq!(s.side_length, 1000.0);
        assert_eq!(s.mac.arms(s.topology), vec![false, true]);
    }

    #[test]
    fn out_of_range_lambda() {
        let text = MINIMAL.replace("[0.05, 0.1]", "[0.05, 1.5]");
        match parse_spec(&text) {
            Err(SpecError::Validation { field, reason }) => {
                assert_eq!(field, "lambda_grid");
                assert!(reason.contains("infection_rate out of [0,1]"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_fail_with_line() {
        let text = format!("{MINIMAL}\nbogus_key = 3\n");
        let err = parse_spec(&text).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, SpecError::Parse(_)));
        assert!(msg.contains("bogus_key"), "{msg}");
        assert!(msg.contains("line 8"), "{msg}");
    }

    #[test]
    fn range_sources() {
        let both = format!(
            "{MINIMAL}\n[pathloss]\ntransmit_power = 1.0\npathloss_constant = 1.0\npathloss_exponent = 2.0\nattenuation_threshold = 1.0\nnoise_level = 1.0\n"
        );
        assert!(matches!(
            parse_spec(&both),
            Err(SpecError::Validation { .. })
        ));
        let pl = both.replace("transmission_range = 50.0\n", "").replace("transmit_power = 1.0", "transmit_power = 2500.0");
        let s = parse_spec(&pl).unwrap();
        assert!((s.range() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn er_arms() {
        let text = MINIMAL.replace("\"RGG\"", "\"ER-matched\"");
        let s = parse_spec(&text).unwrap();
        assert_eq!(s.mac.arms(s.topology), vec![false]);
        let text = format!("{text}mac = \"on\"\n");
        assert!(parse_spec(&text).is_err());
    }

    #[test]
    fn other_validation_fields() {
        for (from, to, field) in [
            ("node_counts = [4000]", "node_counts = []", "node_counts"),
            ("lambda_grid = [0.05, 0.1]", "lambda_grid = [0.1, 0.1]", "lambda_grid"),
            ("transmission_range = 50.0", "transmission_range = 600.0", "transmission_range"),
            ("name = \"demo\"", "name = \"a,b\"", "name"),
        ] {
            match parse_spec(&MINIMAL.replace(from, to)) {
                Err(SpecError::Validation { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{to}: unexpected {other:?}"),
            }
        }
        let text = format!("{MINIMAL}runs_per_point = 0\n");
        assert!(matches!(parse_spec(&text), Err(SpecError::Validation { field, .. }) if field == "runs_per_point"));
    }
}
