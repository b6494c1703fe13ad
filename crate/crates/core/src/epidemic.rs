//! Discrete-time worm spreading with listen-before-talk channel access.
//!
//! One timestep is:
//! 1. pick the transmitters among the nodes infected at the start of the
//!    step (all of them, or a random maximal independent set when the MAC
//!    is enabled);
//! 2. broadcast: each transmitter infects each vulnerable neighbor
//!    independently with probability `infection_rate`;
//! 3. patch: every node infected at the start of the step, transmitter or
//!    blocked, becomes immune with probability `patching_rate`.
//!
//! Nodes infected during a step join the infected list at the next step.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::{Graph, NodeId};
use crate::seed::{rng_from_seed, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeState {
    Vulnerable,
    Infected,
    Immune,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    infection_rate: f64,
    patching_rate: f64,
    mac_enabled: bool,
}

impl EpidemicParams {
    pub fn new(infection_rate: f64, patching_rate: f64, mac_enabled: bool) -> Result<Self> {
        if !(0.0..=1.0).contains(&infection_rate) {
            return Err(invalid(
                "infection_rate",
                format!("infection_rate out of [0,1]: {infection_rate}"),
            ));
        }
        if !(patching_rate > 0.0 && patching_rate <= 1.0) {
            return Err(invalid(
                "patching_rate",
                format!("patching_rate out of (0,1]: {patching_rate}"),
            ));
        }
        Ok(Self {
            infection_rate,
            patching_rate,
            mac_enabled,
        })
    }

    pub fn infection_rate(&self) -> f64 {
        self.infection_rate
    }

    pub fn patching_rate(&self) -> f64 {
        self.patching_rate
    }

    pub fn mac_enabled(&self) -> bool {
        self.mac_enabled
    }
}

/// Compartment sizes at one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub vulnerable: u32,
    pub infected: u32,
    pub immune: u32,
}

/// Full trajectory of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// `S(t)` for `t = 0..=duration`.
    pub series_s: Vec<u32>,
    pub series_i: Vec<u32>,
    pub series_r: Vec<u32>,
    pub final_recovered: u32,
    pub duration: u32,
    pub seed_node: NodeId,
    pub rng_seed: u64,
}

impl RunRecord {
    pub fn final_fraction(&self) -> f64 {
        self.final_recovered as f64 / (self.series_s[0] + self.series_i[0] + self.series_r[0]) as f64
    }
}

/// Greedy listen-before-talk selection.
///
/// Shuffles the infected nodes, then walks the list: the first node still
/// on it transmits and all of its neighbors drop off. The result is a
/// maximal independent set of the infected subgraph.
pub fn mac_select<R: Rng + ?Sized>(g: &Graph, infected: &[NodeId], rng: &mut R) -> Vec<NodeId> {
    let mut scratch = MacScratch::new(g.node_count());
    let mut order = infected.to_vec();
    let mut out = Vec::new();
    scratch.select(g, &mut order, rng, &mut out);
    out
}

/// Epoch-stamped "blocked" marks, reusable across steps without clearing.
#[derive(Debug, Clone)]
struct MacScratch {
    stamp: Vec<u32>,
    epoch: u32,
}

impl MacScratch {
    fn new(n: usize) -> Self {
        Self {
            stamp: vec![0; n],
            epoch: 0,
        }
    }

    fn select<R: Rng + ?Sized>(
        &mut self,
        g: &Graph,
        order: &mut [NodeId],
        rng: &mut R,
        out: &mut Vec<NodeId>,
    ) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.fill(0);
            self.epoch = 1;
        }
        order.shuffle(rng);
        out.clear();
        for &v in order.iter() {
            if self.stamp[v as usize] == self.epoch {
                continue;
            }
            out.push(v);
            for &u in g.neighbors(v) {
                self.stamp[u as usize] = self.epoch;
            }
        }
    }
}

/// Reusable simulation state for one graph and parameter set.
#[derive(Debug, Clone)]
pub struct Epidemic<'g> {
    graph: &'g Graph,
    params: EpidemicParams,
    /// `ln(1 - infection_rate)`, for geometric skipping over neighbors.
    log_escape: f64,
    states: Vec<NodeState>,
    infected: Vec<NodeId>,
    next_infected: Vec<NodeId>,
    transmitters: Vec<NodeId>,
    order: Vec<NodeId>,
    touched: Vec<NodeId>,
    mac: MacScratch,
    counts: Counts,
}

impl<'g> Epidemic<'g> {
    pub fn new(graph: &'g Graph, params: EpidemicParams) -> Self {
        let n = graph.node_count();
        Self {
            graph,
            params,
            log_escape: (1.0 - params.infection_rate).ln(),
            states: vec![NodeState::Vulnerable; n],
            infected: Vec::new(),
            next_infected: Vec::new(),
            transmitters: Vec::new(),
            order: Vec::new(),
            touched: Vec::new(),
            mac: MacScratch::new(if params.mac_enabled { n } else { 0 }),
            counts: Counts::default(),
        }
    }

    /// Resets to a single infected seed and everyone else vulnerable.
    pub fn reset(&mut self, seed_node: NodeId) {
        for &v in &self.touched {
            self.states[v as usize] = NodeState::Vulnerable;
        }
        self.touched.clear();
        self.infected.clear();
        self.states[seed_node as usize] = NodeState::Infected;
        self.infected.push(seed_node);
        self.touched.push(seed_node);
        self.counts = Counts {
            vulnerable: self.graph.node_count() as u32 - 1,
            infected: 1,
            immune: 0,
        };
    }

    pub fn states(&self) -> &[NodeState] {
        &self.states
    }

    pub fn counts(&self) -> Counts {
        self.counts
    }

    /// Nodes infected at the start of the next step.
    pub fn infected(&self) -> &[NodeId] {
        &self.infected
    }

    /// Advances one timestep and returns the new tallies.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Counts {
        let g = self.graph;
        let p = self.params;

        // channel access
        let transmitters: &[NodeId] = if p.mac_enabled {
            self.order.clear();
            self.order.extend_from_slice(&self.infected);
            self.mac
                .select(g, &mut self.order, rng, &mut self.transmitters);
            &self.transmitters
        } else {
            &self.infected
        };

        // broadcast round
        self.next_infected.clear();
        let mut newly = 0u32;
        if p.infection_rate > 0.0 {
            for &t in transmitters {
                let nbrs = g.neighbors(t);
                let mut idx = if p.infection_rate >= 1.0 {
                    0
                } else {
                    geometric_skip(rng, self.log_escape)
                };
                while idx < nbrs.len() {
                    let u = nbrs[idx];
                    if self.states[u as usize] == NodeState::Vulnerable {
                        self.states[u as usize] = NodeState::Infected;
                        self.next_infected.push(u);
                        self.touched.push(u);
                        newly += 1;
                    }
                    idx += 1;
                    if p.infection_rate < 1.0 {
                        idx = idx.saturating_add(geometric_skip(rng, self.log_escape));
                    }
                }
            }
        }

        // patching round over the start-of-step infected list
        let mut patched = 0u32;
        if p.patching_rate >= 1.0 {
            for &v in &self.infected {
                self.states[v as usize] = NodeState::Immune;
            }
            patched = self.infected.len() as u32;
            self.infected.clear();
        } else {
            let states = &mut self.states;
            self.infected.retain(|&v| {
                if rng.random::<f64>() < p.patching_rate {
                    states[v as usize] = NodeState::Immune;
                    patched += 1;
                    false
                } else {
                    true
                }
            });
        }
        self.infected.extend_from_slice(&self.next_infected);

        self.counts.vulnerable -= newly;
        self.counts.infected = self.counts.infected + newly - patched;
        self.counts.immune += patched;
        self.counts
    }

    /// Runs from `seed_node` until no node is infected.
    pub fn run<R: Rng + ?Sized>(&mut self, seed_node: NodeId, rng: &mut R) -> Trajectory {
        self.reset(seed_node);
        let mut traj = Trajectory::default();
        traj.push(self.counts);
        while self.counts.infected > 0 {
            let c = self.step(rng);
            traj.push(c);
        }
        traj
    }
}

/// Number of failed Bernoulli trials before the next success.
#[inline]
fn geometric_skip<R: Rng + ?Sized>(rng: &mut R, log_escape: f64) -> usize {
    let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let k = (u.ln() / log_escape).floor();
    if k >= usize::MAX as f64 {
        usize::MAX
    } else {
        k as usize
    }
}

/// Compartment series of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub s: Vec<u32>,
    pub i: Vec<u32>,
    pub r: Vec<u32>,
}

impl Trajectory {
    fn push(&mut self, c: Counts) {
        self.s.push(c.vulnerable);
        self.i.push(c.infected);
        self.r.push(c.immune);
    }
}

/// One complete run from a single infected seed with its own rng stream.
pub fn run(g: &Graph, p: &EpidemicParams, seed_node: NodeId, rng_seed: u64) -> Result<RunRecord> {
    if seed_node as usize >= g.node_count() {
        return Err(invalid(
            "seed_node",
            format!("{seed_node} is not a node of a {}-node graph", g.node_count()),
        ));
    }
    let mut sim = Epidemic::new(g, *p);
    let mut rng = rng_from_seed(rng_seed);
    Ok(run_with(&mut sim, seed_node, rng_seed, &mut rng))
}

pub(crate) fn run_with(
    sim: &mut Epidemic<'_>,
    seed_node: NodeId,
    rng_seed: u64,
    rng: &mut SimRng,
) -> RunRecord {
    let traj = sim.run(seed_node, rng);
    let duration = (traj.s.len() - 1) as u32;
    RunRecord {
        final_recovered: *traj.r.last().unwrap(),
        series_s: traj.s,
        series_i: traj.i,
        series_r: traj.r,
        duration,
        seed_node,
        rng_seed,
    }
}
