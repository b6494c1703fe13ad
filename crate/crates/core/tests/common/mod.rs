//! Oracles shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use wormsim_core::geometry::toroidal_distance;
use wormsim_core::seed::{rng_from_seed, SimRng};
use wormsim_core::{
    generate_rgg, mac_select, Epidemic, EpidemicParams, Graph, GraphKind, NetworkConfig, NodeId,
    NodeState,
};

pub fn rng(seed: u64) -> SimRng {
    rng_from_seed(seed)
}

/// Erdos-Renyi by flipping every pair; small graphs only.
pub fn random_graph<R: Rng>(n: usize, p: f64, rng: &mut R) -> Graph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < p {
                edges.push((a as NodeId, b as NodeId));
            }
        }
    }
    Graph::from_edges(n, &edges, GraphKind::Er)
}

/// `Err` describes the first violation of independence, maximality or
/// containment.
pub fn check_mis(g: &Graph, infected: &[NodeId], chosen: &[NodeId]) -> Result<(), String> {
    let mut is_inf = vec![false; g.node_count()];
    let mut is_sel = vec![false; g.node_count()];
    for &v in infected {
        is_inf[v as usize] = true;
    }
    for &v in chosen {
        if !is_inf[v as usize] {
            return Err(format!("{v} transmits but is not infected"));
        }
        if is_sel[v as usize] {
            return Err(format!("{v} selected twice"));
        }
        is_sel[v as usize] = true;
    }
    for &v in chosen {
        if let Some(u) = g.neighbors(v).iter().find(|&&u| is_sel[u as usize]) {
            return Err(format!("neighbors {v} and {u} both transmit"));
        }
    }
    for &v in infected {
        if !is_sel[v as usize] && !g.neighbors(v).iter().any(|&u| is_sel[u as usize]) {
            return Err(format!("{v} could transmit but was left silent"));
        }
    }
    Ok(())
}

/// Random graph plus random infected subset, then a MIS check.
pub fn mac_instance(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.random_range(1..60);
    let p = r.random::<f64>() * 0.5;
    let g = random_graph(n, p, &mut r);
    let mut nodes: Vec<NodeId> = (0..n as NodeId).collect();
    nodes.shuffle(&mut r);
    nodes.truncate(r.random_range(0..=n));
    let chosen = mac_select(&g, &nodes, &mut r);
    check_mis(&g, &nodes, &chosen)
}

/// Steps a run and checks conservation, monotonicity and that the tallies
/// agree with the node states.
pub fn check_run(g: &Graph, params: EpidemicParams, seed_node: NodeId, rng_seed: u64) -> Result<(), String> {
    let mut sim = Epidemic::new(g, params);
    let mut r = rng(rng_seed);
    sim.reset(seed_node);
    let n = g.node_count() as u32;
    let mut prev = sim.counts();
    let mut prev_states = sim.states().to_vec();
    for step in 0..100_000 {
        if prev.infected == 0 {
            return Ok(());
        }
        let c = sim.step(&mut r);
        if c.vulnerable + c.infected + c.immune != n {
            return Err(format!("step {step}: S+I+R = {} != {n}", c.vulnerable + c.infected + c.immune));
        }
        if c.vulnerable > prev.vulnerable || c.immune < prev.immune {
            return Err(format!("step {step}: S rose or R fell"));
        }
        let states = sim.states();
        let tally = |s| states.iter().filter(|&&x| x == s).count() as u32;
        if tally(NodeState::Vulnerable) != c.vulnerable
            || tally(NodeState::Infected) != c.infected
            || tally(NodeState::Immune) != c.immune
        {
            return Err(format!("step {step}: counts disagree with states"));
        }
        for (a, b) in prev_states.iter().zip(states) {
            let ok = matches!(
                (a, b),
                (NodeState::Vulnerable, _)
                    | (NodeState::Infected, NodeState::Infected | NodeState::Immune)
                    | (NodeState::Immune, NodeState::Immune)
            );
            if !ok {
                return Err(format!("step {step}: illegal transition {a:?} -> {b:?}"));
            }
        }
        prev = c;
        prev_states = states.to_vec();
    }
    Err("run did not terminate".into())
}

/// Builds an RGG and compares every pair against the distance rule.
pub fn rgg_matches_brute_force(n: usize, side: f64, range: f64, periodic: bool, seed: u64) -> Result<(), String> {
    let cfg = NetworkConfig::new(n, side, range, periodic).map_err(|e| e.to_string())?;
    let g = generate_rgg(&cfg, &mut rng(seed));
    let pos = g.positions().unwrap();
    let mut expected = 0;
    for a in 0..n {
        for b in a + 1..n {
            let near = toroidal_distance(pos[a], pos[b], side, periodic) <= range;
            expected += near as usize;
            if near != g.has_edge(a as NodeId, b as NodeId) {
                return Err(format!("pair ({a},{b}) disagrees"));
            }
        }
    }
    if expected != g.edge_count() {
        return Err(format!("{} edges, expected {expected}", g.edge_count()));
    }
    Ok(())
}

/// Joint law of (final recovered count, duration) for lambda in {0, 1},
/// delta = 1, computed by enumerating every shuffle order of the MAC.
pub fn exact_outcomes(g: &Graph, lambda_one: bool, mac: bool, seed: NodeId) -> BTreeMap<(u32, u32), f64> {
    let n = g.node_count();
    assert!(n <= 8);
    let adj: Vec<u32> = (0..n)
        .map(|v| g.neighbors(v as NodeId).iter().fold(0, |m, &u| m | 1 << u))
        .collect();
    let mut out = BTreeMap::new();
    walk(&adj, lambda_one, mac, !0 ^ (1 << seed), 1 << seed, 0, 0, 1.0, &mut out);
    out.retain(|_, p| *p > 0.0);
    out
}

#[allow(clippy::too_many_arguments)]
fn walk(
    adj: &[u32],
    lambda_one: bool,
    mac: bool,
    sus: u32,
    inf: u32,
    rec: u32,
    t: u32,
    prob: f64,
    out: &mut BTreeMap<(u32, u32), f64>,
) {
    if inf == 0 {
        *out.entry((rec.count_ones(), t)).or_default() += prob;
        return;
    }
    let nodes: Vec<usize> = (0..adj.len()).filter(|&v| inf >> v & 1 == 1).collect();
    let mut senders: BTreeMap<u32, f64> = BTreeMap::new();
    if mac {
        let perms = permutations(&nodes);
        let w = 1.0 / perms.len() as f64;
        for perm in perms {
            let (mut sel, mut blocked) = (0u32, 0u32);
            for v in perm {
                if blocked >> v & 1 == 0 {
                    sel |= 1 << v;
                    blocked |= adj[v];
                }
            }
            *senders.entry(sel).or_default() += w;
        }
    } else {
        senders.insert(inf, 1.0);
    }
    for (sel, w) in senders {
        let reached = if lambda_one {
            (0..adj.len()).filter(|&v| sel >> v & 1 == 1).fold(0, |m, v| m | adj[v])
        } else {
            0
        };
        let new = reached & sus & ((1u32 << adj.len()) - 1);
        walk(adj, lambda_one, mac, sus & !new, new, rec | inf, t + 1, prob * w, out);
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Graphs on at most six nodes used by the enumeration oracle.
pub fn small_graphs() -> Vec<(&'static str, Graph)> {
    let g = |n, e: &[(NodeId, NodeId)]| Graph::from_edges(n, e, GraphKind::Er);
    let mut r = rng(99);
    vec![
        ("single", g(1, &[])),
        ("path4", g(4, &[(0, 1), (1, 2), (2, 3)])),
        ("star5", g(5, &[(0, 1), (0, 2), (0, 3), (0, 4)])),
        ("cycle5", g(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)])),
        ("k4", g(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])),
        ("bowtie", g(5, &[(0, 1), (0, 2), (1, 2), (2, 3), (2, 4), (3, 4)])),
        ("random6a", random_graph(6, 0.5, &mut r)),
        ("random6b", random_graph(6, 0.4, &mut r)),
    ]
}

/// Simulated outcome frequencies against the enumeration, at 3 sigma.
/// Returns the largest standardized deviation seen.
pub fn enumeration_agreement(g: &Graph, lambda_one: bool, mac: bool, runs: u32, seed: u64) -> Result<f64, String> {
    let lambda = if lambda_one { 1.0 } else { 0.0 };
    let params = EpidemicParams::new(lambda, 1.0, mac).unwrap();
    let mut worst: f64 = 0.0;
    for start in 0..g.node_count() as NodeId {
        let exact = exact_outcomes(g, lambda_one, mac, start);
        let mut seen: BTreeMap<(u32, u32), u32> = BTreeMap::new();
        let mut sim = Epidemic::new(g, params);
        let mut r = rng(seed ^ start as u64);
        for _ in 0..runs {
            let traj = sim.run(start, &mut r);
            let key = (*traj.r.last().unwrap(), traj.r.len() as u32 - 1);
            *seen.entry(key).or_default() += 1;
        }
        for key in seen.keys() {
            if !exact.contains_key(key) {
                return Err(format!("start {start}: impossible outcome {key:?}"));
            }
        }
        for (key, p) in &exact {
            let freq = *seen.get(key).unwrap_or(&0) as f64 / runs as f64;
            let sigma = (p * (1.0 - p) / runs as f64).sqrt();
            if sigma == 0.0 {
                if freq != *p {
                    return Err(format!("start {start}: {key:?} certain but seen at {freq}"));
                }
                continue;
            }
            let z = (freq - p).abs() / sigma;
            worst = worst.max(z);
            if z > 3.0 {
                return Err(format!("start {start}: {key:?} exact {p:.4} observed {freq:.4} (z = {z:.2})"));
            }
        }
    }
    Ok(worst)
}
