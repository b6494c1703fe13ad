//! Immutable undirected graphs: random geometric graphs built on a uniform
//! cell grid, degree-matched Erdős–Rényi baselines, and topology metrics.

use std::collections::{BTreeMap, VecDeque};
use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{squared_distance, NetworkConfig, Position};

pub type NodeId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GraphKind {
    /// Random geometric graph.
    Rgg,
    /// Erdős–Rényi G(N, p).
    Er,
}

/// Compressed adjacency with sorted neighbor lists.
///
/// Shared read-only by every Monte Carlo run on the instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    kind: GraphKind,
    config: Option<NetworkConfig>,
    positions: Option<Vec<Position>>,
    offsets: Vec<usize>,
    neighbors: Vec<NodeId>,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Self-loops and duplicate
    /// edges are dropped.
    pub fn from_edges(node_count: usize, edges: &[(NodeId, NodeId)], kind: GraphKind) -> Self {
        let mut degree = vec![0usize; node_count];
        for &(a, b) in edges {
            if a != b {
                degree[a as usize] += 1;
                degree[b as usize] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..node_count].to_vec();
        let mut neighbors = vec![0; offsets[node_count]];
        for &(a, b) in edges {
            if a != b {
                neighbors[fill[a as usize]] = b;
                fill[a as usize] += 1;
                neighbors[fill[b as usize]] = a;
                fill[b as usize] += 1;
            }
        }
        // sort and dedup each list, then compact
        let mut compact = Vec::with_capacity(neighbors.len());
        let mut new_offsets = Vec::with_capacity(node_count + 1);
        new_offsets.push(0);
        for v in 0..node_count {
            let list = &mut neighbors[offsets[v]..offsets[v + 1]];
            list.sort_unstable();
            let start = compact.len();
            for &u in list.iter() {
                if compact.len() == start || *compact.last().unwrap() != u {
                    compact.push(u);
                }
            }
            new_offsets.push(compact.len());
        }
        Self {
            kind,
            config: None,
            positions: None,
            offsets: new_offsets,
            neighbors: compact,
        }
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    /// Geometry of the instance; `None` for Erdős–Rényi graphs.
    pub fn config(&self) -> Option<&NetworkConfig> {
        self.config.as_ref()
    }

    pub fn positions(&self) -> Option<&[Position]> {
        self.positions.as_deref()
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        let v = v as usize;
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: NodeId) -> usize {
        let v = v as usize;
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    /// Iterates each undirected edge once, as `(low, high)`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.node_count() as NodeId).flat_map(move |v| {
            self.neighbors(v)
                .iter()
                .filter(move |&&u| u > v)
                .map(move |&u| (v, u))
        })
    }

    /// Writes `i j` per undirected edge, 0-based.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (a, b) in self.edges() {
            writeln!(out, "{a} {b}")?;
        }
        Ok(())
    }

    /// Writes `i x y` per node. Writes nothing for graphs without positions.
    pub fn write_positions<W: Write>(&self, mut out: W) -> io::Result<()> {
        if let Some(pos) = &self.positions {
            for (i, p) in pos.iter().enumerate() {
                writeln!(out, "{i} {} {}", p.x, p.y)?;
            }
        }
        Ok(())
    }
}

/// Uniform grid over the square with cells at least `r_t` wide, nodes
/// bucketed by cell with a counting sort.
struct CellGrid {
    cells_per_side: usize,
    cell_size: f64,
    cell_start: Vec<usize>,
    members: Vec<NodeId>,
}

impl CellGrid {
    fn new(positions: &[Position], side: f64, range: f64) -> Self {
        let cells_per_side = ((side / range).floor() as usize).max(1);
        let cell_size = side / cells_per_side as f64;
        let cell_of = |p: &Position| {
            let cx = ((p.x / cell_size) as usize).min(cells_per_side - 1);
            let cy = ((p.y / cell_size) as usize).min(cells_per_side - 1);
            cy * cells_per_side + cx
        };
        let n_cells = cells_per_side * cells_per_side;
        let mut cell_start = vec![0usize; n_cells + 1];
        for p in positions {
            cell_start[cell_of(p) + 1] += 1;
        }
        for c in 0..n_cells {
            cell_start[c + 1] += cell_start[c];
        }
        let mut fill = cell_start.clone();
        let mut members = vec![0; positions.len()];
        for (i, p) in positions.iter().enumerate() {
            let c = cell_of(p);
            members[fill[c]] = i as NodeId;
            fill[c] += 1;
        }
        Self {
            cells_per_side,
            cell_size,
            cell_start,
            members,
        }
    }

    fn coords(&self, p: &Position) -> (usize, usize) {
        let m = self.cells_per_side;
        (
            ((p.x / self.cell_size) as usize).min(m - 1),
            ((p.y / self.cell_size) as usize).min(m - 1),
        )
    }

    /// Distinct cell indices along one axis adjacent to `c` (inclusive).
    fn axis_neighbors(&self, c: usize, periodic: bool) -> ([usize; 3], usize) {
        let m = self.cells_per_side;
        let mut out = [0usize; 3];
        let mut len = 0;
        for d in [-1isize, 0, 1] {
            let raw = c as isize + d;
            let idx = if periodic {
                raw.rem_euclid(m as isize) as usize
            } else if raw < 0 || raw >= m as isize {
                continue;
            } else {
                raw as usize
            };
            if !out[..len].contains(&idx) {
                out[len] = idx;
                len += 1;
            }
        }
        (out, len)
    }

    fn cell(&self, cx: usize, cy: usize) -> &[NodeId] {
        let c = cy * self.cells_per_side + cx;
        &self.members[self.cell_start[c]..self.cell_start[c + 1]]
    }
}

/// Random geometric graph: an edge joins every pair at (toroidal) distance
/// at most `r_t`. Ties at exactly `r_t` are edges.
///
/// Candidate pairs come from the 3x3 block of grid cells around each node,
/// so the expected cost is linear in the number of edges.
pub fn build_rgg(positions: Vec<Position>, config: &NetworkConfig) -> Graph {
    assert_eq!(
        positions.len(),
        config.node_count(),
        "position count must match the configured node count"
    );
    let side = config.side_length();
    let periodic = config.periodic();
    let r2 = config.transmission_range() * config.transmission_range();
    let grid = CellGrid::new(&positions, side, config.transmission_range());

    let mut edges = Vec::new();
    for (i, p) in positions.iter().enumerate() {
        let i = i as NodeId;
        let (cx, cy) = grid.coords(p);
        let (xs, nx) = grid.axis_neighbors(cx, periodic);
        let (ys, ny) = grid.axis_neighbors(cy, periodic);
        for &gy in &ys[..ny] {
            for &gx in &xs[..nx] {
                for &j in grid.cell(gx, gy) {
                    if j > i && squared_distance(*p, positions[j as usize], side, periodic) <= r2 {
                        edges.push((i, j));
                    }
                }
            }
        }
    }
    let mut g = Graph::from_edges(positions.len(), &edges, GraphKind::Rgg);
    g.config = Some(*config);
    g.positions = Some(positions);
    g
}

/// Places nodes with `rng` and builds the geometric graph over them.
pub fn generate_rgg<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> Graph {
    let positions = crate::geometry::place_nodes(config, rng);
    build_rgg(positions, config)
}

/// Erdős–Rényi G(N, p) with `p = mean_degree / (N - 1)`, so the degree law
/// is Binomial(N - 1, p), i.e. Poisson(mean_degree) for large N.
///
/// Pairs are visited with geometric skipping, so cost is O(N + edges).
pub fn build_er_matched<R: Rng + ?Sized>(
    node_count: usize,
    mean_degree: f64,
    rng: &mut R,
) -> Result<Graph> {
    let max = node_count.saturating_sub(1) as f64;
    if !(mean_degree > 0.0 && mean_degree <= max) {
        return Err(invalid(
            "mean_degree",
            format!("must lie in (0, {max}] for {node_count} nodes, got {mean_degree}"),
        ));
    }
    let p = mean_degree / max;
    let mut edges = Vec::new();
    if p >= 1.0 {
        for a in 0..node_count as NodeId {
            for b in a + 1..node_count as NodeId {
                edges.push((a, b));
            }
        }
    } else {
        let log_q = (1.0 - p).ln();
        let n = node_count as i64;
        let mut v: i64 = 1;
        let mut w: i64 = -1;
        while v < n {
            let u: f64 = rng.random();
            let skip = ((1.0 - u).ln() / log_q).floor();
            // saturate absurd skips rather than overflowing
            w += 1 + if skip < n as f64 * n as f64 { skip as i64 } else { n * n };
            while w >= v && v < n {
                w -= v;
                v += 1;
            }
            if v < n {
                edges.push((w as NodeId, v as NodeId));
            }
        }
    }
    Ok(Graph::from_edges(node_count, &edges, GraphKind::Er))
}

/// Degree statistics, clustering and connectivity of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub degree_histogram: BTreeMap<usize, usize>,
    pub mean_degree: f64,
    /// Average local clustering over nodes of degree at least 2.
    pub clustering_coefficient: f64,
    pub connected: bool,
    pub giant_component_fraction: f64,
}

pub fn compute_metrics(g: &Graph) -> GraphMetrics {
    let n = g.node_count();
    let mut degree_histogram = BTreeMap::new();
    for v in 0..n as NodeId {
        *degree_histogram.entry(g.degree(v)).or_insert(0) += 1;
    }
    let mean_degree = 2.0 * g.edge_count() as f64 / n as f64;
    let giant = largest_component(g);
    GraphMetrics {
        degree_histogram,
        mean_degree,
        clustering_coefficient: average_clustering(g),
        connected: giant == n,
        giant_component_fraction: giant as f64 / n as f64,
    }
}

/// Local clustering of `v`: closed neighbor pairs over all neighbor pairs.
/// `None` below degree 2.
pub fn local_clustering(g: &Graph, v: NodeId) -> Option<f64> {
    let nbrs = g.neighbors(v);
    let d = nbrs.len();
    if d < 2 {
        return None;
    }
    let mut links = 0usize;
    for &u in nbrs {
        links += sorted_intersection_count(nbrs, g.neighbors(u));
    }
    // each link among neighbors counted from both ends
    Some(links as f64 / (d * (d - 1)) as f64)
}

fn sorted_intersection_count(a: &[NodeId], b: &[NodeId]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

fn average_clustering(g: &Graph) -> f64 {
    let (sum, count) = (0..g.node_count() as NodeId)
        .filter_map(|v| local_clustering(g, v))
        .fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Size of the largest connected component.
fn largest_component(g: &Graph) -> usize {
    let n = g.node_count();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    let mut best = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start as NodeId);
        let mut size = 0;
        while let Some(v) = queue.pop_front() {
            size += 1;
            for &u in g.neighbors(v) {
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    queue.push_back(u);
                }
            }
        }
        best = best.max(size);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::toroidal_distance;
    use crate::seed::rng_from_seed;

    fn brute_force(positions: &[Position], cfg: &NetworkConfig) -> Vec<Vec<NodeId>> {
        let n = positions.len();
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for j in 0..n {
                if i != j
                    && toroidal_distance(
                        positions[i],
                        positions[j],
                        cfg.side_length(),
                        cfg.periodic(),
                    ) <= cfg.transmission_range()
                {
                    adj[i].push(j as NodeId);
                }
            }
        }
        adj
    }

    #[test]
    fn tie_at_range_is_an_edge() {
        let cfg = NetworkConfig::new(2, 1000.0, 50.0, true).unwrap();
        let g = build_rgg(vec![Position::new(100.0, 100.0), Position::new(150.0, 100.0)], &cfg);
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn collinear_triple() {
        let cfg = NetworkConfig::new(3, 1000.0, 50.0, false).unwrap();
        let pts = vec![
            Position::new(0.0, 0.0),
            Position::new(40.0, 0.0),
            Position::new(80.0, 0.0),
        ];
        let g = build_rgg(pts, &cfg);
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn huge_range_without_wrap_is_complete() {
        let cfg = NetworkConfig::new(25, 100.0, 141.5, false).unwrap();
        let g = generate_rgg(&cfg, &mut rng_from_seed(4));
        assert_eq!(g.edge_count(), 25 * 24 / 2);
    }

    #[test]
    fn wrap_edge_across_boundary() {
        let cfg = NetworkConfig::new(2, 1000.0, 50.0, true).unwrap();
        let g = build_rgg(vec![Position::new(1.0, 500.0), Position::new(990.0, 505.0)], &cfg);
        assert!(g.has_edge(0, 1));
        let cfg = NetworkConfig::new(2, 1000.0, 50.0, false).unwrap();
        let g = build_rgg(vec![Position::new(1.0, 500.0), Position::new(990.0, 505.0)], &cfg);
        assert!(!g.has_edge(0, 1));
    }

    #[test]
    fn grid_matches_brute_force_small_boxes() {
        // few cells per side exercise the wrapped-index dedup
        for (seed, (n, side, r, periodic)) in [
            (200, 100.0, 30.0, true),
            (200, 100.0, 49.0, true),
            (150, 100.0, 34.0, false),
            (200, 1000.0, 50.0, true),
            (120, 10.0, 2.5, true),
        ]
        .into_iter()
        .enumerate()
        {
            let cfg = NetworkConfig::new(n, side, r, periodic).unwrap();
            let pts = crate::geometry::place_nodes(&cfg, &mut rng_from_seed(seed as u64));
            let expected = brute_force(&pts, &cfg);
            let g = build_rgg(pts, &cfg);
            for (v, want) in expected.iter().enumerate() {
                assert_eq!(g.neighbors(v as NodeId), &want[..], "node {v}");
            }
        }
    }

    #[test]
    fn triangle_and_path_clustering() {
        let tri = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)], GraphKind::Er);
        let m = compute_metrics(&tri);
        assert_eq!(m.clustering_coefficient, 1.0);
        assert!(m.connected);
        assert_eq!(m.mean_degree, 2.0);

        let path = Graph::from_edges(3, &[(0, 1), (1, 2)], GraphKind::Er);
        let m = compute_metrics(&path);
        assert_eq!(m.clustering_coefficient, 0.0);
        assert!(m.connected);
        assert_eq!(m.degree_histogram, BTreeMap::from([(1, 2), (2, 1)]));
    }

    #[test]
    fn disconnected_components() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (3, 4)], GraphKind::Er);
        let m = compute_metrics(&g);
        assert!(!m.connected);
        assert!((m.giant_component_fraction - 0.6).abs() < 1e-12);
    }

    #[test]
    fn from_edges_drops_loops_and_duplicates() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 0), (2, 2), (0, 1)], GraphKind::Er);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.neighbors(2), &[] as &[NodeId]);
    }

    #[test]
    fn er_rejects_bad_degree() {
        let mut rng = rng_from_seed(1);
        assert!(build_er_matched(100, 0.0, &mut rng).is_err());
        assert!(build_er_matched(100, 99.5, &mut rng).is_err());
        assert!(build_er_matched(1, 0.5, &mut rng).is_err());
    }

    #[test]
    fn er_full_probability_is_complete() {
        let g = build_er_matched(30, 29.0, &mut rng_from_seed(2)).unwrap();
        assert_eq!(g.edge_count(), 30 * 29 / 2);
        assert_eq!(g.kind(), GraphKind::Er);
        assert!(g.positions().is_none());
    }

    #[test]
    fn exports() {
        let cfg = NetworkConfig::new(3, 1000.0, 50.0, false).unwrap();
        let g = build_rgg(
            vec![
                Position::new(0.0, 0.0),
                Position::new(40.0, 0.0),
                Position::new(80.0, 0.5),
            ],
            &cfg,
        );
        let mut edges = Vec::new();
        g.write_edge_list(&mut edges).unwrap();
        assert_eq!(String::from_utf8(edges).unwrap(), "0 1\n1 2\n");
        let mut pos = Vec::new();
        g.write_positions(&mut pos).unwrap();
        assert_eq!(String::from_utf8(pos).unwrap(), "0 0 0\n1 40 0\n2 80 0.5\n");
    }
}
