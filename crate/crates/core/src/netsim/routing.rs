//! Vertex-disjoint path selection via unit-capacity max-flow.
//!
//! Every graph node is split into an in/out pair with capacity one, so
//! augmenting flow paths correspond to pairwise vertex-disjoint routes
//! (Menger). A virtual source feeds the sender attachment points, a virtual
//! sink drains the receiver attachment points; BFS augmentation keeps the
//! single-path case on a shortest route.

use crate::protocol::NodeId;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("graph admits only {found} vertex-disjoint routes, {requested} requested")]
pub struct NoSuchRoutes {
    pub requested: usize,
    pub found: usize,
}

pub type Adjacency = BTreeMap<NodeId, BTreeSet<NodeId>>;

struct Edge {
    to: usize,
    cap: u32,
}

struct FlowGraph {
    edges: Vec<Edge>,
    out: Vec<Vec<usize>>,
}

impl FlowGraph {
    fn new(vertices: usize) -> FlowGraph {
        FlowGraph {
            edges: Vec::new(),
            out: vec![Vec::new(); vertices],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: u32) {
        self.out[from].push(self.edges.len());
        self.edges.push(Edge { to, cap });
        self.out[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0 });
    }

    /// One BFS augmentation of unit flow; true if the sink was reached.
    fn augment(&mut self, source: usize, sink: usize) -> bool {
        let mut prev_edge = vec![usize::MAX; self.out.len()];
        let mut visited = vec![false; self.out.len()];
        visited[source] = true;
        let mut queue = VecDeque::from([source]);
        'bfs: while let Some(v) = queue.pop_front() {
            for &e in &self.out[v] {
                let Edge { to, cap } = self.edges[e];
                if cap > 0 && !visited[to] {
                    visited[to] = true;
                    prev_edge[to] = e;
                    if to == sink {
                        break 'bfs;
                    }
                    queue.push_back(to);
                }
            }
        }
        if !visited[sink] {
            return false;
        }
        let mut v = sink;
        while v != source {
            let e = prev_edge[v];
            self.edges[e].cap -= 1;
            self.edges[e ^ 1].cap += 1;
            v = self.edges[e ^ 1].to;
        }
        true
    }
}

/// Finds `k` pairwise vertex-disjoint routes from the sender attachments to
/// the receiver attachments. Routes are sequences of repeater ids including
/// entry and exit.
pub fn find_disjoint_paths(
    adjacency: &Adjacency,
    sender_attach: &[NodeId],
    receiver_attach: &[NodeId],
    k: usize,
) -> Result<Vec<Vec<NodeId>>, NoSuchRoutes> {
    assert!(k >= 1, "at least one path must be requested");
    let ids: Vec<&NodeId> = adjacency.keys().collect();
    let index: BTreeMap<&NodeId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let n = ids.len();
    // vertex v -> in node 2v, out node 2v+1; source 2n, sink 2n+1
    let (source, sink) = (2 * n, 2 * n + 1);
    let mut g = FlowGraph::new(2 * n + 2);
    for v in 0..n {
        g.add_edge(2 * v, 2 * v + 1, 1);
    }
    for (from, neighbors) in adjacency {
        let f = index[from];
        for to in neighbors {
            let t = index[to];
            g.add_edge(2 * f + 1, 2 * t, 1);
        }
    }
    for entry in sender_attach {
        if let Some(&v) = index.get(entry) {
            g.add_edge(source, 2 * v, 1);
        }
    }
    for exit in receiver_attach {
        if let Some(&v) = index.get(exit) {
            g.add_edge(2 * v + 1, sink, 1);
        }
    }

    let mut flow = 0;
    while flow < k && g.augment(source, sink) {
        flow += 1;
    }
    if flow < k {
        return Err(NoSuchRoutes {
            requested: k,
            found: flow,
        });
    }

    // Extract paths by walking saturated forward edges from the source,
    // consuming flow as we go.
    let mut used = vec![false; g.edges.len()];
    let mut routes = Vec::with_capacity(k);
    for _ in 0..k {
        let mut route = Vec::new();
        let mut v = source;
        while v != sink {
            let e = g.out[v]
                .iter()
                .copied()
                .find(|&e| e % 2 == 0 && !used[e] && g.edges[e].cap == 0)
                .expect("saturated edge exists for every unit of flow");
            used[e] = true;
            v = g.edges[e].to;
            if v != sink && v % 2 == 0 {
                route.push(ids[v / 2].clone());
            }
        }
        routes.push(route);
    }
    Ok(routes)
}

/// Independent validity checker: adjacency, attachment endpoints, loop
/// freedom and pairwise vertex-disjointness. Run on every routing result.
pub fn check_disjoint_routes(
    adjacency: &Adjacency,
    sender_attach: &[NodeId],
    receiver_attach: &[NodeId],
    routes: &[Vec<NodeId>],
    k: usize,
) -> Result<(), String> {
    if routes.len() != k {
        return Err(format!("expected {k} routes, got {}", routes.len()));
    }
    let mut all_nodes: BTreeSet<&NodeId> = BTreeSet::new();
    for (i, route) in routes.iter().enumerate() {
        if route.is_empty() {
            return Err(format!("route {i} is empty"));
        }
        if !sender_attach.contains(&route[0]) {
            return Err(format!("route {i} does not start at a sender attachment"));
        }
        if !receiver_attach.contains(route.last().unwrap()) {
            return Err(format!("route {i} does not end at a receiver attachment"));
        }
        let mut seen = BTreeSet::new();
        for node in route {
            if !adjacency.contains_key(node) {
                return Err(format!("route {i} visits unknown node {node}"));
            }
            if !seen.insert(node) {
                return Err(format!("route {i} repeats node {node}"));
            }
            if !all_nodes.insert(node) {
                return Err(format!("node {node} appears on two routes"));
            }
        }
        for pair in route.windows(2) {
            if !adjacency[&pair[0]].contains(&pair[1]) {
                return Err(format!("route {i}: {} and {} are not adjacent", pair[0], pair[1]));
            }
        }
    }
    Ok(())
}
