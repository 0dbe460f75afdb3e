//! Shortest paths, prefix route candidates and their time-indexed occupancy.
//!
//! Time is measured in abstract steps: one step moves an AGV across exactly
//! one edge. A candidate starting at the AGV's node is a prefix of the
//! current task's shortest path, from "stop" up to `horizon` hops.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::plant::{NodeIx, Topology};

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("no path from {origin} to {destination}")]
    Unreachable { origin: String, destination: String },
    #[error("no route entry for node {node} and task {origin}->{destination}")]
    MissingEntry {
        node: String,
        origin: String,
        destination: String,
    },
    #[error("horizon {requested} exceeds the database horizon {stored}")]
    HorizonTooLong { requested: usize, stored: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    pub nodes: Vec<NodeIx>,
    pub hop_count: usize,
}

/// Minimum-hop path. Among equal-length paths the lexicographically smallest
/// node-index sequence wins, so results are stable across runs.
pub fn shortest_path(topo: &Topology, origin: NodeIx, dest: NodeIx) -> Result<Path, RoutingError> {
    let dist = topo.hop_distances(dest);
    let Some(hops) = dist[origin.0] else {
        return Err(RoutingError::Unreachable {
            origin: topo.id(origin).to_string(),
            destination: topo.id(dest).to_string(),
        });
    };
    let mut nodes = Vec::with_capacity(hops + 1);
    let mut at = origin;
    nodes.push(at);
    for remaining in (0..hops).rev() {
        // Neighbors are sorted, so the first match is the smallest index.
        at = *topo
            .neighbors(at)
            .iter()
            .find(|v| dist[v.0] == Some(remaining))
            .expect("BFS layers are connected");
        nodes.push(at);
    }
    Ok(Path {
        nodes,
        hop_count: hops,
    })
}

/// Something an AGV can hold during one step.
///
/// Edge resources are unordered pairs, so a head-on swap conflicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Resource {
    Edge(NodeIx, NodeIx),
    Node(NodeIx),
}

impl Resource {
    pub fn edge(a: NodeIx, b: NodeIx) -> Self {
        Resource::Edge(a.min(b), a.max(b))
    }

    pub fn is_edge(&self) -> bool {
        matches!(self, Resource::Edge(..))
    }

    pub fn describe(&self, topo: &Topology) -> String {
        match *self {
            Resource::Edge(a, b) => format!("edge{{{},{}}}", topo.id(a), topo.id(b)),
            Resource::Node(n) => format!("node {}", topo.id(n)),
        }
    }
}

/// The occupancy tensor row of one candidate: exactly one resource per step.
///
/// Step `t` (1-based) in `1..=d` holds the traversed edge; later steps hold
/// the final node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occupancy {
    marks: Vec<Resource>,
}

impl Occupancy {
    pub fn horizon(&self) -> usize {
        self.marks.len()
    }

    /// Resource held at step `t` in `1..=horizon`.
    pub fn at(&self, t: usize) -> Resource {
        self.marks[t - 1]
    }

    /// `(t, resource)` pairs in step order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, Resource)> + '_ {
        self.marks.iter().enumerate().map(|(i, r)| (i + 1, *r))
    }

    pub fn edge_marks(&self) -> usize {
        self.marks.iter().filter(|r| r.is_edge()).count()
    }
}

/// Occupancy of the route `nodes` over steps `1..=horizon`.
pub fn occupancy(nodes: &[NodeIx], horizon: usize) -> Occupancy {
    let d = nodes.len() - 1;
    let marks = (1..=horizon)
        .map(|t| {
            if t <= d {
                Resource::edge(nodes[t - 1], nodes[t])
            } else {
                Resource::Node(nodes[d])
            }
        })
        .collect();
    Occupancy { marks }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteCandidate {
    /// Index within the owning AGV's candidate list for this round.
    pub mu: usize,
    pub agv: usize,
    pub nodes: Vec<NodeIx>,
    /// Hops travelled within the horizon.
    pub d: usize,
    pub occupancy: Occupancy,
    /// Extra reward added by the queue-priority variant; zero otherwise.
    pub bonus: f64,
}

impl RouteCandidate {
    pub fn new(agv: usize, mu: usize, nodes: Vec<NodeIx>, horizon: usize) -> Self {
        assert!(!nodes.is_empty() && nodes.len() - 1 <= horizon);
        let occupancy = occupancy(&nodes, horizon);
        RouteCandidate {
            mu,
            agv,
            d: nodes.len() - 1,
            nodes,
            occupancy,
            bonus: 0.0,
        }
    }

    pub fn reward(&self) -> f64 {
        self.d as f64 + self.bonus
    }

    pub fn horizon(&self) -> usize {
        self.occupancy.horizon()
    }

    pub fn is_stop(&self) -> bool {
        self.d == 0
    }

    /// Node occupied at the end of step `t` (step 0 is the start).
    pub fn position_at(&self, t: usize) -> NodeIx {
        self.nodes[t.min(self.d)]
    }

    /// True when the AGV enters `position_at(t)` during step `t`.
    pub fn arrives_at(&self, t: usize) -> bool {
        t >= 1 && t <= self.d
    }

    /// Every resource physically held: the occupancy marks plus the node
    /// entered on each moving step. Two AGVs collide iff they share a claim.
    pub fn claims(&self) -> impl Iterator<Item = (usize, Resource)> + '_ {
        self.occupancy
            .iter()
            .chain((1..=self.d).map(move |t| (t, Resource::Node(self.nodes[t]))))
    }
}

/// A task in index form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskKey {
    pub origin: NodeIx,
    pub destination: NodeIx,
}

/// Precomputed route prefixes keyed by (current node, task).
#[derive(Debug, Clone)]
pub struct RouteDatabase {
    horizon: usize,
    entries: HashMap<(NodeIx, TaskKey), Vec<Vec<NodeIx>>>,
    paths: HashMap<TaskKey, Path>,
}

impl RouteDatabase {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn path(&self, task: TaskKey) -> Option<&Path> {
        self.paths.get(&task)
    }

    /// Prefix templates for an AGV at `node` working on `task`, stop first.
    pub fn templates(&self, node: NodeIx, task: TaskKey) -> Option<&[Vec<NodeIx>]> {
        self.entries.get(&(node, task)).map(Vec::as_slice)
    }

    /// Next hop along the stored path, `None` at the destination.
    pub fn next_hop(&self, node: NodeIx, task: TaskKey) -> Option<NodeIx> {
        self.templates(node, task)
            .and_then(|t| t.get(1))
            .map(|route| route[1])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Human-readable dump, sorted by task then node.
    pub fn listing(&self, topo: &Topology) -> String {
        let mut keys: Vec<_> = self.entries.keys().copied().collect();
        keys.sort_by_key(|(node, task)| (*task, *node));
        let name = |route: &Vec<NodeIx>| {
            let ids: Vec<String> = route.iter().map(|n| topo.id(*n).to_string()).collect();
            format!("{{{}}}", ids.join(","))
        };
        let mut out = String::new();
        for (node, task) in keys {
            let routes: Vec<String> = self.entries[&(node, task)].iter().map(name).collect();
            let _ = writeln!(
                out,
                "task {}->{} at {}: {}",
                topo.id(task.origin),
                topo.id(task.destination),
                topo.id(node),
                routes.join(" ")
            );
        }
        out
    }
}

/// Stores, for every node along every task's shortest path, the route
/// prefixes reachable within `horizon` steps.
pub fn build_route_db(
    topo: &Topology,
    tasks: &[TaskKey],
    horizon: usize,
) -> Result<RouteDatabase, RoutingError> {
    let mut entries = HashMap::new();
    let mut paths = HashMap::new();
    for &task in tasks {
        if paths.contains_key(&task) {
            continue;
        }
        let path = shortest_path(topo, task.origin, task.destination)?;
        for (i, &node) in path.nodes.iter().enumerate() {
            let rest = &path.nodes[i..];
            let longest = (rest.len() - 1).min(horizon);
            let prefixes = (0..=longest).map(|k| rest[..=k].to_vec()).collect();
            entries.insert((node, task), prefixes);
        }
        paths.insert(task, path);
    }
    Ok(RouteDatabase {
        horizon,
        entries,
        paths,
    })
}

/// Candidates for one AGV this round, numbered `0..m` with the stop route first.
pub fn candidate_routes(
    db: &RouteDatabase,
    topo: &Topology,
    agv: usize,
    node: NodeIx,
    task: TaskKey,
    horizon: usize,
) -> Result<Vec<RouteCandidate>, RoutingError> {
    if horizon > db.horizon {
        return Err(RoutingError::HorizonTooLong {
            requested: horizon,
            stored: db.horizon,
        });
    }
    let templates = db
        .templates(node, task)
        .ok_or_else(|| RoutingError::MissingEntry {
            node: topo.id(node).to_string(),
            origin: topo.id(task.origin).to_string(),
            destination: topo.id(task.destination).to_string(),
        })?;
    Ok(templates
        .iter()
        .filter(|route| route.len() - 1 <= horizon)
        .enumerate()
        .map(|(mu, route)| RouteCandidate::new(agv, mu, route.clone(), horizon))
        .collect())
}
