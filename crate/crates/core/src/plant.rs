//! Plant graph and scenario model.
//!
//! A scenario document is TOML with four top-level sections: `graph.nodes`,
//! `graph.edges`, `agvs` and `params`. Loading only checks the document
//! shape; semantic problems are reported as data by [`validate_scenario`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bundled loop-plant fixture document.
pub const LOOP_PLANT: &str = include_str!("../fixtures/loop_plant.toml");

/// Textual node identifier as written in a scenario document.
///
/// Documents may use bare integers or strings; both are stored as text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "RawId", into = "String")]
pub struct NodeId(pub String);

#[derive(Deserialize)]
#[serde(untagged)]
enum RawId {
    Int(i64),
    Text(String),
}

impl From<RawId> for NodeId {
    fn from(raw: RawId) -> Self {
        match raw {
            RawId::Int(v) => NodeId(v.to_string()),
            RawId::Text(s) => NodeId(s),
        }
    }
}

impl From<NodeId> for String {
    fn from(id: NodeId) -> Self {
        id.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    pub length_m: f64,
    /// Marks the plant's outer loop; the rule-based controller gives these
    /// lanes priority when entering an intersection.
    #[serde(default)]
    pub circumference: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

/// A transport order from `origin` to `destination`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(NodeId, NodeId)", into = "(NodeId, NodeId)")]
pub struct Task {
    pub origin: NodeId,
    pub destination: NodeId,
}

impl From<(NodeId, NodeId)> for Task {
    fn from((origin, destination): (NodeId, NodeId)) -> Self {
        Task {
            origin,
            destination,
        }
    }
}

impl From<Task> for (NodeId, NodeId) {
    fn from(t: Task) -> Self {
        (t.origin, t.destination)
    }
}

/// Initial state of one vehicle. Tasks are consumed cyclically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgvState {
    pub id: String,
    #[serde(rename = "start_node")]
    pub node: NodeId,
    #[serde(rename = "speed_mps")]
    pub speed: f64,
    #[serde(rename = "tasks")]
    pub task_queue: Vec<Task>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlParams {
    pub period_steps: u32,
    pub horizon_steps: u32,
    pub lambda1: f64,
    pub lambda2: f64,
    pub samples: u32,
    pub seed: u64,
    pub sim_duration_steps: u32,
}

/// Defaults applied to fields missing from the `params` section.
pub const DEFAULT_PERIOD_STEPS: u32 = 1;
pub const DEFAULT_HORIZON_STEPS: u32 = 2;
pub const DEFAULT_SAMPLES: u32 = 1000;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_DURATION_STEPS: u32 = 1000;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsDoc {
    period_steps: Option<u32>,
    horizon_steps: Option<u32>,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    samples: Option<u32>,
    seed: Option<u64>,
    sim_duration_steps: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    graph: PlantGraph,
    agvs: Vec<AgvState>,
    #[serde(default)]
    params: ParamsDoc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub graph: PlantGraph,
    pub agvs: Vec<AgvState>,
    pub params: ControlParams,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Parses a scenario document and fills every default.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|span| line_column(text, span.start))
            .unwrap_or((1, 1));
        Scenario::parse_error(line, column, e.message())
    })?;

    let horizon = doc.params.horizon_steps.unwrap_or(DEFAULT_HORIZON_STEPS);
    let defaults = crate::qubo::PenaltyWeights::dominant(horizon as usize, doc.agvs.len());
    let params = ControlParams {
        period_steps: doc.params.period_steps.unwrap_or(DEFAULT_PERIOD_STEPS),
        horizon_steps: horizon,
        lambda1: doc.params.lambda1.unwrap_or(defaults.lambda1),
        lambda2: doc.params.lambda2.unwrap_or(defaults.lambda2),
        samples: doc.params.samples.unwrap_or(DEFAULT_SAMPLES),
        seed: doc.params.seed.unwrap_or(DEFAULT_SEED),
        sim_duration_steps: doc
            .params
            .sim_duration_steps
            .unwrap_or(DEFAULT_DURATION_STEPS),
    };
    Ok(Scenario {
        graph: doc.graph,
        agvs: doc.agvs,
        params,
    })
}

/// Reads a scenario from disk. The name `loop_plant` resolves to the bundled
/// fixture when no such file exists.
pub fn read_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    if !path.exists() && path.as_os_str() == "loop_plant" {
        return load_scenario(LOOP_PLANT);
    }
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_scenario(&text)
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let prefix = &text[..offset.min(text.len())];
    let line = prefix.matches('\n').count() + 1;
    let column = prefix.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl Scenario {
    fn parse_error(line: usize, column: usize, message: &str) -> ScenarioError {
        ScenarioError::Parse {
            line,
            column,
            message: message.trim().to_string(),
        }
    }

    /// Serializes back to a scenario document with every parameter explicit.
    pub fn to_document(&self) -> String {
        let doc = ScenarioDoc {
            graph: self.graph.clone(),
            agvs: self.agvs.clone(),
            params: ParamsDoc {
                period_steps: Some(self.params.period_steps),
                horizon_steps: Some(self.params.horizon_steps),
                lambda1: Some(self.params.lambda1),
                lambda2: Some(self.params.lambda2),
                samples: Some(self.params.samples),
                seed: Some(self.params.seed),
                sim_duration_steps: Some(self.params.sim_duration_steps),
            },
        };
        toml::to_string(&doc).expect("scenario documents always serialize")
    }

    /// Wall seconds represented by one step: mean edge length over the
    /// slowest vehicle's speed.
    pub fn seconds_per_step(&self) -> f64 {
        let edges = &self.graph.edges;
        let mean = edges.iter().map(|e| e.length_m).sum::<f64>() / edges.len().max(1) as f64;
        let slowest = self
            .agvs
            .iter()
            .map(|a| a.speed)
            .fold(f64::INFINITY, f64::min);
        mean / slowest
    }

    /// Stable content hash of the canonical document.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_document().as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Dense node index into a [`Topology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeIx(pub usize);

/// Indexed adjacency view of a [`PlantGraph`].
///
/// Edges whose endpoints are unknown are skipped, so a topology can be built
/// from an invalid graph for diagnostics.
#[derive(Debug, Clone)]
pub struct Topology {
    ids: Vec<NodeId>,
    index: HashMap<NodeId, NodeIx>,
    adjacency: Vec<Vec<NodeIx>>,
    circumference: HashSet<(NodeIx, NodeIx)>,
}

impl Topology {
    pub fn new(graph: &PlantGraph) -> Self {
        let mut ids = Vec::with_capacity(graph.nodes.len());
        let mut index = HashMap::new();
        for node in &graph.nodes {
            if !index.contains_key(&node.id) {
                index.insert(node.id.clone(), NodeIx(ids.len()));
                ids.push(node.id.clone());
            }
        }
        let mut adjacency = vec![Vec::new(); ids.len()];
        let mut circumference = HashSet::new();
        for edge in &graph.edges {
            let (Some(&a), Some(&b)) = (index.get(&edge.a), index.get(&edge.b)) else {
                continue;
            };
            if a == b {
                continue;
            }
            if !adjacency[a.0].contains(&b) {
                adjacency[a.0].push(b);
                adjacency[b.0].push(a);
            }
            if edge.circumference {
                circumference.insert((a.min(b), a.max(b)));
            }
        }
        for list in &mut adjacency {
            list.sort();
        }
        Topology {
            ids,
            index,
            adjacency,
            circumference,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ix(&self, id: &NodeId) -> Option<NodeIx> {
        self.index.get(id).copied()
    }

    pub fn id(&self, ix: NodeIx) -> &NodeId {
        &self.ids[ix.0]
    }

    /// Neighbors in ascending index order.
    pub fn neighbors(&self, ix: NodeIx) -> &[NodeIx] {
        &self.adjacency[ix.0]
    }

    pub fn degree(&self, ix: NodeIx) -> usize {
        self.adjacency[ix.0].len()
    }

    pub fn is_adjacent(&self, a: NodeIx, b: NodeIx) -> bool {
        self.adjacency[a.0].binary_search(&b).is_ok()
    }

    pub fn is_circumference(&self, a: NodeIx, b: NodeIx) -> bool {
        self.circumference.contains(&(a.min(b), a.max(b)))
    }

    /// Hop distances from `source`; `None` for unreachable nodes.
    pub fn hop_distances(&self, source: NodeIx) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        let mut queue = VecDeque::new();
        dist[source.0] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.0].unwrap();
            for &v in self.neighbors(u) {
                if dist[v.0].is_none() {
                    dist[v.0] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// One broken scenario invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateNodeId(NodeId),
    DanglingEndpoint {
        edge: usize,
        node: NodeId,
    },
    NonPositiveLength {
        edge: usize,
        length_m: f64,
    },
    SelfLoop {
        edge: usize,
        node: NodeId,
    },
    DuplicateEdge {
        edge: usize,
        a: NodeId,
        b: NodeId,
    },
    Disconnected {
        components: usize,
    },
    NoAgvs,
    DuplicateAgvId(String),
    UnknownNode {
        agv: String,
        node: NodeId,
    },
    DuplicateStart {
        node: NodeId,
        agvs: Vec<String>,
    },
    NonPositiveSpeed {
        agv: String,
        speed: f64,
    },
    EmptyTaskQueue {
        agv: String,
    },
    BrokenTaskChain {
        agv: String,
        task: usize,
    },
    UnreachableDestination {
        agv: String,
        origin: NodeId,
        destination: NodeId,
    },
    InvalidParam {
        field: &'static str,
        reason: &'static str,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNodeId(id) => write!(f, "duplicate node id {id}"),
            Violation::DanglingEndpoint { edge, node } => {
                write!(f, "graph.edges[{edge}] references unknown node {node}")
            }
            Violation::NonPositiveLength { edge, length_m } => {
                write!(f, "graph.edges[{edge}] has nonpositive length {length_m}")
            }
            Violation::SelfLoop { edge, node } => {
                write!(f, "graph.edges[{edge}] is a self-loop on {node}")
            }
            Violation::DuplicateEdge { edge, a, b } => {
                write!(f, "graph.edges[{edge}] duplicates edge {a}-{b}")
            }
            Violation::Disconnected { components } => {
                write!(f, "graph has {components} connected components")
            }
            Violation::NoAgvs => write!(f, "scenario has no AGVs"),
            Violation::DuplicateAgvId(id) => write!(f, "duplicate AGV id {id}"),
            Violation::UnknownNode { agv, node } => {
                write!(f, "AGV {agv} references unknown node {node}")
            }
            Violation::DuplicateStart { node, agvs } => {
                write!(f, "AGVs {} share start node {node}", agvs.join(", "))
            }
            Violation::NonPositiveSpeed { agv, speed } => {
                write!(f, "AGV {agv} has nonpositive speed {speed}")
            }
            Violation::EmptyTaskQueue { agv } => write!(f, "AGV {agv} has no tasks"),
            Violation::BrokenTaskChain { agv, task } => write!(
                f,
                "AGV {agv} task {task} does not start where the previous one ends"
            ),
            Violation::UnreachableDestination {
                agv,
                origin,
                destination,
            } => write!(f, "AGV {agv} cannot reach {destination} from {origin}"),
            Violation::InvalidParam { field, reason } => write!(f, "params.{field}: {reason}"),
        }
    }
}

/// Non-fatal scenario remarks.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Edge lengths differ by more than 1%; the planner assumes one edge per step.
    NonUniformEdgeLengths { min: f64, max: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::NonUniformEdgeLengths { min, max } => write!(
                f,
                "edge lengths range from {min} m to {max} m; planning assumes one edge per step"
            ),
        }
    }
}

/// Returns every invariant violation; empty iff the scenario is valid.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let graph = &s.graph;

    let mut seen = HashSet::new();
    for node in &graph.nodes {
        if !seen.insert(&node.id) {
            out.push(Violation::DuplicateNodeId(node.id.clone()));
        }
    }

    let mut pairs = HashSet::new();
    for (i, edge) in graph.edges.iter().enumerate() {
        let mut known = true;
        for end in [&edge.a, &edge.b] {
            if !seen.contains(end) {
                out.push(Violation::DanglingEndpoint {
                    edge: i,
                    node: end.clone(),
                });
                known = false;
            }
        }
        // Negated so that NaN is rejected too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(edge.length_m > 0.0) {
            out.push(Violation::NonPositiveLength {
                edge: i,
                length_m: edge.length_m,
            });
        }
        if edge.a == edge.b {
            out.push(Violation::SelfLoop {
                edge: i,
                node: edge.a.clone(),
            });
        } else if known {
            let key = if edge.a < edge.b {
                (&edge.a, &edge.b)
            } else {
                (&edge.b, &edge.a)
            };
            if !pairs.insert(key) {
                out.push(Violation::DuplicateEdge {
                    edge: i,
                    a: edge.a.clone(),
                    b: edge.b.clone(),
                });
            }
        }
    }

    let topo = Topology::new(graph);
    if !topo.is_empty() {
        let components = count_components(&topo);
        if components > 1 {
            out.push(Violation::Disconnected { components });
        }
    }

    if s.agvs.is_empty() {
        out.push(Violation::NoAgvs);
    }
    let mut agv_ids = HashSet::new();
    let mut starts: BTreeMap<&NodeId, Vec<String>> = BTreeMap::new();
    for agv in &s.agvs {
        if !agv_ids.insert(&agv.id) {
            out.push(Violation::DuplicateAgvId(agv.id.clone()));
        }
        if topo.ix(&agv.node).is_none() {
            out.push(Violation::UnknownNode {
                agv: agv.id.clone(),
                node: agv.node.clone(),
            });
        }
        starts.entry(&agv.node).or_default().push(agv.id.clone());
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(agv.speed > 0.0) {
            out.push(Violation::NonPositiveSpeed {
                agv: agv.id.clone(),
                speed: agv.speed,
            });
        }
        validate_tasks(agv, &topo, &mut out);
    }
    for (node, agvs) in starts {
        if agvs.len() > 1 {
            out.push(Violation::DuplicateStart {
                node: node.clone(),
                agvs,
            });
        }
    }

    let p = &s.params;
    if p.period_steps < 1 {
        out.push(Violation::InvalidParam {
            field: "period_steps",
            reason: "must be at least 1",
        });
    }
    if p.horizon_steps < p.period_steps {
        out.push(Violation::InvalidParam {
            field: "horizon_steps",
            reason: "must be at least period_steps",
        });
    }
    if !(p.lambda1 >= 0.0 && p.lambda1.is_finite()) {
        out.push(Violation::InvalidParam {
            field: "lambda1",
            reason: "must be finite and nonnegative",
        });
    }
    if !(p.lambda2 >= 0.0 && p.lambda2.is_finite()) {
        out.push(Violation::InvalidParam {
            field: "lambda2",
            reason: "must be finite and nonnegative",
        });
    }
    if p.samples < 1 {
        out.push(Violation::InvalidParam {
            field: "samples",
            reason: "must be at least 1",
        });
    }
    out
}

fn validate_tasks(agv: &AgvState, topo: &Topology, out: &mut Vec<Violation>) {
    let tasks = &agv.task_queue;
    if tasks.is_empty() {
        out.push(Violation::EmptyTaskQueue {
            agv: agv.id.clone(),
        });
        return;
    }
    let mut reported = BTreeSet::new();
    for (i, task) in tasks.iter().enumerate() {
        for node in [&task.origin, &task.destination] {
            if topo.ix(node).is_none() && reported.insert(node.clone()) {
                out.push(Violation::UnknownNode {
                    agv: agv.id.clone(),
                    node: node.clone(),
                });
            }
        }
        // The chain is cyclic and anchored at the start node.
        let expected = if i == 0 {
            &agv.node
        } else {
            &tasks[i - 1].destination
        };
        if &task.origin != expected {
            out.push(Violation::BrokenTaskChain {
                agv: agv.id.clone(),
                task: i,
            });
        }
        if let (Some(o), Some(d)) = (topo.ix(&task.origin), topo.ix(&task.destination)) {
            if topo.hop_distances(o)[d.0].is_none() {
                out.push(Violation::UnreachableDestination {
                    agv: agv.id.clone(),
                    origin: task.origin.clone(),
                    destination: task.destination.clone(),
                });
            }
        }
    }
    if tasks.last().map(|t| &t.destination) != Some(&tasks[0].origin) {
        out.push(Violation::BrokenTaskChain {
            agv: agv.id.clone(),
            task: 0,
        });
    }
}

fn count_components(topo: &Topology) -> usize {
    let mut seen = vec![false; topo.len()];
    let mut components = 0;
    for start in 0..topo.len() {
        if seen[start] {
            continue;
        }
        components += 1;
        for (v, d) in topo.hop_distances(NodeIx(start)).iter().enumerate() {
            if d.is_some() {
                seen[v] = true;
            }
        }
    }
    components
}

/// Non-fatal remarks about a scenario.
pub fn lint_scenario(s: &Scenario) -> Vec<Warning> {
    let lengths: Vec<f64> = s
        .graph
        .edges
        .iter()
        .map(|e| e.length_m)
        .filter(|l| *l > 0.0)
        .collect();
    let mut out = Vec::new();
    if let (Some(min), Some(max)) = (
        lengths.iter().copied().reduce(f64::min),
        lengths.iter().copied().reduce(f64::max),
    ) {
        if (max - min) / min > 0.01 {
            out.push(Warning::NonUniformEdgeLengths { min, max });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[graph]
nodes = [{ id = 1, x = 0.0, y = 0.0 }, { id = 2, x = 10.0, y = 0.0 }]
edges = [{ a = 1, b = 2, length_m = 10.0 }]

[[agvs]]
id = "a0"
start_node = 1
speed_mps = 0.5
tasks = [[1, 2], [2, 1]]
"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let s = load_scenario(MINIMAL).unwrap();
        assert_eq!(s.agvs.len(), 1);
        assert_eq!(s.params.period_steps, 1);
        assert_eq!(s.params.horizon_steps, 2);
        assert_eq!(s.params.samples, 1000);
        assert_eq!(s.params.seed, 42);
        let w = crate::qubo::PenaltyWeights::dominant(2, 1);
        assert_eq!(s.params.lambda1, w.lambda1);
        assert_eq!(s.params.lambda2, w.lambda2);
        assert!(validate_scenario(&s).is_empty());
    }

    #[test]
    fn loop_plant_fixture_is_valid() {
        let s = load_scenario(LOOP_PLANT).unwrap();
        assert_eq!(s.agvs.len(), 10);
        assert!(s.agvs.iter().all(|a| a.speed == 0.5));
        assert!(s.graph.edges.iter().all(|e| e.length_m == 10.0));
        assert_eq!(validate_scenario(&s), vec![]);
        assert!(lint_scenario(&s).is_empty());
    }

    #[test]
    fn missing_edges_section_is_named() {
        let text = MINIMAL.replace("edges = [{ a = 1, b = 2, length_m = 10.0 }]", "");
        let err = load_scenario(&text).unwrap_err();
        assert!(err.to_string().contains("edges"), "{err}");
    }

    #[test]
    fn parse_errors_carry_a_line() {
        let text = MINIMAL.replace("speed_mps = 0.5", "speed_mps = \"fast\"");
        match load_scenario(&text).unwrap_err() {
            ScenarioError::Parse { line, .. } => assert_eq!(line, 9),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_endpoint_is_reported() {
        let text = MINIMAL.replace(
            "{ a = 1, b = 2, length_m = 10.0 }",
            "{ a = 1, b = 2, length_m = 10.0 }, { a = 2, b = \"Z\", length_m = 10.0 }",
        );
        let s = load_scenario(&text).unwrap();
        assert_eq!(
            validate_scenario(&s),
            vec![Violation::DanglingEndpoint {
                edge: 1,
                node: NodeId::from("Z")
            }]
        );
    }

    #[test]
    fn duplicate_start_is_reported() {
        let mut s = load_scenario(LOOP_PLANT).unwrap();
        let first = s.agvs[0].clone();
        let mut twin = first.clone();
        twin.id = "twin".into();
        s.agvs.push(twin);
        let v = validate_scenario(&s);
        assert_eq!(
            v,
            vec![Violation::DuplicateStart {
                node: first.node.clone(),
                agvs: vec![first.id.clone(), "twin".into()]
            }]
        );
    }

    #[test]
    fn nonuniform_lengths_warn_without_violating() {
        let text = MINIMAL
            .replace("length_m = 10.0", "length_m = 12.0")
            .replace(
                "edges = [{ a = 1, b = 2, length_m = 12.0 }]",
                "edges = [{ a = 1, b = 2, length_m = 12.0 }, { a = 2, b = 3, length_m = 10.0 }]",
            )
            .replace(
                "{ id = 2, x = 10.0, y = 0.0 }]",
                "{ id = 2, x = 10.0, y = 0.0 }, { id = 3, x = 20.0, y = 0.0 }]",
            );
        let s = load_scenario(&text).unwrap();
        assert!(validate_scenario(&s).is_empty());
        assert_eq!(lint_scenario(&s).len(), 1);
    }

    #[test]
    fn broken_chain_and_disconnection() {
        let text = r#"
[graph]
nodes = [{ id = 1, x = 0.0, y = 0.0 }, { id = 2, x = 10.0, y = 0.0 }, { id = 3, x = 30.0, y = 0.0 }]
edges = [{ a = 1, b = 2, length_m = 10.0 }]

[[agvs]]
id = "a0"
start_node = 1
speed_mps = 0.5
tasks = [[1, 3], [2, 1]]
"#;
        let s = load_scenario(text).unwrap();
        let v = validate_scenario(&s);
        assert!(v.contains(&Violation::Disconnected { components: 2 }));
        assert!(v.contains(&Violation::BrokenTaskChain {
            agv: "a0".into(),
            task: 1
        }));
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::UnreachableDestination { .. })));
    }

    #[test]
    fn round_trip_is_stable() {
        let s = load_scenario(LOOP_PLANT).unwrap();
        let again = load_scenario(&s.to_document()).unwrap();
        assert_eq!(s, again);
        assert_eq!(s.fingerprint(), again.fingerprint());
    }
}
