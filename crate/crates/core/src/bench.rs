//! Contention benchmark family: pairs of AGVs meeting at plus-shaped
//! crossings, sized by QUBO variable count.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::control::{Backend, PlanError};
use crate::metrics::tts;
use crate::plant::{Edge, Node, NodeId, NodeIx, PlantGraph, Topology};
use crate::qubo::{build_qubo, PenaltyWeights, QuboInstance};
use crate::routing::{build_route_db, candidate_routes, RouteCandidate, TaskKey};
use crate::solvers::{exact_search, ground_state_probability, StructuredInstance};

pub const HORIZON: usize = 2;
/// Variable counts of the standard family.
pub const SIZES: [usize; 6] = [9, 21, 30, 39, 51, 60];
/// Sweeps per read for the stochastic solvers in a bench run.
pub const BENCH_SWEEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct BenchInstance {
    pub candidates: Vec<Vec<RouteCandidate>>,
    pub weights: PenaltyWeights,
    pub qubo: QuboInstance,
    /// Minimum energy, from exact search.
    pub ground_energy: f64,
}

impl BenchInstance {
    pub fn structured(&self) -> StructuredInstance {
        StructuredInstance {
            candidates: self.candidates.clone(),
            horizon: HORIZON,
        }
    }
}

struct Builder {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl Builder {
    fn node(&mut self, x: f64, y: f64) -> usize {
        let i = self.nodes.len();
        self.nodes.push(Node {
            id: NodeId(i.to_string()),
            x,
            y,
        });
        i
    }

    fn edge(&mut self, a: usize, b: usize) {
        self.edges.push(Edge {
            a: NodeId(a.to_string()),
            b: NodeId(b.to_string()),
            length_m: 10.0,
            circumference: false,
        });
    }
}

/// A random member of the family with `n_vars` variables (a multiple of 3).
///
/// Every AGV has three candidates: stop, one hop, two hops. Each pair starts
/// one hop from the centre of its own crossing on two distinct random arms
/// and is tasked through the centre to the tip of the opposite arm. An odd
/// AGV out runs alone on a straight line.
pub fn contention_instance(n_vars: usize, seed: u64) -> BenchInstance {
    assert!(
        n_vars >= 3 && n_vars.is_multiple_of(3),
        "variable count must be a positive multiple of 3"
    );
    let agvs = n_vars / 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder {
        nodes: Vec::new(),
        edges: Vec::new(),
    };
    // (start, destination) per AGV, as builder indices.
    let mut tasks: Vec<(usize, usize)> = Vec::new();
    let dirs = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
    for k in 0..agvs / 2 {
        let ox = 100.0 * k as f64;
        let centre = b.node(ox, 0.0);
        let mut arms = Vec::new();
        for (dx, dy) in dirs {
            let near = b.node(ox + 10.0 * dx, 10.0 * dy);
            let tip = b.node(ox + 20.0 * dx, 20.0 * dy);
            b.edge(centre, near);
            b.edge(near, tip);
            arms.push((near, tip));
        }
        let mut pick = [0usize, 1, 2, 3];
        pick.shuffle(&mut rng);
        for &arm in &pick[..2] {
            tasks.push((arms[arm].0, arms[(arm + 2) % 4].1));
        }
    }
    if agvs % 2 == 1 {
        let oy = -100.0;
        let line: Vec<usize> = (0..4).map(|i| b.node(10.0 * i as f64, oy)).collect();
        for w in line.windows(2) {
            b.edge(w[0], w[1]);
        }
        tasks.push((line[0], line[3]));
    }

    let graph = PlantGraph {
        nodes: b.nodes,
        edges: b.edges,
    };
    let topo = Topology::new(&graph);
    let keys: Vec<TaskKey> = tasks
        .iter()
        .map(|&(o, d)| TaskKey {
            origin: NodeIx(o),
            destination: NodeIx(d),
        })
        .collect();
    let db = build_route_db(&topo, &keys, HORIZON).expect("crossings are connected");
    let candidates: Vec<Vec<RouteCandidate>> = keys
        .iter()
        .enumerate()
        .map(|(i, &task)| {
            candidate_routes(&db, &topo, i, task.origin, task, HORIZON).expect("stored task")
        })
        .collect();
    let weights = PenaltyWeights::dominant(HORIZON, agvs);
    let qubo = build_qubo(&candidates, weights, HORIZON).expect("every AGV has candidates");
    let s = StructuredInstance {
        candidates: candidates.clone(),
        horizon: HORIZON,
    };
    let ground_energy = exact_search(&s, weights).energy;
    BenchInstance {
        candidates,
        weights,
        qubo,
        ground_energy,
    }
}

/// Seed of instance `k` at size `n_vars`.
pub fn instance_seed(seed: u64, n_vars: usize, k: usize) -> u64 {
    seed ^ ((n_vars as u64) << 32) ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n_vars: usize,
    pub solver: String,
    pub reads: u64,
    pub p0: f64,
    /// Wall-clock seconds per sample.
    pub t_c: f64,
}

impl BenchRow {
    pub fn tts(&self, p: f64) -> f64 {
        tts(self.t_c, self.p0, p).expect("confidence checked by caller")
    }
}

/// P0 and per-sample time of `backend` over `instances` random instances of
/// size `n_vars`, `reads` reads each.
pub fn bench_cell(
    n_vars: usize,
    backend: Backend,
    instances: usize,
    reads: usize,
    seed: u64,
) -> Result<BenchRow, PlanError> {
    let mut hits = 0.0;
    let mut total = 0u64;
    let mut time = 0.0;
    for k in 0..instances {
        let s = instance_seed(seed, n_vars, k);
        let inst = contention_instance(n_vars, s);
        let start = Instant::now();
        let ss = backend.sample(&inst.candidates, inst.weights, HORIZON, reads, s)?;
        time += start.elapsed().as_secs_f64();
        let tol = 1e-9 * (1.0 + inst.ground_energy.abs());
        let n = ss.total_occurrences();
        hits += ground_state_probability(&ss, inst.ground_energy, tol) * n as f64;
        total += n;
    }
    Ok(BenchRow {
        n_vars,
        solver: backend.name().to_string(),
        reads: total,
        p0: if total == 0 { 0.0 } else { hits / total as f64 },
        t_c: if total == 0 { 0.0 } else { time / total as f64 },
    })
}

/// Deterministic part of a bench run: `n_vars,solver,reads,p0`.
pub fn p0_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("n_vars,solver,reads,p0\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{:?}", r.n_vars, r.solver, r.reads, r.p0);
    }
    out
}

/// Timing part: `n_vars,solver,t_c,p0,tts` with times in seconds and
/// `tts` at 99% confidence.
pub fn tts_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("n_vars,solver,t_c,p0,tts\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:e},{:?},{:e}",
            r.n_vars,
            r.solver,
            r.t_c,
            r.p0,
            r.tts(0.99)
        );
    }
    out
}
