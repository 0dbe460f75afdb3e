#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use agvq_core::plant::{Edge, Node, NodeId, NodeIx, PlantGraph, Topology};
use agvq_core::qubo::{Assignment, PenaltyWeights};
use agvq_core::routing::{build_route_db, candidate_routes, RouteCandidate, TaskKey};
use agvq_core::solvers::StructuredInstance;

/// A full `w x h` lattice with 10 m edges.
pub fn lattice(w: usize, h: usize) -> PlantGraph {
    let id = |x: usize, y: usize| NodeId((y * w + x).to_string());
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for y in 0..h {
        for x in 0..w {
            nodes.push(Node {
                id: id(x, y),
                x: 10.0 * x as f64,
                y: 10.0 * y as f64,
            });
            let mut link = |a: NodeId, b: NodeId| {
                edges.push(Edge {
                    a,
                    b,
                    length_m: 10.0,
                    circumference: false,
                })
            };
            if x + 1 < w {
                link(id(x, y), id(x + 1, y));
            }
            if y + 1 < h {
                link(id(x, y), id(x, y + 1));
            }
        }
    }
    PlantGraph { nodes, edges }
}

/// One planning round on a random lattice: distinct starts, random
/// destinations, horizon 1 to 3.
pub fn random_round(rng: &mut ChaCha8Rng) -> StructuredInstance {
    let w = rng.gen_range(2..=6);
    let h = rng.gen_range(2..=5);
    let graph = lattice(w, h);
    let topo = Topology::new(&graph);
    let n = topo.len();
    let agvs = rng.gen_range(1..=n.min(16));
    let horizon = rng.gen_range(1..=3);
    let mut starts: Vec<usize> = (0..n).collect();
    starts.shuffle(rng);
    let keys: Vec<TaskKey> = starts[..agvs]
        .iter()
        .map(|&s| {
            let mut d = rng.gen_range(0..n - 1);
            if d >= s {
                d += 1;
            }
            TaskKey {
                origin: NodeIx(s),
                destination: NodeIx(d),
            }
        })
        .collect();
    let db = build_route_db(&topo, &keys, horizon).unwrap();
    let candidates: Vec<Vec<RouteCandidate>> = keys
        .iter()
        .enumerate()
        .map(|(i, &k)| candidate_routes(&db, &topo, i, k.origin, k, horizon).unwrap())
        .collect();
    StructuredInstance {
        candidates,
        horizon,
    }
}

/// Random rounds until one has between `lo` and `hi` variables.
pub fn round_with_size(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> StructuredInstance {
    loop {
        let s = random_round(rng);
        if (lo..=hi).contains(&s.n()) {
            return s;
        }
    }
}

pub fn weights(s: &StructuredInstance) -> PenaltyWeights {
    PenaltyWeights::dominant(s.horizon, s.candidates.len())
}

pub fn random_assignment(rng: &mut ChaCha8Rng, n: usize) -> Assignment {
    let bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
    Assignment::from_bits(&bits)
}

/// Independent feasibility check: one route per AGV, and no two AGVs on
/// the same node after any step or on the same edge during it.
pub fn feasible_by_hand(s: &StructuredInstance, a: &Assignment) -> bool {
    let mut picks = Vec::new();
    let mut k = 0;
    for list in &s.candidates {
        let on: Vec<usize> = (0..list.len()).filter(|&m| a.bits[k + m]).collect();
        k += list.len();
        if on.len() != 1 {
            return false;
        }
        picks.push(&list[on[0]]);
    }
    for t in 1..=s.horizon {
        for (i, u) in picks.iter().enumerate() {
            for v in &picks[i + 1..] {
                let (u0, u1) = (u.position_at(t - 1), u.position_at(t));
                let (v0, v1) = (v.position_at(t - 1), v.position_at(t));
                if u1 == v1 {
                    return false;
                }
                let moving = u0 != u1 && v0 != v1;
                if moving && (u0, u1) == (v1, v0) {
                    return false;
                }
            }
        }
    }
    true
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
