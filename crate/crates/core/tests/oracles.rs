mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use agvq_core::control::{
    decode, filter_feasible, followers, priority_bonus, round_candidates, SimState,
};
use agvq_core::plant::{load_scenario, NodeIx, Topology, LOOP_PLANT};
use agvq_core::qubo::{build_qubo, energy_direct, Assignment, PenaltyWeights, QuboInstance};
use agvq_core::routing::{build_route_db, shortest_path, TaskKey};
use agvq_core::solvers::{brute_force, exact_search, Sample, SampleSet, StructuredInstance};

use common::*;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrix_energy_equals_direct_energy(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = round_with_size(&mut r, 1, 60);
        let w = weights(&s);
        let q = build_qubo(&s.candidates, w, s.horizon).unwrap();
        for _ in 0..50 {
            let a = random_assignment(&mut r, s.n());
            let m = q.energy(&a).unwrap();
            let d = energy_direct(&s.candidates, w, &a, s.horizon).unwrap();
            prop_assert!(close(m, d), "{m} vs {d}");
        }
    }

    #[test]
    fn text_format_round_trips(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = round_with_size(&mut r, 1, 40);
        let q = build_qubo(&s.candidates, weights(&s), s.horizon).unwrap();
        // The resource index is build-time metadata and is not exported.
        let back = QuboInstance::from_text(&q.to_text()).unwrap();
        prop_assert_eq!(back.n(), q.n());
        prop_assert_eq!(back.constant, q.constant);
        prop_assert_eq!(&back.index_map, &q.index_map);
        for i in 0..q.n() {
            prop_assert_eq!(back.row(i), q.row(i));
        }
    }

    #[test]
    fn rescale_keeps_the_minimisers(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = round_with_size(&mut r, 1, 14);
        let q = build_qubo(&s.candidates, weights(&s), s.horizon).unwrap();
        let a: Vec<Assignment> = brute_force(&q).unwrap().samples.into_iter().map(|x| x.assignment).collect();
        let b: Vec<Assignment> = brute_force(&q.rescale(1.0)).unwrap().samples.into_iter().map(|x| x.assignment).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn dominant_weights_make_minima_feasible(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = round_with_size(&mut r, 1, 14);
        let q = build_qubo(&s.candidates, weights(&s), s.horizon).unwrap();
        for m in brute_force(&q).unwrap().samples {
            prop_assert!(feasible_by_hand(&s, &m.assignment));
        }
    }

    #[test]
    fn exact_search_attains_the_brute_force_minimum(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = round_with_size(&mut r, 1, 16);
        let w = weights(&s);
        let q = build_qubo(&s.candidates, w, s.horizon).unwrap();
        let ground = brute_force(&q).unwrap().samples[0].energy;
        let e = exact_search(&s, w);
        prop_assert!(e.feasible);
        prop_assert!(close(e.energy, ground), "{} vs {ground}", e.energy);
        prop_assert!(close(q.energy(&e.assignment).unwrap(), ground));
    }

    #[test]
    fn filter_keeps_exactly_the_feasible_samples(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = round_with_size(&mut r, 1, 20);
        let q = build_qubo(&s.candidates, weights(&s), s.horizon).unwrap();
        // Mostly one-hot draws, so that feasible samples actually occur.
        let samples: Vec<Sample> = (0..40)
            .map(|k| {
                let a = if k % 4 == 0 {
                    random_assignment(&mut r, s.n())
                } else {
                    one_hot(&mut r, &s)
                };
                Sample { energy: q.energy(&a).unwrap(), assignment: a, occurrences: 1 }
            })
            .collect();
        let ss = SampleSet { samples: samples.clone(), wall_time: 0.0, per_sample_time: 0.0 };
        let kept = filter_feasible(&ss, &s.candidates, 1);
        let expected: Vec<&Sample> = samples.iter().filter(|x| feasible_by_hand(&s, &x.assignment)).collect();
        prop_assert_eq!(kept.len(), expected.len());
        for (k, e) in kept.iter().zip(expected) {
            prop_assert_eq!(&k.assignment, &e.assignment);
        }
    }

    #[test]
    fn priority_bonus_keeps_the_feasible_set(seed in any::<u64>(), eps in 0.0f64..0.05) {
        let mut r = rng(seed);
        let s = round_with_size(&mut r, 1, 16);
        let f: Vec<usize> = (0..s.candidates.len()).map(|_| rand::Rng::gen_range(&mut r, 0..4)).collect();
        let boosted = StructuredInstance {
            candidates: priority_bonus(&s.candidates, &f, eps),
            horizon: s.horizon,
        };
        let w = weights(&s);
        let e = exact_search(&boosted, w);
        prop_assert!(e.feasible);
        prop_assert!(feasible_by_hand(&s, &e.assignment));
        // A small bonus never costs a whole hop of progress.
        let plain = exact_search(&s, w);
        let hops = |a: &Assignment| -> usize {
            decode(a, &s.candidates).unwrap().iter().zip(&s.candidates).map(|(&m, c)| c[m].d).sum()
        };
        prop_assert_eq!(hops(&e.assignment), hops(&plain.assignment));
    }

    #[test]
    fn shortest_path_length_matches_bfs(seed in any::<u64>()) {
        let mut r = rng(seed);
        let w = rand::Rng::gen_range(&mut r, 2..7);
        let h = rand::Rng::gen_range(&mut r, 2..7);
        let topo = Topology::new(&lattice(w, h));
        let a = rand::Rng::gen_range(&mut r, 0..topo.len());
        let b = rand::Rng::gen_range(&mut r, 0..topo.len());
        let p = shortest_path(&topo, NodeIx(a), NodeIx(b)).unwrap();
        prop_assert_eq!(Some(p.nodes.len() - 1), topo.hop_distances(NodeIx(a))[b]);
        for e in p.nodes.windows(2) {
            prop_assert!(topo.is_adjacent(e[0], e[1]));
        }
    }
}

fn one_hot(r: &mut rand_chacha::ChaCha8Rng, s: &StructuredInstance) -> Assignment {
    let mut bits = Vec::new();
    for list in &s.candidates {
        let pick = rand::Rng::gen_range(r, 0..list.len());
        bits.extend((0..list.len()).map(|m| u8::from(m == pick)));
    }
    Assignment::from_bits(&bits)
}

/// On a feasible one-hot assignment both penalty sums vanish except for
/// support entries no selected route uses, which cost `lambda2` each.
#[test]
fn fixture_first_round_expands_consistently() {
    let s = load_scenario(LOOP_PLANT).unwrap();
    let topo = Topology::new(&s.graph);
    let state = SimState::new(&s, &topo, 0);
    let tasks: Vec<TaskKey> = state
        .vehicles
        .iter()
        .flat_map(|v| v.tasks.clone())
        .collect();
    let db = build_route_db(&topo, &tasks, 2).unwrap();
    let c = round_candidates(&state, &db, &topo, 2).unwrap();
    let s2 = StructuredInstance {
        candidates: c,
        horizon: 2,
    };
    let w = weights(&s2);
    let q = build_qubo(&s2.candidates, w, 2).unwrap();
    let e = exact_search(&s2, w);
    assert!(e.feasible);
    assert!(feasible_by_hand(&s2, &e.assignment));
    let picks = decode(&e.assignment, &s2.candidates).unwrap();
    let chosen: Vec<_> = picks
        .iter()
        .zip(&s2.candidates)
        .map(|(&m, l)| &l[m])
        .collect();
    let reward: f64 = chosen.iter().map(|c| c.reward()).sum();
    let support: BTreeSet<_> = s2
        .candidates
        .iter()
        .flatten()
        .flat_map(|c| c.occupancy.iter())
        .collect();
    let used: BTreeSet<_> = chosen.iter().flat_map(|c| c.occupancy.iter()).collect();
    let expected = -reward + w.lambda2 * (support.len() - used.len()) as f64;
    assert!(close(q.energy(&e.assignment).unwrap(), expected));
    assert!(close(
        energy_direct(&s2.candidates, w, &e.assignment, 2).unwrap(),
        expected
    ));
    assert_eq!(followers(&state, &db).len(), s.agvs.len());
}

/// Equal weights, the naive default, let an infeasible double selection
/// undercut every feasible assignment.
#[test]
fn equal_weights_do_not_dominate() {
    let graph = lattice(3, 1);
    let topo = Topology::new(&graph);
    let task = TaskKey {
        origin: NodeIx(0),
        destination: NodeIx(2),
    };
    let db = build_route_db(&topo, &[task], 2).unwrap();
    let c = agvq_core::routing::candidate_routes(&db, &topo, 0, NodeIx(0), task, 2).unwrap();
    let s = StructuredInstance {
        candidates: vec![c],
        horizon: 2,
    };
    let l = (2 * 2 + 1) as f64;
    let equal = PenaltyWeights {
        lambda1: l,
        lambda2: l,
    };
    let q = build_qubo(&s.candidates, equal, 2).unwrap();
    let minima = brute_force(&q).unwrap().samples;
    assert!(minima.iter().any(|m| !feasible_by_hand(&s, &m.assignment)));

    let q = build_qubo(&s.candidates, weights(&s), 2).unwrap();
    let minima = brute_force(&q).unwrap().samples;
    assert!(minima.iter().all(|m| feasible_by_hand(&s, &m.assignment)));
}
