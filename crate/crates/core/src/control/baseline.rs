use std::collections::BTreeMap;

use super::{Plan, SimState};
use crate::plant::{NodeIx, Topology};
use crate::routing::{RouteCandidate, RouteDatabase};

/// Conventional intersection control for one step.
///
/// Every vehicle requests the next hop of its shortest path. Each requested
/// node admits at most one vehicle: one arriving over a circumference edge
/// wins, then the lowest fleet index. Intersections (degree >= 3) must be
/// empty at the start of the step. Other nodes may be entered as their
/// occupant leaves, unless the occupant is heading straight back. Losers
/// wait in place.
pub fn rule_based_step(state: &SimState, db: &RouteDatabase, topo: &Topology) -> Plan {
    let n = state.vehicles.len();
    let at: Vec<NodeIx> = state.vehicles.iter().map(|v| v.node).collect();
    let occupant: BTreeMap<NodeIx, usize> = at.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let want: Vec<Option<NodeIx>> = state
        .vehicles
        .iter()
        .map(|v| db.next_hop(v.node, v.task()))
        .collect();

    let mut contenders: BTreeMap<NodeIx, Vec<usize>> = BTreeMap::new();
    for (i, target) in want.iter().enumerate() {
        if let Some(t) = target {
            contenders.entry(*t).or_default().push(i);
        }
    }
    let mut winner = vec![false; n];
    for (&target, list) in &contenders {
        let best = list
            .iter()
            .min_by_key(|&&i| (!topo.is_circumference(at[i], target), i))
            .copied()
            .expect("non-empty");
        winner[best] = true;
    }

    // Grant winners whose target is free, or vacated by a granted mover that
    // is not swapping with them. Repeat until nothing changes.
    let mut granted = vec![false; n];
    loop {
        let mut changed = false;
        for i in 0..n {
            if granted[i] || !winner[i] {
                continue;
            }
            let target = want[i].expect("winners have targets");
            let ok = match occupant.get(&target) {
                None => true,
                Some(_) if topo.degree(target) >= 3 => false,
                Some(&j) => granted[j] && want[j] != Some(at[i]),
            };
            if ok {
                granted[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let choices = (0..n)
        .map(|i| {
            let nodes = if granted[i] {
                vec![at[i], want[i].expect("granted")]
            } else {
                vec![at[i]]
            };
            RouteCandidate::new(i, 0, nodes, 1)
        })
        .collect();
    Plan {
        choices,
        committed_steps: 1,
    }
}
