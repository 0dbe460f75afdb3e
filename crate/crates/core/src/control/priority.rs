use std::collections::HashMap;

use super::SimState;
use crate::plant::NodeIx;
use crate::routing::{RouteCandidate, RouteDatabase};

/// Number of vehicles queued behind each vehicle: those whose next hop is
/// its node, counted recursively along the queue.
pub fn followers(state: &SimState, db: &RouteDatabase) -> Vec<usize> {
    let n = state.vehicles.len();
    let at: HashMap<NodeIx, usize> = state
        .vehicles
        .iter()
        .enumerate()
        .map(|(i, v)| (v.node, i))
        .collect();
    let mut behind: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, v) in state.vehicles.iter().enumerate() {
        if let Some(&i) = db.next_hop(v.node, v.task()).and_then(|hop| at.get(&hop)) {
            behind[i].push(j);
        }
    }
    (0..n)
        .map(|i| {
            let mut seen = vec![false; n];
            seen[i] = true;
            let mut stack = behind[i].clone();
            let mut count = 0;
            while let Some(j) = stack.pop() {
                if std::mem::replace(&mut seen[j], true) {
                    continue;
                }
                count += 1;
                stack.extend(&behind[j]);
            }
            count
        })
        .collect()
}

/// Adds `epsilon * followers` to the reward of every moving candidate.
pub fn priority_bonus(
    candidates: &[Vec<RouteCandidate>],
    followers: &[usize],
    epsilon: f64,
) -> Vec<Vec<RouteCandidate>> {
    candidates
        .iter()
        .zip(followers)
        .map(|(list, &f)| {
            list.iter()
                .map(|c| {
                    let mut c = c.clone();
                    if !c.is_stop() {
                        c.bonus += epsilon * f as f64;
                    }
                    c
                })
                .collect()
        })
        .collect()
}
