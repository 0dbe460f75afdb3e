use std::collections::HashSet;

use crate::qubo::{energy_direct, Assignment, PenaltyWeights};
use crate::routing::{Resource, RouteCandidate};

/// Candidate lists kept in route form, so the search can reason about
/// conflicts directly instead of through matrix entries.
#[derive(Debug, Clone)]
pub struct StructuredInstance {
    pub candidates: Vec<Vec<RouteCandidate>>,
    pub horizon: usize,
}

impl StructuredInstance {
    pub fn n(&self) -> usize {
        self.candidates.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    pub assignment: Assignment,
    pub energy: f64,
    /// False when no conflict-free selection exists; the assignment is then
    /// all-stop.
    pub feasible: bool,
}

struct Search<'a> {
    s: &'a StructuredInstance,
    /// Per AGV, candidate indices by descending reward.
    order: Vec<Vec<usize>>,
    /// `tail[i]` = best possible reward of AGVs `i..`.
    tail: Vec<f64>,
    held: HashSet<(usize, Resource)>,
    pick: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn go(&mut self, agv: usize, reward: f64) {
        if agv == self.s.candidates.len() {
            if self.best.as_ref().is_none_or(|(b, _)| reward > *b) {
                self.best = Some((reward, self.pick.clone()));
            }
            return;
        }
        if let Some((b, _)) = &self.best {
            if reward + self.tail[agv] <= *b {
                return;
            }
        }
        for oi in 0..self.order[agv].len() {
            let mu = self.order[agv][oi];
            let c = &self.s.candidates[agv][mu];
            let claims: Vec<(usize, Resource)> =
                c.claims().filter(|(t, _)| *t <= self.s.horizon).collect();
            if claims.iter().any(|k| self.held.contains(k)) {
                continue;
            }
            self.held.extend(claims.iter().copied());
            self.pick[agv] = mu;
            self.go(agv + 1, reward + c.reward());
            for k in &claims {
                self.held.remove(k);
            }
        }
    }
}

/// Exact maximum-reward conflict-free selection by depth-first branch and
/// bound. AGVs are fixed in index order and candidates tried longest first,
/// so among equal-reward optima the lower-indexed AGV gets the longer move.
///
/// Under dominant penalty weights this is also the QUBO ground state.
pub fn exact_search(s: &StructuredInstance, w: PenaltyWeights) -> ExactResult {
    let order: Vec<Vec<usize>> = s
        .candidates
        .iter()
        .map(|list| {
            let mut idx: Vec<usize> = (0..list.len()).collect();
            idx.sort_by(|&a, &b| {
                list[b]
                    .reward()
                    .total_cmp(&list[a].reward())
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();
    let mut tail = vec![0.0; s.candidates.len() + 1];
    for i in (0..s.candidates.len()).rev() {
        let best = s.candidates[i]
            .iter()
            .map(RouteCandidate::reward)
            .fold(f64::NEG_INFINITY, f64::max);
        tail[i] = tail[i + 1] + best.max(0.0);
    }
    let mut search = Search {
        s,
        order,
        tail,
        held: HashSet::new(),
        pick: vec![0; s.candidates.len()],
        best: None,
    };
    search.go(0, 0.0);

    let (pick, feasible) = match search.best.take() {
        Some((_, pick)) => (pick, true),
        None => {
            let stops = s
                .candidates
                .iter()
                .map(|list| list.iter().position(RouteCandidate::is_stop).unwrap_or(0))
                .collect();
            (stops, false)
        }
    };
    let mut bits = Vec::with_capacity(s.n());
    for (list, &mu) in s.candidates.iter().zip(&pick) {
        bits.extend((0..list.len()).map(|k| k == mu));
    }
    let assignment = Assignment { bits };
    let energy = energy_direct(&s.candidates, w, &assignment, s.horizon)
        .expect("candidate lists are non-empty");
    ExactResult {
        assignment,
        energy,
        feasible,
    }
}
