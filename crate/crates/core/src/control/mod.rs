//! Planning rounds: candidates, QUBO, sampling, filtering and selection,
//! plus the rule-based baseline and the replanning simulator.

mod baseline;
mod priority;
mod sim;

use std::collections::HashSet;

use thiserror::Error;

pub use baseline::rule_based_step;
pub use priority::{followers, priority_bonus};
pub use sim::{run_simulation, Controller, SimError, SimRecord, SimState, SimTrace, Vehicle};

use crate::plant::Topology;
use crate::qubo::{build_qubo, Assignment, PenaltyWeights, QuboError};
use crate::routing::{candidate_routes, Resource, RouteCandidate, RouteDatabase, RoutingError};
use crate::solvers::{
    brute_force, exact_search, parallel_trial_sa, simulated_annealing, AnnealSchedule,
    DynamicOffsetParams, Sample, SampleSet, SolverError, StructuredInstance,
};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// One chosen route per AGV, of which the first `committed_steps` are executed.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub choices: Vec<RouteCandidate>,
    pub committed_steps: usize,
}

impl Plan {
    /// Every AGV takes its stop candidate.
    pub fn all_stop(candidates: &[Vec<RouteCandidate>], committed_steps: usize) -> Plan {
        let choices = candidates
            .iter()
            .map(|list| {
                list.iter()
                    .find(|c| c.is_stop())
                    .cloned()
                    .unwrap_or_else(|| {
                        let c = &list[0];
                        RouteCandidate::new(c.agv, c.mu, vec![c.nodes[0]], c.horizon())
                    })
            })
            .collect();
        Plan {
            choices,
            committed_steps,
        }
    }

    /// First `(step, resource)` claimed by two AGVs, if any.
    pub fn first_conflict(&self) -> Option<(usize, Resource)> {
        conflict(self.choices.iter())
    }
}

fn conflict<'a>(routes: impl Iterator<Item = &'a RouteCandidate>) -> Option<(usize, Resource)> {
    let mut held = HashSet::new();
    for c in routes {
        for claim in c.claims() {
            if !held.insert(claim) {
                return Some(claim);
            }
        }
    }
    None
}

/// Selected candidate index per AGV, or `None` unless exactly one is set for
/// every AGV.
pub fn decode(a: &Assignment, candidates: &[Vec<RouteCandidate>]) -> Option<Vec<usize>> {
    let mut bits = a.bits.iter();
    candidates
        .iter()
        .map(|list| {
            let on: Vec<usize> = (0..list.len())
                .filter(|_| *bits.next().unwrap_or(&false))
                .collect();
            (on.len() == 1).then(|| on[0])
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasiblePlan {
    pub plan: Plan,
    pub energy: f64,
    pub assignment: Assignment,
}

/// Keeps samples that select one route per AGV with no shared claim.
/// Feasibility is decided from the routes, never from the energy.
pub fn filter_feasible(
    ss: &SampleSet,
    candidates: &[Vec<RouteCandidate>],
    committed_steps: usize,
) -> Vec<FeasiblePlan> {
    ss.samples
        .iter()
        .filter_map(|s| {
            let picks = decode(&s.assignment, candidates)?;
            let choices: Vec<RouteCandidate> = picks
                .iter()
                .zip(candidates)
                .map(|(&mu, list)| list[mu].clone())
                .collect();
            if conflict(choices.iter()).is_some() {
                return None;
            }
            Some(FeasiblePlan {
                plan: Plan {
                    choices,
                    committed_steps,
                },
                energy: s.energy,
                assignment: s.assignment.clone(),
            })
        })
        .collect()
}

/// Lowest energy, then lexicographically smallest bitstring. An empty list
/// yields the all-stop plan.
pub fn select_plan(
    feasible: &[FeasiblePlan],
    candidates: &[Vec<RouteCandidate>],
    committed_steps: usize,
) -> Plan {
    feasible
        .iter()
        .min_by(|a, b| {
            a.energy
                .total_cmp(&b.energy)
                .then_with(|| a.assignment.cmp(&b.assignment))
        })
        .map(|f| f.plan.clone())
        .unwrap_or_else(|| Plan::all_stop(candidates, committed_steps))
}

/// QUBO sampling backend used by the planner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    Brute,
    Sa { sweeps: usize },
    Ptsa { sweeps: usize },
    Exact,
}

impl Backend {
    /// Sweeps per read inside the simulator, where every round is solved.
    pub const DEFAULT_SWEEPS: usize = 20;

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Brute => "brute",
            Backend::Sa { .. } => "sa",
            Backend::Ptsa { .. } => "ptsa",
            Backend::Exact => "exact",
        }
    }

    pub fn from_name(name: &str, sweeps: usize) -> Option<Backend> {
        match name {
            "brute" => Some(Backend::Brute),
            "sa" => Some(Backend::Sa { sweeps }),
            "ptsa" => Some(Backend::Ptsa { sweeps }),
            "exact" => Some(Backend::Exact),
            _ => None,
        }
    }

    /// Samples the round's instance. Stochastic backends take `reads` reads.
    pub fn sample(
        &self,
        candidates: &[Vec<RouteCandidate>],
        w: PenaltyWeights,
        horizon: usize,
        reads: usize,
        seed: u64,
    ) -> Result<SampleSet, PlanError> {
        let inst = build_qubo(candidates, w, horizon)?;
        Ok(match *self {
            Backend::Brute => brute_force(&inst)?,
            Backend::Sa { sweeps } => simulated_annealing(
                &inst,
                &AnnealSchedule::for_instance(&inst, sweeps),
                reads,
                seed,
            ),
            Backend::Ptsa { sweeps } => parallel_trial_sa(
                &inst,
                &AnnealSchedule::for_instance(&inst, sweeps),
                &DynamicOffsetParams::for_instance(&inst),
                reads,
                seed,
            ),
            Backend::Exact => {
                let start = std::time::Instant::now();
                let s = StructuredInstance {
                    candidates: candidates.to_vec(),
                    horizon,
                };
                let r = exact_search(&s, w);
                let energy = inst.energy(&r.assignment)?;
                SampleSet::from_samples(
                    vec![Sample {
                        assignment: r.assignment,
                        energy,
                        occurrences: 1,
                    }],
                    start.elapsed().as_secs_f64(),
                )
            }
        })
    }
}

/// Candidate lists for every vehicle this round, in fleet order.
pub fn round_candidates(
    state: &SimState,
    db: &RouteDatabase,
    topo: &Topology,
    horizon: usize,
) -> Result<Vec<Vec<RouteCandidate>>, RoutingError> {
    state
        .vehicles
        .iter()
        .enumerate()
        .map(|(i, v)| candidate_routes(db, topo, i, v.node, v.task(), horizon))
        .collect()
}

/// One planning round: candidates, QUBO, sampling, filter, select.
pub fn plan_period_qubo(
    state: &SimState,
    db: &RouteDatabase,
    topo: &Topology,
    settings: &RoundSettings,
    backend: Backend,
    seed: u64,
) -> Result<Plan, PlanError> {
    let candidates = round_candidates(state, db, topo, settings.horizon)?;
    plan_candidates(&candidates, settings, backend, seed)
}

/// Planning round on precomputed candidate lists.
pub fn plan_candidates(
    candidates: &[Vec<RouteCandidate>],
    settings: &RoundSettings,
    backend: Backend,
    seed: u64,
) -> Result<Plan, PlanError> {
    let ss = backend.sample(
        candidates,
        settings.weights,
        settings.horizon,
        settings.reads,
        seed,
    )?;
    let feasible = filter_feasible(&ss, candidates, settings.period);
    Ok(select_plan(&feasible, candidates, settings.period))
}

/// Per-round planning parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundSettings {
    pub period: usize,
    pub horizon: usize,
    pub weights: PenaltyWeights,
    pub reads: usize,
}

impl RoundSettings {
    pub fn from_params(p: &crate::plant::ControlParams) -> Self {
        RoundSettings {
            period: p.period_steps as usize,
            horizon: p.horizon_steps as usize,
            weights: PenaltyWeights {
                lambda1: p.lambda1,
                lambda2: p.lambda2,
            },
            reads: p.samples as usize,
        }
    }
}
