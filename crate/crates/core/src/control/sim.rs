use std::collections::HashSet;
use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{
    followers, plan_candidates, plan_period_qubo, priority_bonus, round_candidates,
    rule_based_step, Backend, Plan, PlanError, RoundSettings,
};
use crate::plant::{validate_scenario, NodeId, NodeIx, Scenario, Topology, Violation};
use crate::routing::{build_route_db, Resource, RouteDatabase, RoutingError, TaskKey};

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: String,
    pub node: NodeIx,
    pub tasks: Vec<TaskKey>,
    pub task_ix: usize,
    /// Tasks finished so far.
    pub completed: usize,
}

impl Vehicle {
    pub fn task(&self) -> TaskKey {
        self.tasks[self.task_ix]
    }

    /// Adopts the next task when the current destination is reached.
    fn settle(&mut self) {
        for _ in 0..self.tasks.len() {
            if self.node != self.task().destination {
                return;
            }
            self.completed += 1;
            self.task_ix = (self.task_ix + 1) % self.tasks.len();
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub clock: usize,
    pub vehicles: Vec<Vehicle>,
    pub rng: ChaCha8Rng,
}

impl SimState {
    /// Initial state. The scenario must be valid.
    pub fn new(s: &Scenario, topo: &Topology, seed: u64) -> SimState {
        let ix = |id: &NodeId| topo.ix(id).expect("validated scenario");
        let vehicles = s
            .agvs
            .iter()
            .map(|a| {
                let mut v = Vehicle {
                    id: a.id.clone(),
                    node: ix(&a.node),
                    tasks: a
                        .task_queue
                        .iter()
                        .map(|t| TaskKey {
                            origin: ix(&t.origin),
                            destination: ix(&t.destination),
                        })
                        .collect(),
                    task_ix: 0,
                    completed: 0,
                };
                v.settle();
                v
            })
            .collect();
        SimState {
            clock: 0,
            vehicles,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Controller {
    RuleBased,
    Qubo(Backend),
    /// Exact search with the follower bonus; `None` uses `1 / N^2`.
    Priority {
        epsilon: Option<f64>,
    },
}

impl Controller {
    pub fn label(&self) -> String {
        match self {
            Controller::RuleBased => "rule_based".into(),
            Controller::Qubo(b) => format!("qubo+{}", b.name()),
            Controller::Priority { .. } => "qubo+priority".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub step: usize,
    pub nodes: Vec<NodeIx>,
    pub waiting: Vec<bool>,
    /// Hop length of the route each vehicle was following.
    pub route_len: Vec<usize>,
    pub resources: Vec<Vec<Resource>>,
    /// Cumulative tasks finished per vehicle.
    pub completed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub fingerprint: String,
    pub controller: String,
    pub seed: u64,
    pub agv_ids: Vec<String>,
    pub node_ids: Vec<NodeId>,
    pub start: Vec<NodeIx>,
    pub records: Vec<SimRecord>,
}

impl SimTrace {
    /// `step,agv_id,node,waiting,chosen_route_length`, one row per vehicle
    /// per step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,agv_id,node,waiting,chosen_route_length\n");
        for r in &self.records {
            for (i, id) in self.agv_ids.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.step,
                    id,
                    self.node_ids[r.nodes[i].0],
                    u8::from(r.waiting[i]),
                    r.route_len[i]
                );
            }
        }
        out
    }

    /// Steps with a shared node or a shared resource, recomputed from the
    /// recorded positions alone.
    pub fn safety_violations(&self) -> usize {
        let mut prev = self.start.clone();
        let mut bad = 0;
        for r in &self.records {
            let mut held = HashSet::new();
            let mut clash = false;
            for (i, &node) in r.nodes.iter().enumerate() {
                clash |= !held.insert(Resource::Node(node));
                if node != prev[i] {
                    clash |= !held.insert(Resource::edge(prev[i], node));
                }
            }
            bad += usize::from(clash);
            prev.clone_from(&r.nodes);
        }
        bad
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("safety breach at step {step}: {detail}")]
    Conflict {
        step: usize,
        detail: String,
        trace: Box<SimTrace>,
    },
}

struct Runner<'a> {
    topo: Topology,
    db: RouteDatabase,
    settings: RoundSettings,
    controller: Controller,
    scenario: &'a Scenario,
}

impl Runner<'_> {
    fn plan(&self, state: &mut SimState) -> Result<Plan, SimError> {
        Ok(match self.controller {
            Controller::RuleBased => rule_based_step(state, &self.db, &self.topo),
            Controller::Qubo(backend) => {
                let seed = state.rng.next_u64();
                plan_period_qubo(state, &self.db, &self.topo, &self.settings, backend, seed)?
            }
            Controller::Priority { epsilon } => {
                let n = self.scenario.agvs.len() as f64;
                let eps = epsilon.unwrap_or(1.0 / (n * n));
                let c = round_candidates(state, &self.db, &self.topo, self.settings.horizon)?;
                let c = priority_bonus(&c, &followers(state, &self.db), eps);
                plan_candidates(&c, &self.settings, Backend::Exact, 0)?
            }
        })
    }
}

/// Runs `duration_steps` steps of replanning control.
pub fn run_simulation(
    s: &Scenario,
    controller: Controller,
    duration_steps: usize,
    seed: u64,
) -> Result<SimTrace, SimError> {
    let violations = validate_scenario(s);
    if !violations.is_empty() {
        return Err(SimError::Invalid(violations));
    }
    let topo = Topology::new(&s.graph);
    let mut state = SimState::new(s, &topo, seed);
    let tasks: Vec<TaskKey> = state
        .vehicles
        .iter()
        .flat_map(|v| v.tasks.iter().copied())
        .collect();
    let settings = RoundSettings::from_params(&s.params);
    let db = build_route_db(&topo, &tasks, settings.horizon.max(1))?;
    let mut trace = SimTrace {
        fingerprint: s.fingerprint(),
        controller: controller.label(),
        seed,
        agv_ids: state.vehicles.iter().map(|v| v.id.clone()).collect(),
        node_ids: (0..topo.len())
            .map(|i| topo.id(NodeIx(i)).clone())
            .collect(),
        start: state.vehicles.iter().map(|v| v.node).collect(),
        records: Vec::with_capacity(duration_steps),
    };
    let runner = Runner {
        topo,
        db,
        settings,
        controller,
        scenario: s,
    };

    while state.clock < duration_steps {
        let plan = runner.plan(&mut state)?;
        let steps = plan
            .committed_steps
            .max(1)
            .min(duration_steps - state.clock);
        for t in 1..=steps {
            let mut held = HashSet::new();
            let mut record = SimRecord {
                step: state.clock + 1,
                nodes: Vec::new(),
                waiting: Vec::new(),
                route_len: Vec::new(),
                resources: Vec::new(),
                completed: Vec::new(),
            };
            let mut breach = None;
            for (v, route) in state.vehicles.iter_mut().zip(&plan.choices) {
                let next = route.position_at(t);
                let mut used = vec![Resource::Node(next)];
                if next != v.node {
                    used.insert(0, Resource::edge(v.node, next));
                }
                for r in &used {
                    if !held.insert(*r) && breach.is_none() {
                        breach = Some(format!(
                            "{} used twice (vehicle {})",
                            r.describe(&runner.topo),
                            v.id
                        ));
                    }
                }
                record.waiting.push(next == v.node);
                v.node = next;
                v.settle();
                record.nodes.push(next);
                record.route_len.push(route.d);
                record.resources.push(used);
                record.completed.push(v.completed);
            }
            state.clock += 1;
            trace.records.push(record);
            if let Some(detail) = breach {
                return Err(SimError::Conflict {
                    step: state.clock,
                    detail,
                    trace: Box::new(trace),
                });
            }
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::load_scenario;

    fn line_scenario() -> Scenario {
        load_scenario(
            r#"
[graph]
nodes = [{ id = 1, x = 0.0, y = 0.0 }, { id = 2, x = 10.0, y = 0.0 },
         { id = 3, x = 20.0, y = 0.0 }, { id = 4, x = 30.0, y = 0.0 }]
edges = [{ a = 1, b = 2, length_m = 10.0 }, { a = 2, b = 3, length_m = 10.0 },
         { a = 3, b = 4, length_m = 10.0 }]

[[agvs]]
id = "a"
start_node = 1
speed_mps = 0.5
tasks = [[1, 4], [4, 1]]

[params]
samples = 10
"#,
        )
        .unwrap()
    }

    #[test]
    fn single_agv_arrives_in_hop_count_steps() {
        let s = line_scenario();
        for controller in [
            Controller::RuleBased,
            Controller::Qubo(Backend::Exact),
            Controller::Qubo(Backend::Ptsa { sweeps: 20 }),
            Controller::Priority { epsilon: None },
        ] {
            let trace = run_simulation(&s, controller, 6, 1).unwrap();
            assert_eq!(trace.records.len(), 6);
            assert_eq!(trace.records[2].nodes, vec![NodeIx(3)], "{controller:?}");
            assert_eq!(trace.records[2].completed, vec![1]);
            assert_eq!(trace.records[5].nodes, vec![NodeIx(0)]);
            assert!(trace.records.iter().all(|r| !r.waiting[0]));
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let s = line_scenario();
        let c = Controller::Qubo(Backend::Sa { sweeps: 10 });
        let a = run_simulation(&s, c, 20, 5).unwrap();
        let b = run_simulation(&s, c, 20, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn csv_layout() {
        let trace = run_simulation(&line_scenario(), Controller::RuleBased, 2, 0).unwrap();
        assert_eq!(
            trace.to_csv(),
            "step,agv_id,node,waiting,chosen_route_length\n1,a,2,0,1\n2,a,3,0,1\n"
        );
    }

    #[test]
    fn invalid_scenario_is_rejected() {
        let mut s = line_scenario();
        s.agvs[0].node = NodeId::from("9");
        assert!(matches!(
            run_simulation(&s, Controller::RuleBased, 5, 0),
            Err(SimError::Invalid(_))
        ));
    }
}
