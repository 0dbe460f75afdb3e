//! Waiting and working rates, per-node waiting totals, time to solution.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::control::SimTrace;
use crate::plant::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct WaitingReport {
    /// Fraction of vehicles waiting at each step.
    pub per_step_rate: Vec<f64>,
    pub time_average: f64,
    /// Mean over the second half of the run, for judging convergence.
    pub last_half_average: f64,
    /// Waited vehicle-steps per node, nodes without waiting omitted.
    pub per_node_accumulated: BTreeMap<NodeId, usize>,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub fn waiting_report(trace: &SimTrace) -> WaitingReport {
    let n = trace.agv_ids.len().max(1) as f64;
    let mut per_node = BTreeMap::new();
    let per_step_rate: Vec<f64> = trace
        .records
        .iter()
        .map(|r| {
            let mut waiting = 0;
            for (node, &w) in r.nodes.iter().zip(&r.waiting) {
                if w {
                    waiting += 1;
                    *per_node.entry(trace.node_ids[node.0].clone()).or_insert(0) += 1;
                }
            }
            waiting as f64 / n
        })
        .collect();
    WaitingReport {
        time_average: mean(&per_step_rate),
        last_half_average: mean(&per_step_rate[per_step_rate.len() / 2..]),
        per_step_rate,
        per_node_accumulated: per_node,
    }
}

impl WaitingReport {
    /// `step,rate` rows, steps numbered from 1.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("step,rate\n");
        for (i, r) in self.per_step_rate.iter().enumerate() {
            let _ = writeln!(out, "{},{r:?}", i + 1);
        }
        out
    }

    /// `node,steps` rows in node-id order.
    pub fn accumulation_csv(&self) -> String {
        let mut out = String::from("node,steps\n");
        for (node, steps) in &self.per_node_accumulated {
            let _ = writeln!(out, "{node},{steps}");
        }
        out
    }

    pub fn total_waited(&self) -> usize {
        self.per_node_accumulated.values().sum()
    }
}

/// Percentage of vehicle-steps spent moving.
pub fn working_rate(r: &WaitingReport) -> f64 {
    100.0 * (1.0 - r.time_average)
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("target confidence {0} is outside (0, 1)")]
    Confidence(f64),
    #[error("ground-state probability {0} is outside [0, 1]")]
    Probability(f64),
}

/// Time to reach the ground state with confidence `p`, given `t_c` per
/// sample and per-sample success probability `p0`.
///
/// `p0 = 0` gives infinity. `p0 = 1` gives `t_c`: one sample suffices.
pub fn tts(t_c: f64, p0: f64, p: f64) -> Result<f64, MetricsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(MetricsError::Confidence(p));
    }
    if !(0.0..=1.0).contains(&p0) {
        return Err(MetricsError::Probability(p0));
    }
    if p0 == 0.0 {
        return Ok(f64::INFINITY);
    }
    if p0 == 1.0 || p0 == p {
        return Ok(t_c);
    }
    Ok(t_c * (1.0 - p).ln() / (1.0 - p0).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::SimRecord;
    use crate::plant::NodeIx;

    fn trace(rows: &[(&[usize], &[bool])]) -> SimTrace {
        let n = rows[0].0.len();
        SimTrace {
            fingerprint: String::new(),
            controller: "test".into(),
            seed: 0,
            agv_ids: (0..n).map(|i| format!("v{i}")).collect(),
            node_ids: (0..10).map(|i| NodeId(i.to_string())).collect(),
            start: vec![NodeIx(0); n],
            records: rows
                .iter()
                .enumerate()
                .map(|(k, (nodes, waiting))| SimRecord {
                    step: k + 1,
                    nodes: nodes.iter().map(|&i| NodeIx(i)).collect(),
                    waiting: waiting.to_vec(),
                    route_len: vec![0; n],
                    resources: vec![Vec::new(); n],
                    completed: vec![0; n],
                })
                .collect(),
        }
    }

    #[test]
    fn nobody_waits() {
        let r = waiting_report(&trace(&[
            (&[1, 2], &[false, false]),
            (&[2, 3], &[false, false]),
        ]));
        assert_eq!(r.time_average, 0.0);
        assert!(r.per_node_accumulated.is_empty());
        assert_eq!(working_rate(&r), 100.0);
    }

    #[test]
    fn one_of_two_always_waits() {
        let r = waiting_report(&trace(&[
            (&[1, 2], &[true, false]),
            (&[1, 3], &[true, false]),
        ]));
        assert_eq!(r.time_average, 0.5);
        assert_eq!(r.last_half_average, 0.5);
    }

    #[test]
    fn per_node_counts() {
        let t = trace(&[
            (&[4], &[false]),
            (&[5], &[false]),
            (&[5], &[true]),
            (&[5], &[true]),
            (&[5], &[true]),
            (&[6], &[false]),
        ]);
        let r = waiting_report(&t);
        assert_eq!(
            r.per_node_accumulated,
            BTreeMap::from([(NodeId::from("5"), 3)])
        );
        assert_eq!(r.accumulation_csv(), "node,steps\n5,3\n");
        assert_eq!(r.total_waited(), 3);
    }

    #[test]
    fn working_rate_values() {
        let mut r = waiting_report(&trace(&[(&[1], &[false])]));
        r.time_average = 0.20;
        assert!((working_rate(&r) - 80.0).abs() < 1e-12);
        r.time_average = 0.058;
        assert!((working_rate(&r) - 94.2).abs() < 1e-12);
    }

    #[test]
    fn tts_values() {
        assert_eq!(tts(1.0, 0.99, 0.99).unwrap(), 1.0);
        let v = tts(2.22, 0.74, 0.99).unwrap();
        let expected = 2.22 * (0.01f64).ln() / (0.26f64).ln();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 7.59).abs() / 7.59 < 0.005);
        assert_eq!(tts(1.0, 0.0, 0.9).unwrap(), f64::INFINITY);
        assert_eq!(tts(3.0, 1.0, 0.9).unwrap(), 3.0);
        assert_eq!(tts(1.0, 0.5, 1.0), Err(MetricsError::Confidence(1.0)));
        assert_eq!(tts(1.0, 0.5, 0.0), Err(MetricsError::Confidence(0.0)));
        assert_eq!(tts(1.0, 1.5, 0.5), Err(MetricsError::Probability(1.5)));
    }
}
