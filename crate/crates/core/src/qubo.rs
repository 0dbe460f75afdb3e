//! Penalty-form QUBO for one planning round.
//!
//! For per-AGV candidate lists the energy is
//!
//! ```text
//! f(q) = - sum_k r_k q_k
//!        + l1 * sum_i (sum_{k in agv i} q_k - 1)^2
//!        + l2 * sum_{(t,r) in support} (sum_k F[k,t,r] q_k - 1)^2
//!        + l2 * sum_{u<v, agv(u) != agv(v)} entry(u, v) q_u q_v
//! ```
//!
//! where `r_k` is the candidate reward (hops plus any priority bonus), `F`
//! is the one-resource-per-step occupancy and `support` is the set of
//! `(t, r)` pairs some candidate occupies. `entry(u, v)` counts steps where
//! both candidates end on the same node and at least one of them moved in.
//! Occupancy alone cannot see that case, because a moving step only marks
//! the traversed edge.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::routing::{Resource, RouteCandidate};

#[derive(Debug, Error, PartialEq)]
pub enum QuboError {
    #[error("AGV {0} has no route candidates")]
    NoCandidates(usize),
    #[error("assignment has {got} bits, instance has {expected} variables")]
    LengthMismatch { expected: usize, got: usize },
    #[error("malformed instance, line {line}: {reason}")]
    Format { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyWeights {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl PenaltyWeights {
    /// Weights under which every global minimum is feasible whenever a
    /// feasible assignment exists.
    ///
    /// `lambda2 = 2*H*N + 1` outweighs any reward difference between one-hot
    /// assignments. The collision term pays `-lambda2` per occupied step, so
    /// selecting an extra route gains up to `H * lambda2`; `lambda1` must
    /// exceed that, hence `(H + 1) * lambda2`.
    pub fn dominant(horizon: usize, agvs: usize) -> Self {
        let lambda2 = (2 * horizon * agvs + 1) as f64;
        PenaltyWeights {
            lambda1: (horizon + 1) as f64 * lambda2,
            lambda2,
        }
    }
}

/// Binary assignment over the flat variable index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    pub bits: Vec<bool>,
}

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Assignment {
            bits: vec![false; n],
        }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Assignment {
            bits: bits.iter().map(|&b| b != 0).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn to_bitstring(&self) -> String {
        self.bits
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }

    pub fn parse_bitstring(s: &str) -> Option<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(|bits| Assignment { bits })
    }
}

/// Flat variable `k` corresponds to candidate `mu` of AGV `agv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarKey {
    pub agv: usize,
    pub mu: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuboInstance {
    n: usize,
    /// Row-major symmetric matrix; off-diagonal halves each carry half of the
    /// pair coefficient.
    q: Vec<f64>,
    pub constant: f64,
    pub index_map: Vec<VarKey>,
    pub resource_index: Vec<(usize, Resource)>,
}

impl QuboInstance {
    /// Builds an instance from an explicit symmetric matrix.
    pub fn from_dense(n: usize, q: Vec<f64>, constant: f64) -> Self {
        assert_eq!(q.len(), n * n);
        QuboInstance {
            n,
            q,
            constant,
            index_map: (0..n).map(|k| VarKey { agv: k, mu: 0 }).collect(),
            resource_index: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.q[i * self.n..(i + 1) * self.n]
    }

    pub fn var(&self, agv: usize, mu: usize) -> Option<usize> {
        self.index_map
            .iter()
            .position(|k| k.agv == agv && k.mu == mu)
    }

    /// `q^T Q q + constant`.
    pub fn energy(&self, a: &Assignment) -> Result<f64, QuboError> {
        if a.len() != self.n {
            return Err(QuboError::LengthMismatch {
                expected: self.n,
                got: a.len(),
            });
        }
        let on: Vec<usize> = (0..self.n).filter(|&k| a.bits[k]).collect();
        let mut e = self.constant;
        for &i in &on {
            let row = self.row(i);
            for &j in &on {
                e += row[j];
            }
        }
        Ok(e)
    }

    pub fn max_abs(&self) -> f64 {
        self.q.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Scales every entry and the constant so the largest magnitude becomes
    /// `max_abs`. An all-zero matrix is returned unchanged.
    pub fn rescale(&self, max_abs: f64) -> QuboInstance {
        let current = self.max_abs();
        let mut out = self.clone();
        if current == 0.0 || current == max_abs {
            return out;
        }
        let s = max_abs / current;
        out.q.iter_mut().for_each(|v| *v *= s);
        out.constant *= s;
        out
    }

    /// Sparse text form: `n`, `constant` and `map` header lines followed by
    /// one `i j value` row per nonzero upper-triangle entry.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# agvq qubo instance\n");
        let _ = writeln!(out, "n {}", self.n);
        let _ = writeln!(out, "constant {:?}", self.constant);
        for (k, key) in self.index_map.iter().enumerate() {
            let _ = writeln!(out, "map {k} {} {}", key.agv, key.mu);
        }
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.get(i, j);
                if v != 0.0 {
                    let _ = writeln!(out, "{i} {j} {v:?}");
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<QuboInstance, QuboError> {
        let mut n = None;
        let mut constant = 0.0;
        let mut map = Vec::new();
        let mut rows = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: &str| QuboError::Format {
                line: lineno + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "n" if fields.len() == 2 => {
                    n = Some(
                        fields[1]
                            .parse::<usize>()
                            .map_err(|_| bad("bad variable count"))?,
                    )
                }
                "constant" if fields.len() == 2 => {
                    constant = fields[1].parse().map_err(|_| bad("bad constant"))?
                }
                "map" if fields.len() == 4 => {
                    let nums: Result<Vec<usize>, _> =
                        fields[1..].iter().map(|f| f.parse::<usize>()).collect();
                    let nums = nums.map_err(|_| bad("bad map line"))?;
                    map.push((
                        nums[0],
                        VarKey {
                            agv: nums[1],
                            mu: nums[2],
                        },
                    ));
                }
                _ if fields.len() == 3 => {
                    let i = fields[0]
                        .parse::<usize>()
                        .map_err(|_| bad("bad row index"))?;
                    let j = fields[1]
                        .parse::<usize>()
                        .map_err(|_| bad("bad column index"))?;
                    let v = fields[2].parse::<f64>().map_err(|_| bad("bad value"))?;
                    rows.push((lineno + 1, i, j, v));
                }
                _ => return Err(bad("unrecognized line")),
            }
        }
        let n = n.ok_or(QuboError::Format {
            line: 0,
            reason: "missing `n` line".into(),
        })?;
        let mut q = vec![0.0; n * n];
        for (line, i, j, v) in rows {
            if i >= n || j >= n {
                return Err(QuboError::Format {
                    line,
                    reason: format!("index out of range for n = {n}"),
                });
            }
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
        let mut inst = QuboInstance::from_dense(n, q, constant);
        for (k, key) in map {
            if k >= n {
                return Err(QuboError::Format {
                    line: 0,
                    reason: format!("map index {k} out of range"),
                });
            }
            inst.index_map[k] = key;
        }
        Ok(inst)
    }
}

fn check_candidates(candidates: &[Vec<RouteCandidate>]) -> Result<(), QuboError> {
    match candidates.iter().position(Vec::is_empty) {
        Some(i) => Err(QuboError::NoCandidates(i)),
        None => Ok(()),
    }
}

/// Compiles per-AGV candidate lists into a QUBO. Variables are numbered
/// AGV-major in candidate order.
pub fn build_qubo(
    candidates: &[Vec<RouteCandidate>],
    w: PenaltyWeights,
    horizon: usize,
) -> Result<QuboInstance, QuboError> {
    check_candidates(candidates)?;
    let flat: Vec<(usize, &RouteCandidate)> = candidates
        .iter()
        .enumerate()
        .flat_map(|(i, list)| list.iter().map(move |c| (i, c)))
        .collect();
    let n = flat.len();
    let mut linear = vec![0.0; n];
    let mut pair: HashMap<(usize, usize), f64> = HashMap::new();
    let mut constant = 0.0;
    let mut add_pair = |a: usize, b: usize, v: f64| {
        *pair.entry((a.min(b), a.max(b))).or_insert(0.0) += v;
    };

    for (k, (_, c)) in flat.iter().enumerate() {
        linear[k] -= c.reward();
    }

    // One-hot: l1 (sum q - 1)^2 = l1 (-sum q + 2 sum_{k<l} q_k q_l + 1).
    let mut offset = 0;
    for list in candidates {
        let vars: Vec<usize> = (offset..offset + list.len()).collect();
        offset += list.len();
        for (a, &k) in vars.iter().enumerate() {
            linear[k] -= w.lambda1;
            for &l in &vars[a + 1..] {
                add_pair(k, l, 2.0 * w.lambda1);
            }
        }
        constant += w.lambda1;
    }

    // Collision over the occupancy support, same expansion as above.
    let mut support: BTreeMap<(usize, Resource), Vec<usize>> = BTreeMap::new();
    for (k, (_, c)) in flat.iter().enumerate() {
        for (t, r) in c.occupancy.iter().filter(|(t, _)| *t <= horizon) {
            support.entry((t, r)).or_default().push(k);
        }
    }
    for vars in support.values() {
        for (a, &k) in vars.iter().enumerate() {
            linear[k] -= w.lambda2;
            for &l in &vars[a + 1..] {
                add_pair(k, l, 2.0 * w.lambda2);
            }
        }
        constant += w.lambda2;
    }

    // Node entries: a mover entering a node another AGV also ends the step on.
    let mut at_node: BTreeMap<(usize, crate::plant::NodeIx), (Vec<usize>, Vec<usize>)> =
        BTreeMap::new();
    for (k, (_, c)) in flat.iter().enumerate() {
        for t in 1..=horizon.min(c.horizon()) {
            let slot = at_node.entry((t, c.position_at(t))).or_default();
            if c.arrives_at(t) {
                slot.0.push(k);
            } else {
                slot.1.push(k);
            }
        }
    }
    for (movers, dwellers) in at_node.values() {
        for (a, &u) in movers.iter().enumerate() {
            for &v in movers[a + 1..].iter().chain(dwellers.iter()) {
                if flat[u].0 != flat[v].0 {
                    add_pair(u, v, w.lambda2);
                }
            }
        }
    }

    let mut q = vec![0.0; n * n];
    for k in 0..n {
        q[k * n + k] = linear[k];
    }
    for ((a, b), v) in pair {
        q[a * n + b] += v / 2.0;
        q[b * n + a] += v / 2.0;
    }
    Ok(QuboInstance {
        n,
        q,
        constant,
        index_map: flat
            .iter()
            .map(|(i, c)| VarKey { agv: *i, mu: c.mu })
            .collect(),
        resource_index: support.into_keys().collect(),
    })
}

/// Evaluates the penalty energy term by term, without a matrix.
pub fn energy_direct(
    candidates: &[Vec<RouteCandidate>],
    w: PenaltyWeights,
    a: &Assignment,
    horizon: usize,
) -> Result<f64, QuboError> {
    check_candidates(candidates)?;
    let n: usize = candidates.iter().map(Vec::len).sum();
    if a.len() != n {
        return Err(QuboError::LengthMismatch {
            expected: n,
            got: a.len(),
        });
    }
    let mut bits = a.bits.iter();
    let selected: Vec<Vec<&RouteCandidate>> = candidates
        .iter()
        .map(|list| list.iter().filter(|_| *bits.next().unwrap()).collect())
        .collect();

    let reward: f64 = selected.iter().flatten().map(|c| c.reward()).sum();

    let one_hot: f64 = selected
        .iter()
        .map(|s| (s.len() as f64 - 1.0).powi(2))
        .sum();

    let mut counts: BTreeMap<(usize, Resource), i64> = BTreeMap::new();
    for c in candidates.iter().flatten() {
        for (t, r) in c.occupancy.iter().filter(|(t, _)| *t <= horizon) {
            counts.insert((t, r), 0);
        }
    }
    for c in selected.iter().flatten() {
        for (t, r) in c.occupancy.iter().filter(|(t, _)| *t <= horizon) {
            *counts.get_mut(&(t, r)).unwrap() += 1;
        }
    }
    let collision: f64 = counts.values().map(|&c| ((c - 1) * (c - 1)) as f64).sum();

    let mut entries = 0usize;
    for i in 0..selected.len() {
        for j in i + 1..selected.len() {
            for x in &selected[i] {
                for y in &selected[j] {
                    entries += (1..=horizon.min(x.horizon()).min(y.horizon()))
                        .filter(|&t| {
                            x.position_at(t) == y.position_at(t)
                                && (x.arrives_at(t) || y.arrives_at(t))
                        })
                        .count();
                }
            }
        }
    }

    Ok(-reward + w.lambda1 * one_hot + w.lambda2 * (collision + entries as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::NodeIx;

    /// One AGV at node 0 with "stop" and "move to node 1", horizon 1.
    pub(crate) fn two_var() -> Vec<Vec<RouteCandidate>> {
        vec![vec![
            RouteCandidate::new(0, 0, vec![NodeIx(0)], 1),
            RouteCandidate::new(0, 1, vec![NodeIx(0), NodeIx(1)], 1),
        ]]
    }

    const W: PenaltyWeights = PenaltyWeights {
        lambda1: 4.0,
        lambda2: 2.0,
    };

    /// Brute-force oracle: literal expansion with four assignments.
    fn by_hand(q0: f64, q1: f64) -> f64 {
        -q1 + 4.0 * (q0 + q1 - 1.0).powi(2) + 2.0 * (q0 - 1.0).powi(2) + 2.0 * (q1 - 1.0).powi(2)
    }

    #[test]
    fn two_variable_matrix() {
        let inst = build_qubo(&two_var(), W, 1).unwrap();
        assert_eq!(inst.n(), 2);
        assert_eq!(inst.get(0, 0), -6.0);
        assert_eq!(inst.get(1, 1), -7.0);
        assert_eq!(inst.get(0, 1) + inst.get(1, 0), 8.0);
        assert_eq!(inst.constant, 8.0);
        for bits in [[0u8, 0], [0, 1], [1, 0], [1, 1]] {
            let a = Assignment::from_bits(&bits);
            let want = by_hand(bits[0] as f64, bits[1] as f64);
            assert_eq!(inst.energy(&a).unwrap(), want);
            assert_eq!(energy_direct(&two_var(), W, &a, 1).unwrap(), want);
        }
    }

    #[test]
    fn two_variable_energies() {
        let inst = build_qubo(&two_var(), W, 1).unwrap();
        let e = |b: [u8; 2]| inst.energy(&Assignment::from_bits(&b)).unwrap();
        assert_eq!(e([0, 0]), 8.0);
        assert_eq!(e([0, 1]), 1.0);
        assert_eq!(e([1, 1]), 3.0);
        assert_eq!(e([1, 0]), 2.0);
    }

    #[test]
    fn zero_weights_leave_only_rewards() {
        let w = PenaltyWeights {
            lambda1: 0.0,
            lambda2: 0.0,
        };
        let inst = build_qubo(&two_var(), w, 1).unwrap();
        assert_eq!(inst.get(0, 0), 0.0);
        assert_eq!(inst.get(1, 1), -1.0);
        assert_eq!(inst.get(0, 1), 0.0);
        assert_eq!(inst.constant, 0.0);
        let a = Assignment::from_bits(&[1, 1]);
        assert_eq!(energy_direct(&two_var(), w, &a, 1).unwrap(), -1.0);
    }

    #[test]
    fn zero_matrix_energy() {
        let inst = QuboInstance::from_dense(3, vec![0.0; 9], 0.0);
        assert_eq!(
            inst.energy(&Assignment::from_bits(&[1, 0, 1])).unwrap(),
            0.0
        );
    }

    #[test]
    fn length_mismatch_and_missing_candidates() {
        let inst = build_qubo(&two_var(), W, 1).unwrap();
        assert_eq!(
            inst.energy(&Assignment::zeros(3)),
            Err(QuboError::LengthMismatch {
                expected: 2,
                got: 3
            })
        );
        let mut c = two_var();
        c.push(Vec::new());
        assert_eq!(build_qubo(&c, W, 1), Err(QuboError::NoCandidates(1)));
    }

    #[test]
    fn rescale_scales_everything() {
        let inst = build_qubo(&two_var(), W, 1).unwrap();
        assert_eq!(inst.max_abs(), 7.0);
        let doubled = QuboInstance::from_dense(2, vec![-6.0, 8.0, 8.0, -7.0], 8.0);
        let r = doubled.rescale(1.0);
        assert_eq!(r.get(0, 1), 1.0);
        assert_eq!(r.get(0, 0), -0.75);
        assert_eq!(r.constant, 1.0);
        assert_eq!(doubled.rescale(8.0), doubled);
    }

    #[test]
    fn rescale_keeps_ground_state() {
        let inst = build_qubo(&two_var(), W, 1).unwrap();
        let argmin = |inst: &QuboInstance| {
            let all = [[0u8, 0], [0, 1], [1, 0], [1, 1]];
            *all.iter()
                .min_by(|a, b| {
                    let ea = inst.energy(&Assignment::from_bits(*a)).unwrap();
                    let eb = inst.energy(&Assignment::from_bits(*b)).unwrap();
                    ea.partial_cmp(&eb).unwrap()
                })
                .unwrap()
        };
        assert_eq!(argmin(&inst), [0, 1]);
        assert_eq!(argmin(&inst.rescale(1.0)), [0, 1]);
    }

    #[test]
    fn text_round_trip() {
        let inst = build_qubo(&two_var(), W, 1).unwrap();
        let back = QuboInstance::from_text(&inst.to_text()).unwrap();
        assert_eq!(back.n(), 2);
        assert_eq!(back.constant, inst.constant);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(back.get(i, j), inst.get(i, j));
            }
        }
        assert_eq!(back.index_map, inst.index_map);
        assert!(matches!(
            QuboInstance::from_text("n 2\n0 5 1.0\n"),
            Err(QuboError::Format { line: 2, .. })
        ));
    }

    #[test]
    fn dominant_weights() {
        let w = PenaltyWeights::dominant(2, 10);
        assert_eq!(w.lambda2, 41.0);
        assert_eq!(w.lambda1, 123.0);
    }
}
