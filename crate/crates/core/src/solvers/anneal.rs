//! Single-flip Metropolis annealing and the parallel-trial variant with a
//! dynamic offset.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{delta_scales, read_rng, Sample, SampleSet};
use crate::qubo::{Assignment, QuboInstance};

/// Geometric inverse-temperature schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub sweeps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    /// Independent anneals per read; the best one is reported.
    pub restarts: usize,
}

impl AnnealSchedule {
    pub fn new(sweeps: usize, beta_start: f64, beta_end: f64) -> Self {
        assert!(sweeps >= 1, "at least one sweep");
        assert!(
            beta_start > 0.0 && beta_end >= beta_start,
            "need 0 < beta_start <= beta_end"
        );
        AnnealSchedule {
            sweeps,
            beta_start,
            beta_end,
            restarts: 1,
        }
    }

    /// Hot enough that the largest flip is accepted half the time at the
    /// start, cold enough that the smallest uphill flip is accepted 1% of the
    /// time at the end.
    pub fn for_instance(inst: &QuboInstance, sweeps: usize) -> Self {
        let (hi, lo) = delta_scales(inst);
        let beta_start = std::f64::consts::LN_2 / hi;
        let beta_end = (100f64.ln() / lo).max(beta_start);
        AnnealSchedule::new(sweeps, beta_start, beta_end)
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        assert!(restarts >= 1);
        self.restarts = restarts;
        self
    }

    /// Inverse temperature at step `i` of `total`.
    pub fn beta_at(&self, i: usize, total: usize) -> f64 {
        if total <= 1 {
            return self.beta_end;
        }
        let frac = i as f64 / (total - 1) as f64;
        self.beta_start * (self.beta_end / self.beta_start).powf(frac)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicOffsetParams {
    /// Added to the offset after a step in which no flip was accepted.
    pub increment: f64,
}

impl DynamicOffsetParams {
    pub fn for_instance(inst: &QuboInstance) -> Self {
        let (_, lo) = delta_scales(inst);
        DynamicOffsetParams { increment: lo }
    }
}

/// Spin state with cached local fields: `field[i] = Q_ii + 2 sum_j Q_ij q_j`.
#[derive(Debug, Clone)]
struct FieldState<'a> {
    inst: &'a QuboInstance,
    bits: Vec<bool>,
    field: Vec<f64>,
}

impl<'a> FieldState<'a> {
    fn new(inst: &'a QuboInstance, bits: Vec<bool>) -> Self {
        let n = inst.n();
        assert_eq!(bits.len(), n);
        let field = (0..n)
            .map(|i| {
                let row = inst.row(i);
                row[i]
                    + 2.0
                        * (0..n)
                            .filter(|&j| j != i && bits[j])
                            .map(|j| row[j])
                            .sum::<f64>()
            })
            .collect();
        FieldState { inst, bits, field }
    }

    fn random(inst: &'a QuboInstance, rng: &mut ChaCha8Rng) -> Self {
        let bits = (0..inst.n()).map(|_| rng.gen::<bool>()).collect();
        Self::new(inst, bits)
    }

    #[inline]
    fn delta(&self, k: usize) -> f64 {
        if self.bits[k] {
            -self.field[k]
        } else {
            self.field[k]
        }
    }

    fn flip(&mut self, k: usize) {
        let sign = if self.bits[k] { -2.0 } else { 2.0 };
        self.bits[k] = !self.bits[k];
        let row = self.inst.row(k);
        for (i, f) in self.field.iter_mut().enumerate() {
            if i != k {
                *f += sign * row[i];
            }
        }
    }

    fn assignment(&self) -> Assignment {
        Assignment {
            bits: self.bits.clone(),
        }
    }
}

#[inline]
fn metropolis(delta: f64, beta: f64, rng: &mut ChaCha8Rng) -> bool {
    if delta <= 0.0 {
        return true;
    }
    let x = beta * delta;
    // exp(-50) is below the resolution of a uniform f64 draw.
    x < 50.0 && rng.gen::<f64>() < (-x).exp()
}

/// Sequential-sweep single-flip Metropolis chain.
#[derive(Debug, Clone)]
pub struct MetropolisChain<'a> {
    state: FieldState<'a>,
}

impl<'a> MetropolisChain<'a> {
    pub fn new(inst: &'a QuboInstance, start: Assignment) -> Self {
        MetropolisChain {
            state: FieldState::new(inst, start.bits),
        }
    }

    pub fn random(inst: &'a QuboInstance, rng: &mut ChaCha8Rng) -> Self {
        MetropolisChain {
            state: FieldState::random(inst, rng),
        }
    }

    /// One pass over all variables in index order; returns accepted flips.
    pub fn sweep(&mut self, beta: f64, rng: &mut ChaCha8Rng) -> usize {
        let mut accepted = 0;
        for k in 0..self.state.bits.len() {
            if metropolis(self.state.delta(k), beta, rng) {
                self.state.flip(k);
                accepted += 1;
            }
        }
        accepted
    }

    pub fn assignment(&self) -> Assignment {
        self.state.assignment()
    }
}

/// Which flips a parallel-trial step tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialMode {
    /// Every variable is trialed against the current state; one acceptor is
    /// applied, chosen uniformly.
    All,
    /// A single uniformly chosen variable is trialed, so the applied flip is
    /// forced. This reduces the step to random-scan Metropolis.
    Single,
}

/// Parallel-trial chain with a dynamic offset. The offset keeps the chain
/// moving even when cold, so it also remembers the lowest state visited.
#[derive(Debug, Clone)]
pub struct ParallelTrialChain<'a> {
    state: FieldState<'a>,
    energy: f64,
    best: (Vec<bool>, f64),
    offset: f64,
    increment: f64,
    mode: TrialMode,
    accepted: Vec<usize>,
}

impl<'a> ParallelTrialChain<'a> {
    pub fn new(
        inst: &'a QuboInstance,
        start: Assignment,
        dynamic: DynamicOffsetParams,
        mode: TrialMode,
    ) -> Self {
        let energy = inst.energy(&start).expect("length matches");
        ParallelTrialChain {
            best: (start.bits.clone(), energy),
            state: FieldState::new(inst, start.bits),
            energy,
            offset: 0.0,
            increment: dynamic.increment,
            mode,
            accepted: Vec::with_capacity(inst.n()),
        }
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn assignment(&self) -> Assignment {
        self.state.assignment()
    }

    /// Lowest-energy assignment seen so far, including the start.
    pub fn best(&self) -> Assignment {
        Assignment {
            bits: self.best.0.clone(),
        }
    }

    /// One step. Each trial uses `dE - offset`; returns the flipped variable.
    pub fn step(&mut self, beta: f64, rng: &mut ChaCha8Rng) -> Option<usize> {
        let n = self.state.bits.len();
        if n == 0 {
            return None;
        }
        self.accepted.clear();
        match self.mode {
            TrialMode::All => {
                for k in 0..n {
                    if metropolis(self.state.delta(k) - self.offset, beta, rng) {
                        self.accepted.push(k);
                    }
                }
            }
            TrialMode::Single => {
                let k = rng.gen_range(0..n);
                if metropolis(self.state.delta(k) - self.offset, beta, rng) {
                    self.accepted.push(k);
                }
            }
        }
        if self.accepted.is_empty() {
            self.offset += self.increment;
            return None;
        }
        let k = self.accepted[rng.gen_range(0..self.accepted.len())];
        self.energy += self.state.delta(k);
        self.state.flip(k);
        self.offset = 0.0;
        if self.energy < self.best.1 {
            self.best = (self.state.bits.clone(), self.energy);
        }
        Some(k)
    }
}

fn finish(inst: &QuboInstance, best: Option<Assignment>) -> Sample {
    let assignment = best.expect("at least one restart");
    let energy = inst.energy(&assignment).expect("length matches");
    Sample {
        assignment,
        energy,
        occurrences: 1,
    }
}

fn keep_better(inst: &QuboInstance, best: &mut Option<(Assignment, f64)>, a: Assignment) {
    let e = inst.energy(&a).expect("length matches");
    if best.as_ref().is_none_or(|(_, b)| e < *b) {
        *best = Some((a, e));
    }
}

/// Plain simulated annealing: `num_reads` independent runs, each from a
/// random assignment through `sweeps` sequential Metropolis sweeps.
pub fn simulated_annealing(
    inst: &QuboInstance,
    sched: &AnnealSchedule,
    num_reads: usize,
    seed: u64,
) -> SampleSet {
    let start = Instant::now();
    let samples = (0..num_reads as u64)
        .into_par_iter()
        .map(|read| {
            let mut rng = read_rng(seed, read);
            let mut best = None;
            for _ in 0..sched.restarts {
                let mut chain = MetropolisChain::random(inst, &mut rng);
                for s in 0..sched.sweeps {
                    chain.sweep(sched.beta_at(s, sched.sweeps), &mut rng);
                }
                keep_better(inst, &mut best, chain.assignment());
            }
            finish(inst, best.map(|(a, _)| a))
        })
        .collect();
    SampleSet::from_samples(samples, start.elapsed().as_secs_f64())
}

/// Parallel-trial annealing. One sweep is `n` parallel-trial steps, matching
/// the number of flip opportunities in a plain sweep. Each read reports the
/// lowest state its chain visited.
pub fn parallel_trial_sa(
    inst: &QuboInstance,
    sched: &AnnealSchedule,
    dynamic: &DynamicOffsetParams,
    num_reads: usize,
    seed: u64,
) -> SampleSet {
    let start = Instant::now();
    let steps = sched.sweeps * inst.n().max(1);
    let samples = (0..num_reads as u64)
        .into_par_iter()
        .map(|read| {
            let mut rng = read_rng(seed, read);
            let mut best = None;
            for _ in 0..sched.restarts {
                let init = FieldState::random(inst, &mut rng).assignment();
                let mut chain = ParallelTrialChain::new(inst, init, *dynamic, TrialMode::All);
                for s in 0..steps {
                    chain.step(sched.beta_at(s, steps), &mut rng);
                }
                keep_better(inst, &mut best, chain.best());
            }
            finish(inst, best.map(|(a, _)| a))
        })
        .collect();
    SampleSet::from_samples(samples, start.elapsed().as_secs_f64())
}
