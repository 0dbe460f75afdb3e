//! Interchangeable QUBO backends.
//!
//! Stochastic solvers are pure functions of (instance, parameters, seed):
//! every read draws from its own ChaCha stream selected by the read index,
//! so reads can run in parallel without changing results.

mod anneal;
mod brute;
mod exact;

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use anneal::{
    parallel_trial_sa, simulated_annealing, AnnealSchedule, DynamicOffsetParams, MetropolisChain,
    ParallelTrialChain, TrialMode,
};
pub use brute::{brute_force, BRUTE_FORCE_LIMIT};
pub use exact::{exact_search, ExactResult, StructuredInstance};

use crate::qubo::{Assignment, QuboInstance};

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("brute force refused: {n} variables exceeds the limit of {limit}")]
    TooLarge { n: usize, limit: usize },
    #[error("malformed sample table, line {line}: {reason}")]
    Format { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub assignment: Assignment,
    pub energy: f64,
    pub occurrences: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    /// Wall-clock seconds for the whole call.
    pub wall_time: f64,
    /// Wall-clock seconds per output sample.
    pub per_sample_time: f64,
}

impl SampleSet {
    pub(crate) fn from_samples(samples: Vec<Sample>, wall_time: f64) -> Self {
        let count: u64 = samples.iter().map(|s| s.occurrences).sum();
        SampleSet {
            per_sample_time: if count == 0 {
                0.0
            } else {
                wall_time / count as f64
            },
            samples,
            wall_time,
        }
    }

    pub fn total_occurrences(&self) -> u64 {
        self.samples.iter().map(|s| s.occurrences).sum()
    }

    pub fn lowest(&self) -> Option<&Sample> {
        self.samples
            .iter()
            .min_by(|a, b| a.energy.total_cmp(&b.energy))
    }

    /// One row per sample: bitstring, energy, occurrences.
    pub fn to_table(&self) -> String {
        let mut out = String::from("assignment\tenergy\toccurrences\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{}\t{:?}\t{}",
                s.assignment.to_bitstring(),
                s.energy,
                s.occurrences
            );
        }
        out
    }

    pub fn from_table(text: &str) -> Result<SampleSet, SolverError> {
        let mut samples = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: &str| SolverError::Format {
                line: i + 1,
                reason: reason.into(),
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad("expected three tab-separated fields"));
            }
            samples.push(Sample {
                assignment: Assignment::parse_bitstring(fields[0])
                    .ok_or_else(|| bad("bad bitstring"))?,
                energy: fields[1].parse().map_err(|_| bad("bad energy"))?,
                occurrences: fields[2].parse().map_err(|_| bad("bad occurrences"))?,
            });
        }
        Ok(SampleSet::from_samples(samples, 0.0))
    }
}

/// Weighted fraction of samples within `tol` of `ground_energy`.
pub fn ground_state_probability(ss: &SampleSet, ground_energy: f64, tol: f64) -> f64 {
    let total = ss.total_occurrences();
    if total == 0 {
        return 0.0;
    }
    let hits: u64 = ss
        .samples
        .iter()
        .filter(|s| s.energy <= ground_energy + tol)
        .map(|s| s.occurrences)
        .sum();
    hits as f64 / total as f64
}

/// Generator for read `read` of a call seeded with `seed`.
pub fn read_rng(seed: u64, read: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(read);
    rng
}

/// Largest single-flip energy change and smallest coefficient scale, used
/// to pick a default temperature range. Differences between diagonal entries
/// count as scales: they set the gaps between competing one-hot choices.
pub(crate) fn delta_scales(inst: &QuboInstance) -> (f64, f64) {
    let n = inst.n();
    let mut hi: f64 = 0.0;
    let mut lo = f64::INFINITY;
    let mut consider = |v: f64| {
        if v > 1e-12 {
            lo = lo.min(v);
        }
    };
    let mut diag: Vec<f64> = (0..n).map(|i| inst.get(i, i)).collect();
    for i in 0..n {
        let row = inst.row(i);
        let span = row[i].abs()
            + 2.0
                * (0..n)
                    .filter(|&j| j != i)
                    .map(|j| row[j].abs())
                    .sum::<f64>();
        hi = hi.max(span);
        for (j, v) in row.iter().enumerate() {
            consider(if i == j { v.abs() } else { 2.0 * v.abs() });
        }
    }
    diag.sort_by(f64::total_cmp);
    for w in diag.windows(2) {
        consider(w[1] - w[0]);
    }
    if !lo.is_finite() {
        lo = 1.0;
    }
    if hi == 0.0 {
        hi = 1.0;
    }
    (hi, lo)
}
