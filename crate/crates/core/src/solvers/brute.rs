use std::time::Instant;

use super::{Sample, SampleSet, SolverError};
use crate::qubo::{Assignment, QuboInstance};

pub const BRUTE_FORCE_LIMIT: usize = 24;

/// Enumerates all `2^n` assignments in Gray-code order and returns every
/// global minimum.
pub fn brute_force(inst: &QuboInstance) -> Result<SampleSet, SolverError> {
    let n = inst.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(SolverError::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let start = Instant::now();
    let mut bits = vec![false; n];
    // field[i] = Q_ii + 2 sum_{j != i} Q_ij q_j
    let mut field: Vec<f64> = (0..n).map(|i| inst.get(i, i)).collect();
    let mut energy = inst.constant;
    let scale = inst.max_abs().max(inst.constant.abs()).max(1.0);
    let tol = 1e-9 * scale * (n.max(1) as f64);

    let mut best = energy;
    let mut near: Vec<Vec<bool>> = vec![bits.clone()];
    for step in 1u64..(1u64 << n) {
        let k = step.trailing_zeros() as usize;
        let delta = if bits[k] { -field[k] } else { field[k] };
        let sign = if bits[k] { -2.0 } else { 2.0 };
        bits[k] = !bits[k];
        energy += delta;
        for (i, f) in field.iter_mut().enumerate() {
            if i != k {
                *f += sign * inst.get(i, k);
            }
        }
        if energy < best - tol {
            best = energy;
            near.clear();
        }
        if energy <= best + tol {
            near.push(bits.clone());
        }
    }

    // Incremental energies drift; settle ties on exact recomputation.
    let scored: Vec<(Assignment, f64)> = near
        .into_iter()
        .map(|bits| {
            let a = Assignment { bits };
            let e = inst.energy(&a).expect("length matches");
            (a, e)
        })
        .collect();
    let min = scored.iter().map(|(_, e)| *e).fold(f64::INFINITY, f64::min);
    let mut samples: Vec<Sample> = scored
        .into_iter()
        .filter(|(_, e)| *e <= min + tol)
        .map(|(assignment, energy)| Sample {
            assignment,
            energy,
            occurrences: 1,
        })
        .collect();
    samples.sort_by(|a, b| a.assignment.cmp(&b.assignment));
    Ok(SampleSet::from_samples(
        samples,
        start.elapsed().as_secs_f64(),
    ))
}
