use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{Dataset, SimError};
use crate::config::RegionMap;

/// Upper limit on distinct reachable times considered for binning.
pub const MAX_LATTICE_POINTS: usize = 2_000_000;

const KEY_SCALE: f64 = 1e6;

fn key(t: f64) -> i64 {
    (t * KEY_SCALE).round() as i64
}

/// Every distinct `Σ n_i·T_i ≤ upper` with at least one lap, ascending.
pub fn lattice_times(travel_times: &[f64], upper: f64) -> Result<Vec<f64>, SimError> {
    let mut seen: HashSet<i64> = HashSet::new();
    let mut all = Vec::new();
    let mut frontier = vec![0.0f64];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for &base in &frontier {
            for &t in travel_times {
                let v = base + t;
                if v <= upper && seen.insert(key(v)) {
                    next.push(v);
                }
            }
        }
        if seen.len() > MAX_LATTICE_POINTS {
            return Err(SimError::LatticeTooLarge(MAX_LATTICE_POINTS));
        }
        all.extend_from_slice(&next);
        frontier = next;
    }
    all.sort_by(f64::total_cmp);
    Ok(all)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalAtom {
    pub time: f64,
    pub bit: u8,
    pub count: usize,
    pub freq: f64,
    /// False when the record matched no lattice time and kept its raw time.
    pub on_lattice: bool,
}

/// Frequency table shaped like a [`crate::analytic::Pmf`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPmf {
    pub atoms: Vec<EmpiricalAtom>,
    pub total: usize,
    pub unmatched: usize,
    pub map_fingerprint: String,
}

impl EmpiricalPmf {
    pub fn matched_fraction(&self) -> f64 {
        1.0 - self.unmatched as f64 / self.total as f64
    }
}

/// Bins each record to the nearest reachable lattice time if it is within
/// `time_tolerance`, else to its own raw time, and normalizes counts per
/// `(time, bit)`.
pub fn empirical_pmf(dataset: &Dataset, map: &RegionMap, time_tolerance: f64) -> Result<EmpiricalPmf, SimError> {
    if dataset.records.is_empty() {
        return Err(SimError::EmptyDataset);
    }
    let upper = dataset
        .records
        .iter()
        .map(|r| r.iteration_time)
        .fold(0.0, f64::max)
        + time_tolerance;
    let lattice = lattice_times(&map.travel_times(), upper)?;

    let mut bins: BTreeMap<(u8, i64), (f64, bool, usize)> = BTreeMap::new();
    let mut unmatched = 0;
    for r in &dataset.records {
        let (time, on_lattice) = match nearest(&lattice, r.iteration_time) {
            Some(t) if (t - r.iteration_time).abs() <= time_tolerance => (t, true),
            _ => {
                unmatched += 1;
                (r.iteration_time, false)
            }
        };
        bins.entry((r.bit, key(time))).or_insert((time, on_lattice, 0)).2 += 1;
    }

    let total = dataset.records.len();
    let mut atoms: Vec<EmpiricalAtom> = bins
        .into_iter()
        .map(|((bit, _), (time, on_lattice, count))| EmpiricalAtom {
            time,
            bit,
            count,
            freq: count as f64 / total as f64,
            on_lattice,
        })
        .collect();
    atoms.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.bit.cmp(&b.bit)));
    Ok(EmpiricalPmf {
        atoms,
        total,
        unmatched,
        map_fingerprint: map.fingerprint(),
    })
}

fn nearest(sorted: &[f64], x: f64) -> Option<f64> {
    let i = sorted.partition_point(|&v| v < x);
    let below = i.checked_sub(1).map(|j| sorted[j]);
    let above = sorted.get(i).copied();
    match (below, above) {
        (Some(b), Some(a)) => Some(if x - b <= a - x { b } else { a }),
        (b, a) => b.or(a),
    }
}
