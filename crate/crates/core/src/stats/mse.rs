use super::StatsError;
use crate::analytic::{collapse_pmf, Pmf};
use crate::sim::EmpiricalPmf;

/// Analytic atoms closer than this are the same lattice point.
const LATTICE_EPS: f64 = 1e-9;

/// Pairs `(frequency, probability)` over the union of both supports.
/// Analytic probabilities are renormalized by retained mass; an empirical
/// atom joins the nearest analytic atom of the same bit within
/// `time_tolerance`.
fn align(empirical: &EmpiricalPmf, analytic: &Pmf, time_tolerance: f64) -> Result<Vec<(f64, f64)>, StatsError> {
    if empirical.map_fingerprint != analytic.map_fingerprint {
        return Err(StatsError::InconsistentLattice {
            empirical: empirical.map_fingerprint.clone(),
            analytic: analytic.map_fingerprint.clone(),
        });
    }
    let collapsed = collapse_pmf(analytic, LATTICE_EPS);
    let total = collapsed.retained_mass();
    if total <= 0.0 {
        return Err(StatsError::EmptySample);
    }
    let mut pairs: Vec<(f64, f64)> = collapsed.atoms.iter().map(|a| (0.0, a.prob / total)).collect();

    for bit in [0u8, 1] {
        let idx: Vec<usize> = (0..collapsed.atoms.len())
            .filter(|&i| collapsed.atoms[i].bit == bit)
            .collect();
        for e in empirical.atoms.iter().filter(|e| e.bit == bit) {
            let pos = idx.partition_point(|&i| collapsed.atoms[i].time < e.time);
            let best = [pos.checked_sub(1), Some(pos)]
                .into_iter()
                .flatten()
                .filter_map(|p| idx.get(p).copied())
                .min_by(|&x, &y| {
                    let dx = (collapsed.atoms[x].time - e.time).abs();
                    let dy = (collapsed.atoms[y].time - e.time).abs();
                    dx.total_cmp(&dy)
                })
                .filter(|&i| (collapsed.atoms[i].time - e.time).abs() <= time_tolerance);
            match best {
                Some(i) => pairs[i].0 += e.freq,
                None => pairs.push((e.freq, 0.0)),
            }
        }
    }
    Ok(pairs)
}

/// Mean squared difference between empirical frequencies and analytic
/// probabilities over the union of supported `(time, bit)` atoms.
pub fn pmf_mse(empirical: &EmpiricalPmf, analytic: &Pmf, time_tolerance: f64) -> Result<f64, StatsError> {
    let pairs = align(empirical, analytic, time_tolerance)?;
    Ok(pairs.iter().map(|(f, p)| (f - p).powi(2)).sum::<f64>() / pairs.len() as f64)
}

/// Total-variation distance `½ Σ |f − p|` over the same alignment as
/// [`pmf_mse`].
pub fn total_variation(empirical: &EmpiricalPmf, analytic: &Pmf, time_tolerance: f64) -> Result<f64, StatsError> {
    let pairs = align(empirical, analytic, time_tolerance)?;
    Ok(0.5 * pairs.iter().map(|(f, p)| (f - p).abs()).sum::<f64>())
}
