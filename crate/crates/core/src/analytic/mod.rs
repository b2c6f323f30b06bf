//! Exact distribution of raw data `(t, b)` for an event in a given region.
//!
//! A report covers one compound window: the laps a device completed since
//! its last successful transmission. For a lap vector `n` (laps per region)
//! the window lasts `Σ n_i·T_i`. With the event in region `j`:
//!
//! * `b = 1`: `multinomial(n) · Π P_{R_i}^{n_i} · P_t · Σ_{i=1}^{n_j} P_{d_i}`
//! * `b = 0`: `multinomial(n) · Π P_{R_i}^{n_i} · (1 − P_det)^{n_j} · P_t`
//!
//! where `P_t = (1 − P_trans)^{Σn − 1} · P_trans` and
//! `P_{d_i} = (1 − P_det)^{i−1} · P_det`. A `b = 1` outcome with `n_j = 0`
//! is impossible and never emitted.
//!
//! [`enumerate_pmf`] walks every admissible lap vector and returns a
//! [`Pmf`] over noiseless lattice times; Gaussian noise is only applied when
//! sampling ([`ModelSampler`]).

mod combinatorics;
mod enumerate;
mod export;
pub(crate) mod sample;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ModelParams, RegionMap};

pub use combinatorics::{
    compensated_sum, ln_multinomial, multinomial_coefficient, multinomial_f64, MultinomialOverflow,
};
pub use enumerate::enumerate_pmf;
pub use export::{mass_by_time, read_pmf_csv, read_pmf_json, write_bar_chart, write_pmf_csv, write_pmf_json, TimeMass};
pub use sample::ModelSampler;

/// Above this many laps in a window, path probabilities are evaluated in the
/// log domain.
pub const LOG_DOMAIN_LAPS: u32 = 20;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("lap vector has {got} entries but the map has {expected} regions")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("lap vector must contain at least one lap")]
    NoLaps,
    #[error("event region {0} is not in the map")]
    UnknownRegion(u32),
    #[error("a detected report requires at least one lap through the event region {0}")]
    EventRegionNotVisited(u32),
    #[error("duration below minimum travel time ({duration} s < {min_travel_time} s)")]
    DurationBelowMinTravelTime { duration: f64, min_travel_time: f64 },
    #[error("empty distribution")]
    Empty,
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed lap vector field {0:?}")]
    LapVectorFormat(String),
}

/// Laps per region within one reporting window, indexed like
/// [`RegionMap::regions`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LapVector(Vec<u32>);

impl LapVector {
    pub fn new(counts: Vec<u32>) -> Self {
        Self(counts)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_laps(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn increment(&mut self, index: usize) {
        self.0[index] += 1;
    }

    /// `Σ n_i·T_i`, summed in region order.
    pub fn time(&self, travel_times: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(travel_times)
            .fold(0.0, |acc, (&n, &t)| acc + f64::from(n) * t)
    }

    fn check(&self, map: &RegionMap) -> Result<(), ModelError> {
        if self.0.len() != map.len() {
            return Err(ModelError::DimensionMismatch {
                expected: map.len(),
                got: self.0.len(),
            });
        }
        if self.total_laps() == 0 {
            return Err(ModelError::NoLaps);
        }
        Ok(())
    }
}

impl std::fmt::Display for LapVector {
    /// Semicolon-separated counts, e.g. `1;0`.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{n}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for LapVector {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(';')
            .map(|c| c.trim().parse::<u32>())
            .collect::<Result<Vec<_>, _>>()
            .map(LapVector)
            .map_err(|_| ModelError::LapVectorFormat(s.to_string()))
    }
}

/// One `(time, bit)` outcome.
///
/// Straight out of [`enumerate_pmf`] every atom carries exactly one lap
/// vector; [`collapse_pmf`] merges atoms and concatenates their provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfAtom {
    #[serde(rename = "time_s")]
    pub time: f64,
    pub bit: u8,
    pub prob: f64,
    pub lap_vectors: Vec<LapVector>,
}

impl PmfAtom {
    /// Smallest lap count among the atom's lap vectors.
    pub fn min_laps(&self) -> u32 {
        self.lap_vectors.iter().map(LapVector::total_laps).min().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    pub atoms: Vec<PmfAtom>,
    pub event_region: u32,
    pub params: ModelParams,
    /// `1 − Σ prob`: mass of outcomes outside the enumeration bounds.
    pub truncated_mass: f64,
    /// Upper bound on the mass removed by duration cuts and epsilon pruning.
    pub pruned_mass_bound: f64,
    pub map_fingerprint: String,
}

impl Pmf {
    pub fn retained_mass(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.prob))
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(time, bit, prob / retained_mass)` triples.
    pub fn normalized(&self) -> Vec<(f64, u8, f64)> {
        let total = self.retained_mass();
        self.atoms.iter().map(|a| (a.time, a.bit, a.prob / total)).collect()
    }
}

/// Probability that a window of `Σ n_i` laps visits region `i` exactly
/// `n_i` times, in any order: `multinomial(n) · Π P_{R_i}^{n_i}`.
pub fn path_probability(lap_vector: &LapVector, map: &RegionMap) -> Result<f64, ModelError> {
    lap_vector.check(map)?;
    let counts = lap_vector.counts();
    let probs = map.probabilities();
    if lap_vector.total_laps() > LOG_DOMAIN_LAPS {
        let ln = ln_multinomial(counts)
            + counts
                .iter()
                .zip(&probs)
                .filter(|(&n, _)| n > 0)
                .map(|(&n, &p)| f64::from(n) * p.ln())
                .sum::<f64>();
        return Ok(ln.exp());
    }
    let weight: f64 = counts
        .iter()
        .zip(&probs)
        .map(|(&n, &p)| p.powi(n as i32))
        .product();
    Ok(multinomial_f64(counts) * weight)
}

/// Probability that the first detection happens on pass `i` (1-based).
pub fn detect_in_iteration_prob(i: u32, p_det: f64) -> f64 {
    assert!(i >= 1, "detection passes are numbered from 1");
    (1.0 - p_det).powi(i as i32 - 1) * p_det
}

/// `Σ_{i=1}^{passes} P_{d_i} = 1 − (1 − P_det)^passes`.
pub fn detect_within_prob(passes: u32, p_det: f64) -> f64 {
    1.0 - miss_all_prob(passes, p_det)
}

/// `(1 − P_det)^passes`; equals 1 when there were no passes.
pub fn miss_all_prob(passes: u32, p_det: f64) -> f64 {
    if passes == 0 {
        1.0
    } else {
        (1.0 - p_det).powi(passes as i32)
    }
}

/// `P_t`: every heart passage fails except the last one.
pub fn transmission_factor(total_laps: u32, p_trans: f64) -> f64 {
    assert!(total_laps >= 1, "a report needs at least one lap");
    if total_laps == 1 {
        return p_trans;
    }
    if total_laps > LOG_DOMAIN_LAPS && p_trans < 1.0 {
        return (f64::from(total_laps - 1) * (1.0 - p_trans).ln() + p_trans.ln()).exp();
    }
    (1.0 - p_trans).powi(total_laps as i32 - 1) * p_trans
}

fn event_laps(lap_vector: &LapVector, event_region: u32, map: &RegionMap) -> Result<u32, ModelError> {
    let j = map
        .index_of(event_region)
        .ok_or(ModelError::UnknownRegion(event_region))?;
    lap_vector.check(map)?;
    Ok(lap_vector.counts()[j])
}

/// Probability of reporting `(Σ n_i·T_i, 1)`.
pub fn atom_prob_detected(
    lap_vector: &LapVector,
    event_region: u32,
    map: &RegionMap,
    params: &ModelParams,
) -> Result<f64, ModelError> {
    let nj = event_laps(lap_vector, event_region, map)?;
    if nj == 0 {
        return Err(ModelError::EventRegionNotVisited(event_region));
    }
    Ok(path_probability(lap_vector, map)?
        * transmission_factor(lap_vector.total_laps(), params.p_trans)
        * detect_within_prob(nj, params.p_det))
}

/// Probability of reporting `(Σ n_i·T_i, 0)`.
pub fn atom_prob_undetected(
    lap_vector: &LapVector,
    event_region: u32,
    map: &RegionMap,
    params: &ModelParams,
) -> Result<f64, ModelError> {
    let nj = event_laps(lap_vector, event_region, map)?;
    Ok(path_probability(lap_vector, map)?
        * miss_all_prob(nj, params.p_det)
        * transmission_factor(lap_vector.total_laps(), params.p_trans))
}

/// Merges atoms with equal bits whose times lie within `time_tolerance` of
/// the first (earliest) atom of their group. The merged atom sits at the time
/// of its most probable member.
pub fn collapse_pmf(pmf: &Pmf, time_tolerance: f64) -> Pmf {
    assert!(time_tolerance >= 0.0, "time tolerance must be non-negative");
    let mut sorted: Vec<&PmfAtom> = pmf.atoms.iter().collect();
    sorted.sort_by(|a, b| a.bit.cmp(&b.bit).then(a.time.total_cmp(&b.time)));

    let mut atoms = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let start = sorted[i];
        let mut j = i + 1;
        while j < sorted.len() && sorted[j].bit == start.bit && sorted[j].time - start.time <= time_tolerance {
            j += 1;
        }
        let group = &sorted[i..j];
        let peak = group
            .iter()
            .copied()
            .reduce(|best, a| if a.prob > best.prob { a } else { best })
            .expect("group is non-empty");
        atoms.push(PmfAtom {
            time: peak.time,
            bit: start.bit,
            prob: compensated_sum(group.iter().map(|a| a.prob)),
            lap_vectors: group.iter().flat_map(|a| a.lap_vectors.iter().cloned()).collect(),
        });
        i = j;
    }
    atoms.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.bit.cmp(&b.bit)));
    Pmf { atoms, ..pmf.clone() }
}

/// Fraction of retained mass carried by `b = 1` outcomes.
pub fn event_bit_ratio(pmf: &Pmf) -> Result<f64, ModelError> {
    if pmf.atoms.is_empty() {
        return Err(ModelError::Empty);
    }
    let total = pmf.retained_mass();
    if total <= 0.0 {
        return Err(ModelError::Empty);
    }
    let ones = compensated_sum(pmf.atoms.iter().filter(|a| a.bit == 1).map(|a| a.prob));
    Ok(ones / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::builtin_two_region_example;

    fn lv(c: &[u32]) -> LapVector {
        LapVector::new(c.to_vec())
    }

    #[test]
    fn path_probability_examples() {
        let (map, _) = builtin_two_region_example();
        assert!((path_probability(&lv(&[1, 0]), &map).unwrap() - 0.49).abs() < 1e-15);
        assert!((path_probability(&lv(&[1, 1]), &map).unwrap() - 0.4998).abs() < 1e-15);
    }

    #[test]
    fn path_probability_sums_to_one_per_lap_count() {
        let (map, _) = builtin_two_region_example();
        for k in 1..=30u32 {
            let total: f64 = (0..=k)
                .map(|a| path_probability(&lv(&[a, k - a]), &map).unwrap())
                .sum();
            assert!((total - 1.0).abs() < 1e-12, "k={k}: {total}");
        }
    }

    #[test]
    fn path_probability_errors() {
        let (map, _) = builtin_two_region_example();
        assert!(matches!(
            path_probability(&lv(&[1, 0, 0]), &map),
            Err(ModelError::DimensionMismatch { expected: 2, got: 3 })
        ));
        assert!(matches!(path_probability(&lv(&[0, 0]), &map), Err(ModelError::NoLaps)));
    }

    #[test]
    fn log_domain_agrees_with_linear() {
        let (map, _) = builtin_two_region_example();
        let v = lv(&[11, 10]);
        let linear = multinomial_f64(v.counts()) * 0.49f64.powi(11) * 0.51f64.powi(10);
        let got = path_probability(&v, &map).unwrap();
        assert!(((got - linear) / linear).abs() < 1e-12);
        let t = transmission_factor(25, 0.3);
        assert!(((t - 0.7f64.powi(24) * 0.3) / t).abs() < 1e-12);
        assert_eq!(transmission_factor(25, 1.0), 0.0);
    }

    #[test]
    fn detection_terms() {
        assert_eq!(detect_in_iteration_prob(1, 0.7), 0.7);
        assert!((detect_in_iteration_prob(2, 0.7) - 0.21).abs() < 1e-15);
        assert_eq!(detect_in_iteration_prob(1, 1.0), 1.0);
        assert_eq!(detect_in_iteration_prob(2, 1.0), 0.0);
        assert_eq!(detect_in_iteration_prob(7, 1.0), 0.0);
        let summed: f64 = (1..=4).map(|i| detect_in_iteration_prob(i, 0.7)).sum();
        assert!((summed - detect_within_prob(4, 0.7)).abs() < 1e-15);
    }

    #[test]
    fn transmission_terms() {
        assert_eq!(transmission_factor(1, 0.7), 0.7);
        assert!((transmission_factor(3, 0.7) - 0.063).abs() < 1e-15);
        let series: f64 = (1..=200).map(|k| transmission_factor(k, 0.7)).sum();
        assert!((series - 1.0).abs() < 1e-12);
    }

    #[test]
    fn detected_atom_examples() {
        let (map, params) = builtin_two_region_example();
        let p = atom_prob_detected(&lv(&[1, 0]), 1, &map, &params).unwrap();
        assert!((p - 0.2401).abs() < 1e-12);
        assert!(matches!(
            atom_prob_detected(&lv(&[0, 1]), 1, &map, &params),
            Err(ModelError::EventRegionNotVisited(1))
        ));
        let perfect = ModelParams { p_det: 1.0, ..params };
        let v = lv(&[2, 1]);
        let expected = path_probability(&v, &map).unwrap() * transmission_factor(3, 0.7);
        assert!((atom_prob_detected(&v, 1, &map, &perfect).unwrap() - expected).abs() < 1e-15);
        assert!(matches!(
            atom_prob_detected(&v, 9, &map, &params),
            Err(ModelError::UnknownRegion(9))
        ));
    }

    #[test]
    fn undetected_atom_examples() {
        let (map, params) = builtin_two_region_example();
        let a = atom_prob_undetected(&lv(&[0, 1]), 1, &map, &params).unwrap();
        assert!((a - 0.357).abs() < 1e-12);
        let b = atom_prob_undetected(&lv(&[1, 0]), 1, &map, &params).unwrap();
        assert!((b - 0.1029).abs() < 1e-12);
        let blind = ModelParams { p_det: 0.0, ..params };
        for v in [lv(&[1, 0]), lv(&[2, 3]), lv(&[0, 4])] {
            let expected = path_probability(&v, &map).unwrap() * transmission_factor(v.total_laps(), 0.7);
            assert!((atom_prob_undetected(&v, 1, &map, &blind).unwrap() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn lap_vector_text_form() {
        let v = lv(&[3, 0, 12]);
        assert_eq!(v.to_string(), "3;0;12");
        assert_eq!("3;0;12".parse::<LapVector>().unwrap(), v);
        assert!("3;x".parse::<LapVector>().is_err());
    }

    fn atom(time: f64, bit: u8, prob: f64, c: &[u32]) -> PmfAtom {
        PmfAtom {
            time,
            bit,
            prob,
            lap_vectors: vec![lv(c)],
        }
    }

    fn pmf_of(atoms: Vec<PmfAtom>) -> Pmf {
        let (_, params) = builtin_two_region_example();
        Pmf {
            atoms,
            event_region: 1,
            params,
            truncated_mass: 0.0,
            pruned_mass_bound: 0.0,
            map_fingerprint: String::new(),
        }
    }

    #[test]
    fn collapse_merges_equal_times() {
        let pmf = pmf_of(vec![atom(120.0, 1, 0.1, &[2, 0]), atom(120.0, 1, 0.2, &[0, 2])]);
        let out = collapse_pmf(&pmf, 0.0);
        assert_eq!(out.atoms.len(), 1);
        assert!((out.atoms[0].prob - 0.3).abs() < 1e-15);
        assert_eq!(out.atoms[0].lap_vectors.len(), 2);
    }

    #[test]
    fn collapse_keeps_bits_and_distinct_times_apart() {
        let pmf = pmf_of(vec![
            atom(60.0, 0, 0.1, &[1, 0]),
            atom(60.0, 1, 0.2, &[1, 0]),
            atom(67.0, 0, 0.3, &[0, 1]),
        ]);
        assert_eq!(collapse_pmf(&pmf, 0.0).atoms, pmf.atoms);
        let wide = collapse_pmf(&pmf, 10.0);
        assert_eq!(wide.atoms.len(), 2);
        let zeros = wide.atoms.iter().find(|a| a.bit == 0).unwrap();
        assert_eq!(zeros.time, 67.0);
        assert!((zeros.prob - 0.4).abs() < 1e-15);
    }

    #[test]
    fn bit_ratio_of_empty_pmf_is_an_error() {
        assert!(matches!(event_bit_ratio(&pmf_of(vec![])), Err(ModelError::Empty)));
    }
}
