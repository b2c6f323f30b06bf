use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ecdf_max_distance, ecdf_squared_area, kl_bit_divergence, mann_whitney, MannWhitney, StatsError};
use crate::analytic::{event_bit_ratio, ModelSampler, Pmf};
use crate::config::RegionMap;
use crate::sim::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EcdfMetric {
    #[default]
    MaxVertical,
    SquaredArea,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub alpha: f64,
    pub smoothing_eps: f64,
    /// Which ECDF distance feeds [`ComparisonSummary::mean_ecdf_distance`].
    pub ecdf_metric: EcdfMetric,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            smoothing_eps: 1e-6,
            ecdf_metric: EcdfMetric::MaxVertical,
        }
    }
}

/// The part of one region's data the metrics look at.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegionSamples {
    pub detected_times: Vec<f64>,
    pub undetected_times: Vec<f64>,
    /// Fraction of `b = 1` reports; may come from an analytic PMF rather
    /// than the samples themselves.
    pub bit_ratio: Option<f64>,
}

impl RegionSamples {
    pub fn from_pairs(pairs: &[(f64, u8)]) -> Self {
        let (ones, zeros): (Vec<_>, Vec<_>) = pairs.iter().partition(|(_, b)| *b == 1);
        let bit_ratio = (!pairs.is_empty()).then(|| ones.len() as f64 / pairs.len() as f64);
        Self {
            detected_times: ones.into_iter().map(|(t, _)| t).collect(),
            undetected_times: zeros.into_iter().map(|(t, _)| t).collect(),
            bit_ratio,
        }
    }

    pub fn from_dataset(dataset: &Dataset) -> Self {
        Self {
            detected_times: dataset.times_with_bit(1),
            undetected_times: dataset.times_with_bit(0),
            bit_ratio: dataset.bit_ratio(),
        }
    }

    pub fn len(&self) -> usize {
        self.detected_times.len() + self.undetected_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingSide {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionComparison {
    pub region_id: u32,
    pub records_a: usize,
    pub records_b: usize,
    /// Test on `b = 1` times; absent when either side has none.
    pub mann_whitney: Option<MannWhitney>,
    pub mw_p_value: Option<f64>,
    pub mw_accepted: bool,
    /// KS distance on `b = 0` times.
    pub ecdf_max_distance: Option<f64>,
    pub ecdf_squared_area: Option<f64>,
    /// Absent for regions excluded from bit metrics.
    pub kl_bit_divergence: Option<f64>,
    pub bit_ratio_a: Option<f64>,
    pub bit_ratio_b: Option<f64>,
    pub missing: Option<MissingSide>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub mw_tests: usize,
    pub mw_accepted: usize,
    pub accept_fraction: Option<f64>,
    pub mean_ecdf_distance: Option<f64>,
    pub max_kl: Option<f64>,
    pub missing_regions: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub map_fingerprint: String,
    pub options: CompareOptions,
    pub per_region: BTreeMap<u32, RegionComparison>,
    pub summary: ComparisonSummary,
}

fn compare_region(
    id: u32,
    a: Option<&RegionSamples>,
    b: Option<&RegionSamples>,
    map: &RegionMap,
    opts: &CompareOptions,
) -> Result<RegionComparison, StatsError> {
    let records_a = a.map_or(0, RegionSamples::len);
    let records_b = b.map_or(0, RegionSamples::len);
    let mut row = RegionComparison {
        region_id: id,
        records_a,
        records_b,
        mann_whitney: None,
        mw_p_value: None,
        mw_accepted: false,
        ecdf_max_distance: None,
        ecdf_squared_area: None,
        kl_bit_divergence: None,
        bit_ratio_a: a.and_then(|s| s.bit_ratio),
        bit_ratio_b: b.and_then(|s| s.bit_ratio),
        missing: None,
    };
    let (a, b) = match (a, b) {
        (Some(a), Some(b)) if records_a > 0 && records_b > 0 => (a, b),
        _ => {
            row.missing = Some(if records_a == 0 { MissingSide::A } else { MissingSide::B });
            return Ok(row);
        }
    };

    if !a.detected_times.is_empty() && !b.detected_times.is_empty() {
        let mw = mann_whitney(&a.detected_times, &b.detected_times, opts.alpha)?;
        row.mw_p_value = Some(mw.p_value);
        row.mw_accepted = mw.accepted();
        row.mann_whitney = Some(mw);
    }
    if !a.undetected_times.is_empty() && !b.undetected_times.is_empty() {
        row.ecdf_max_distance = Some(ecdf_max_distance(&a.undetected_times, &b.undetected_times)?);
        row.ecdf_squared_area = Some(ecdf_squared_area(&a.undetected_times, &b.undetected_times)?);
    }
    if !map.is_excluded(id) {
        if let (Some(ra), Some(rb)) = (row.bit_ratio_a, row.bit_ratio_b) {
            row.kl_bit_divergence = Some(kl_bit_divergence(ra, rb, opts.smoothing_eps));
        }
    }
    Ok(row)
}

/// Runs the metric suite region by region (map order) and aggregates.
pub fn compare_samples(
    a: &BTreeMap<u32, RegionSamples>,
    b: &BTreeMap<u32, RegionSamples>,
    map: &RegionMap,
    opts: &CompareOptions,
) -> Result<ComparisonReport, StatsError> {
    for id in a.keys().chain(b.keys()) {
        if map.index_of(*id).is_none() {
            return Err(StatsError::ScenarioMismatch(format!("region {id} is not in the map")));
        }
    }
    let mut per_region = BTreeMap::new();
    for id in map.ids().filter(|id| a.contains_key(id) || b.contains_key(id)) {
        per_region.insert(id, compare_region(id, a.get(&id), b.get(&id), map, opts)?);
    }

    let rows: Vec<&RegionComparison> = per_region.values().collect();
    let tested: Vec<_> = rows.iter().filter(|r| r.mann_whitney.is_some()).collect();
    let accepted = tested.iter().filter(|r| r.mw_accepted).count();
    let ecdf: Vec<f64> = rows
        .iter()
        .filter_map(|r| match opts.ecdf_metric {
            EcdfMetric::MaxVertical => r.ecdf_max_distance,
            EcdfMetric::SquaredArea => r.ecdf_squared_area,
        })
        .collect();
    let max_kl = rows.iter().filter_map(|r| r.kl_bit_divergence).reduce(f64::max);
    let summary = ComparisonSummary {
        mw_tests: tested.len(),
        mw_accepted: accepted,
        accept_fraction: (!tested.is_empty()).then(|| accepted as f64 / tested.len() as f64),
        mean_ecdf_distance: (!ecdf.is_empty()).then(|| ecdf.iter().sum::<f64>() / ecdf.len() as f64),
        max_kl,
        missing_regions: rows.iter().filter(|r| r.missing.is_some()).map(|r| r.region_id).collect(),
    };
    Ok(ComparisonReport {
        map_fingerprint: map.fingerprint(),
        options: *opts,
        per_region,
        summary,
    })
}

fn by_region(datasets: &[Dataset], fingerprint: &str) -> Result<BTreeMap<u32, RegionSamples>, StatsError> {
    let mut out = BTreeMap::new();
    for d in datasets {
        let fp = d.scenario.map.fingerprint();
        if fp != fingerprint {
            return Err(StatsError::ScenarioMismatch(format!(
                "region map fingerprint {fp} differs from {fingerprint}"
            )));
        }
        if out.insert(d.scenario.event_region, RegionSamples::from_dataset(d)).is_some() {
            return Err(StatsError::DuplicateRegion(d.scenario.event_region));
        }
    }
    Ok(out)
}

/// Compares two sets of datasets, one dataset per event region on each
/// side. All datasets must share a region map.
pub fn compare_datasets(a: &[Dataset], b: &[Dataset], opts: &CompareOptions) -> Result<ComparisonReport, StatsError> {
    let map = &a
        .first()
        .or(b.first())
        .ok_or(StatsError::EmptySample)?
        .scenario
        .map;
    let fp = map.fingerprint();
    compare_samples(&by_region(a, &fp)?, &by_region(b, &fp)?, map, opts)
}

/// Compares datasets against the analytic model. For each dataset the PMF
/// of its event region is sampled as many times as the dataset has records
/// (noise from the PMF's parameters); the model side's bit ratio is the
/// exact [`event_bit_ratio`].
pub fn compare_with_model(
    datasets: &[Dataset],
    pmfs: &[Pmf],
    seed: u64,
    opts: &CompareOptions,
) -> Result<ComparisonReport, StatsError> {
    let map = &datasets.first().ok_or(StatsError::EmptySample)?.scenario.map;
    let fp = map.fingerprint();
    let a = by_region(datasets, &fp)?;
    let mut b = BTreeMap::new();
    for pmf in pmfs {
        if pmf.map_fingerprint != fp {
            return Err(StatsError::ScenarioMismatch(format!(
                "model for region {} was built on map {}, datasets use {fp}",
                pmf.event_region, pmf.map_fingerprint
            )));
        }
        let n = a.get(&pmf.event_region).map_or(0, RegionSamples::len);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::from(pmf.event_region));
        let sampler = ModelSampler::new(pmf, pmf.params.noise_sigma)?;
        let mut samples = RegionSamples::from_pairs(&sampler.sample_n(n, &mut rng));
        samples.bit_ratio = Some(event_bit_ratio(pmf)?);
        if b.insert(pmf.event_region, samples).is_some() {
            return Err(StatsError::DuplicateRegion(pmf.event_region));
        }
    }
    compare_samples(&a, &b, map, opts)
}
