//! Monte Carlo circulation of nanodevices.
//!
//! Each lap a device picks one region from the categorical traversal
//! distribution, spends that region's travel time, may detect the event
//! (one attempt per pass through the event region), and then tries to
//! report at the heart. A successful report carries the time accumulated
//! since the previous success plus one Gaussian noise draw, and resets both
//! the accumulated time and the event bit.

mod dataset;
mod empirical;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, weighted::WeightedIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::LapVector;
use crate::config::{ConfigError, ModelParams, RegionMap, Scenario};

pub use dataset::{read_dataset, write_dataset, Dataset, DatasetMeta};
pub use empirical::{empirical_pmf, lattice_times, EmpiricalAtom, EmpiricalPmf};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("duration below minimum travel time ({duration} s < {min_travel_time} s)")]
    DurationBelowMinTravelTime { duration: f64, min_travel_time: f64 },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("lattice of reachable times exceeds {0} points; raise the time tolerance or shorten the duration")]
    LatticeTooLarge(usize),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("dataset metadata mismatch: {0}")]
    Metadata(String),
}

/// One report received by the anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawDatum {
    pub device_id: u64,
    /// Seconds since administration at which the report was sent.
    #[serde(rename = "timestamp_s")]
    pub timestamp: f64,
    /// Reported window length, noise included.
    #[serde(rename = "iteration_time_s")]
    pub iteration_time: f64,
    pub bit: u8,
}

/// A report together with the laps that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedDatum {
    pub datum: RawDatum,
    pub lap_vector: LapVector,
    /// Noiseless window length.
    pub lattice_time: f64,
}

/// Master seed. Device `d` draws from ChaCha8 stream `d` of this seed, so
/// any device's output is independent of how many others run or in which
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimSeed(pub u64);

impl SimSeed {
    pub fn device_rng(self, device_id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(device_id);
        rng
    }
}

/// Scenario-level state shared by every device.
struct Circulation<'a> {
    map: &'a RegionMap,
    params: &'a ModelParams,
    event_index: usize,
    regions: WeightedIndex<f64>,
    noise: Option<Normal<f64>>,
}

impl<'a> Circulation<'a> {
    fn new(map: &'a RegionMap, event_region: u32, params: &'a ModelParams) -> Result<Self, SimError> {
        map.validate()?;
        params.validate()?;
        let event_index = map
            .index_of(event_region)
            .ok_or_else(|| ConfigError::Validation(format!("event region {event_region} is not in the map")))?;
        let min_travel_time = map.min_travel_time();
        if params.duration < min_travel_time {
            return Err(SimError::DurationBelowMinTravelTime {
                duration: params.duration,
                min_travel_time,
            });
        }
        Ok(Self {
            map,
            params,
            event_index,
            regions: WeightedIndex::new(map.probabilities()).expect("validated probabilities"),
            noise: (params.noise_sigma > 0.0).then(|| Normal::new(0.0, params.noise_sigma).expect("validated sigma")),
        })
    }

    fn run<R: Rng>(&self, device_id: u64, rng: &mut R, mut on_report: impl FnMut(TracedDatum)) {
        let times = self.map.travel_times();
        let mut elapsed = 0.0;
        let mut pending = 0.0;
        let mut bit = 0u8;
        let mut laps = LapVector::zeros(self.map.len());
        loop {
            let region = self.regions.sample(rng);
            elapsed += times[region];
            if elapsed > self.params.duration {
                break;
            }
            pending += times[region];
            laps.increment(region);
            if region == self.event_index && bit == 0 && rng.random_bool(self.params.p_det) {
                bit = 1;
            }
            if rng.random_bool(self.params.p_trans) {
                let iteration_time = crate::analytic::sample::add_noise(pending, self.noise.as_ref(), rng);
                on_report(TracedDatum {
                    datum: RawDatum {
                        device_id,
                        timestamp: elapsed,
                        iteration_time,
                        bit,
                    },
                    lattice_time: laps.time(&times),
                    lap_vector: std::mem::replace(&mut laps, LapVector::zeros(self.map.len())),
                });
                pending = 0.0;
                bit = 0;
            }
        }
    }
}

/// Reports of one device over the administration period.
pub fn simulate_device(
    map: &RegionMap,
    event_region: u32,
    params: &ModelParams,
    device_id: u64,
    seed: SimSeed,
) -> Result<Vec<RawDatum>, SimError> {
    let circulation = Circulation::new(map, event_region, params)?;
    let mut out = Vec::new();
    circulation.run(device_id, &mut seed.device_rng(device_id), |t| out.push(t.datum));
    Ok(out)
}

/// Like [`simulate_device`], keeping each report's lap vector.
pub fn simulate_device_traced(
    map: &RegionMap,
    event_region: u32,
    params: &ModelParams,
    device_id: u64,
    seed: SimSeed,
) -> Result<Vec<TracedDatum>, SimError> {
    let circulation = Circulation::new(map, event_region, params)?;
    let mut out = Vec::new();
    circulation.run(device_id, &mut seed.device_rng(device_id), |t| out.push(t));
    Ok(out)
}

/// Independent devices `0..device_count`, simulated in parallel and
/// concatenated in device order.
pub fn simulate_population(scenario: &Scenario) -> Result<Dataset, SimError> {
    scenario.validate()?;
    let circulation = Circulation::new(&scenario.map, scenario.event_region, &scenario.params)?;
    let seed = SimSeed(scenario.seed);
    let per_device: Vec<Vec<RawDatum>> = (0..scenario.device_count)
        .into_par_iter()
        .map(|device_id| {
            let mut out = Vec::new();
            circulation.run(device_id, &mut seed.device_rng(device_id), |t| out.push(t.datum));
            out
        })
        .collect();
    Ok(Dataset {
        scenario: scenario.clone(),
        records: per_device.into_iter().flatten().collect(),
    })
}
