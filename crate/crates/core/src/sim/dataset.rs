//! Dataset files: `<stem>.csv` with header
//! `device_id,timestamp_s,iteration_time_s,bit`, plus a `<stem>.json`
//! sidecar carrying the full scenario and seed.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{RawDatum, SimError};
use crate::config::{Scenario, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub scenario: Scenario,
    /// Sorted by `(device_id, timestamp)`.
    pub records: Vec<RawDatum>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times_with_bit(&self, bit: u8) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.bit == bit)
            .map(|r| r.iteration_time)
            .collect()
    }

    /// Fraction of records with `bit = 1`; `None` for an empty dataset.
    pub fn bit_ratio(&self) -> Option<f64> {
        if self.records.is_empty() {
            return None;
        }
        let ones = self.records.iter().filter(|r| r.bit == 1).count();
        Some(ones as f64 / self.records.len() as f64)
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta {
            schema_version: SCHEMA_VERSION,
            map_fingerprint: self.scenario.map.fingerprint(),
            record_count: self.records.len(),
            scenario: self.scenario.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub schema_version: u32,
    pub map_fingerprint: String,
    pub record_count: usize,
    pub scenario: Scenario,
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `csv_path` and its `.json` sidecar. Output is a pure function of
/// the dataset.
pub fn write_dataset(dataset: &Dataset, csv_path: impl AsRef<Path>) -> Result<(), SimError> {
    let csv_path = csv_path.as_ref();
    let file = File::create(csv_path).map_err(io_err(csv_path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    if dataset.records.is_empty() {
        w.write_record(["device_id", "timestamp_s", "iteration_time_s", "bit"])?;
    }
    for r in &dataset.records {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(csv_path))?;

    let meta_path = sidecar_path(csv_path);
    let text = serde_json::to_string_pretty(&dataset.meta())?;
    fs::write(&meta_path, text).map_err(io_err(&meta_path))
}

/// Reads a dataset CSV and its sidecar, checking the record count and map
/// fingerprint recorded there.
pub fn read_dataset(csv_path: impl AsRef<Path>) -> Result<Dataset, SimError> {
    let csv_path = csv_path.as_ref();
    let meta_path = sidecar_path(csv_path);
    let text = fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
    let meta: DatasetMeta = serde_json::from_str(&text)?;
    meta.scenario.validate()?;
    if meta.map_fingerprint != meta.scenario.map.fingerprint() {
        return Err(SimError::Metadata(format!(
            "{} declares map fingerprint {} but its map hashes to {}",
            meta_path.display(),
            meta.map_fingerprint,
            meta.scenario.map.fingerprint()
        )));
    }
    let file = File::open(csv_path).map_err(io_err(csv_path))?;
    let mut r = csv::Reader::from_reader(file);
    let records = r.deserialize().collect::<Result<Vec<RawDatum>, _>>()?;
    if records.len() != meta.record_count {
        return Err(SimError::Metadata(format!(
            "{} has {} records, sidecar says {}",
            csv_path.display(),
            records.len(),
            meta.record_count
        )));
    }
    Ok(Dataset {
        scenario: meta.scenario,
        records,
    })
}
