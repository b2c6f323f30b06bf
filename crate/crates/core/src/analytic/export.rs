//! PMF files: CSV (`time_s,bit,prob,lap_vector`), JSON with the full
//! [`Pmf`], and a whitespace-separated bar-chart table for gnuplot.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{compensated_sum, LapVector, ModelError, Pmf, PmfAtom};

#[derive(Serialize, Deserialize)]
struct CsvRow {
    time_s: f64,
    bit: u8,
    prob: f64,
    lap_vector: String,
}

/// Writes one row per atom. Multiple lap vectors of a collapsed atom are
/// joined with `|`.
pub fn write_pmf_csv<W: Write>(pmf: &Pmf, writer: W) -> Result<(), ModelError> {
    let mut w = csv::Writer::from_writer(writer);
    for a in &pmf.atoms {
        w.serialize(CsvRow {
            time_s: a.time,
            bit: a.bit,
            prob: a.prob,
            lap_vector: a
                .lap_vectors
                .iter()
                .map(LapVector::to_string)
                .collect::<Vec<_>>()
                .join("|"),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pmf_csv<R: Read>(reader: R) -> Result<Vec<PmfAtom>, ModelError> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize::<CsvRow>()
        .map(|row| {
            let row = row?;
            let lap_vectors = row
                .lap_vector
                .split('|')
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect::<Result<Vec<LapVector>, _>>()?;
            Ok(PmfAtom {
                time: row.time_s,
                bit: row.bit,
                prob: row.prob,
                lap_vectors,
            })
        })
        .collect()
}

pub fn write_pmf_json<W: Write>(pmf: &Pmf, writer: W) -> Result<(), ModelError> {
    serde_json::to_writer_pretty(writer, pmf)?;
    Ok(())
}

pub fn read_pmf_json<R: Read>(reader: R) -> Result<Pmf, ModelError> {
    Ok(serde_json::from_reader(reader)?)
}

/// Mass per distinct time, split by bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeMass {
    pub time: f64,
    pub bit0: f64,
    pub bit1: f64,
}

impl TimeMass {
    pub fn total(&self) -> f64 {
        self.bit0 + self.bit1
    }
}

/// Groups atoms whose times are within `time_tolerance` of the group's
/// first time, regardless of bit.
pub fn mass_by_time(pmf: &Pmf, time_tolerance: f64) -> Vec<TimeMass> {
    let mut atoms: Vec<&PmfAtom> = pmf.atoms.iter().collect();
    atoms.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut out: Vec<TimeMass> = Vec::new();
    let mut i = 0;
    while i < atoms.len() {
        let start = atoms[i].time;
        let mut j = i;
        while j < atoms.len() && atoms[j].time - start <= time_tolerance {
            j += 1;
        }
        let group = &atoms[i..j];
        let of_bit = |bit| compensated_sum(group.iter().filter(|a| a.bit == bit).map(|a| a.prob));
        out.push(TimeMass {
            time: start,
            bit0: of_bit(0),
            bit1: of_bit(1),
        });
        i = j;
    }
    out
}

pub fn write_bar_chart<W: Write>(pmf: &Pmf, time_tolerance: f64, mut writer: W) -> Result<(), ModelError> {
    writeln!(writer, "# event_region={} truncated_mass={}", pmf.event_region, pmf.truncated_mass)?;
    writeln!(writer, "# time_s prob_bit0 prob_bit1")?;
    for m in mass_by_time(pmf, time_tolerance) {
        writeln!(writer, "{} {} {}", m.time, m.bit0, m.bit1)?;
    }
    Ok(())
}
