//! CSV and JSON input schemas for measured data.
//!
//! CSV files may start with `#` comment lines (the provenance line written
//! by this crate is one). Column schemas:
//!
//! | data | columns |
//! |------|---------|
//! | fringe scan | `phase_rad,power` |
//! | bias sweep | `bias_ua,photon_counts,dark_counts` |
//! | efficiency set | `polarization,detector,z_cm,eta_left,eta_right,transmission,alpha_db_per_cm,chip_length_cm` |
//!
//! In the efficiency table an empty cell is a missing measurement;
//! `transmission`, `alpha_db_per_cm` and `chip_length_cm` repeat on every
//! row of a polarization.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{BiasSweep, EfficiencyMeasurementSet, FringeScan, PolarizationMeasurement};
use crate::error::{ensure, Error, Result};
use crate::profile::Polarization;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeRow {
    pub phase_rad: f64,
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub bias_ua: f64,
    pub photon_counts: f64,
    pub dark_counts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub polarization: Polarization,
    pub detector: usize,
    pub z_cm: f64,
    pub eta_left: Option<f64>,
    pub eta_right: Option<f64>,
    pub transmission: Option<f64>,
    pub alpha_db_per_cm: f64,
    pub chip_length_cm: f64,
}

/// Parse CSV records, skipping `#` comment lines.
pub fn read_csv<T: DeserializeOwned>(reader: impl Read, origin: &str) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    r.deserialize()
        .enumerate()
        .map(|(k, rec)| rec.map_err(|e| Error::parse(origin, format!("record {}: {e}", k + 1))))
        .collect()
}

pub fn read_csv_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(f, &path.display().to_string())
}

/// Read a bare record or one wrapped as `{"provenance": .., "result": ..}`
/// by this tool's exporters.
pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    if let Some(obj) = value.as_object_mut() {
        if obj.len() == 2 && obj.contains_key("provenance") {
            if let Some(inner) = obj.remove("result") {
                value = inner;
            }
        }
    }
    serde_json::from_value(value).map_err(|e| Error::parse(path, e))
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn fringe_scan_from_rows(rows: &[FringeRow], reflectance: f64, chip_length_cm: f64) -> FringeScan {
    FringeScan {
        phase_samples_rad: rows.iter().map(|r| r.phase_rad).collect(),
        power_samples: rows.iter().map(|r| r.power).collect(),
        facet_reflectance: reflectance,
        chip_length_cm,
    }
}

pub fn fringe_rows(scan: &FringeScan) -> Vec<FringeRow> {
    scan.phase_samples_rad
        .iter()
        .zip(&scan.power_samples)
        .map(|(p, v)| FringeRow { phase_rad: *p, power: *v })
        .collect()
}

/// A fringe scan from JSON (complete record) or CSV (reflectance and
/// length supplied by the caller).
pub fn load_fringe_scan(path: &Path, reflectance: f64, chip_length_cm: f64) -> Result<FringeScan> {
    let scan = if is_json(path) {
        read_json_file(path)?
    } else {
        fringe_scan_from_rows(&read_csv_file::<FringeRow>(path)?, reflectance, chip_length_cm)
    };
    scan.validate()?;
    Ok(scan)
}

pub fn bias_rows(sweep: &BiasSweep) -> Vec<BiasRow> {
    (0..sweep.bias_ua.len())
        .map(|k| BiasRow {
            bias_ua: sweep.bias_ua[k],
            photon_counts: sweep.photon_counts[k],
            dark_counts: sweep.dark_counts[k],
        })
        .collect()
}

pub fn load_bias_sweep(path: &Path, integration_s: f64) -> Result<BiasSweep> {
    let sweep = if is_json(path) {
        read_json_file(path)?
    } else {
        let rows: Vec<BiasRow> = read_csv_file(path)?;
        BiasSweep {
            bias_ua: rows.iter().map(|r| r.bias_ua).collect(),
            photon_counts: rows.iter().map(|r| r.photon_counts).collect(),
            dark_counts: rows.iter().map(|r| r.dark_counts).collect(),
            integration_s,
        }
    };
    sweep.validate()?;
    Ok(sweep)
}

pub fn efficiency_rows(set: &EfficiencyMeasurementSet) -> Vec<EfficiencyRow> {
    let mut out = Vec::new();
    for m in &set.measurements {
        for (i, z) in set.detector_positions_cm.iter().enumerate() {
            out.push(EfficiencyRow {
                polarization: m.polarization,
                detector: i,
                z_cm: *z,
                eta_left: m.eta_left[i],
                eta_right: m.eta_right[i],
                transmission: m.transmission,
                alpha_db_per_cm: m.alpha_db_per_cm,
                chip_length_cm: set.chip_length_cm,
            });
        }
    }
    out
}

pub fn efficiency_set_from_rows(rows: &[EfficiencyRow]) -> Result<EfficiencyMeasurementSet> {
    ensure!(!rows.is_empty(), "efficiency table is empty");
    let length = rows[0].chip_length_cm;
    ensure!(
        rows.iter().all(|r| r.chip_length_cm == length),
        "chip_length_cm differs between rows"
    );
    let mut positions: BTreeMap<usize, f64> = BTreeMap::new();
    for r in rows {
        if let Some(z) = positions.insert(r.detector, r.z_cm) {
            ensure!(z == r.z_cm, "detector {} listed at two positions", r.detector);
        }
    }
    let n = positions.len();
    ensure!(
        positions.keys().copied().eq(0..n),
        "detector indices must run 0..{n} without gaps"
    );
    let mut measurements = Vec::new();
    for pol in Polarization::BOTH {
        let mine: Vec<&EfficiencyRow> = rows.iter().filter(|r| r.polarization == pol).collect();
        if mine.is_empty() {
            continue;
        }
        let mut m = PolarizationMeasurement {
            polarization: pol,
            eta_left: vec![None; n],
            eta_right: vec![None; n],
            transmission: mine[0].transmission,
            alpha_db_per_cm: mine[0].alpha_db_per_cm,
        };
        for r in &mine {
            ensure!(
                r.transmission == m.transmission && r.alpha_db_per_cm == m.alpha_db_per_cm,
                "{pol}: transmission and alpha must repeat identically on every row"
            );
            m.eta_left[r.detector] = r.eta_left;
            m.eta_right[r.detector] = r.eta_right;
        }
        measurements.push(m);
    }
    Ok(EfficiencyMeasurementSet {
        detector_positions_cm: positions.into_values().collect(),
        chip_length_cm: length,
        measurements,
    })
}

pub fn load_efficiency_set(path: &Path) -> Result<EfficiencyMeasurementSet> {
    let set = if is_json(path) {
        read_json_file(path)?
    } else {
        efficiency_set_from_rows(&read_csv_file::<EfficiencyRow>(path)?)?
    };
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn efficiency_table_round_trip() {
        let text = "# {\"seed\":1}\n\
            polarization,detector,z_cm,eta_left,eta_right,transmission,alpha_db_per_cm,chip_length_cm\n\
            te,0,0.5,0.003,0.002,0.0594,0,2.3\n\
            te,1,1.0,0.0029,,0.0594,0,2.3\n";
        let rows: Vec<EfficiencyRow> = read_csv(text.as_bytes(), "inline").unwrap();
        let set = efficiency_set_from_rows(&rows).unwrap();
        assert_eq!(set.detector_positions_cm, vec![0.5, 1.0]);
        assert_eq!(set.measurements[0].eta_right, vec![Some(0.002), None]);
        assert_eq!(efficiency_rows(&set), rows);
    }

    #[test]
    fn malformed_rows_report_position() {
        let text = "phase_rad,power\n0.0,1.0\n0.1,abc\n";
        let err = read_csv::<FringeRow>(text.as_bytes(), "scan.csv").unwrap_err();
        assert!(err.to_string().contains("record 2"));
    }
}
