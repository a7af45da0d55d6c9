//! Output files: JSON documents, CSV tables and binary grids, each carrying
//! a provenance block.
//!
//! Binary grids are a JSON header (`<stem>.json`) beside a flat file of
//! little-endian f64 values (`<stem>.bin`). Arrays are stored one after
//! another in the order listed in the header, each `nx * ny` values with
//! `iy` varying fastest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ensure, Error, Result};
use crate::modesolver::ModeField;
use crate::profile::{GridSpec, IndexGrid, Polarization};

pub const TOOL_NAME: &str = "snspdkit";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the effective configuration.
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub rng: Option<String>,
    pub noise_model: Option<String>,
    /// SHA-256 of each input file, keyed by path.
    pub inputs: BTreeMap<String, String>,
    pub parameters: serde_json::Value,
}

impl Provenance {
    pub fn new(command: &str, config_text: &str) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            command: command.into(),
            config_sha256: sha256_hex(config_text.as_bytes()),
            seed: None,
            rng: None,
            noise_model: None,
            inputs: BTreeMap::new(),
            parameters: serde_json::Value::Null,
        }
    }

    pub fn with_seed(mut self, seed: u64, rng: &str, noise_model: &str) -> Self {
        self.seed = Some(seed);
        self.rng = Some(rng.into());
        self.noise_model = Some(noise_model.into());
        self
    }

    pub fn with_parameters(mut self, parameters: impl Serialize) -> Self {
        self.parameters = serde_json::to_value(parameters).expect("parameters serialise to JSON");
        self
    }

    pub fn with_input(mut self, path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.insert(path.display().to_string(), sha256_hex(&bytes));
        Ok(self)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct Document<'a, T> {
    provenance: &'a Provenance,
    result: &'a T,
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(std::io::BufWriter::new(f))
}

/// `{"provenance": ..., "result": ...}`, pretty-printed.
pub fn write_json(path: &Path, provenance: &Provenance, result: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &Document { provenance, result }).map_err(|e| Error::parse(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// CSV with the provenance as a leading `# {json}` comment line.
pub fn write_csv<T: Serialize>(path: &Path, provenance: &Provenance, rows: &[T]) -> Result<()> {
    let mut w = create(path)?;
    let header = serde_json::to_string(provenance).map_err(|e| Error::parse(path, e))?;
    writeln!(w, "# {header}").map_err(|e| Error::io(path, e))?;
    let mut c = csv::Writer::from_writer(w);
    for r in rows {
        c.serialize(r).map_err(|e| Error::parse(path, e))?;
    }
    c.flush().map_err(|e| Error::io(path, e))
}

/// CSV with explicit column names and optional cells (blank when `None`).
pub fn write_table(path: &Path, provenance: &Provenance, columns: &[String], rows: &[Vec<Option<f64>>]) -> Result<()> {
    let mut w = create(path)?;
    let header = serde_json::to_string(provenance).map_err(|e| Error::parse(path, e))?;
    writeln!(w, "# {header}").map_err(|e| Error::io(path, e))?;
    let mut c = csv::Writer::from_writer(w);
    c.write_record(columns).map_err(|e| Error::parse(path, e))?;
    for r in rows {
        ensure!(r.len() == columns.len(), "table row has {} cells for {} columns", r.len(), columns.len());
        c.write_record(r.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()))
            .map_err(|e| Error::parse(path, e))?;
    }
    c.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexRow {
    pub x_um: f64,
    pub y_um: f64,
    pub n_re: f64,
    pub n_im: f64,
}

/// One row per node of one polarization sheet.
pub fn index_rows(profile: &IndexGrid, pol: Polarization) -> Vec<IndexRow> {
    let g = &profile.grid;
    let s = profile.sheet(pol);
    let mut rows = Vec::with_capacity(g.nx * g.ny);
    for i in 0..g.nx {
        for j in 0..g.ny {
            rows.push(IndexRow {
                x_um: g.x(i),
                y_um: g.y(j),
                n_re: s[[i, j]].re,
                n_im: s[[i, j]].im,
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub provenance: Provenance,
    pub kind: String,
    pub grid: GridSpec,
    pub byte_order: String,
    pub arrays: Vec<String>,
    pub data_file: String,
    /// Mode metadata; absent for index grids.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeMeta>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeMeta {
    pub polarization: Polarization,
    pub order: usize,
    pub n_eff_re: f64,
    pub n_eff_im: f64,
    pub wavelength_nm: f64,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

fn write_binary(stem: &Path, header: GridHeader, arrays: &[Array2<f64>]) -> Result<()> {
    let (hpath, bpath) = paths(stem);
    let mut w = create(&bpath)?;
    for a in arrays {
        for v in a.iter() {
            w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(&bpath, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(&bpath, e))?;
    let mut h = create(&hpath)?;
    serde_json::to_writer_pretty(&mut h, &header).map_err(|e| Error::parse(&hpath, e))?;
    writeln!(h).and_then(|_| h.flush()).map_err(|e| Error::io(&hpath, e))
}

fn read_binary(header_path: &Path) -> Result<(GridHeader, Vec<Array2<f64>>)> {
    let text = std::fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    let header: GridHeader = serde_json::from_str(&text).map_err(|e| Error::parse(header_path, e))?;
    ensure!(header.byte_order == "little-endian f64", "unsupported byte order '{}'", header.byte_order);
    header.grid.validate()?;
    let bpath = header_path.with_file_name(&header.data_file);
    let bytes = std::fs::read(&bpath).map_err(|e| Error::io(&bpath, e))?;
    let (nx, ny) = header.grid.shape();
    let want = 8 * nx * ny * header.arrays.len();
    if bytes.len() != want {
        return Err(Error::parse(&bpath, format!("expected {want} bytes, found {}", bytes.len())));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let arrays = values
        .chunks_exact(nx * ny)
        .map(|c| Array2::from_shape_vec((nx, ny), c.to_vec()).expect("shape checked"))
        .collect();
    Ok((header, arrays))
}

fn data_file_name(stem: &Path) -> String {
    paths(stem).1.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn write_index_grid(stem: &Path, provenance: &Provenance, profile: &IndexGrid) -> Result<()> {
    let re = |a: &Array2<Complex64>| a.mapv(|v| v.re);
    let im = |a: &Array2<Complex64>| a.mapv(|v| v.im);
    let header = GridHeader {
        provenance: provenance.clone(),
        kind: "index".into(),
        grid: profile.grid,
        byte_order: "little-endian f64".into(),
        arrays: vec!["n_te_re".into(), "n_te_im".into(), "n_tm_re".into(), "n_tm_im".into()],
        data_file: data_file_name(stem),
        mode: None,
    };
    write_binary(
        stem,
        header,
        &[re(&profile.n_te), im(&profile.n_te), re(&profile.n_tm), im(&profile.n_tm)],
    )
}

pub fn read_index_grid(header_path: &Path) -> Result<IndexGrid> {
    let (h, a) = read_binary(header_path)?;
    ensure!(h.kind == "index" && a.len() == 4, "{} is not an index grid", header_path.display());
    let join = |re: &Array2<f64>, im: &Array2<f64>| ndarray::Zip::from(re).and(im).map_collect(|r, i| Complex64::new(*r, *i));
    IndexGrid::new(h.grid, join(&a[0], &a[1]), join(&a[2], &a[3]))
}

pub fn write_mode(stem: &Path, provenance: &Provenance, mode: &ModeField) -> Result<()> {
    let header = GridHeader {
        provenance: provenance.clone(),
        kind: "mode".into(),
        grid: mode.grid,
        byte_order: "little-endian f64".into(),
        arrays: vec!["psi".into()],
        data_file: data_file_name(stem),
        mode: Some(ModeMeta {
            polarization: mode.polarization,
            order: mode.order,
            n_eff_re: mode.n_eff.re,
            n_eff_im: mode.n_eff.im,
            wavelength_nm: mode.wavelength_nm,
        }),
    };
    write_binary(stem, header, std::slice::from_ref(&mode.psi))
}

pub fn read_mode(header_path: &Path) -> Result<ModeField> {
    let (h, mut a) = read_binary(header_path)?;
    let meta = h
        .mode
        .filter(|_| h.kind == "mode" && a.len() == 1)
        .ok_or_else(|| Error::Invalid(format!("{} is not a mode file", header_path.display())))?;
    Ok(ModeField {
        grid: h.grid,
        psi: a.remove(0),
        n_eff: Complex64::new(meta.n_eff_re, meta.n_eff_im),
        polarization: meta.polarization,
        order: meta.order,
        wavelength_nm: meta.wavelength_nm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_grid_binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new(-1.0, 1.0, -2.0, 0.5, 17, 19).unwrap();
        let p = IndexGrid::from_fn(g, |x, y| Complex64::new(2.0 + 0.1 * x, 1e-3 * (y + 2.0))).unwrap();
        let prov = Provenance::new("profile", "");
        let stem = dir.path().join("profile");
        write_index_grid(&stem, &prov, &p).unwrap();
        assert_eq!(read_index_grid(&stem.with_extension("json")).unwrap(), p);
        std::fs::write(stem.with_extension("bin"), [0u8; 16]).unwrap();
        assert!(read_index_grid(&stem.with_extension("json")).is_err());
    }

    #[test]
    fn csv_carries_provenance_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let prov = Provenance::new("x", "a = 1").with_seed(3, "rng", "none");
        write_csv(&path, &prov, &[IndexRow { x_um: 0.0, y_um: 1.0, n_re: 2.0, n_im: 0.0 }]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let first = text.lines().next().unwrap();
        let parsed: Provenance = serde_json::from_str(first.trim_start_matches("# ")).unwrap();
        assert_eq!(parsed, prov);
        assert_eq!(text.lines().nth(1), Some("x_um,y_um,n_re,n_im"));
    }
}
