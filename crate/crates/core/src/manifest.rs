//! On-disk formats: dataset manifests, coefficient packets and atomic writes.
//!
//! A dataset directory holds `manifest.json` and one CSV per trial whose
//! columns are the trial's variables (header row optional). Numbers are
//! written in shortest round-trip form, so save/load is lossless.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compression::{CoefficientPacket, CompressionReport};
use crate::error::{Error, Result};
use crate::types::{Dataset, Grid, Signal, Trial};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const COMPRESSION_FILE: &str = "compression.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub class_count: usize,
    pub variable_names: Vec<String>,
    pub marker_start: usize,
    pub marker_end: usize,
    pub trials: Vec<TrialEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEntry {
    pub id: String,
    pub label: usize,
    pub grid: Grid,
    /// CSV file relative to the manifest's directory.
    pub file: String,
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn matrix_csv(header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let internal = |e: csv::Error| Error::Internal(format!("csv encoding: {e}"));
    w.write_record(header).map_err(internal)?;
    for r in rows {
        w.write_record(r.into_iter().map(fmt)).map_err(internal)?;
    }
    w.into_inner().map_err(|e| Error::Internal(format!("csv encoding: {e}")))
}

/// Reads a numeric CSV. A first row that does not parse as numbers is taken
/// as the header. Returns the header (if any) and the rows.
pub fn read_matrix_csv(path: &Path) -> Result<(Option<Vec<String>>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("{other:?}"),
            },
        })?;
    let mut header = None;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: e.to_string(),
        })?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => {
                if let Some(k) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line,
                        msg: format!("non-finite value in column {}", k + 1),
                    });
                }
                if let Some(w) = rows.first().map(Vec::len) {
                    if w != v.len() {
                        return Err(Error::Parse {
                            path: path.to_path_buf(),
                            line,
                            msg: format!("{} fields, expected {w}", v.len()),
                        });
                    }
                }
                rows.push(v);
            }
            Err(e) if i == 0 => {
                let _ = e;
                header = Some(rec.iter().map(str::to_string).collect());
            }
            Err(e) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("not a number: {e}"),
                })
            }
        }
    }
    Ok((header, rows))
}

fn trial_file(index: usize) -> String {
    format!("trials/trial_{:04}.csv", index + 1)
}

/// Writes `d` under `dir` and returns the manifest path.
pub fn save_dataset(d: &Dataset, dir: &Path) -> Result<PathBuf> {
    let mut entries = Vec::with_capacity(d.n());
    for (i, t) in d.trials.iter().enumerate() {
        let grid = t
            .signals
            .first()
            .map(Signal::grid)
            .ok_or_else(|| Error::InvalidDataset(format!("trial {} has no signals", t.id)))?;
        let len = grid.len();
        let rows = (0..len).map(|k| t.signals.iter().map(|s| s.values()[k]).collect());
        let file = trial_file(i);
        write_atomic(&dir.join(&file), &matrix_csv(&d.variable_names, rows)?)?;
        entries.push(TrialEntry {
            id: t.id.clone(),
            label: t.label,
            grid,
            file,
        });
    }
    let manifest = Manifest {
        class_count: d.class_count,
        variable_names: d.variable_names.clone(),
        marker_start: d.marker_start,
        marker_end: d.marker_end,
        trials: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Loads a dataset from its manifest. Structural checks happen here; the
/// remaining invariants are left to `validate_dataset`.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let m: Manifest = read_json(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let j = m.variable_names.len();
    let mut trials = Vec::with_capacity(m.trials.len());
    for e in &m.trials {
        let path = base.join(&e.file);
        let (header, rows) = read_matrix_csv(&path)?;
        if let Some(h) = &header {
            if h.len() != j {
                return Err(Error::Parse {
                    path,
                    line: 1,
                    msg: format!("header has {} columns, manifest declares {j} variables", h.len()),
                });
            }
        }
        if rows.first().is_some_and(|r| r.len() != j) {
            return Err(Error::Parse {
                path,
                line: 1 + usize::from(header.is_some()),
                msg: format!("{} columns, manifest declares {j} variables", rows[0].len()),
            });
        }
        if rows.len() != e.grid.len() {
            return Err(Error::InvalidDataset(format!(
                "{}: {} samples but the grid of trial {} has {}",
                path.display(),
                rows.len(),
                e.id,
                e.grid.len()
            )));
        }
        let signals = (0..j)
            .map(|v| Signal::new(e.grid, rows.iter().map(|r| r[v]).collect()))
            .collect::<Result<Vec<_>>>()
            .map_err(|err| Error::InvalidDataset(format!("trial {}: {err}", e.id)))?;
        trials.push(Trial {
            id: e.id.clone(),
            label: e.label,
            signals,
        });
    }
    Ok(Dataset {
        trials,
        class_count: m.class_count,
        variable_names: m.variable_names,
        marker_start: m.marker_start,
        marker_end: m.marker_end,
    })
}

/// Index file written next to the packet CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedIndex {
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub variable_names: Vec<String>,
    pub report: CompressionReport,
    pub packets: Vec<PacketEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketEntry {
    pub variable: usize,
    pub level: usize,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compressed {
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub variable_names: Vec<String>,
    pub report: CompressionReport,
    pub packets: Vec<CoefficientPacket>,
}

pub fn save_compressed(c: &Compressed, dir: &Path) -> Result<PathBuf> {
    let mut entries = Vec::with_capacity(c.packets.len());
    for p in &c.packets {
        let file = format!("packets/var_{:02}.csv", p.variable);
        write_atomic(&dir.join(&file), &matrix_csv(&p.coeff_ids, p.coeffs.iter().cloned())?)?;
        entries.push(PacketEntry {
            variable: p.variable,
            level: p.level,
            file,
        });
    }
    let index = CompressedIndex {
        labels: c.labels.clone(),
        class_count: c.class_count,
        variable_names: c.variable_names.clone(),
        report: c.report.clone(),
        packets: entries,
    };
    let path = dir.join(COMPRESSION_FILE);
    write_json(&path, &index)?;
    Ok(path)
}

pub fn load_compressed(index_path: &Path) -> Result<Compressed> {
    let idx: CompressedIndex = read_json(index_path)?;
    let base = index_path.parent().unwrap_or(Path::new("."));
    let mut packets = Vec::with_capacity(idx.packets.len());
    for e in &idx.packets {
        let path = base.join(&e.file);
        let (header, coeffs) = read_matrix_csv(&path)?;
        let width = coeffs.first().map_or(0, Vec::len);
        let coeff_ids = header.unwrap_or_else(|| (0..width).map(|k| crate::compression::coeff_id(e.variable, k)).collect());
        if coeffs.len() != idx.labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{}: {} rows for {} labels",
                path.display(),
                coeffs.len(),
                idx.labels.len()
            )));
        }
        packets.push(CoefficientPacket {
            variable: e.variable,
            level: e.level,
            coeffs,
            coeff_ids,
        });
    }
    Ok(Compressed {
        labels: idx.labels,
        class_count: idx.class_count,
        variable_names: idx.variable_names,
        report: idx.report,
        packets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_optional_and_crlf_is_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "a,b\r\n1,2\r\n3.5,-4e-3\r\n").unwrap();
        let (h, rows) = read_matrix_csv(&p).unwrap();
        assert_eq!(h, Some(vec!["a".to_string(), "b".to_string()]));
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.5, -4e-3]]);
        fs::write(&p, "1,2\n3,4\n").unwrap();
        let (h, rows) = read_matrix_csv(&p).unwrap();
        assert!(h.is_none());
        assert_eq!(rows.len(), 2);
    }

    #[test]
    fn bad_cells_report_their_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        fs::write(&p, "a,b\n1,2\n3,x\n").unwrap();
        match read_matrix_csv(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        fs::write(&p, "1,NaN\n").unwrap();
        assert!(matches!(read_matrix_csv(&p), Err(Error::Parse { line: 1, .. })));
        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(matches!(read_matrix_csv(&p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
