//! CSV files. Reals are written with 17 significant digits in exponent form, so
//! output is locale-independent and round-trips bit-exactly.
//!
//! | file          | columns                                   |
//! |---------------|-------------------------------------------|
//! | records       | `t, dY` (increment over `[t, t + dt)`)    |
//! | states        | `t, re_ij, im_ij, ...` row-major          |
//! | moments       | `t`, one column per tracked observable    |
//! | innovations   | `t, increment`                            |

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qfilt_core::{DensityMatrix, FilterTrajectory, MeasurementRecord, Scheme};

pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn record_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("traj_{index:05}_records.csv"))
}

pub fn states_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("traj_{index:05}_states.csv"))
}

pub fn moments_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("traj_{index:05}_moments.csv"))
}

pub fn innovations_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("traj_{index:05}_innovations.csv"))
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::WriterBuilder::new().from_writer(BufWriter::new(file)))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    let mut inner = w.into_inner().map_err(|e| anyhow::anyhow!("writing {}: {}", path.display(), e.error()))?;
    inner.flush()?;
    Ok(())
}

/// Writes one header row followed by `rows`, each starting with its time.
pub fn write_table<'a>(
    path: &Path,
    header: &[String],
    rows: impl IntoIterator<Item = (f64, &'a [f64])>,
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    let mut line = Vec::with_capacity(header.len());
    for (t, values) in rows {
        line.clear();
        line.push(real(t));
        line.extend(values.iter().map(|&v| real(v)));
        w.write_record(&line)?;
    }
    finish(w, path)
}

pub fn write_record(path: &Path, record: &MeasurementRecord) -> Result<()> {
    let header = vec!["t".to_string(), "dY".to_string()];
    let grid = record.grid();
    write_table(path, &header, grid.iter().zip(&record.increments).map(|(&t, d)| (t, std::slice::from_ref(d))))
}

pub fn read_record(path: &Path, scheme: Scheme, dt: f64) -> Result<MeasurementRecord> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "dY"] {
        bail!("{}: expected header t,dY, found {:?}", path.display(), headers);
    }
    let mut increments = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let row = row?;
        let field = |i: usize| -> Result<f64> {
            row.get(i)
                .ok_or_else(|| anyhow::anyhow!("{}: row {} is short", path.display(), k + 1))?
                .trim()
                .parse::<f64>()
                .with_context(|| format!("{}: row {}", path.display(), k + 1))
        };
        let t = field(0)?;
        if (t - k as f64 * dt).abs() > 1e-9 * (1.0 + t.abs()) {
            bail!("{}: row {} has t = {t}, expected {} for dt = {dt}", path.display(), k + 1, k as f64 * dt);
        }
        increments.push(field(1)?);
    }
    MeasurementRecord::new(scheme, dt, increments).with_context(|| format!("validating {}", path.display()))
}

pub fn write_states(path: &Path, grid: &[f64], states: &[DensityMatrix]) -> Result<()> {
    let dim = states.first().map_or(0, |s| s.dim());
    let mut header = vec!["t".to_string()];
    for i in 0..dim {
        for j in 0..dim {
            header.push(format!("re_{i}{j}"));
            header.push(format!("im_{i}{j}"));
        }
    }
    let flat: Vec<Vec<f64>> =
        states.iter().map(|s| s.matrix().as_slice().iter().flat_map(|z| [z.re, z.im]).collect()).collect();
    write_table(path, &header, grid.iter().zip(&flat).map(|(&t, v)| (t, v.as_slice())))
}

pub fn write_moments(path: &Path, names: &[String], ft: &FilterTrajectory) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend(names.iter().cloned());
    let grid = ft.grid();
    let rows: Vec<Vec<f64>> = (0..grid.len()).map(|k| ft.moments.iter().map(|m| m[k]).collect()).collect();
    write_table(path, &header, grid.iter().zip(&rows).map(|(&t, v)| (t, v.as_slice())))
}

pub fn write_innovations(path: &Path, ft: &FilterTrajectory) -> Result<()> {
    let header = vec!["t".to_string(), "increment".to_string()];
    let grid = ft.grid();
    write_table(path, &header, grid.iter().zip(&ft.innovations).map(|(&t, d)| (t, std::slice::from_ref(d))))
}

/// Record files `traj_NNNNN_records.csv` in `dir`, ordered by index.
pub fn list_records(dir: &Path) -> Result<Vec<(usize, PathBuf)>> {
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        if let Some(index) = name.strip_prefix("traj_").and_then(|n| n.strip_suffix("_records.csv")) {
            if let Ok(i) = index.parse::<usize>() {
                found.push((i, path));
            }
        }
    }
    found.sort();
    Ok(found)
}

pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}
