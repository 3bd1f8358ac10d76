use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::archive::Archive;
use super::engine::LogRecord;
use crate::error::{Error, Result};
use crate::phenotype::Genotype;

pub fn write_runlog(path: &Path, log: &[LogRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for rec in log {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_runlog(path: &Path) -> Result<Vec<LogRecord>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::format(format!("{}:{}", path.display(), i + 1), e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

/// Row of `archive.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveRow {
    pub accuracy: f64,
    pub madds: u64,
    pub genotype: Genotype,
}

pub fn write_archive_csv(path: &Path, archive: &Archive) -> Result<()> {
    let rows: Vec<ArchiveRow> = archive
        .entries()
        .iter()
        .map(|e| ArchiveRow {
            accuracy: e.point.accuracy,
            madds: e.point.madds,
            genotype: e.genotype.clone(),
        })
        .collect();
    write_csv(path, &rows)
}

pub fn read_archive_csv(path: &Path) -> Result<Vec<ArchiveRow>> {
    read_csv(path)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HvRow {
    pub eval_index: usize,
    pub hypervolume: f64,
}

pub fn write_hv_csv(path: &Path, trace: &[(usize, f64)]) -> Result<()> {
    let rows: Vec<HvRow> = trace
        .iter()
        .map(|&(eval_index, hypervolume)| HvRow { eval_index, hypervolume })
        .collect();
    write_csv(path, &rows)
}

pub fn read_hv_csv(path: &Path) -> Result<Vec<HvRow>> {
    read_csv(path)
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<T>, _>>()?;
    Ok(rows)
}
