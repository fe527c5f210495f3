//! Long-format CSV for experiment results.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::experiment::{Algorithm, CellResult, ExperimentResult};
use crate::{HarnessError, Result};

pub const COLUMNS: [&str; 12] =
    ["algorithm", "n", "eps", "m", "t_best", "s", "shape", "excess_var", "stderr", "reps", "seed", "trim_frac"];

/// One CSV row. Missing values (`t_best` of a non-private row, `shape` of a
/// shape-free family) are empty fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub algorithm: String,
    pub n: usize,
    pub eps: f64,
    pub m: usize,
    pub t_best: Option<f64>,
    pub s: Option<f64>,
    pub shape: Option<f64>,
    pub excess_var: f64,
    pub stderr: f64,
    pub reps: usize,
    pub seed: u64,
    pub trim_frac: f64,
}

pub fn rows(result: &ExperimentResult) -> Vec<CsvRow> {
    result
        .cells
        .iter()
        .map(|c| CsvRow {
            algorithm: c.algorithm.name().to_string(),
            n: result.n,
            eps: result.epsilon,
            m: c.m,
            t_best: c.t_best,
            s: c.s,
            shape: c.shape,
            excess_var: c.excess_var,
            stderr: c.stderr,
            reps: c.reps,
            seed: result.seed,
            trim_frac: c.m as f64 / result.n as f64,
        })
        .collect()
}

/// Writes the header and one row per cell. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_csv<W: Write>(result: &ExperimentResult, out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(COLUMNS)?;
    for row in rows(result) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    write_csv(result, file).map_err(|source| HarnessError::Csv { path: path.to_path_buf(), source })
}

pub fn read_rows<R: Read>(input: R) -> std::result::Result<Vec<CsvRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Inverse of [`emit_csv`]. Rows must agree on `n`, `eps`, `seed`; an empty
/// file yields an empty result with zeroed header fields.
pub fn parse_csv(path: &Path) -> Result<ExperimentResult> {
    let file = File::open(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    let rows = read_rows(file).map_err(|source| HarnessError::Csv { path: path.to_path_buf(), source })?;
    from_rows(&rows).map_err(|message| HarnessError::Parse { path: path.to_path_buf(), message })
}

pub fn from_rows(rows: &[CsvRow]) -> std::result::Result<ExperimentResult, String> {
    let Some(first) = rows.first() else {
        return Ok(ExperimentResult { n: 0, epsilon: 0.0, seed: 0, reps: 0, cells: Vec::new() });
    };
    let mut cells = Vec::with_capacity(rows.len());
    for r in rows {
        if r.n != first.n || r.eps.to_bits() != first.eps.to_bits() || r.seed != first.seed {
            return Err("rows disagree on n, eps or seed".into());
        }
        let algorithm: Algorithm = r.algorithm.parse()?;
        cells.push(CellResult {
            algorithm,
            m: r.m,
            t_best: r.t_best,
            s: r.s,
            shape: r.shape,
            excess_var: r.excess_var,
            stderr: r.stderr,
            reps: r.reps,
        });
    }
    let reps = cells.iter().map(|c| c.reps).max().unwrap_or(0);
    Ok(ExperimentResult { n: first.n, epsilon: first.eps, seed: first.seed, reps, cells })
}
