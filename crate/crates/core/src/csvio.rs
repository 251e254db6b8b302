//! CSV formats: phase schedules (`m,t,re,im`), complex matrices
//! (`row,col,re,im`) and sweep summaries.

use std::io::Write;

use crate::error::{Error, Result};
use crate::harness::SweepPoint;
use crate::linalg::{CMat, C64};

pub const PHASE_HEADER: [&str; 4] = ["m", "t", "re", "im"];
pub const MATRIX_HEADER: [&str; 4] = ["row", "col", "re", "im"];
pub const SWEEP_HEADER: [&str; 8] = [
    "axis",
    "axis_value",
    "method",
    "trials",
    "nmse_median",
    "nmse_mean",
    "nmse_se",
    "nmse_db_median",
];

/// Tolerance on `|γ| = 1` when reading a schedule.
pub const UNIT_MODULUS_TOL: f64 = 1e-6;

fn csv_err(what: &'static str, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        what,
        message: e.to_string(),
    }
}

fn write_entries<W: Write>(out: W, header: [&str; 4], m: &CMat, what: &'static str) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(|e| csv_err(what, e))?;
    // column-major, matching the in-memory layout
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let z = m[(r, c)];
            w.write_record([r.to_string(), c.to_string(), z.re.to_string(), z.im.to_string()])
                .map_err(|e| csv_err(what, e))?;
        }
    }
    w.flush().map_err(|e| csv_err(what, e))
}

/// Writes an `M × τ` schedule, one row per entry.
pub fn write_phase_csv<W: Write>(out: W, gamma: &CMat) -> Result<()> {
    write_entries(out, PHASE_HEADER, gamma, "phase schedule")
}

/// Writes any complex matrix, one row per entry.
pub fn write_matrix_csv<W: Write>(out: W, m: &CMat) -> Result<()> {
    write_entries(out, MATRIX_HEADER, m, "matrix")
}

fn parse_entries(text: &str, header: [&str; 4], what: &'static str) -> Result<CMat> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let found = rdr.headers().map_err(|e| csv_err(what, e))?.clone();
    if found.iter().ne(header) {
        return Err(csv_err(what, format!("expected header {}, found {}", header.join(","), found.iter().collect::<Vec<_>>().join(","))));
    }
    let mut entries = Vec::new();
    for (i, rec) in rdr.deserialize::<(usize, usize, f64, f64)>().enumerate() {
        let (r, c, re, im) = rec.map_err(|e| csv_err(what, e))?;
        if !(re.is_finite() && im.is_finite()) {
            return Err(csv_err(what, format!("line {}: non-finite value", i + 2)));
        }
        entries.push((r, c, C64::new(re, im)));
    }
    if entries.is_empty() {
        return Err(csv_err(what, "no entries"));
    }
    let rows = entries.iter().map(|e| e.0).max().unwrap_or(0) + 1;
    let cols = entries.iter().map(|e| e.1).max().unwrap_or(0) + 1;
    // every entry exactly once bounds the allocation by the input size
    if rows.checked_mul(cols) != Some(entries.len()) {
        return Err(csv_err(
            what,
            format!("{} entries do not fill a {rows}×{cols} matrix", entries.len()),
        ));
    }
    let mut seen = vec![false; entries.len()];
    let mut m = CMat::zeros(rows, cols);
    for (r, c, z) in entries {
        let k = c * rows + r;
        if seen[k] {
            return Err(csv_err(what, format!("duplicate entry ({r}, {c})")));
        }
        seen[k] = true;
        m[(r, c)] = z;
    }
    Ok(m)
}

/// Reads a schedule written by [`write_phase_csv`].
///
/// Rows may come in any order but every `(m, t)` must appear exactly once
/// and every entry must have unit modulus.
pub fn parse_phase_csv(text: &str) -> Result<CMat> {
    let gamma = parse_entries(text, PHASE_HEADER, "phase schedule")?;
    if let Some(((m, t), z)) = gamma
        .iter()
        .enumerate()
        .map(|(k, z)| ((k % gamma.nrows(), k / gamma.nrows()), z))
        .find(|(_, z)| (z.norm() - 1.0).abs() > UNIT_MODULUS_TOL)
    {
        return Err(csv_err(
            "phase schedule",
            format!("entry ({m}, {t}) has modulus {}", z.norm()),
        ));
    }
    Ok(gamma)
}

/// Reads a matrix written by [`write_matrix_csv`].
pub fn parse_matrix_csv(text: &str) -> Result<CMat> {
    parse_entries(text, MATRIX_HEADER, "matrix")
}

/// Writes sweep rows under the fixed header; no points gives a header-only file.
pub fn write_sweep_csv<W: Write>(out: W, axis: &str, points: &[SweepPoint]) -> Result<()> {
    let what = "sweep";
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(|e| csv_err(what, e))?;
    for p in points {
        w.write_record([
            axis.to_string(),
            p.axis_value.to_string(),
            p.method.to_string(),
            p.trials.to_string(),
            p.nmse_median.to_string(),
            p.nmse_mean.to_string(),
            p.nmse_se.to_string(),
            p.nmse_db_median.to_string(),
        ])
        .map_err(|e| csv_err(what, e))?;
    }
    w.flush().map_err(|e| csv_err(what, e))
}
