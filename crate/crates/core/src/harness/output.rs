//! Result files.
//!
//! * `curve_seed<seed>.csv`: `round,labeled_count,test_accuracy,epochs_run`
//! * `selections_seed<seed>.csv`: `round,sample_id,patient_id`
//! * `summary.csv`: `round,labeled_count,mean_acc,stderr` over successful seeds
//! * `failures.csv`: `seed,error` for seeds that aborted
//!
//! Numbers use shortest round-trip formatting; lines end in LF.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{ExperimentResult, RoundRecord};
use super::summary::CurvePoint;
use crate::error::{Error, Result};
use crate::pool::Dataset;

pub fn curve_csv(records: &[RoundRecord]) -> String {
    let mut out = String::from("round,labeled_count,test_accuracy,epochs_run\n");
    for r in records {
        writeln!(out, "{},{},{},{}", r.round, r.labeled_count, r.test_accuracy, r.epochs_run).unwrap();
    }
    out
}

pub fn selections_csv(records: &[RoundRecord], train: &Dataset) -> String {
    let mut out = String::from("round,sample_id,patient_id\n");
    for r in records {
        for &id in &r.selected {
            writeln!(out, "{},{},{}", r.round, id, train.sample(id).patient_id).unwrap();
        }
    }
    out
}

fn failures_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("seed,error\n");
    for (seed, error) in result.failures() {
        // keep one record per line and no stray field separators
        let clean: String = error
            .chars()
            .map(|c| if c == ',' || c == '\n' || c == '\r' { ';' } else { c })
            .collect();
        writeln!(out, "{seed},{clean}").unwrap();
    }
    out
}

/// Writes all result files into `dir` (created if missing) and returns the
/// paths written. `summary.csv` is skipped when no seed succeeded.
pub fn write_outputs(dir: &Path, result: &ExperimentResult, train: &Dataset) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    for (seed, records) in result.successful() {
        put(format!("curve_seed{seed}.csv"), curve_csv(records))?;
        put(format!("selections_seed{seed}.csv"), selections_csv(records, train))?;
    }
    if result.successful().next().is_some() {
        put("summary.csv".into(), result.summary()?.to_csv())?;
    }
    put("failures.csv".into(), failures_csv(result))?;
    Ok(written)
}

/// Reads every `curve_seed<seed>.csv` in `dir`, ordered by seed.
pub fn read_curves(dir: &Path) -> Result<Vec<(u64, Vec<CurvePoint>)>> {
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let seed = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("curve_seed"))
            .and_then(|n| n.strip_suffix(".csv"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(seed) = seed {
            found.push((seed, path));
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no curve_seed<seed>.csv files in {}",
            dir.display()
        )));
    }
    found
        .into_iter()
        .map(|(seed, path)| Ok((seed, read_curve(&path)?)))
        .collect()
}

fn read_curve(path: &Path) -> Result<Vec<CurvePoint>> {
    let err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| err(0, e.to_string()))?;
    let header = rdr.headers().map_err(|e| err(1, e.to_string()))?;
    if header != vec!["round", "labeled_count", "test_accuracy", "epochs_run"] {
        return Err(err(1, "unexpected curve header".into()));
    }
    let mut points = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).ok_or_else(|| err(line, "missing field".into()));
        points.push(CurvePoint {
            round: field(0)?.parse().map_err(|_| err(line, "bad round".into()))?,
            labeled_count: field(1)?.parse().map_err(|_| err(line, "bad labeled_count".into()))?,
            test_accuracy: field(2)?.parse().map_err(|_| err(line, "bad test_accuracy".into()))?,
        });
    }
    Ok(points)
}
