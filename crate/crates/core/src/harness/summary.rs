//! Learning-curve aggregation across seeds.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub round: usize,
    pub labeled_count: usize,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub round: usize,
    pub labeled_count: usize,
    pub mean_accuracy: f64,
    /// Sample standard deviation over `√n`; zero for a single seed.
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSummary {
    pub num_seeds: usize,
    pub rows: Vec<SummaryRow>,
}

/// Per-round mean and standard error of `curves` (one curve per seed).
///
/// All curves must have the same rounds with the same labeled counts.
pub fn summarize(curves: &[Vec<CurvePoint>]) -> Result<CurveSummary> {
    let first = curves
        .first()
        .ok_or_else(|| Error::ShapeMismatch("no curves to summarize".into()))?;
    for (i, curve) in curves.iter().enumerate() {
        if curve.len() != first.len() {
            return Err(Error::ShapeMismatch(format!(
                "curve {i} has {} rounds, curve 0 has {}",
                curve.len(),
                first.len()
            )));
        }
        for (a, b) in curve.iter().zip(first) {
            if a.round != b.round || a.labeled_count != b.labeled_count {
                return Err(Error::ShapeMismatch(format!(
                    "curve {i} has (round {}, {} labeled) where curve 0 has (round {}, {} labeled)",
                    a.round, a.labeled_count, b.round, b.labeled_count
                )));
            }
        }
    }

    let n = curves.len() as f64;
    let rows = first
        .iter()
        .enumerate()
        .map(|(r, point)| {
            let values = curves.iter().map(|c| c[r].test_accuracy);
            let mean = values.clone().sum::<f64>() / n;
            let standard_error = if curves.len() > 1 {
                let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            SummaryRow {
                round: point.round,
                labeled_count: point.labeled_count,
                mean_accuracy: mean,
                standard_error,
            }
        })
        .collect();
    Ok(CurveSummary {
        num_seeds: curves.len(),
        rows,
    })
}

impl CurveSummary {
    /// `round,labeled_count,mean_acc,stderr` with LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,labeled_count,mean_acc,stderr\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.round, row.labeled_count, row.mean_accuracy, row.standard_error
            ));
        }
        out
    }

    pub fn last(&self) -> Option<&SummaryRow> {
        self.rows.last()
    }
}
