//! Box-plot statistics per `(value, filter)` cell.

use emorf_core::FilterKind;
use serde::Serialize;

use crate::harness::RunResult;

/// Five-number summary with Tukey whiskers.
///
/// Quartiles use linear interpolation between order statistics (the
/// "type 7" rule of R and NumPy's default). Whiskers are the most extreme
/// observations within 1.5 IQR of the quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
}

pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxStats {
    /// `None` for an empty sample. Non-finite values must be filtered first.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&v, 0.25);
        let q3 = quantile_sorted(&v, 0.75);
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        Some(Self {
            min: v[0],
            q1,
            median: quantile_sorted(&v, 0.5),
            q3,
            max: v[v.len() - 1],
            whisker_low: *v.iter().find(|x| **x >= lo_fence).unwrap(),
            whisker_high: *v.iter().rev().find(|x| **x <= hi_fence).unwrap(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub value: f64,
    #[serde(serialize_with = "crate::serialize_filter")]
    pub filter: FilterKind,
    pub runs_succeeded: usize,
    pub runs_failed: usize,
    /// `None` when every run of the cell failed.
    pub rmse: Option<BoxStats>,
    pub wall_time_per_step: Option<BoxStats>,
    pub em_iterations_per_step: Option<BoxStats>,
    pub empty: bool,
}

/// Groups rows by `(value, filter)` in first-appearance order.
pub fn summarize(rows: &[RunResult]) -> Vec<CellSummary> {
    let mut keys: Vec<(f64, FilterKind)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|&(v, f)| v == r.value && f == r.filter) {
            keys.push((r.value, r.filter));
        }
    }
    keys.into_iter()
        .map(|(value, filter)| {
            let cell: Vec<&RunResult> = rows.iter().filter(|r| r.value == value && r.filter == filter).collect();
            let ok: Vec<&&RunResult> = cell.iter().filter(|r| r.succeeded()).collect();
            let collect = |f: fn(&RunResult) -> f64| BoxStats::from_values(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            CellSummary {
                value,
                filter,
                runs_succeeded: ok.len(),
                runs_failed: cell.len() - ok.len(),
                rmse: collect(|r| r.rmse),
                wall_time_per_step: collect(|r| r.wall_time_per_step()),
                em_iterations_per_step: collect(|r| r.em_iterations_total as f64 / r.horizon as f64),
                empty: ok.is_empty(),
            }
        })
        .collect()
}
