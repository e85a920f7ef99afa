//! Result files: per-run CSV, per-cell JSON summary and box-plot columns.

use std::io::Write;

use serde::Serialize;

use crate::harness::{RunResult, SweepResult, SweepVariable};
use crate::summary::{summarize, CellSummary};

/// Writes one row per run. Columns:
/// `variable,value,filter,run,seed,data_hash,status,rmse,em_iterations,nonconverged_steps[,wall_time_s],error`.
///
/// With `include_timing = false` the output is a deterministic function of
/// the sweep specification.
pub fn write_results_csv<W: Write>(
    out: W,
    variable: SweepVariable,
    rows: &[RunResult],
    include_timing: bool,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "variable",
        "value",
        "filter",
        "run",
        "seed",
        "data_hash",
        "status",
        "rmse",
        "em_iterations",
        "nonconverged_steps",
    ];
    if include_timing {
        header.push("wall_time_s");
    }
    header.push("error");
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            variable.name().to_string(),
            r.value.to_string(),
            r.filter.name().to_string(),
            r.run.to_string(),
            r.seed.to_string(),
            r.data_hash.clone(),
            if r.succeeded() { "ok" } else { "failed" }.to_string(),
            if r.succeeded() { r.rmse.to_string() } else { String::new() },
            r.em_iterations_total.to_string(),
            r.nonconverged_steps.to_string(),
        ];
        if include_timing {
            rec.push(r.wall_time.to_string());
        }
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SweepSummary<'a> {
    pub figure: &'a str,
    pub variable: SweepVariable,
    pub master_seed: u64,
    pub mc_runs: usize,
    pub expected_rows: usize,
    pub rows_succeeded: usize,
    pub rows_failed: usize,
    pub cells: Vec<CellSummary>,
}

pub fn sweep_summary<'a>(
    figure: &'a str,
    variable: SweepVariable,
    master_seed: u64,
    mc_runs: usize,
    result: &SweepResult,
) -> SweepSummary<'a> {
    SweepSummary {
        figure,
        variable,
        master_seed,
        mc_runs,
        expected_rows: result.expected_rows,
        rows_succeeded: result.succeeded_rows(),
        rows_failed: result.failed_rows(),
        cells: summarize(&result.rows),
    }
}

/// Tab-separated box-plot data: one column per `(value, filter)` cell,
/// one row per Monte Carlo run; failed runs are left empty.
pub fn write_boxplot_tsv<W: Write>(
    mut out: W,
    variable: SweepVariable,
    rows: &[RunResult],
    metric: fn(&RunResult) -> f64,
) -> std::io::Result<()> {
    let mut cells: Vec<(f64, emorf_core::FilterKind)> = Vec::new();
    for r in rows {
        if !cells.contains(&(r.value, r.filter)) {
            cells.push((r.value, r.filter));
        }
    }
    let runs = rows.iter().map(|r| r.run + 1).max().unwrap_or(0);
    let header: Vec<String> = cells
        .iter()
        .map(|(v, f)| format!("{f}@{}={v}", variable.name()))
        .collect();
    writeln!(out, "{}", header.join("\t"))?;
    for run in 0..runs {
        let line: Vec<String> = cells
            .iter()
            .map(|&(v, f)| {
                rows.iter()
                    .find(|r| r.value == v && r.filter == f && r.run == run && r.succeeded())
                    .map(|r| metric(r).to_string())
                    .unwrap_or_default()
            })
            .collect();
        writeln!(out, "{}", line.join("\t"))?;
    }
    Ok(())
}
