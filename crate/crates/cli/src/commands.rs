//! File-level operations behind the `impute` and `eval` subcommands.

use std::path::{Path, PathBuf};

use macomss::evaluation::{nmse, recovery_losses};
use macomss::{macomss, LayoutMap, Masked, Matrix, Options};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{read_csv_matrix, write_csv_matrix, CsvMatrix};

/// Location of the structured block in an input file.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockSpec {
    /// The file is already in block layout: the first `m1` rows and `m2`
    /// columns are observable.
    Dims { m1: usize, m2: usize },
    /// Rows (1-based data-row numbers) and columns (header names, or 1-based
    /// numbers without a header) of the structured block.
    Named { rows: Vec<String>, cols: Vec<String> },
}

/// Sidecar written next to an imputed file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImputeReport {
    pub rows: usize,
    pub cols: usize,
    pub m1: usize,
    pub m2: usize,
    pub observed_cells: usize,
    pub r_hat: usize,
    pub r0: usize,
    pub criterion_side: &'static str,
    pub theta0_hat: f64,
    pub tau_tilde: f64,
    pub stack_weights: (f64, f64),
    pub stack_weight_mode: &'static str,
    pub hsvt_thresholds: Option<(f64, f64)>,
}

fn resolve_index(token: &str, names: Option<&[String]>, len: usize, axis: &str) -> CliResult<usize> {
    if let Some(names) = names {
        if let Some(k) = names.iter().position(|n| n == token) {
            return Ok(k);
        }
    }
    match token.parse::<usize>() {
        Ok(k) if (1..=len).contains(&k) => Ok(k - 1),
        _ => Err(CliError::Usage(format!("unknown {axis} {token:?} (expected a name or 1..={len})"))),
    }
}

fn layout_for(csv: &CsvMatrix, block: &BlockSpec) -> CliResult<(LayoutMap, macomss::BlockPartition)> {
    let (p1, p2) = csv.values.shape();
    match block {
        BlockSpec::Dims { m1, m2 } => {
            let part = macomss::BlockPartition::new(p1, p2, *m1, *m2).map_err(|e| CliError::Usage(e.to_string()))?;
            Ok((LayoutMap::identity(p1, p2), part))
        }
        BlockSpec::Named { rows, cols } => {
            let r: Vec<usize> = rows
                .iter()
                .map(|t| resolve_index(t, None, p1, "row"))
                .collect::<CliResult<_>>()?;
            let c: Vec<usize> = cols
                .iter()
                .map(|t| resolve_index(t, csv.header.as_deref(), p2, "column"))
                .collect::<CliResult<_>>()?;
            LayoutMap::from_missing(p1, p2, &r, &c).map_err(|e| CliError::Usage(e.to_string()))
        }
    }
}

/// Completes a parsed matrix. The result is in the file's original order.
pub fn impute_matrix(csv: &CsvMatrix, block: &BlockSpec, opts: &Options) -> CliResult<(Matrix<f64>, ImputeReport)> {
    let (layout, part) = layout_for(csv, block)?;
    let values = layout.to_layout(&csv.values);
    let mask = layout.to_layout(&csv.observed);
    let y = Masked::new(values, mask, part)?;
    let res = macomss(&y, opts)?;
    let d = &res.diagnostics;
    let report = ImputeReport {
        rows: part.p1(),
        cols: part.p2(),
        m1: part.m1(),
        m2: part.m2(),
        observed_cells: y.observed_count(),
        r_hat: res.r_hat,
        r0: res.r0_used,
        criterion_side: res.criterion_side.as_str(),
        theta0_hat: d.theta0_hat,
        tau_tilde: d.tau_tilde,
        stack_weights: (d.w1, d.w2),
        stack_weight_mode: d.stack_weight_mode.as_str(),
        hsvt_thresholds: d.hsvt_thresholds,
    };
    Ok((layout.to_original(&res.a_hat), report))
}

/// Sidecar path: `<output>.report.json`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".report.json");
    PathBuf::from(name)
}

pub fn impute_file(input: &Path, block: &BlockSpec, opts: &Options, output: &Path) -> CliResult<ImputeReport> {
    let csv = read_csv_matrix(input)?;
    let (completed, report) = impute_matrix(&csv, block, opts)?;
    write_csv_matrix(output, &completed, csv.header.as_deref())?;
    let side = sidecar_path(output);
    let body = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    std::fs::write(&side, body).map_err(|e| CliError::io(&side, e))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub frob_loss: f64,
    pub spec_loss: f64,
    /// Over cells where the mask is 0; absent when every cell is observed.
    pub nmse_missing: Option<f64>,
    pub missing_cells: usize,
}

fn require_complete(m: &CsvMatrix, what: &str) -> CliResult<()> {
    if m.observed.iter().all(|&b| b) {
        Ok(())
    } else {
        Err(CliError::Data(format!("{what} contains NA cells")))
    }
}

/// Compares an estimate with the truth. `mask` holds 1 for observed and 0
/// for missing cells; NMSE is taken over the missing ones.
pub fn eval_matrices(estimate: &CsvMatrix, truth: &CsvMatrix, mask: &CsvMatrix) -> CliResult<EvalReport> {
    require_complete(estimate, "estimate")?;
    require_complete(truth, "truth")?;
    require_complete(mask, "mask")?;
    let shape = truth.values.shape();
    for (m, what) in [(estimate, "estimate"), (mask, "mask")] {
        if m.values.shape() != shape {
            return Err(CliError::Data(format!(
                "{what} is {:?} but truth is {:?}",
                m.values.shape(),
                shape
            )));
        }
    }
    let mut target = Matrix::filled(shape.0, shape.1, false);
    for (i, j, x) in mask.values.indexed() {
        match x {
            v if v == 0.0 => target[(i, j)] = true,
            v if v == 1.0 => {}
            v => {
                return Err(CliError::Data(format!(
                    "mask cell at row {}, column {} is {v}, expected 0 or 1",
                    i + 1,
                    j + 1
                )))
            }
        }
    }
    let (frob, spec) = recovery_losses(&estimate.values, &truth.values)?;
    let missing = target.iter().filter(|&&b| b).count();
    let nmse_missing = match nmse(&estimate.values, &truth.values, &target) {
        Ok(v) => Some(v),
        Err(macomss::Error::ZeroTruthNorm) if missing == 0 => None,
        Err(e) => return Err(e.into()),
    };
    Ok(EvalReport {
        frob_loss: frob,
        spec_loss: spec,
        nmse_missing,
        missing_cells: missing,
    })
}

pub fn eval_files(estimate: &Path, truth: &Path, mask: &Path) -> CliResult<EvalReport> {
    eval_matrices(&read_csv_matrix(estimate)?, &read_csv_matrix(truth)?, &read_csv_matrix(mask)?)
}
