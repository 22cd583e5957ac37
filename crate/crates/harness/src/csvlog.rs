//! Iteration log CSV: one row per iteration, LF line endings, floats at 17
//! significant digits so re-parsing is bit-exact.

use std::path::Path;

use gksm_core::solver::SolverState;

use crate::error::{HarnessError, Result};

pub const CSV_HEADER: &str =
    "iter,wall_time_s,cost,data_term,step_norm,delta_k,gradmap_norm,subspace_dim,lam_min,lam_max,enrich";

fn fmt(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub fn render_csv(state: &SolverState) -> String {
    let mut out = String::with_capacity(128 * (state.records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &state.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.iter,
            fmt(r.wall_time_s),
            fmt(r.cost),
            fmt(r.data_term),
            fmt(r.step_norm),
            fmt(r.delta_k),
            fmt(r.gradmap_norm),
            r.subspace_dim,
            fmt(r.lam_min),
            fmt(r.lam_max),
            r.enrich.as_str(),
        ));
    }
    out
}

pub fn write_csv(path: &Path, state: &SolverState) -> Result<()> {
    std::fs::write(path, render_csv(state))
        .map_err(|e| HarnessError::io(path.display().to_string(), e))
}

/// Minimal reader for the `rates` and `plot` subcommands: returns
/// (iter, cost, delta_k) triples.
pub fn read_costs(path: &Path) -> Result<Vec<(usize, f64, f64)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::io(path.display().to_string(), e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Numeric("empty log".into()))?;
    if header != CSV_HEADER {
        return Err(HarnessError::Numeric(format!(
            "unexpected log header: {header}"
        )));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 11 {
            return Err(HarnessError::Numeric(format!(
                "log line {} has {} columns",
                lineno + 2,
                cols.len()
            )));
        }
        let iter: usize = cols[0]
            .parse()
            .map_err(|_| HarnessError::Numeric(format!("bad iter on line {}", lineno + 2)))?;
        let parse_f = |s: &str| -> Result<f64> {
            if s == "inf" {
                return Ok(f64::INFINITY);
            }
            s.parse()
                .map_err(|_| HarnessError::Numeric(format!("bad float '{s}' on line {}", lineno + 2)))
        };
        out.push((iter, parse_f(cols[2])?, parse_f(cols[5])?));
    }
    Ok(out)
}

/// Compares two rendered logs ignoring the wall-time column.
pub fn logs_equal_modulo_walltime(a: &str, b: &str) -> bool {
    let strip = |s: &str| -> Vec<String> {
        s.lines()
            .map(|line| {
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() == 11 {
                    let mut cols = cols;
                    cols[1] = "-";
                    cols.join(",")
                } else {
                    line.to_string()
                }
            })
            .collect()
    };
    strip(a) == strip(b)
}
