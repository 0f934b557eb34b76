//! CSV time series with 17 significant digits, so every value survives the
//! round trip through decimal.

use std::fmt::Write as _;
use std::path::Path;

use crate::diagnostics::MonitorReport;
use crate::error::{HpeError, Result};
use crate::integrator::EnergyLedger;

/// Column names of an energy-ledger series.
pub const LEDGER_COLUMNS: [&str; 13] = [
    "t",
    "norm_v_L2",
    "norm_v_L2_sq",
    "norm_grad_v_L2_sq",
    "f_dot_v",
    "int_norm_grad_v_L2_sq",
    "int_f_dot_v",
    "norm_dz_v_L2",
    "norm_grad_H_vbar_L2",
    "norm_vtilde_L4",
    "norm_vbar_H1",
    "norm_f_L2",
    "norm_grad_H_pi_L2_sq",
];

pub const MONITOR_COLUMNS: [&str; 5] = ["t", "lhs", "rhs", "margin", "pass"];

/// Render a header and rows of numbers.
pub fn format_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        for (i, x) in r.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{x:.16e}").expect("writing to a string");
        }
        out.push('\n');
    }
    out
}

pub fn ledger_rows(ledger: &EnergyLedger) -> Vec<Vec<f64>> {
    ledger
        .rows
        .iter()
        .map(|r| {
            vec![
                r.t,
                r.e.sqrt(),
                r.e,
                r.d,
                r.w,
                r.cum_d,
                r.cum_w,
                r.norm_dz_v,
                r.norm_grad_h_vbar,
                r.norm_vtilde_l4,
                r.norm_vbar_h1,
                r.norm_f,
                r.norm_grad_h_p_sq,
            ]
        })
        .collect()
}

pub fn emit_series(ledger: &EnergyLedger, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_csv(&LEDGER_COLUMNS, &ledger_rows(ledger)))?;
    Ok(())
}

/// One row per sample of a checked inequality; `pass` is 1 or 0.
pub fn emit_monitor(report: &MonitorReport, path: impl AsRef<Path>) -> Result<()> {
    let rows: Vec<Vec<f64>> = report
        .rows
        .iter()
        .map(|r| vec![r.t, r.lhs, r.rhs, r.margin, if r.pass { 1.0 } else { 0.0 }])
        .collect();
    std::fs::write(path, format_csv(&MONITOR_COLUMNS, &rows))?;
    Ok(())
}

/// Parse a series written by this module.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header: Vec<String> = match lines.next() {
        Some(h) => h.split(',').map(str::to_string).collect(),
        None => return Err(HpeError::Parse("empty series file".into())),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| HpeError::Parse(format!("line {}: `{s}`: {e}", i + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(HpeError::Parse(format!(
                "line {}: {} values for {} columns",
                i + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn read_series(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    parse_csv(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_ledger_gives_header_only() {
        let s = format_csv(&LEDGER_COLUMNS, &ledger_rows(&EnergyLedger::default()));
        assert_eq!(s.lines().count(), 1);
        assert!(s.starts_with("t,norm_v_L2,norm_v_L2_sq,norm_grad_v_L2_sq,f_dot_v,"));
    }

    #[test]
    fn decimal_round_trip_is_exact() {
        let rows = vec![
            vec![0.1, 1.0 / 3.0, f64::MIN_POSITIVE],
            vec![-2.5e-300, 6.02214076e23, f64::NAN],
            vec![1e-17, std::f64::consts::PI, -0.0],
        ];
        let text = format_csv(&["a", "b", "c"], &rows);
        assert_eq!(text.lines().count(), 4);
        let (h, back) = parse_csv(&text).unwrap();
        assert_eq!(h, ["a", "b", "c"]);
        for (r, s) in rows.iter().zip(&back) {
            for (x, y) in r.iter().zip(s) {
                assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
            }
        }
    }
}
