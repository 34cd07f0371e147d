//! Plain-text data formats: scheme dumps (header plus one line of times per
//! grid), increment dumps, and the coordinate-list covariance dump.  All
//! numbers are written with the shortest round-trip representation, so a
//! dump/load cycle is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::CliError;
use nsync_core::gaussian::{CovarianceOperator, IncrementVector};
use nsync_core::sampling::SamplingScheme;

fn join_numbers(values: impl IntoIterator<Item = f64>) -> String {
    let mut out = String::new();
    for (k, v) in values.into_iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out
}

/// Scheme dump: `n h_n` header, then grid1 and grid2 times.
pub fn scheme_to_string(scheme: &SamplingScheme) -> String {
    format!(
        "{} {}\n{}\n{}\n",
        scheme.n(),
        scheme.h_n(),
        join_numbers(scheme.grid(1).iter().copied()),
        join_numbers(scheme.grid(2).iter().copied()),
    )
}

fn parse_numbers(line: &str, lineno: usize) -> Result<Vec<f64>, CliError> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| CliError::data(format!("line {lineno}: cannot parse number {tok:?}")))
        })
        .collect()
}

pub fn scheme_from_str(text: &str) -> Result<SamplingScheme, CliError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::data("line 1: missing scheme header"))?;
    let mut parts = header.split_whitespace();
    let n: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| CliError::data("line 1: header must be \"n h_n\""))?;
    let h_n: f64 = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| CliError::data("line 1: header must be \"n h_n\""))?;
    let grid1 = parse_numbers(
        lines
            .next()
            .ok_or_else(|| CliError::data("line 2: missing grid1"))?,
        2,
    )?;
    let grid2 = parse_numbers(
        lines
            .next()
            .ok_or_else(|| CliError::data("line 3: missing grid2"))?,
        3,
    )?;
    SamplingScheme::new(grid1, grid2, n, h_n)
        .map_err(|e| CliError::data(format!("scheme validation: {e}")))
}

pub fn write_scheme(path: &Path, scheme: &SamplingScheme) -> Result<(), CliError> {
    std::fs::write(path, scheme_to_string(scheme))?;
    Ok(())
}

pub fn read_scheme(path: &Path) -> Result<SamplingScheme, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read scheme {}: {e}", path.display())))?;
    scheme_from_str(&text)
}

/// Increment dump: `M1 M2` header, then the two stacked coordinate blocks.
pub fn increments_to_string(dx: &IncrementVector) -> String {
    format!(
        "{} {}\n{}\n{}\n",
        dx.m1,
        dx.m2,
        join_numbers(dx.coordinate(1).iter().copied()),
        join_numbers(dx.coordinate(2).iter().copied()),
    )
}

pub fn increments_from_str(text: &str) -> Result<IncrementVector, CliError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::data("line 1: missing increments header"))?;
    let mut parts = header.split_whitespace();
    let m1: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| CliError::data("line 1: header must be \"M1 M2\""))?;
    let m2: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| CliError::data("line 1: header must be \"M1 M2\""))?;
    let d1 = parse_numbers(
        lines
            .next()
            .ok_or_else(|| CliError::data("line 2: missing coordinate-1 increments"))?,
        2,
    )?;
    let d2 = parse_numbers(
        lines
            .next()
            .ok_or_else(|| CliError::data("line 3: missing coordinate-2 increments"))?,
        3,
    )?;
    if d1.len() != m1 {
        return Err(CliError::data(format!(
            "line 2: expected {m1} increments, found {}",
            d1.len()
        )));
    }
    if d2.len() != m2 {
        return Err(CliError::data(format!(
            "line 3: expected {m2} increments, found {}",
            d2.len()
        )));
    }
    let mut values = d1;
    values.extend_from_slice(&d2);
    IncrementVector::new(values, m1, m2).map_err(|e| CliError::data(e.to_string()))
}

pub fn write_increments(path: &Path, dx: &IncrementVector) -> Result<(), CliError> {
    std::fs::write(path, increments_to_string(dx))?;
    Ok(())
}

pub fn read_increments(path: &Path) -> Result<IncrementVector, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read increments {}: {e}", path.display())))?;
    increments_from_str(&text)
}

/// Covariance dump for debugging: `M1 M2 sigma...` header, then one
/// `row col value` line per structural nonzero (diagonal first).
pub fn covariance_to_string(op: &CovarianceOperator, sigma: &[f64]) -> String {
    let mut out = format!(
        "{} {} {}\n",
        op.m1(),
        op.m2(),
        join_numbers(sigma.iter().copied())
    );
    let (diag, cross) = op.entries();
    for (i, d) in diag.iter().enumerate() {
        let _ = writeln!(out, "{i} {i} {d}");
    }
    for (i, j, v) in cross {
        let _ = writeln!(out, "{i} {j} {v}");
    }
    out
}
