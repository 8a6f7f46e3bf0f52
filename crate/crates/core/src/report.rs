//! Deterministic JSON and CSV emission.
//!
//! JSON documents wrap a result payload together with the schema version and
//! the full derived-parameter block. CSV floats are printed with 17
//! significant digits, which round-trips every f64 bit-exactly.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ode::RadialProfile;
use crate::params::{DerivedParams, ProblemParams};

pub const SCHEMA_VERSION: u32 = 1;

/// Envelope for every JSON artifact the tools emit.
#[derive(Debug, Clone, Serialize)]
pub struct Document<T: Serialize> {
    pub schema_version: u32,
    pub command: String,
    pub params: ProblemParams,
    pub derived: DerivedParams,
    pub result: T,
}

impl<T: Serialize> Document<T> {
    pub fn new(command: &str, params: ProblemParams, derived: DerivedParams, result: T) -> Self {
        Self { schema_version: SCHEMA_VERSION, command: command.to_string(), params, derived, result }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// 17 significant digits: exact round-trip for every finite f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_profile_csv<W: Write>(profile: &RadialProfile, out: &mut W, stride: usize) -> Result<()> {
    let stride = stride.max(1);
    writeln!(out, "r,value,deriv")?;
    let n = profile.len();
    let mut i = 0;
    while i < n {
        writeln!(
            out,
            "{},{},{}",
            fmt_f64(profile.grid[i]),
            fmt_f64(profile.values[i]),
            fmt_f64(profile.derivs[i])
        )?;
        // Always keep the last sample so the grid endpoints survive thinning.
        if i + stride >= n && i != n - 1 {
            i = n - 1;
        } else {
            i += stride;
        }
    }
    Ok(())
}

/// Reads back the three columns of a profile CSV.
pub fn read_profile_csv<R: BufRead>(input: R) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut grid = Vec::new();
    let mut values = Vec::new();
    let mut derivs = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if k == 0 {
            if line.trim() != "r,value,deriv" {
                return Err(Error::InvalidParameter(format!("unexpected CSV header: {line}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let mut next = || -> Result<f64> {
            cols.next()
                .ok_or_else(|| Error::InvalidParameter(format!("short CSV row {k}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidParameter(format!("row {k}: {e}")))
        };
        grid.push(next()?);
        values.push(next()?);
        derivs.push(next()?);
    }
    Ok((grid, values, derivs))
}

/// Writes an eigenfunction as `r,value` rows.
pub fn write_eigenfunction_csv<W: Write>(grid: &[f64], values: &[f64], out: &mut W) -> Result<()> {
    writeln!(out, "r,value")?;
    for (r, v) in grid.iter().zip(values) {
        writeln!(out, "{},{}", fmt_f64(*r), fmt_f64(*v))?;
    }
    Ok(())
}
