//! Field CSV format.
//!
//! The first line is `# ` followed by a JSON object with the grid, boundary
//! mode and any caller metadata. The second line is the column header
//! `x[,y,z],re[,im]`; one row per node follows in storage order. Floats are
//! written in shortest round-trip scientific notation.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Boundary, ComplexField, Field, Grid};
use crate::error::{invalid, Error, Result};
use crate::linalg::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub grid: Grid,
    pub boundary: Boundary,
    pub complex: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

const AXIS_NAMES: [&str; 3] = ["x", "y", "z"];

pub fn write_csv<T: Scalar, W: Write>(
    field: &Field<T>,
    time: Option<f64>,
    extra: serde_json::Map<String, serde_json::Value>,
    mut out: W,
) -> Result<()> {
    let meta = FieldMeta {
        grid: field.grid().clone(),
        boundary: field.boundary(),
        complex: T::IS_COMPLEX,
        time,
        extra,
    };
    writeln!(out, "# {}", serde_json::to_string(&meta)?)?;
    let d = field.grid().dim();
    let mut header: Vec<&str> = AXIS_NAMES[..d].to_vec();
    header.push("re");
    if T::IS_COMPLEX {
        header.push("im");
    }
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for (i, v) in field.values().iter().enumerate() {
        line.clear();
        let x = field.grid().coords(i);
        for xk in &x[..d] {
            line.push_str(&format!("{xk:e},"));
        }
        line.push_str(&format!("{:e}", v.re()));
        if T::IS_COMPLEX {
            line.push_str(&format!(",{:e}", v.im()));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Read a field written by [`write_csv`]. Real files come back with zero
/// imaginary parts.
pub fn read_csv<R: BufRead>(input: R) -> Result<(FieldMeta, ComplexField)> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| Error::InvalidInput("empty field file".into()))??;
    let json = first
        .strip_prefix("# ")
        .ok_or_else(|| Error::InvalidInput("field file must start with a '# {json}' metadata line".into()))?;
    let meta: FieldMeta = serde_json::from_str(json)?;
    let _header = lines.next().ok_or_else(|| Error::InvalidInput("missing column header".into()))??;
    let d = meta.grid.dim();
    let ncol = d + 1 + usize::from(meta.complex);
    let mut values = Vec::with_capacity(meta.grid.len());
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != ncol {
            return invalid(format!("row {row} has {} columns, expected {ncol}", cols.len()));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("row {row}: {e}")))
        };
        let re = parse(cols[d])?;
        let im = if meta.complex { parse(cols[d + 1])? } else { 0.0 };
        values.push(Complex64::new(re, im));
    }
    let field = Field::new(meta.grid.clone(), meta.boundary, values)?;
    Ok((meta, field))
}
